#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <stdexcept>
#include <tuple>

namespace oracle {

using nibbler::BoardConfig;
using nibbler::BoardState;
using nibbler::Phase;

Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& P, double tol, int max_iter) {
  const Eigen::Index n = P.rows();
  Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(n, 1.0 / static_cast<double>(n));
  // Lazy chain (I + P) / 2 has the same stationary law and is aperiodic.
  for (int it = 0; it < max_iter; ++it) {
    Eigen::RowVectorXd next = 0.5 * (pi + pi * P);
    next /= next.sum();
    const double diff = (next - pi).cwiseAbs().sum();
    pi = next;
    if (diff < tol) return pi.transpose();
  }
  throw std::runtime_error("stationary_distribution: no convergence");
}

namespace {

auto key(const BoardState& s) {
  return std::make_tuple(static_cast<int>(s.phase), s.row, s.ball_col, s.paddle_col, s.hot);
}

}  // namespace

std::size_t CatchChain::index_of(const BoardState& s) const {
  for (std::size_t i = 0; i < states.size(); ++i)
    if (key(states[i]) == key(s)) return i;
  throw std::out_of_range("CatchChain: unknown state");
}

CatchChain enumerate_catch(const BoardConfig& c) {
  CatchChain chain;
  const int R = c.num_rows, C = c.num_cols;
  for (int hot = 0; hot < 2; ++hot)
    for (int paddle = 0; paddle < C; ++paddle) {
      for (Phase ph : {Phase::Reset, Phase::Catch, Phase::Miss, Phase::PlusHold, Phase::MinusHold})
        chain.states.push_back(BoardState{ph, 0, 0, paddle, hot == 1});
      for (int row = 0; row < R; ++row)
        for (int col = 0; col < C; ++col) chain.states.push_back(BoardState{Phase::Falling, row, col, paddle, hot == 1});
    }
  std::map<decltype(key(BoardState{})), std::size_t> lookup;
  for (std::size_t i = 0; i < chain.states.size(); ++i) lookup[key(chain.states[i])] = i;
  auto idx = [&](const BoardState& s) { return static_cast<Eigen::Index>(lookup.at(key(s))); };

  const auto n = static_cast<Eigen::Index>(chain.states.size());
  chain.P = Eigen::MatrixXd::Zero(n, n);
  chain.reward = Eigen::VectorXd::Zero(n);

  // Paddle displacement law under a uniformly random intended action.
  double move_prob[3];
  for (int m = 0; m < 3; ++m) move_prob[m] = (1.0 - c.paddle_noise) / 3.0 + c.paddle_noise / 3.0;

  for (Eigen::Index i = 0; i < n; ++i) {
    const BoardState s = chain.states[static_cast<std::size_t>(i)];
    for (int m = 0; m < 3; ++m) {
      const int paddle = std::clamp(s.paddle_col + m - 1, 0, C - 1);
      const double pm = move_prob[m];
      auto add = [&](BoardState t, double p) { chain.P(i, idx(t)) += pm * p; };
      switch (s.phase) {
        case Phase::Reset: {
          add(BoardState{Phase::Reset, 0, 0, paddle, s.hot}, 1.0 - c.p_arrival);
          for (int col = 0; col < C; ++col) {
            const double p = c.p_arrival / C;
            if (s.hot) {
              add(BoardState{Phase::Falling, 0, col, paddle, true}, p);
            } else {
              add(BoardState{Phase::Falling, 0, col, paddle, true}, p * c.p_hot);
              add(BoardState{Phase::Falling, 0, col, paddle, false}, p * (1.0 - c.p_hot));
            }
          }
          break;
        }
        case Phase::Falling:
          if (s.row == R - 1) {
            add(BoardState{s.ball_col == s.paddle_col ? Phase::Catch : Phase::Miss, 0, 0, paddle, s.hot}, 1.0);
          } else {
            add(BoardState{Phase::Falling, s.row + 1, std::clamp(s.ball_col + c.wind, 0, C - 1), paddle, s.hot}, 1.0);
          }
          break;
        case Phase::Catch:
        case Phase::Miss: {
          const Phase hold = s.phase == Phase::Catch ? Phase::PlusHold : Phase::MinusHold;
          add(s.hot ? BoardState{hold, 0, 0, paddle, true} : BoardState{Phase::Reset, 0, 0, paddle, false}, 1.0);
          break;
        }
        case Phase::PlusHold:
        case Phase::MinusHold:
          add(BoardState{s.phase, 0, 0, paddle, s.hot}, 1.0 - c.p_reward);
          add(BoardState{Phase::Reset, 0, 0, paddle, false}, c.p_reward);
          break;
      }
    }
    if (s.phase == Phase::PlusHold) chain.reward[i] = c.p_reward;
    if (s.phase == Phase::MinusHold) chain.reward[i] = -c.p_reward;
  }
  return chain;
}

double catch_uniform_average_reward(const BoardConfig& config) {
  const CatchChain chain = enumerate_catch(config);
  return stationary_distribution(chain.P).dot(chain.reward);
}

std::vector<std::uint32_t> full_sort_topk(const std::vector<double>& u, std::size_t k) {
  std::vector<std::uint32_t> idx(u.size());
  std::iota(idx.begin(), idx.end(), 0u);
  std::stable_sort(idx.begin(), idx.end(), [&](std::uint32_t a, std::uint32_t b) { return u[a] > u[b]; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

Eigen::VectorXd projected_td_fixed_point(const Eigen::MatrixXd& P, const Eigen::MatrixXd& Phi,
                                         const Eigen::VectorXd& r, double gamma, const Eigen::VectorXd& d) {
  const Eigen::MatrixXd D = d.asDiagonal();
  const Eigen::MatrixXd A = Phi.transpose() * D * (Phi - gamma * P * Phi);
  const Eigen::VectorXd b = Phi.transpose() * D * r;
  return A.fullPivLu().solve(b);
}

Eigen::VectorXd least_squares(const Eigen::MatrixXd& X, const Eigen::VectorXd& y) {
  return X.completeOrthogonalDecomposition().solve(y);
}

double discounted_return(const std::vector<double>& cumulants, double gamma) {
  double g = 0.0;
  for (std::size_t k = cumulants.size(); k-- > 0;) g = cumulants[k] + gamma * g;
  return g;
}

double central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x, Eigen::Index i,
                          double eps) {
  const double x0 = x[i];
  x[i] = x0 + eps;
  const double up = f(x);
  x[i] = x0 - eps;
  const double down = f(x);
  return (up - down) / (2.0 * eps);
}

double relative_error(double a, double b, double floor) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

double batch_means_standard_error(const std::vector<double>& series, std::size_t batches) {
  const std::size_t len = series.size() / batches;
  if (len < 2) throw std::invalid_argument("batch_means_standard_error: series too short");
  std::vector<double> means(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    double s = 0.0;
    for (std::size_t t = b * len; t < (b + 1) * len; ++t) s += series[t];
    means[b] = s / static_cast<double>(len);
  }
  const double mean = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(batches);
  double var = 0.0;
  for (double m : means) var += (m - mean) * (m - mean);
  var /= static_cast<double>(batches - 1);
  return std::sqrt(var / static_cast<double>(batches));
}

}  // namespace oracle
