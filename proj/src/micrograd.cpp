#include "nibbler/micrograd.hpp"

#include <cmath>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

namespace {

double init_bound(Eigen::Index input_dim) { return 1.0 / std::sqrt(static_cast<double>(input_dim)); }

void fill_column(DenseNet& net, Eigen::Index col, Rng& rng) {
  const double bound = init_bound(net.input_dim());
  for (Eigen::Index r = 0; r < net.hidden_dim(); ++r) net.weights(r, col) = rng.uniform(-bound, bound);
}

void check_input(const DenseNet& net, const Eigen::VectorXd& x) {
  if (x.size() != net.input_dim()) throw std::invalid_argument("DenseNet: input dimension mismatch");
}

}  // namespace

std::pair<DenseNet, DenseMomentum> init_dense(Eigen::Index input_dim, Eigen::Index hidden_dim, Rng& rng) {
  if (input_dim < 1 || hidden_dim < 1) throw std::invalid_argument("init_dense: dimensions must be positive");
  DenseNet net{Eigen::MatrixXd(hidden_dim, input_dim), Eigen::VectorXd::Zero(hidden_dim)};
  for (Eigen::Index c = 0; c < input_dim; ++c) fill_column(net, c, rng);
  DenseMomentum momentum;
  momentum.weights = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
  momentum.bias = Eigen::VectorXd::Zero(hidden_dim);
  momentum.settled.assign(static_cast<std::size_t>(input_dim), 0);
  return {std::move(net), std::move(momentum)};
}

void reinit_input_column(DenseNet& net, DenseMomentum& momentum, Eigen::Index pos, Rng& rng) {
  if (pos < 0 || pos >= net.input_dim()) throw std::out_of_range("reinit_input_column: position out of range");
  fill_column(net, pos, rng);
  momentum.weights.col(pos).setZero();
  momentum.settled[static_cast<std::size_t>(pos)] = momentum.clock;
}

void reinit_dense(DenseNet& net, DenseMomentum& momentum, Rng& rng) {
  for (Eigen::Index c = 0; c < net.input_dim(); ++c) fill_column(net, c, rng);
  net.bias.setZero();
  momentum.weights.setZero();
  momentum.bias.setZero();
  momentum.settled.assign(static_cast<std::size_t>(net.input_dim()), momentum.clock);
}

void forward(const DenseNet& net, const Eigen::VectorXd& x, DenseActivations& out) {
  check_input(net, x);
  out.pre = net.bias;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] != 0.0) out.pre += x[j] * net.weights.col(j);
  }
  out.hidden = out.pre.cwiseMax(0.0);
}

DenseActivations forward(const DenseNet& net, const Eigen::VectorXd& x) {
  DenseActivations act;
  forward(net, x, act);
  return act;
}

Eigen::VectorXd pre_activation_gradient(const DenseActivations& act, const Eigen::VectorXd& upstream) {
  return (act.pre.array() > 0.0).select(upstream, 0.0);
}

DenseGradients backward(const DenseNet& net, const Eigen::VectorXd& x, const DenseActivations& act,
                        const Eigen::VectorXd& upstream) {
  check_input(net, x);
  if (upstream.size() != net.hidden_dim()) throw std::invalid_argument("DenseNet: upstream dimension mismatch");
  Eigen::VectorXd dpre = pre_activation_gradient(act, upstream);
  DenseGradients g;
  g.weights = dpre * x.transpose();
  g.bias = dpre;
  g.input = net.weights.transpose() * dpre;
  return g;
}

void settle_column(DenseNet& net, DenseMomentum& momentum, Eigen::Index j) {
  auto& stamp = momentum.settled[static_cast<std::size_t>(j)];
  if (stamp == momentum.clock) return;
  const double k = static_cast<double>(momentum.clock - stamp);
  const double nu = momentum.nu;
  const double decay = std::pow(nu, k);
  const double travel = nu == 0.0 ? 0.0 : nu * (1.0 - decay) / (1.0 - nu);
  auto v = momentum.weights.col(j);
  net.weights.col(j) += (kDescentSign * momentum.alpha * travel) * v;
  v *= decay;
  flush_small(v);
  stamp = momentum.clock;
}

void settle_inputs(DenseNet& net, DenseMomentum& momentum, const Eigen::VectorXd& x) {
  check_input(net, x);
  for (Eigen::Index j = 0; j < x.size(); ++j)
    if (x[j] != 0.0) settle_column(net, momentum, j);
}

void settle_all(DenseNet& net, DenseMomentum& momentum) {
  for (Eigen::Index j = 0; j < net.input_dim(); ++j) settle_column(net, momentum, j);
}

void co_opt_layer(DenseNet& net, DenseMomentum& momentum, double alpha, double nu, const Eigen::VectorXd& x,
                  const Eigen::VectorXd& dpre) {
  check_input(net, x);
  // Deferred decay assumes one (alpha, nu) pair; settle before switching.
  if (alpha != momentum.alpha || nu != momentum.nu) {
    settle_all(net, momentum);
    momentum.alpha = alpha;
    momentum.nu = nu;
  }
  const double keep = 1.0 - nu;
  const double step = kDescentSign * alpha;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] == 0.0) continue;
    settle_column(net, momentum, j);
    auto v = momentum.weights.col(j);
    v = nu * v + keep * (dpre * x[j]);
    flush_small(v);
    net.weights.col(j) += step * v;
    momentum.settled[static_cast<std::size_t>(j)] = momentum.clock + 1;
  }
  ++momentum.clock;
  co_opt(net.bias, alpha, dpre, momentum.bias, nu);
}

void save_dense(std::ostream& out, const DenseNet& net, const DenseMomentum& momentum) {
  SnapshotWriter w(out);
  w.tag("DenseNet");
  w.mat(net.weights);
  w.vec(net.bias);
  w.mat(momentum.weights);
  w.vec(momentum.bias);
  w.u64(momentum.clock);
  for (auto c : momentum.settled) w.u64(c);
  w.f64(momentum.alpha);
  w.f64(momentum.nu);
}

void load_dense(std::istream& in, DenseNet& net, DenseMomentum& momentum) {
  SnapshotReader r(in);
  r.expect_tag("DenseNet");
  net.weights = r.mat();
  net.bias = r.vec();
  momentum.weights = r.mat();
  momentum.bias = r.vec();
  if (net.bias.size() != net.weights.rows() || momentum.weights.rows() != net.weights.rows() ||
      momentum.weights.cols() != net.weights.cols() || momentum.bias.size() != net.bias.size())
    throw std::runtime_error("DenseNet snapshot: inconsistent shapes");
  momentum.clock = r.u64();
  momentum.settled.resize(static_cast<std::size_t>(net.weights.cols()));
  for (auto& c : momentum.settled) {
    c = r.u64();
    if (c > momentum.clock) throw std::runtime_error("DenseNet snapshot: column clock ahead of layer clock");
  }
  momentum.alpha = r.f64();
  momentum.nu = r.f64();
}

}  // namespace nibbler
