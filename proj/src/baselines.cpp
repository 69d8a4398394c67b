#include "nibbler/baselines.hpp"

#include <cmath>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

void BaselineConfig::validate() const {
  if (hidden_dim < 1) throw std::invalid_argument("baseline config: hidden_dim must be at least 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("baseline config: alpha must be positive");
  if (!(nu >= 0.0 && nu < 1.0)) throw std::invalid_argument("baseline config: nu must lie in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("baseline config: epsilon must lie in [0, 1]");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("baseline config: gamma must lie in [0, 1)");
}

std::size_t BaselineParams::parameter_count(BaselineVariant variant) const {
  std::size_t count = trunk.parameter_count() + static_cast<std::size_t>(q_head.size());
  if (variant == BaselineVariant::QV) count += static_cast<std::size_t>(v_head.size());
  return count;
}

bool BaselineParams::all_finite() const {
  return trunk.all_finite() && q_head.allFinite() && v_head.allFinite();
}

BaselineGradients baseline_gradients(const BaselineParams& params, BaselineVariant variant, const Eigen::VectorXd& x,
                                     int action, double reward, const Eigen::VectorXd& x_next, double gamma) {
  if (action < 0 || action >= params.q_head.rows()) throw std::out_of_range("baseline: action out of range");
  BaselineGradients g;
  const DenseActivations next = forward(params.trunk, x_next);
  if (variant == BaselineVariant::Q) {
    g.target = reward + gamma * (params.q_head * next.hidden).maxCoeff();
  } else {
    g.target = reward + gamma * params.v_head.dot(next.hidden);
  }

  g.inputs = x;
  forward(params.trunk, x, g.act);
  const Eigen::VectorXd& h = g.act.hidden;
  const double q_error = g.target - params.q_head.row(action).dot(h);

  g.grad_q = Eigen::MatrixXd::Zero(params.q_head.rows(), params.q_head.cols());
  g.grad_q.row(action) = -q_error * h.transpose();
  Eigen::VectorXd upstream = -q_error * params.q_head.row(action).transpose();
  g.loss = 0.5 * q_error * q_error;

  g.grad_v = Eigen::VectorXd::Zero(params.v_head.size());
  if (variant == BaselineVariant::QV) {
    const double v_error = g.target - params.v_head.dot(h);
    g.grad_v = -v_error * h;
    upstream -= v_error * params.v_head;
    g.loss += 0.5 * v_error * v_error;
  }
  g.dpre = pre_activation_gradient(g.act, upstream);
  return g;
}

double baseline_loss_fixed_target(const BaselineParams& params, BaselineVariant variant, const Eigen::VectorXd& x,
                                  int action, double target) {
  const DenseActivations act = forward(params.trunk, x);
  const double dq = target - params.q_head.row(action).dot(act.hidden);
  double loss = 0.5 * dq * dq;
  if (variant == BaselineVariant::QV) {
    const double dv = target - params.v_head.dot(act.hidden);
    loss += 0.5 * dv * dv;
  }
  return loss;
}

void apply_baseline_gradients(BaselineParams& params, const BaselineGradients& grads, double alpha, double nu) {
  co_opt(params.q_head, alpha, grads.grad_q, params.q_velocity, nu);
  co_opt(params.v_head, alpha, grads.grad_v, params.v_velocity, nu);
  co_opt_layer(params.trunk, params.trunk_momentum, alpha, nu, grads.inputs, grads.dpre);
}

BaselineAgent::BaselineAgent(const BaselineConfig& config, std::size_t num_features, std::uint64_t seed)
    : config_(config), num_features_(num_features), explore_rng_(derive_seed(seed, "exploration")) {
  config_.validate();
  if (num_features_ < 1) throw std::invalid_argument("BaselineAgent: need at least one input feature");
  Rng init(derive_seed(seed, "agent-init"));
  auto [trunk, momentum] =
      init_dense(static_cast<Eigen::Index>(num_features_), static_cast<Eigen::Index>(config_.hidden_dim), init);
  params_.trunk = std::move(trunk);
  params_.trunk_momentum = std::move(momentum);
  const auto d = static_cast<Eigen::Index>(config_.hidden_dim);
  params_.q_head = Eigen::MatrixXd::Zero(kNumActions, d);
  params_.q_velocity = Eigen::MatrixXd::Zero(kNumActions, d);
  params_.v_head = Eigen::VectorXd::Zero(d);
  params_.v_velocity = Eigen::VectorXd::Zero(d);
}

int BaselineAgent::step(double reward, const BitObservation& observation) {
  if (observation.size() != num_features_)
    throw std::invalid_argument("BaselineAgent: observation has " + std::to_string(observation.size()) +
                                " bits, expected " + std::to_string(num_features_));
  x_.resize(static_cast<Eigen::Index>(num_features_));
  for (std::size_t j = 0; j < num_features_; ++j) x_[static_cast<Eigen::Index>(j)] = observation[j] ? 1.0 : 0.0;

  settle_inputs(params_.trunk, params_.trunk_momentum, x_);
  forward(params_.trunk, x_, act_);
  const Eigen::VectorXd q = params_.q_head * act_.hidden;
  const int action = epsilon_greedy(q, config_.epsilon, explore_rng_);

  if (has_prev_) {
    settle_inputs(params_.trunk, params_.trunk_momentum, prev_x_);
    auto grads = baseline_gradients(params_, config_.variant, prev_x_, prev_action_, reward, x_, config_.gamma);
    apply_baseline_gradients(params_, grads, config_.alpha, config_.nu);
  }
  std::swap(prev_x_, x_);
  prev_action_ = action;
  has_prev_ = true;
  return action;
}

void BaselineAgent::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("BaselineAgent");
  w.u64(num_features_);
  w.u64(config_.hidden_dim);
  w.str(explore_rng_.save_state());
  save_dense(out, params_.trunk, params_.trunk_momentum);
  w.mat(params_.q_head);
  w.vec(params_.v_head);
  w.mat(params_.q_velocity);
  w.vec(params_.v_velocity);
  w.u64(has_prev_ ? 1 : 0);
  w.u64(static_cast<std::uint64_t>(prev_action_));
  w.vec(has_prev_ ? prev_x_ : Eigen::VectorXd());
}

void BaselineAgent::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("BaselineAgent");
  if (r.u64() != num_features_ || r.u64() != config_.hidden_dim)
    throw std::runtime_error("BaselineAgent snapshot: shape does not match this agent's config");
  explore_rng_.load_state(r.str());
  load_dense(in, params_.trunk, params_.trunk_momentum);
  params_.q_head = r.mat();
  params_.v_head = r.vec();
  params_.q_velocity = r.mat();
  params_.v_velocity = r.vec();
  has_prev_ = r.u64() != 0;
  prev_action_ = static_cast<int>(r.u64());
  prev_x_ = r.vec();
}

}  // namespace nibbler
