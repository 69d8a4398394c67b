#pragma once

// Fully incremental deep Q-learning and QV-learning with one rectifier hidden
// layer: one transition per update, no replay, no target network.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <string>

#include "nibbler/agent.hpp"
#include "nibbler/gvf.hpp"
#include "nibbler/micrograd.hpp"
#include "nibbler/rng.hpp"

namespace nibbler {

enum class BaselineVariant : std::uint8_t { Q, QV };

struct BaselineConfig {
  std::size_t hidden_dim = 256;
  double alpha = 0.001;
  double nu = 0.99;
  double epsilon = 0.1;
  double gamma = 0.99;
  BaselineVariant variant = BaselineVariant::Q;

  void validate() const;
};

/// Trunk, heads and their velocities. Heads have no bias.
struct BaselineParams {
  DenseNet trunk;
  DenseMomentum trunk_momentum;
  Eigen::MatrixXd q_head;  // num_actions x hidden
  Eigen::VectorXd v_head;  // hidden; used by QV only
  Eigen::MatrixXd q_velocity;
  Eigen::VectorXd v_velocity;

  std::size_t parameter_count(BaselineVariant variant) const;
  bool all_finite() const;
};

struct BaselineGradients {
  double target = 0.0;
  double loss = 0.0;
  Eigen::VectorXd inputs;
  DenseActivations act;
  Eigen::MatrixXd grad_q;  // dL/d q_head (only row `action` is nonzero)
  Eigen::VectorXd grad_v;  // dL/d v_head (zero for Q)
  Eigen::VectorXd dpre;    // dL/d pre-activation; dL/dW = dpre x^T, dL/db = dpre
};

/// Loss and gradients for one transition. Q: Y = r + gamma max_a Q(x', a),
/// L = 1/2 (Y - Q(x, a))^2. QV: Y = r + gamma V(x'),
/// L = 1/2 [(Y - V(x))^2 + (Y - Q(x, a))^2]. Y is held fixed.
BaselineGradients baseline_gradients(const BaselineParams& params, BaselineVariant variant, const Eigen::VectorXd& x,
                                     int action, double reward, const Eigen::VectorXd& x_next, double gamma);

/// The same loss with Y given explicitly, as a function of the parameters.
double baseline_loss_fixed_target(const BaselineParams& params, BaselineVariant variant, const Eigen::VectorXd& x,
                                  int action, double target);

/// co_opt on every parameter tensor using the gradients above.
void apply_baseline_gradients(BaselineParams& params, const BaselineGradients& grads, double alpha, double nu);

class BaselineAgent final : public Agent {
 public:
  /// Streams derived from `seed`: "agent-init" for the trunk, "exploration"
  /// for action selection.
  BaselineAgent(const BaselineConfig& config, std::size_t num_features, std::uint64_t seed);

  int step(double reward, const BitObservation& observation) override;

  std::string name() const override { return config_.variant == BaselineVariant::Q ? "q" : "qv"; }
  std::size_t parameter_count() const override { return params_.parameter_count(config_.variant); }
  bool all_finite() const override { return params_.all_finite(); }
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const BaselineConfig& config() const { return config_; }
  BaselineParams& params() { return params_; }
  const BaselineParams& params() const { return params_; }

 private:
  BaselineConfig config_;
  std::size_t num_features_;
  Rng explore_rng_;
  BaselineParams params_;

  bool has_prev_ = false;
  int prev_action_ = 0;
  Eigen::VectorXd prev_x_;
  Eigen::VectorXd x_;
  DenseActivations act_;
};

}  // namespace nibbler
