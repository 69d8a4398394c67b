#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nibbler/agent.hpp"
#include "nibbler/gvf.hpp"
#include "nibbler/rng.hpp"
#include "nibbler/selection.hpp"

namespace nibbler {

struct NibblerConfig {
  std::size_t h = 4;     // GVF questions
  std::size_t g = 82;    // base features per answer
  std::size_t d = 256;   // nonlinear features per answer
  double kappa = 0.001 * 1.4142135623730951;
  double alpha = 0.0;    // main and answer stepsize
  double alpha_b = 0.0;  // linear learner stepsize
  double tau_inputs = 0.0;
  double tau_cumulants = 0.0;
  double gamma = 0.99;
  double epsilon = 0.1;
  double nu = 0.99;
  SlotResetMode slot_reset = SlotResetMode::Full;

  /// Throws std::invalid_argument naming the offending field.
  void validate(std::size_t m) const;
};

/// Defaults for n boards and m base features: h = 2n, g = min(82, m), d = 256,
/// kappa = 0.001 sqrt(2), alpha = alpha_b = kappa / sqrt(h), tau = 0,
/// gamma = 0.99, epsilon = 0.1, nu = 0.99.
NibblerConfig default_config(std::size_t n, std::size_t m);

/// Recomputes alpha and alpha_b from kappa and h.
void derive_stepsizes(NibblerConfig& config);

/// Order of the per-step updates. Only Standard is part of the algorithm; the
/// others exist for tests. The main and answer updates read only features
/// computed before either runs and write disjoint parameters, so swapping them
/// is exact; running the selections before the answer updates is not.
enum class UpdateOrder : std::uint8_t { Standard, AnswersBeforeMain, SelectionsBeforeAnswers };

class NibblerAgent final : public Agent {
 public:
  /// Random streams derived from `seed`: "agent-init" for the initial cumulant
  /// and input subsets and net weights, "agent-reinit" for every later
  /// reinitialization, "exploration" for action selection.
  NibblerAgent(const NibblerConfig& config, std::size_t num_features, std::uint64_t seed,
               IndexOrder order = {});

  int step(double reward, const BitObservation& observation) override;

  std::string name() const override { return "nibbler"; }
  std::size_t parameter_count() const override;
  bool all_finite() const override;
  void save(std::ostream& out) const override;
  void load(std::istream& in) override;

  const NibblerConfig& config() const { return config_; }
  std::size_t num_features() const { return num_features_; }
  const std::vector<QuestionSlot>& slots() const { return slots_; }
  const DiscoveryState& discovery() const { return discovery_; }
  const LinearVQ& main() const { return main_; }
  const IndexOrder& order() const { return order_; }
  std::uint64_t steps() const { return steps_; }
  int last_action() const { return prev_action_; }

  void set_update_order(UpdateOrder order) { update_order_ = order; }

 private:
  void compute_features(const BitObservation& observation);
  void update_main(double reward);
  void update_answers();
  void update_selections(double reward);

  NibblerConfig config_;
  std::size_t num_features_;
  IndexOrder order_;
  SlotShape shape_;
  Rng init_rng_;
  Rng reinit_rng_;
  Rng explore_rng_;

  DiscoveryState discovery_;
  std::vector<QuestionSlot> slots_;
  LinearVQ main_;

  // Transition cache: features at t (previous step) and t+1 (this step).
  bool has_prev_ = false;
  int prev_action_ = 0;
  std::uint64_t steps_ = 0;
  BitObservation prev_bits_;
  BaseFeatures base_prev_;
  BaseFeatures base_now_;
  FullFeatures full_prev_;
  FullFeatures full_now_;
  std::vector<DenseActivations> next_act_;

  Eigen::VectorXd gather_scratch_;
  std::vector<double> utility_scratch_;
  UpdateOrder update_order_ = UpdateOrder::Standard;
};

}  // namespace nibbler
