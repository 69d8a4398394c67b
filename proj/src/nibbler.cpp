#include "nibbler/nibbler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

void NibblerConfig::validate(std::size_t m) const {
  if (h < 1) throw std::invalid_argument("nibbler config: h must be at least 1");
  if (h > m) throw std::invalid_argument("nibbler config: h must not exceed the number of base features");
  if (g < 1 || g > m) throw std::invalid_argument("nibbler config: g must lie in [1, m]");
  if (d < 1) throw std::invalid_argument("nibbler config: d must be at least 1");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("nibbler config: alpha must be positive");
  if (!(alpha_b > 0.0) || !std::isfinite(alpha_b))
    throw std::invalid_argument("nibbler config: alpha_b must be positive");
  if (!(tau_inputs >= 0.0) || !(tau_cumulants >= 0.0))
    throw std::invalid_argument("nibbler config: tau must be non-negative");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("nibbler config: gamma must lie in [0, 1)");
  if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw std::invalid_argument("nibbler config: epsilon must lie in [0, 1]");
  if (!(nu >= 0.0 && nu < 1.0)) throw std::invalid_argument("nibbler config: nu must lie in [0, 1)");
}

void derive_stepsizes(NibblerConfig& config) {
  config.alpha = config.kappa / std::sqrt(static_cast<double>(config.h));
  config.alpha_b = config.alpha;
}

NibblerConfig default_config(std::size_t n, std::size_t m) {
  if (n < 1) throw std::invalid_argument("default_config: n must be at least 1");
  NibblerConfig c;
  c.h = 2 * n;
  c.g = std::min<std::size_t>(82, m);
  c.d = 256;
  derive_stepsizes(c);
  return c;
}

NibblerAgent::NibblerAgent(const NibblerConfig& config, std::size_t num_features, std::uint64_t seed,
                           IndexOrder order)
    : config_(config),
      num_features_(num_features),
      order_(order.size() == 0 ? IndexOrder::identity(num_features) : std::move(order)),
      init_rng_(derive_seed(seed, "agent-init")),
      reinit_rng_(derive_seed(seed, "agent-reinit")),
      explore_rng_(derive_seed(seed, "exploration")) {
  config_.validate(num_features_);
  if (order_.size() != num_features_) throw std::invalid_argument("NibblerAgent: index order has wrong size");

  shape_ = SlotShape{num_features_, config_.g, config_.d, kNumActions, config_.gamma, config_.tau_inputs};

  auto cumulants = init_rng_.sample_distinct(static_cast<std::uint32_t>(num_features_),
                                             static_cast<std::uint32_t>(config_.h));
  for (auto& c : cumulants) c = order_.index_of[c];
  discovery_.weights = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_features_));
  discovery_.cumulants = SelectionState::from_list(cumulants, num_features_, config_.tau_cumulants);

  slots_.reserve(config_.h);
  for (std::size_t i = 0; i < config_.h; ++i) slots_.push_back(make_slot(cumulants[i], shape_, order_, init_rng_));

  main_ = LinearVQ::zeros(num_features_ + config_.h * config_.d, kNumActions);
  next_act_.resize(config_.h);
}

void NibblerAgent::compute_features(const BitObservation& observation) {
  base_now_.assign_bits(observation, &order_);
  full_now_.base = base_now_.sparse;
  full_now_.nonlinear.resize(static_cast<Eigen::Index>(config_.h * config_.d));
  const auto d = static_cast<Eigen::Index>(config_.d);
  for (std::size_t i = 0; i < slots_.size(); ++i) {
    slots_[i].settled_features(base_now_, gather_scratch_, next_act_[i]);
    full_now_.nonlinear.segment(static_cast<Eigen::Index>(i) * d, d) = next_act_[i].hidden;
  }
}

void NibblerAgent::update_main(double reward) {
  main_qv_update(main_, full_prev_, full_now_, reward, prev_action_, config_.gamma,
                 OptimizerParams{config_.alpha, config_.nu});
}

void NibblerAgent::update_answers() {
  const OptimizerParams opt{config_.alpha, config_.nu};
  // After a selection the cached next-step activations may be stale.
  const bool cached = update_order_ != UpdateOrder::SelectionsBeforeAnswers;
  for (std::size_t i = 0; i < slots_.size(); ++i)
    answer_update(slots_[i], base_prev_, base_now_, prev_action_, opt, cached ? &next_act_[i] : nullptr);
}

void NibblerAgent::update_selections(double reward) {
  for (auto& slot : slots_)
    update_answer_selection(slot, base_prev_, base_now_, config_.alpha_b, reinit_rng_, &order_, utility_scratch_);
  update_cumulant_selection(discovery_, slots_, base_prev_, reward, config_.alpha_b, reinit_rng_, config_.slot_reset,
                            shape_, order_, utility_scratch_);
}

int NibblerAgent::step(double reward, const BitObservation& observation) {
  if (observation.size() != num_features_)
    throw std::invalid_argument("NibblerAgent: observation has " + std::to_string(observation.size()) +
                                " bits, expected " + std::to_string(num_features_));
  ++steps_;
  compute_features(observation);
  const int action = epsilon_greedy(main_.action_values(full_now_), config_.epsilon, explore_rng_);

  if (has_prev_) {
    switch (update_order_) {
      case UpdateOrder::Standard:
        update_main(reward);
        update_answers();
        update_selections(reward);
        break;
      case UpdateOrder::AnswersBeforeMain:
        update_answers();
        update_main(reward);
        update_selections(reward);
        break;
      case UpdateOrder::SelectionsBeforeAnswers:
        update_main(reward);
        update_selections(reward);
        update_answers();
        break;
    }
  }

  std::swap(base_prev_, base_now_);
  std::swap(full_prev_, full_now_);
  prev_bits_ = observation;
  prev_action_ = action;
  has_prev_ = true;
  return action;
}

std::size_t NibblerAgent::parameter_count() const {
  std::size_t count = main_.parameter_count() + static_cast<std::size_t>(discovery_.weights.size());
  for (const auto& slot : slots_) count += slot.parameter_count();
  return count;
}

bool NibblerAgent::all_finite() const {
  if (!main_.all_finite() || !discovery_.weights.allFinite()) return false;
  for (const auto& slot : slots_)
    if (!slot.all_finite()) return false;
  return true;
}

void NibblerAgent::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("NibblerAgent");
  w.u64(num_features_);
  w.u64(config_.h);
  w.u64(config_.g);
  w.u64(config_.d);
  w.indices(order_.rank);
  w.str(init_rng_.save_state());
  w.str(reinit_rng_.save_state());
  w.str(explore_rng_.save_state());
  discovery_.save(out);
  for (const auto& slot : slots_) slot.save(out);
  main_.save(out);
  w.u64(has_prev_ ? 1 : 0);
  w.u64(static_cast<std::uint64_t>(prev_action_));
  w.u64(steps_);
  w.bytes(prev_bits_);
  w.vec(full_prev_.nonlinear);
}

void NibblerAgent::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("NibblerAgent");
  if (r.u64() != num_features_ || r.u64() != config_.h || r.u64() != config_.g || r.u64() != config_.d)
    throw std::runtime_error("NibblerAgent snapshot: shape does not match this agent's config");
  if (r.indices() != order_.rank) throw std::runtime_error("NibblerAgent snapshot: index order mismatch");
  init_rng_.load_state(r.str());
  reinit_rng_.load_state(r.str());
  explore_rng_.load_state(r.str());
  discovery_.load(in);
  for (auto& slot : slots_) slot.load(in);
  main_.load(in);
  has_prev_ = r.u64() != 0;
  prev_action_ = static_cast<int>(r.u64());
  steps_ = r.u64();
  prev_bits_ = r.bytes();
  auto nonlinear = r.vec();
  if (has_prev_) {
    if (prev_bits_.size() != num_features_) throw std::runtime_error("NibblerAgent snapshot: bad cached observation");
    base_prev_.assign_bits(prev_bits_, &order_);
    full_prev_.base = base_prev_.sparse;
    full_prev_.nonlinear = std::move(nonlinear);
  }
}

}  // namespace nibbler
