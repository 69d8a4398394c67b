#include "nibbler/selection.hpp"

#include <cmath>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

namespace {

SelectionState random_inputs(const SlotShape& shape, const IndexOrder& order, Rng& rng) {
  auto canonical = rng.sample_distinct(static_cast<std::uint32_t>(shape.num_features),
                                       static_cast<std::uint32_t>(shape.inputs));
  for (auto& c : canonical) c = order.index_of[c];
  return SelectionState::from_list(std::move(canonical), shape.num_features, shape.tau);
}

void absolute_values(const Eigen::VectorXd& w, std::vector<double>& out) {
  out.resize(static_cast<std::size_t>(w.size()));
  for (Eigen::Index j = 0; j < w.size(); ++j) out[static_cast<std::size_t>(j)] = std::abs(w[j]);
}

}  // namespace

QuestionSlot make_slot(std::uint32_t cumulant, const SlotShape& shape, const IndexOrder& order, Rng& rng) {
  if (shape.inputs < 1 || shape.inputs > shape.num_features)
    throw std::invalid_argument("make_slot: g must lie in [1, m]");
  if (order.size() != shape.num_features) throw std::invalid_argument("make_slot: index order has wrong size");
  QuestionSlot slot;
  slot.question = GvfQuestion{cumulant, shape.discount};
  slot.inputs = random_inputs(shape, order, rng);
  auto [net, momentum] = init_dense(static_cast<Eigen::Index>(shape.inputs), static_cast<Eigen::Index>(shape.hidden), rng);
  slot.net = std::move(net);
  slot.net_momentum = std::move(momentum);
  slot.heads = LinearVQ::zeros(shape.hidden, shape.num_actions);
  slot.support = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.num_features));
  return slot;
}

void reset_slot(QuestionSlot& slot, std::uint32_t cumulant, SlotResetMode mode, const SlotShape& shape,
                const IndexOrder& order, Rng& rng) {
  slot.question.cumulant_index = cumulant;
  if (mode == SlotResetMode::Full) {
    slot = make_slot(cumulant, shape, order, rng);
  } else {
    reinit_dense(slot.net, slot.net_momentum, rng);
  }
}

SwapResult update_answer_selection(QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next,
                                   double alpha_b, Rng& rng, const IndexOrder* order,
                                   std::vector<double>& utility_scratch) {
  absolute_values(slot.support, utility_scratch);
  SwapResult swap = incremental_top(slot.inputs, utility_scratch, order);
  if (swap.changed) reinit_input_column(slot.net, slot.net_momentum, static_cast<Eigen::Index>(*swap.pos), rng);
  const double cumulant = x_next.dense[slot.question.cumulant_index];
  linear_td0(slot.support, x_t.sparse, x_next.sparse, cumulant, slot.question.discount, alpha_b);
  return swap;
}

SwapResult update_cumulant_selection(DiscoveryState& discovery, std::span<QuestionSlot> slots,
                                     const BaseFeatures& x_t, double reward, double alpha_b, Rng& rng,
                                     SlotResetMode mode, const SlotShape& shape, const IndexOrder& order,
                                     std::vector<double>& utility_scratch) {
  if (slots.size() != discovery.cumulants.k())
    throw std::invalid_argument("update_cumulant_selection: slot count differs from cumulant count");
  absolute_values(discovery.weights, utility_scratch);
  SwapResult swap = incremental_top(discovery.cumulants, utility_scratch, &order);
  if (swap.changed) {
    const std::size_t pos = *swap.pos;
    reset_slot(slots[pos], discovery.cumulants.list[pos], mode, shape, order, rng);
  }
  linear_reward_model_update(discovery.weights, x_t.sparse, reward, alpha_b);
  return swap;
}

void DiscoveryState::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("DiscoveryState");
  w.vec(weights);
  cumulants.save(out);
}

void DiscoveryState::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("DiscoveryState");
  weights = r.vec();
  cumulants.load(in);
  if (static_cast<std::size_t>(weights.size()) != cumulants.m())
    throw std::runtime_error("DiscoveryState snapshot: inconsistent sizes");
}

}  // namespace nibbler
