#pragma once

// The two selection loops built on incremental_top: choosing each answer's g
// input features from its support weights, and choosing the h question
// cumulants from the one-step reward model.

#include <Eigen/Core>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "nibbler/gvf.hpp"
#include "nibbler/rng.hpp"
#include "nibbler/topk.hpp"

namespace nibbler {

/// What a cumulant swap resets in the affected slot.
enum class SlotResetMode : std::uint8_t {
  /// Net weights and velocity, heads, support weights, and a fresh random
  /// input selection.
  Full = 0,
  /// Net weights and velocity only.
  NetOnly = 1,
};

struct SlotShape {
  std::size_t num_features = 0;  // m
  std::size_t inputs = 0;        // g
  std::size_t hidden = 0;        // d
  int num_actions = kNumActions;
  double discount = 0.99;
  double tau = 0.0;
};

/// A slot for `cumulant` with a uniformly random input subset (drawn over
/// canonical ids, mapped through `order`), freshly initialized net, zero heads
/// and zero support weights.
QuestionSlot make_slot(std::uint32_t cumulant, const SlotShape& shape, const IndexOrder& order, Rng& rng);

/// Reinitializes `slot` for a new cumulant according to `mode`.
void reset_slot(QuestionSlot& slot, std::uint32_t cumulant, SlotResetMode mode, const SlotShape& shape,
                const IndexOrder& order, Rng& rng);

/// Swap on |support|, reinit the swapped net input column, then a TD(0) step on
/// the support weights with the slot's cumulant. Returns the swap result.
SwapResult update_answer_selection(QuestionSlot& slot, const BaseFeatures& x_t, const BaseFeatures& x_next,
                                   double alpha_b, Rng& rng, const IndexOrder* order,
                                   std::vector<double>& utility_scratch);

struct DiscoveryState {
  Eigen::VectorXd weights;  // one-step linear reward model over base features
  SelectionState cumulants;

  void save(std::ostream& out) const;
  void load(std::istream& in);
};

/// Swap on |w_discovery|; on a change at position pos the slot pos takes the
/// new cumulant and is reset per `mode`. Then one LMS step of the reward model.
SwapResult update_cumulant_selection(DiscoveryState& discovery, std::span<QuestionSlot> slots,
                                     const BaseFeatures& x_t, double reward, double alpha_b, Rng& rng,
                                     SlotResetMode mode, const SlotShape& shape, const IndexOrder& order,
                                     std::vector<double>& utility_scratch);

}  // namespace nibbler
