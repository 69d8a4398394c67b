#pragma once

// Incremental top-k selection: each call swaps at most one index, replacing
// the weakest selected feature with the strongest unselected one when the
// latter's utility exceeds the former's by more than the threshold tau.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

namespace nibbler {

/// A fixed total order on base-feature indices. Sparse dot products visit
/// active features in this order and selection ties are broken by it, so an
/// agent given the order matching an observation permutation behaves exactly
/// like one seeing unpermuted observations.
struct IndexOrder {
  std::vector<std::uint32_t> rank;      // rank[j]: canonical id of index j
  std::vector<std::uint32_t> index_of;  // index_of[c]: index whose canonical id is c

  static IndexOrder identity(std::size_t m);
  static IndexOrder from_rank(std::vector<std::uint32_t> rank);
  std::size_t size() const { return rank.size(); }
};

struct SelectionState {
  std::vector<std::uint32_t> list;  // selected indices, fixed length k
  std::vector<std::uint8_t> mask;   // mask[j] == 1 iff j is in list
  double tau = 0.0;

  /// Throws std::invalid_argument for duplicates or out-of-range entries.
  static SelectionState from_list(std::vector<std::uint32_t> list, std::size_t m, double tau = 0.0);

  std::size_t k() const { return list.size(); }
  std::size_t m() const { return mask.size(); }
  bool consistent() const;

  void save(std::ostream& out) const;
  void load(std::istream& in);
};

struct SwapResult {
  bool changed = false;
  std::optional<std::size_t> pos;  // list position that was overwritten
  std::uint32_t removed = 0;
  std::uint32_t added = 0;
};

/// low = argmin of utilities over selected indices, high = argmax over
/// unselected ones; ties go to the lowest rank (index order when `order` is
/// null). Swaps iff utilities[low] + tau < utilities[high].
SwapResult incremental_top(SelectionState& state, std::span<const double> utilities,
                           const IndexOrder* order = nullptr);

}  // namespace nibbler
