#include "nibbler/topk.hpp"

#include <numeric>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

IndexOrder IndexOrder::identity(std::size_t m) {
  IndexOrder order;
  order.rank.resize(m);
  std::iota(order.rank.begin(), order.rank.end(), 0u);
  order.index_of = order.rank;
  return order;
}

IndexOrder IndexOrder::from_rank(std::vector<std::uint32_t> rank) {
  IndexOrder order;
  order.index_of.assign(rank.size(), static_cast<std::uint32_t>(rank.size()));
  for (std::uint32_t j = 0; j < rank.size(); ++j) {
    if (rank[j] >= rank.size() || order.index_of[rank[j]] != rank.size())
      throw std::invalid_argument("IndexOrder: rank is not a permutation");
    order.index_of[rank[j]] = j;
  }
  order.rank = std::move(rank);
  return order;
}

SelectionState SelectionState::from_list(std::vector<std::uint32_t> list, std::size_t m, double tau) {
  if (tau < 0.0) throw std::invalid_argument("SelectionState: tau must be non-negative");
  SelectionState s;
  s.mask.assign(m, 0);
  for (auto j : list) {
    if (j >= m) throw std::invalid_argument("SelectionState: index out of range");
    if (s.mask[j]) throw std::invalid_argument("SelectionState: duplicate index");
    s.mask[j] = 1;
  }
  s.list = std::move(list);
  s.tau = tau;
  return s;
}

bool SelectionState::consistent() const {
  std::size_t ones = 0;
  for (auto b : mask) ones += b ? 1 : 0;
  if (ones != list.size()) return false;
  for (auto j : list)
    if (j >= mask.size() || !mask[j]) return false;
  return true;
}

SwapResult incremental_top(SelectionState& state, std::span<const double> utilities, const IndexOrder* order) {
  const std::size_t m = state.mask.size();
  if (utilities.size() != m) throw std::invalid_argument("incremental_top: utility vector has wrong length");
  if (state.list.empty() || state.list.size() == m) return {};

  auto rank = [&](std::uint32_t j) { return order ? order->rank[j] : j; };

  std::size_t low_pos = 0;
  for (std::size_t p = 1; p < state.list.size(); ++p) {
    const auto j = state.list[p];
    const auto best = state.list[low_pos];
    if (utilities[j] < utilities[best] || (utilities[j] == utilities[best] && rank(j) < rank(best))) low_pos = p;
  }

  std::uint32_t high = static_cast<std::uint32_t>(m);
  for (std::uint32_t j = 0; j < m; ++j) {
    if (state.mask[j]) continue;
    if (high == m || utilities[j] > utilities[high] || (utilities[j] == utilities[high] && rank(j) < rank(high)))
      high = j;
  }

  const std::uint32_t low = state.list[low_pos];
  if (!(utilities[low] + state.tau < utilities[high])) return {};

  state.mask[low] = 0;
  state.mask[high] = 1;
  state.list[low_pos] = high;
  return SwapResult{true, low_pos, low, high};
}

void SelectionState::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("SelectionState");
  w.u64(mask.size());
  w.f64(tau);
  w.indices(list);
}

void SelectionState::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("SelectionState");
  auto m = r.u64();
  double t = r.f64();
  *this = from_list(r.indices(), m, t);
}

}  // namespace nibbler
