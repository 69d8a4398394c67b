#include "nibbler/multicatch.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "nibbler/keyvalue.hpp"
#include "nibbler/snapshot.hpp"

namespace nibbler {

namespace {

void check_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument(std::string("BoardConfig.") + name + " must lie in [0, 1]");
}

int clamp_col(int col, const BoardConfig& config) { return std::clamp(col, 0, config.num_cols - 1); }

}  // namespace

void BoardConfig::validate() const {
  if (num_rows < 2) throw std::invalid_argument("BoardConfig.num_rows must be at least 2");
  if (num_cols < 1) throw std::invalid_argument("BoardConfig.num_cols must be at least 1");
  check_probability(p_arrival, "p_arrival");
  check_probability(p_reward, "p_reward");
  check_probability(p_hot, "p_hot");
  check_probability(paddle_noise, "paddle_noise");
  if (wind < -1 || wind > 1) throw std::invalid_argument("BoardConfig.wind must be -1, 0 or +1");
}

bool is_valid_state(const BoardState& s, const BoardConfig& config) {
  if (s.paddle_col < 0 || s.paddle_col >= config.num_cols) return false;
  if (s.phase == Phase::Falling) {
    if (s.row < 0 || s.row >= config.num_rows) return false;
    if (s.ball_col < 0 || s.ball_col >= config.num_cols) return false;
  }
  if ((s.phase == Phase::PlusHold || s.phase == Phase::MinusHold) && !s.hot) return false;
  return true;
}

BoardStep board_step(const BoardState& state, const BoardConfig& config, Action action, Rng& rng) {
  BoardStep out{state, 0};
  BoardState& next = out.state;

  int move = action_delta(action);
  if (rng.bernoulli(config.paddle_noise)) move = static_cast<int>(rng.below(3)) - 1;
  next.paddle_col = clamp_col(state.paddle_col + move, config);

  switch (state.phase) {
    case Phase::Reset:
      if (rng.bernoulli(config.p_arrival)) {
        next.phase = Phase::Falling;
        next.row = 0;
        next.ball_col = static_cast<int>(rng.below(static_cast<std::uint64_t>(config.num_cols)));
        if (!state.hot && rng.bernoulli(config.p_hot)) next.hot = true;
      }
      break;
    case Phase::Falling:
      if (state.row == config.num_rows - 1) {
        // Outcome uses the bottom-row state as observed, before this step's paddle move.
        next.phase = state.ball_col == state.paddle_col ? Phase::Catch : Phase::Miss;
        next.row = 0;
        next.ball_col = 0;
      } else {
        next.ball_col = clamp_col(state.ball_col + config.wind, config);
        next.row = state.row + 1;
      }
      break;
    case Phase::Catch:
      next.phase = state.hot ? Phase::PlusHold : Phase::Reset;
      break;
    case Phase::Miss:
      next.phase = state.hot ? Phase::MinusHold : Phase::Reset;
      break;
    case Phase::PlusHold:
    case Phase::MinusHold:
      if (rng.bernoulli(config.p_reward)) {
        out.reward = state.phase == Phase::PlusHold ? 1 : -1;
        next.phase = Phase::Reset;
        next.hot = false;
      }
      break;
  }
  return out;
}

void board_observe(const BoardState& state, const BoardConfig& config, std::uint8_t* out) {
  std::fill(out, out + config.observation_size(), std::uint8_t{0});
  switch (state.phase) {
    case Phase::Reset: out[config.reset_bit()] = 1; break;
    case Phase::Falling: out[config.cell_bit(state.row, state.ball_col)] = 1; break;
    case Phase::Catch: out[config.catch_bit()] = 1; break;
    case Phase::Miss: out[config.miss_bit()] = 1; break;
    case Phase::PlusHold: out[config.plus_bit()] = 1; break;
    case Phase::MinusHold: out[config.minus_bit()] = 1; break;
  }
  out[config.cell_bit(config.num_rows - 1, state.paddle_col)] = 1;
  if (state.hot) out[config.hot_bit()] = 1;
}

std::vector<std::uint8_t> board_observe(const BoardState& state, const BoardConfig& config) {
  std::vector<std::uint8_t> out(static_cast<std::size_t>(config.observation_size()));
  board_observe(state, config, out.data());
  return out;
}

BoardConfig BoardOverrides::apply(BoardConfig base) const {
  if (num_rows) base.num_rows = *num_rows;
  if (num_cols) base.num_cols = *num_cols;
  if (p_arrival) base.p_arrival = *p_arrival;
  if (p_reward) base.p_reward = *p_reward;
  if (p_hot) base.p_hot = *p_hot;
  if (paddle_noise) base.paddle_noise = *paddle_noise;
  if (wind) base.wind = *wind;
  return base;
}

MultiCatchEnv::MultiCatchEnv(std::vector<BoardConfig> configs, std::uint64_t seed, bool permute)
    : configs_(std::move(configs)) {
  if (configs_.empty()) throw std::invalid_argument("MultiCatchEnv needs at least one board");
  std::size_t m = 0;
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    configs_[i].validate();
    offsets_.push_back(m);
    m += static_cast<std::size_t>(configs_[i].observation_size());
    board_rngs_.emplace_back(derive_seed(seed, "board", i));
  }
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    BoardState s;
    s.paddle_col = static_cast<int>(board_rngs_[i].below(static_cast<std::uint64_t>(configs_[i].num_cols)));
    states_.push_back(s);
  }
  source_.resize(m);
  std::iota(source_.begin(), source_.end(), 0u);
  if (permute) {
    Rng perm_rng(derive_seed(seed, "permutation"));
    perm_rng.shuffle(std::span<std::uint32_t>(source_));
  }
  position_.resize(m);
  for (std::uint32_t j = 0; j < m; ++j) position_[source_[j]] = j;
  scratch_.resize(m);
  observation_.resize(m);
  refresh_observation();
}

void MultiCatchEnv::refresh_observation() {
  for (std::size_t i = 0; i < configs_.size(); ++i)
    board_observe(states_[i], configs_[i], scratch_.data() + offsets_[i]);
  for (std::size_t j = 0; j < observation_.size(); ++j) observation_[j] = scratch_[source_[j]];
}

EnvStep MultiCatchEnv::step(Action action) {
  int reward = 0;
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    auto r = board_step(states_[i], configs_[i], action, board_rngs_[i]);
    states_[i] = r.state;
    reward += r.reward;
  }
  refresh_observation();
  return EnvStep{reward, observation_};
}

BitObservation MultiCatchEnv::unpermuted_observation() const { return scratch_; }

void MultiCatchEnv::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("MultiCatchEnv");
  w.u64(configs_.size());
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    const auto& s = states_[i];
    w.u64(static_cast<std::uint64_t>(s.phase));
    w.u64(static_cast<std::uint64_t>(s.row));
    w.u64(static_cast<std::uint64_t>(s.ball_col));
    w.u64(static_cast<std::uint64_t>(s.paddle_col));
    w.u64(s.hot ? 1 : 0);
    w.str(board_rngs_[i].save_state());
  }
  w.indices(source_);
}

void MultiCatchEnv::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("MultiCatchEnv");
  if (r.u64() != configs_.size()) throw std::runtime_error("MultiCatchEnv snapshot: board count mismatch");
  for (std::size_t i = 0; i < configs_.size(); ++i) {
    BoardState s;
    s.phase = static_cast<Phase>(r.u64());
    s.row = static_cast<int>(r.u64());
    s.ball_col = static_cast<int>(r.u64());
    s.paddle_col = static_cast<int>(r.u64());
    s.hot = r.u64() != 0;
    if (!is_valid_state(s, configs_[i])) throw std::runtime_error("MultiCatchEnv snapshot: invalid board state");
    states_[i] = s;
    board_rngs_[i].load_state(r.str());
  }
  if (r.indices() != source_) throw std::runtime_error("MultiCatchEnv snapshot: permutation mismatch");
  refresh_observation();
}

MultiCatchEnv make_multicatch(std::size_t n, std::uint64_t seed, const BoardOverrides& overrides, bool permute) {
  if (n == 0) throw std::invalid_argument("make_multicatch: n must be at least 1");
  BoardConfig base;
  base.p_hot = std::min(1.0, 2.0 / static_cast<double>(n));
  base = overrides.apply(base);
  return MultiCatchEnv(std::vector<BoardConfig>(n, base), seed, permute);
}

std::vector<BoardConfig> heterogeneous_configs(std::size_t n, std::uint64_t seed) {
  if (n == 0) throw std::invalid_argument("make_heterogeneous: n must be at least 1");
  Rng rng(derive_seed(seed, "heterogeneous"));
  std::vector<BoardConfig> configs;
  for (std::size_t i = 0; i < n; ++i) {
    BoardConfig c;
    c.p_hot = std::min(1.0, 2.0 / static_cast<double>(n));
    c.num_rows = static_cast<int>(rng.between(5, 10));
    c.wind = rng.bernoulli(0.5) ? 1 : -1;
    c.p_arrival = rng.uniform(0.05, 1.0);
    c.p_reward = rng.uniform(0.05, 1.0);
    configs.push_back(c);
  }
  return configs;
}

MultiCatchEnv make_heterogeneous(std::size_t n, std::uint64_t seed, bool permute) {
  return MultiCatchEnv(heterogeneous_configs(n, seed), seed, permute);
}

MultiCatchEnv EnvSpec::build() const {
  if (heterogeneous) return make_heterogeneous(num_parallel, seed, permute);
  return make_multicatch(num_parallel, seed, overrides, permute);
}

EnvSpec parse_env_spec(const std::string& text) {
  auto kv = KeyValues::parse(text);
  kv.require_known({"num_parallel", "p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols", "p_hot",
                    "wind", "heterogeneous", "permute", "seed"});
  EnvSpec spec;
  if (kv.has("num_parallel")) {
    auto n = kv.get_int("num_parallel");
    if (n < 1) throw std::invalid_argument("config field 'num_parallel' must be at least 1");
    spec.num_parallel = static_cast<std::size_t>(n);
  }
  if (kv.has("heterogeneous")) spec.heterogeneous = kv.get_bool("heterogeneous");
  if (kv.has("permute")) spec.permute = kv.get_bool("permute");
  if (kv.has("seed")) spec.seed = kv.get_u64("seed");
  auto& o = spec.overrides;
  if (kv.has("num_rows")) o.num_rows = static_cast<int>(kv.get_int("num_rows"));
  if (kv.has("num_cols")) o.num_cols = static_cast<int>(kv.get_int("num_cols"));
  if (kv.has("p_arrival")) o.p_arrival = kv.get_double("p_arrival");
  if (kv.has("p_reward")) o.p_reward = kv.get_double("p_reward");
  if (kv.has("p_hot")) o.p_hot = kv.get_double("p_hot");
  if (kv.has("paddle_noise")) o.paddle_noise = kv.get_double("paddle_noise");
  if (kv.has("wind")) o.wind = static_cast<int>(kv.get_int("wind"));
  o.apply(BoardConfig{}).validate();
  return spec;
}

void dump_trajectory(MultiCatchEnv& env, std::size_t steps, std::uint64_t policy_seed, std::ostream& out) {
  Rng policy(derive_seed(policy_seed, "dump-policy"));
  auto write_bits = [&](const BitObservation& bits) {
    for (auto b : bits) out << (b ? '1' : '0');
    out << '\n';
  };
  out << "0 - 0 ";
  write_bits(env.observation());
  for (std::size_t t = 1; t <= steps; ++t) {
    auto action = static_cast<Action>(policy.below(kNumActions));
    auto step = env.step(action);
    out << t << ' ' << static_cast<int>(action) << ' ' << step.reward << ' ';
    write_bits(step.observation);
  }
}

}  // namespace nibbler
