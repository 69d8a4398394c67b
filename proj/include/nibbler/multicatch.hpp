#pragma once

// Continuing catch boards and the multi-catch composite environment.
//
// Unpermuted per-board observation layout (num_rows * num_cols + 6 bits):
//
//   [0, R*C)   board cells, row-major; row 0 is the top row.
//              The ball cell is lit while the ball is falling, and the paddle
//              cell (row R-1, paddle_col) is always lit. The two share a bit
//              when the ball sits in the bottom row above the paddle.
//   R*C + 0    reset
//   R*C + 1    hot
//   R*C + 2    catch
//   R*C + 3    miss
//   R*C + 4    plus
//   R*C + 5    minus
//
// The composite observation concatenates board blocks in board order and then
// applies the environment's fixed permutation: out[j] = concat[source[j]].

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "nibbler/rng.hpp"

namespace nibbler {

enum class Action : std::uint8_t { Left = 0, Stay = 1, Right = 2 };
inline constexpr int kNumActions = 3;

inline int action_delta(Action a) { return static_cast<int>(a) - 1; }

enum class Phase : std::uint8_t { Reset, Falling, Catch, Miss, PlusHold, MinusHold };

struct BoardConfig {
  int num_rows = 10;
  int num_cols = 5;
  double p_arrival = 0.2;
  double p_reward = 0.2;
  double p_hot = 1.0;
  double paddle_noise = 0.2;
  int wind = 0;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  int cell_count() const { return num_rows * num_cols; }
  int observation_size() const { return cell_count() + 6; }

  int reset_bit() const { return cell_count() + 0; }
  int hot_bit() const { return cell_count() + 1; }
  int catch_bit() const { return cell_count() + 2; }
  int miss_bit() const { return cell_count() + 3; }
  int plus_bit() const { return cell_count() + 4; }
  int minus_bit() const { return cell_count() + 5; }
  int cell_bit(int row, int col) const { return row * num_cols + col; }

  bool operator==(const BoardConfig&) const = default;
};

struct BoardState {
  Phase phase = Phase::Reset;
  int row = 0;       // meaningful while Falling
  int ball_col = 0;  // meaningful while Falling
  int paddle_col = 0;
  bool hot = false;

  bool operator==(const BoardState&) const = default;
};

struct BoardStep {
  BoardState state;
  int reward = 0;
};

/// True when the state satisfies the structural invariants for `config`.
bool is_valid_state(const BoardState& state, const BoardConfig& config);

/// One transition of a continuing catch board.
///
/// Draw order on `rng` is fixed: paddle noise coin, then (if noisy) the random
/// move; then whatever the phase needs (arrival coin, column, hot coin; or the
/// reward-exit coin).
BoardStep board_step(const BoardState& state, const BoardConfig& config, Action action, Rng& rng);

/// Writes the unpermuted block for one board into `out` (must have
/// config.observation_size() entries; all entries are overwritten).
void board_observe(const BoardState& state, const BoardConfig& config, std::uint8_t* out);

std::vector<std::uint8_t> board_observe(const BoardState& state, const BoardConfig& config);

/// Partial BoardConfig used to override make_multicatch defaults.
struct BoardOverrides {
  std::optional<int> num_rows;
  std::optional<int> num_cols;
  std::optional<double> p_arrival;
  std::optional<double> p_reward;
  std::optional<double> p_hot;
  std::optional<double> paddle_noise;
  std::optional<int> wind;

  BoardConfig apply(BoardConfig base) const;
};

using BitObservation = std::vector<std::uint8_t>;

struct EnvStep {
  int reward = 0;
  const BitObservation& observation;
};

class MultiCatchEnv {
 public:
  /// Boards start in Reset, not hot, with a uniformly drawn paddle column.
  ///
  /// Streams derived from `seed`: "permutation" for the observation
  /// permutation and ("board", i) for board i's dynamics. With permute=false the
  /// observation permutation is the identity and dynamics are unchanged.
  MultiCatchEnv(std::vector<BoardConfig> configs, std::uint64_t seed, bool permute = true);

  EnvStep step(Action action);

  const BitObservation& observation() const { return observation_; }
  std::size_t observation_size() const { return observation_.size(); }
  std::size_t num_boards() const { return configs_.size(); }
  static constexpr int num_actions() { return kNumActions; }

  const BoardConfig& config(std::size_t board) const { return configs_[board]; }
  const BoardState& state(std::size_t board) const { return states_[board]; }
  /// Offset of board i's block in the unpermuted concatenation.
  std::size_t block_offset(std::size_t board) const { return offsets_[board]; }
  /// out[j] = concat[permutation()[j]].
  const std::vector<std::uint32_t>& permutation() const { return source_; }
  /// Position in the permuted observation of unpermuted bit `canonical`.
  std::uint32_t permuted_position(std::uint32_t canonical) const { return position_[canonical]; }

  /// Concatenated board blocks before permutation.
  BitObservation unpermuted_observation() const;

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  void refresh_observation();

  std::vector<BoardConfig> configs_;
  std::vector<BoardState> states_;
  std::vector<Rng> board_rngs_;
  std::vector<std::size_t> offsets_;
  std::vector<std::uint32_t> source_;
  std::vector<std::uint32_t> position_;
  BitObservation scratch_;
  BitObservation observation_;
};

/// n default boards (10x5, p_arrival = p_reward = paddle_noise = 0.2, no wind)
/// with p_hot = min(1, 2/n). Throws std::invalid_argument for n == 0.
MultiCatchEnv make_multicatch(std::size_t n, std::uint64_t seed, const BoardOverrides& overrides = {},
                              bool permute = true);

/// Board configs used by make_heterogeneous, drawn from stream "heterogeneous".
std::vector<BoardConfig> heterogeneous_configs(std::size_t n, std::uint64_t seed);

/// Per board: rows uniform in {5..10}, constant wind of -1 or +1, p_arrival and
/// p_reward uniform on [0.05, 1]; everything else as make_multicatch.
MultiCatchEnv make_heterogeneous(std::size_t n, std::uint64_t seed, bool permute = true);

/// Environment description from a plain-text "key = value" file. Recognized
/// keys: num_parallel, p_arrival, p_reward, paddle_noise, num_rows, num_cols,
/// p_hot, wind, heterogeneous, permute, seed.
struct EnvSpec {
  std::size_t num_parallel = 1;
  bool heterogeneous = false;
  bool permute = true;
  std::uint64_t seed = 0;
  BoardOverrides overrides;

  MultiCatchEnv build() const;
};

EnvSpec parse_env_spec(const std::string& text);

/// Trajectory dump: one line per step, "t action reward bits", where bits is the
/// permuted observation after the step as a 0/1 string. Line 0 carries the
/// initial observation with action "-" and reward 0. Actions come from a
/// uniform policy seeded by derive_seed(policy_seed, "dump-policy").
void dump_trajectory(MultiCatchEnv& env, std::size_t steps, std::uint64_t policy_seed, std::ostream& out);

}  // namespace nibbler
