#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "nibbler/multicatch.hpp"

using namespace nibbler;

namespace {

int phase_bits(const std::vector<std::uint8_t>& obs, const BoardConfig& c, const BoardState& s) {
  int count = obs[c.reset_bit()] + obs[c.catch_bit()] + obs[c.miss_bit()] + obs[c.plus_bit()] + obs[c.minus_bit()];
  // The ball cell counts as the phase bit while falling, unless it coincides
  // with the paddle cell.
  if (s.phase == Phase::Falling) count += 1;
  return count;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("reset with no arrival self-loops with zero reward") {
  BoardConfig c;
  c.p_arrival = 0.0;
  c.paddle_noise = 0.0;
  Rng rng(1);
  BoardState s{Phase::Reset, 0, 0, 2, false};
  auto out = board_step(s, c, Action::Stay, rng);
  CHECK(out.state == s);
  CHECK(out.reward == 0);
}

TEST_CASE("plus hold exits with +1 and clears hot") {
  BoardConfig c;
  c.p_reward = 1.0;
  c.paddle_noise = 0.0;
  Rng rng(1);
  auto out = board_step(BoardState{Phase::PlusHold, 0, 0, 1, true}, c, Action::Stay, rng);
  CHECK(out.reward == 1);
  CHECK(out.state.phase == Phase::Reset);
  CHECK_FALSE(out.state.hot);
  out = board_step(BoardState{Phase::MinusHold, 0, 0, 1, true}, c, Action::Stay, rng);
  CHECK(out.reward == -1);
}

TEST_CASE("cold catch emits nothing and returns to reset") {
  BoardConfig c;
  c.paddle_noise = 0.0;
  c.p_arrival = 0.0;
  Rng rng(1);
  auto a = board_step(BoardState{Phase::Falling, 9, 3, 3, false}, c, Action::Left, rng);
  CHECK(a.state.phase == Phase::Catch);
  CHECK(a.state.paddle_col == 2);  // the paddle still moves on the deciding step
  CHECK(a.reward == 0);
  auto b = board_step(a.state, c, Action::Stay, rng);
  CHECK(b.state.phase == Phase::Reset);
  CHECK(b.reward == 0);
}

TEST_CASE("hot miss leads to minus hold") {
  BoardConfig c;
  c.paddle_noise = 0.0;
  c.p_reward = 0.0;
  Rng rng(1);
  auto a = board_step(BoardState{Phase::Falling, 9, 0, 4, true}, c, Action::Left, rng);
  CHECK(a.state.phase == Phase::Miss);
  CHECK(a.reward == 0);
  auto b = board_step(a.state, c, Action::Stay, rng);
  CHECK(b.state.phase == Phase::MinusHold);
  CHECK(b.reward == 0);
}

TEST_CASE("paddle movement does not change the outcome decided in the bottom row") {
  BoardConfig c;
  c.paddle_noise = 0.0;
  Rng rng(1);
  auto out = board_step(BoardState{Phase::Falling, 9, 2, 3, true}, c, Action::Left, rng);
  CHECK(out.state.phase == Phase::Miss);
  CHECK(out.state.paddle_col == 2);
}

TEST_CASE("arrival sets hot with p_hot and wind is clipped at the edge") {
  BoardConfig c;
  c.p_arrival = 1.0;
  c.p_hot = 1.0;
  c.paddle_noise = 0.0;
  c.wind = 1;
  Rng rng(5);
  auto a = board_step(BoardState{Phase::Reset, 0, 0, 0, false}, c, Action::Stay, rng);
  CHECK(a.state.phase == Phase::Falling);
  CHECK(a.state.row == 0);
  CHECK(a.state.hot);
  BoardState s{Phase::Falling, 3, 4, 0, true};
  auto b = board_step(s, c, Action::Stay, rng);
  CHECK(b.state.ball_col == 4);
  CHECK(b.state.row == 4);
  c.p_hot = 0.0;
  auto d = board_step(BoardState{Phase::Reset, 0, 0, 0, false}, c, Action::Stay, rng);
  CHECK_FALSE(d.state.hot);
}

TEST_CASE("paddle stays on the board") {
  BoardConfig c;
  c.paddle_noise = 0.0;
  Rng rng(1);
  CHECK(board_step(BoardState{Phase::Reset, 0, 0, 0, false}, c, Action::Left, rng).state.paddle_col == 0);
  CHECK(board_step(BoardState{Phase::Reset, 0, 0, 4, false}, c, Action::Right, rng).state.paddle_col == 4);
}

TEST_CASE("board_observe examples") {
  BoardConfig c;
  SUBCASE("reset") {
    auto o = board_observe(BoardState{Phase::Reset, 0, 0, 2, false}, c);
    CHECK(o.size() == 56);
    CHECK(o[c.reset_bit()] == 1);
    CHECK(o[c.cell_bit(9, 2)] == 1);
    CHECK(std::count(o.begin(), o.end(), 1) == 2);
  }
  SUBCASE("falling") {
    auto o = board_observe(BoardState{Phase::Falling, 0, 4, 1, true}, c);
    CHECK(o[c.cell_bit(0, 4)] == 1);
    CHECK(o[c.cell_bit(9, 1)] == 1);
    CHECK(o[c.hot_bit()] == 1);
    CHECK(std::count(o.begin(), o.end(), 1) == 3);
  }
  SUBCASE("plus hold") {
    auto o = board_observe(BoardState{Phase::PlusHold, 0, 0, 3, true}, c);
    CHECK(o[c.plus_bit()] == 1);
    CHECK(o[c.hot_bit()] == 1);
    CHECK(o[c.cell_bit(9, 3)] == 1);
    CHECK(std::count(o.begin(), o.end(), 1) == 3);
  }
}

TEST_CASE("sizes and p_hot from make_multicatch") {
  CHECK(make_multicatch(4, 1).observation_size() == 224);
  CHECK(make_multicatch(2, 1).config(0).p_hot == 1.0);
  CHECK(make_multicatch(1, 1).config(0).p_hot == 1.0);
  CHECK(make_multicatch(8, 1).config(0).p_hot == 0.25);
  CHECK(make_multicatch(128, 1).observation_size() == 7168);
  CHECK_THROWS_AS(make_multicatch(0, 1), std::invalid_argument);
  BoardOverrides bad;
  bad.p_arrival = 1.5;
  CHECK_THROWS_AS(make_multicatch(2, 1, bad), std::invalid_argument);
}

TEST_CASE("every block has one phase bit, a paddle bit and a mirrored hot bit") {
  auto env = make_multicatch(3, 9, {}, false);
  Rng policy(2);
  for (int t = 0; t < 10000; ++t) {
    const auto obs = env.unpermuted_observation();
    for (std::size_t i = 0; i < env.num_boards(); ++i) {
      const auto& c = env.config(i);
      const auto& s = env.state(i);
      REQUIRE(is_valid_state(s, c));
      std::vector<std::uint8_t> block(obs.begin() + static_cast<long>(env.block_offset(i)),
                                      obs.begin() + static_cast<long>(env.block_offset(i)) + c.observation_size());
      REQUIRE(phase_bits(block, c, s) == 1);
      REQUIRE(block[c.cell_bit(c.num_rows - 1, s.paddle_col)] == 1);
      REQUIRE(block[c.hot_bit()] == (s.hot ? 1 : 0));
    }
    env.step(static_cast<Action>(policy.below(3)));
  }
}

TEST_CASE("nonzero reward only follows a plus or minus bit on the same board") {
  BoardConfig c;
  Rng rng(17), policy(4);
  BoardState s;
  for (int t = 0; t < 100000; ++t) {
    const auto before = board_observe(s, c);
    auto out = board_step(s, c, static_cast<Action>(policy.below(3)), rng);
    if (out.reward == 1) REQUIRE(before[c.plus_bit()] == 1);
    if (out.reward == -1) REQUIRE(before[c.minus_bit()] == 1);
    s = out.state;
  }
}

TEST_CASE("reset is re-entered within bounded time from any state") {
  BoardConfig c;
  Rng rng(8), policy(9);
  Rng pick(10);
  for (int rep = 0; rep < 2000; ++rep) {
    BoardState s;
    s.phase = static_cast<Phase>(pick.below(6));
    s.paddle_col = static_cast<int>(pick.below(5));
    s.hot = s.phase == Phase::PlusHold || s.phase == Phase::MinusHold || pick.bernoulli(0.5);
    s.row = static_cast<int>(pick.below(10));
    s.ball_col = static_cast<int>(pick.below(5));
    int steps = 0;
    while (s.phase != Phase::Reset && steps < 1000) {
      s = board_step(s, c, static_cast<Action>(policy.below(3)), rng).state;
      ++steps;
    }
    REQUIRE(s.phase == Phase::Reset);
  }
}

TEST_CASE("env reward is the sum of independently stepped boards") {
  BoardOverrides o;
  o.p_reward = 0.7;
  auto env = make_multicatch(3, 21, o);
  std::vector<Rng> rngs;
  std::vector<BoardState> states(3);
  for (std::size_t i = 0; i < 3; ++i) {
    rngs.emplace_back(derive_seed(21, "board", i));
    states[i].paddle_col = static_cast<int>(rngs[i].below(5));
  }
  Rng policy(6);
  bool saw_cancel = false;
  for (int t = 0; t < 20000; ++t) {
    auto a = static_cast<Action>(policy.below(3));
    int sum = 0, plus = 0, minus = 0;
    for (std::size_t i = 0; i < 3; ++i) {
      auto out = board_step(states[i], env.config(i), a, rngs[i]);
      states[i] = out.state;
      sum += out.reward;
      plus += out.reward > 0;
      minus += out.reward < 0;
    }
    REQUIRE(env.step(a).reward == sum);
    saw_cancel = saw_cancel || (plus > 0 && minus > 0);
    for (std::size_t i = 0; i < 3; ++i) REQUIRE(env.state(i) == states[i]);
  }
  CHECK(saw_cancel);
}

TEST_CASE("all boards in reset without arrivals give zero reward") {
  BoardOverrides o;
  o.p_arrival = 0.0;
  auto env = make_multicatch(4, 2, o);
  for (int t = 0; t < 100; ++t) CHECK(env.step(Action::Stay).reward == 0);
}

TEST_CASE("permuted observation equals the permutation of the identity observation") {
  auto plain = make_multicatch(2, 77, {}, false);
  auto perm = make_multicatch(2, 77, {}, true);
  std::set<std::uint32_t> check(perm.permutation().begin(), perm.permutation().end());
  REQUIRE(check.size() == perm.observation_size());
  Rng policy(5);
  for (int t = 0; t < 10000; ++t) {
    const auto& a = plain.observation();
    const auto& b = perm.observation();
    for (std::size_t j = 0; j < b.size(); ++j) REQUIRE(b[j] == a[perm.permutation()[j]]);
    auto act = static_cast<Action>(policy.below(3));
    auto ra = plain.step(act).reward;
    auto rb = perm.step(act).reward;
    REQUIRE(ra == rb);
  }
}

TEST_CASE("heterogeneous boards follow their ranges and are reproducible") {
  auto configs = heterogeneous_configs(64, 5);
  for (const auto& c : configs) {
    CHECK(c.num_rows >= 5);
    CHECK(c.num_rows <= 10);
    CHECK((c.wind == -1 || c.wind == 1));
    CHECK(c.p_arrival >= 0.05);
    CHECK(c.p_arrival <= 1.0);
    CHECK(c.p_reward >= 0.05);
    CHECK(c.p_reward <= 1.0);
    CHECK(c.num_cols == 5);
  }
  CHECK(configs == heterogeneous_configs(64, 5));
  auto a = make_heterogeneous(3, 5);
  auto b = make_heterogeneous(3, 5);
  for (int t = 0; t < 500; ++t) {
    REQUIRE(a.observation() == b.observation());
    REQUIRE(a.step(Action::Left).reward == b.step(Action::Left).reward);
  }
}

TEST_CASE("snapshot restores dynamics mid-run") {
  auto env = make_multicatch(2, 12);
  for (int t = 0; t < 300; ++t) env.step(static_cast<Action>(t % 3));
  std::stringstream snap;
  env.save(snap);
  auto other = make_multicatch(2, 99);
  CHECK_THROWS(other.load(snap));  // different permutation
  snap.clear();
  snap.seekg(0);
  auto same = make_multicatch(2, 12);
  same.load(snap);
  for (int t = 0; t < 300; ++t) {
    REQUIRE(env.step(static_cast<Action>(t % 3)).reward == same.step(static_cast<Action>(t % 3)).reward);
    REQUIRE(env.observation() == same.observation());
  }
}

TEST_CASE("environment config file") {
  auto spec = parse_env_spec("num_parallel = 3\np_arrival = 0.5\nnum_rows = 6\nseed = 4\npermute = false\n");
  auto env = spec.build();
  CHECK(env.num_boards() == 3);
  CHECK(env.config(0).p_arrival == 0.5);
  CHECK(env.observation_size() == 3 * 36);
  CHECK_THROWS_AS(parse_env_spec("num_parallel = 0\n").build(), std::invalid_argument);
  CHECK_THROWS_AS(parse_env_spec("bogus = 1\n"), std::invalid_argument);
}

TEST_CASE("trajectory dump matches the stored golden file") {
  auto env = parse_env_spec(read_text(NIBBLER_GOLDEN_DIR "/env_n2.cfg")).build();
  std::ostringstream out;
  dump_trajectory(env, 200, 3, out);
  CHECK(out.str() == read_text(NIBBLER_GOLDEN_DIR "/trajectory_n2.txt"));
}
