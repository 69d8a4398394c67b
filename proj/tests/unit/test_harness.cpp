#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "nibbler/harness.hpp"

using namespace nibbler;

namespace {

std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("nibbler_harness_" + name);
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig quick(Algorithm algorithm = Algorithm::Nibbler) {
  ExperimentConfig c;
  c.n = 1;
  c.algorithm = algorithm;
  c.nibbler.d = 8;
  c.nibbler.g = 16;
  c.baseline.hidden_dim = 8;
  c.total_steps = 3000;
  c.window = 500;
  c.interval = 250;
  return c;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("config validation names the field") {
  auto expect = [](const std::string& text, const std::string& field) {
    CHECK_THROWS_WITH_AS(parse_experiment_config(text), doctest::Contains(field.c_str()), std::invalid_argument);
  };
  expect("num_parallel = 0", "num_parallel");
  expect("seeds = ", "seeds");
  expect("seeds = 1, 1", "seeds");
  expect("total_steps = 10\nwindow = 100", "total_steps");
  expect("algorithm = sarsa", "algorithm");
  expect("slot_reset = partial", "slot_reset");
  expect("env = tiny", "env");
  expect("colour = blue", "colour");
  expect("p_reward = 2", "p_reward");
  expect("g = 500", "g");
  expect("gamma = 1.5", "gamma");
  expect("algorithm = q\nalpha = -1", "alpha");
  expect("window = abc", "window");
  CHECK_NOTHROW(parse_experiment_config("num_parallel = 4\nseeds = 1, 2, 3\nalgorithm = qv\nhidden_dim = 64"));
}

TEST_CASE("shared learner keys follow the algorithm") {
  auto nib = parse_experiment_config("alpha = 0.5");
  CHECK(nib.nibbler.alpha == 0.5);
  CHECK(nib.baseline.alpha == 0.001);
  auto q = parse_experiment_config("algorithm = q\nalpha = 0.5");
  CHECK(q.baseline.alpha == 0.5);
  CHECK_FALSE(q.nibbler.alpha.has_value());
}

TEST_CASE("nibbler config derives stepsizes before explicit overrides") {
  ExperimentConfig c;
  c.n = 2;
  c.nibbler.h = 8;
  auto nc = c.nibbler_config(112);
  CHECK(nc.alpha == doctest::Approx(0.001 * std::sqrt(2.0) / std::sqrt(8.0)));
  c.nibbler.alpha_b = 0.123;
  c.nibbler.tau = 0.5;
  nc = c.nibbler_config(112);
  CHECK(nc.alpha_b == 0.123);
  CHECK(nc.tau_inputs == 0.5);
  CHECK(nc.tau_cumulants == 0.5);
}

TEST_CASE("config hash covers learning fields only") {
  ExperimentConfig a;
  ExperimentConfig b = a;
  b.seeds = {4, 5};
  b.output_dir = "elsewhere";
  b.workers = 3;
  CHECK(a.hash() == b.hash());
  CHECK(a.hash().size() == 16);
  b.nibbler.kappa = 0.01;
  CHECK(a.hash() != b.hash());
  ExperimentConfig c = a;
  c.window = 5000;
  CHECK(a.hash() != c.hash());
}

TEST_CASE("same config and seed give byte-identical logs") {
  auto c = quick();
  c.seeds = {1, 2};
  const auto d1 = scratch_dir("det1"), d2 = scratch_dir("det2");
  c.output_dir = d1.string();
  const auto logs1 = run_experiment(c);
  c.output_dir = d2.string();
  c.workers = 2;
  const auto logs2 = run_experiment(c);
  REQUIRE(logs1.size() == 2);
  CHECK(logs1 == logs2);
  CHECK(logs1[0].points != logs1[1].points);
  CHECK(logs1[0].points.size() == 12);
  for (auto seed : c.seeds) {
    const auto name = std::filesystem::path(run_directory(c, seed)).filename();
    CHECK(slurp(d1 / name / "log.csv") == slurp(d2 / name / "log.csv"));
    CHECK(slurp(d1 / name / "meta.json") == slurp(d2 / name / "meta.json"));
  }
  std::filesystem::remove_all(d1);
  std::filesystem::remove_all(d2);
}

TEST_CASE("checkpoint and resume match an uninterrupted run") {
  for (auto algorithm : {Algorithm::Nibbler, Algorithm::QV}) {
    const auto c = quick(algorithm);
    const auto dir = scratch_dir("ckpt");
    const auto full = run_single(c, 7);

    RunControl stop;
    stop.checkpoint_at = 1234;
    stop.checkpoint_path = (dir / "run.ckpt").string();
    stop.stop_after_checkpoint = true;
    const auto partial = run_single(c, 7, stop);
    CHECK(partial.points.size() < full.points.size());

    RunControl resume;
    resume.resume_path = stop.checkpoint_path;
    CHECK(run_single(c, 7, resume) == full);
    CHECK_THROWS(run_single(c, 8, resume));
    auto other = c;
    other.total_steps = 4000;
    CHECK_THROWS(run_single(other, 7, resume));
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("reuse loads a completed run instead of recomputing") {
  auto c = quick(Algorithm::Q);
  const auto dir = scratch_dir("reuse");
  c.output_dir = dir.string();
  const auto first = run_experiment(c);
  // Tamper with the stored log: reuse must return the stored copy.
  const auto csv = std::filesystem::path(run_directory(c, 1)) / "log.csv";
  std::ofstream(csv) << "timestep,avg_reward\n500,0.5\n";
  ExperimentOptions reuse;
  reuse.reuse_existing = true;
  const auto loaded = run_experiment(c, reuse);
  REQUIRE(loaded[0].points.size() == 1);
  CHECK(loaded[0].points[0].avg_reward == 0.5);
  CHECK(run_experiment(c) == first);
  std::filesystem::remove_all(dir);
}

TEST_CASE("sweep grid expansion") {
  ExperimentConfig base;
  base.n = 2;
  SweepGrid grid;
  grid.h = {2, 4, 8};
  auto cells = expand_grid(base, grid);
  REQUIRE(cells.size() == 3);
  CHECK(cells[1].first.at("h") == "4");
  CHECK(cells[1].second.nibbler.h == 4u);

  grid.n = {1, 2};
  grid.stepsize = {0.1};
  cells = expand_grid(base, grid);
  CHECK(cells.size() == 6);
  CHECK(cells[0].second.nibbler.kappa == 0.1);

  ExperimentConfig q;
  q.algorithm = Algorithm::Q;
  SweepGrid hidden;
  hidden.hidden = {32, 64};
  hidden.stepsize = {0.01};
  const auto qc = expand_grid(q, hidden);
  CHECK(qc[1].second.baseline.hidden_dim == 64u);
  CHECK(qc[1].second.baseline.alpha == 0.01);
  CHECK_THROWS_AS(expand_grid(base, SweepGrid{}), std::invalid_argument);
}

TEST_CASE("sweep summary comes from the logs alone") {
  auto make = [](std::uint64_t seed, std::vector<double> values, bool diverged = false) {
    RunLog log;
    std::uint64_t t = 0;
    for (double v : values) log.points.push_back({t += 100, v});
    log.meta.seed = seed;
    log.meta.diverged = diverged;
    return log;
  };
  auto cell = summarize_cell({{"h", "4"}}, "abc", {make(1, {-1, 0.2, 0.3}), make(2, {-1, -1, 0.1})}, 0.0);
  CHECK(cell.status == "ok");
  CHECK(cell.final_reward == doctest::Approx(0.2));
  CHECK(cell.threshold.median == 250.0);
  cell = summarize_cell({}, "abc", {make(1, {0.1}), make(2, {0.5}, true)}, 0.0);
  CHECK(cell.status == "diverged");
  CHECK(cell.final_reward == doctest::Approx(0.1));

  ExperimentConfig c = quick(Algorithm::Q);
  c.output_dir = scratch_dir("sweep").string();
  SweepGrid grid;
  grid.hidden = {4, 0};  // the second cell is invalid and must not stop the sweep
  const auto cells = run_sweep(c, grid);
  REQUIRE(cells.size() == 2);
  CHECK(cells[0].status == "ok");
  CHECK(cells[1].status.rfind("failed", 0) == 0);
  const auto json = sweep_to_json(cells);
  CHECK(json.find("\"failed") != std::string::npos);
  CHECK(sweep_to_csv(cells).find("hidden") != std::string::npos);
  std::filesystem::remove_all(c.output_dir);
}

TEST_CASE("a run with non-finite weights is marked diverged and stops") {
  auto c = quick();
  c.nibbler.alpha = 1e6;
  const auto log = run_single(c, 1);
  CHECK(log.meta.diverged);
  REQUIRE(log.meta.diverged_at.has_value());
  CHECK(*log.meta.diverged_at < c.total_steps);
  CHECK(log.points.back().timestep == *log.meta.diverged_at);
  auto cell = summarize_cell({}, c.hash(), {log}, 0.0);
  CHECK(cell.status == "diverged");
}
