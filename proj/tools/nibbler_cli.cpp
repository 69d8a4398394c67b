// nibbler: run experiments, sweeps, metrics and brute-force validators.
//
// Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
// 3 at least one run diverged.

#include <CLI11.hpp>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "nibbler/harness.hpp"
#include "oracles.hpp"

using namespace nibbler;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitInvalid = 2;
constexpr int kExitDiverged = 3;

std::string read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  out << content;
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

// Flags become config keys; a config file given with --config wins over them.
struct ConfigFlags {
  std::string config_path;
  std::map<std::string, std::string> values;

  void add(CLI::App* app) {
    app->set_help_flag("--help", "Print this help message and exit");  // frees --h for the question count
    app->add_option("-c,--config", config_path, "Plain-text key = value config file")->check(CLI::ExistingFile);
    for (const char* key : {"env", "num_parallel", "p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols",
                            "p_hot", "wind", "permute", "algorithm", "h", "g", "d", "kappa", "alpha", "alpha_b",
                            "tau", "gamma", "epsilon", "nu", "slot_reset", "hidden_dim", "total_steps", "seeds",
                            "window", "interval", "r_thresh", "output_dir", "workers"}) {
      std::string flag = std::string("--") + key;
      app->add_option_function<std::string>(flag, [this, k = std::string(key)](const std::string& v) { values[k] = v; },
                                            "Config key '" + std::string(key) + "'");
    }
  }

  ExperimentConfig build() const {
    KeyValues kv;
    for (const auto& [k, v] : values) kv.set(k, v);
    if (!config_path.empty()) {
      for (const auto& [k, v] : KeyValues::parse(read_file(config_path)).entries()) kv.set(k, v);
    }
    ExperimentConfig config;
    apply_config(config, kv);
    config.validate();
    return config;
  }
};

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

int cmd_run(const ConfigFlags& flags, bool reuse) {
  const auto config = flags.build();
  ExperimentOptions options;
  options.reuse_existing = reuse;
  const auto logs = run_experiment(config, options);
  bool diverged = false;
  for (const auto& log : logs) {
    const auto t = timesteps_to_threshold(log, config.r_thresh);
    std::cout << run_directory(config, log.meta.seed) << "  final=" << format_double(log.final_reward().value_or(NAN))
              << "  t_threshold=" << (t ? std::to_string(*t) : "none") << (log.meta.diverged ? "  DIVERGED" : "")
              << '\n';
    diverged = diverged || log.meta.diverged;
  }
  return diverged ? kExitDiverged : 0;
}

int cmd_sweep(const ConfigFlags& flags, const SweepGrid& grid, bool reuse) {
  const auto config = flags.build();
  ExperimentOptions options;
  options.reuse_existing = reuse;
  const auto cells = run_sweep(config, grid, options);
  const std::filesystem::path out(config.output_dir);
  write_file(out / "sweep_summary.json", sweep_to_json(cells));
  write_file(out / "sweep_summary.csv", sweep_to_csv(cells));
  std::cout << sweep_to_csv(cells);
  for (const auto& c : cells)
    if (c.status == "diverged") return kExitDiverged;
  return 0;
}

// Groups run directories by (algorithm, n) and reports median thresholds and
// doubling ratios between n and 2n of the same algorithm.
int cmd_metrics(const std::vector<std::string>& dirs, double r_thresh) {
  std::map<std::pair<std::string, std::size_t>, std::vector<RunLog>> groups;
  for (const auto& d : dirs) {
    auto log = read_run(d);
    if (!log) throw std::runtime_error("no completed run in " + d);
    groups[{log->meta.algorithm, log->meta.n}].push_back(std::move(*log));
  }
  std::map<std::pair<std::string, std::size_t>, ThresholdAggregate> agg;
  auto out = nlohmann::ordered_json::array();
  for (const auto& [key, logs] : groups) {
    std::vector<std::optional<std::uint64_t>> per_seed;
    auto seeds = nlohmann::ordered_json::array();
    for (const auto& log : logs) {
      per_seed.push_back(log.meta.diverged ? std::nullopt : timesteps_to_threshold(log, r_thresh));
      seeds.push_back(log.meta.seed);
    }
    agg[key] = aggregate_thresholds(per_seed);
    nlohmann::ordered_json j;
    j["n"] = key.second;
    j["algorithm"] = key.first;
    j["t_threshold"] = optional_json(agg[key].median);
    j["t_threshold_min"] = optional_json(agg[key].min);
    j["t_threshold_max"] = optional_json(agg[key].max);
    j["seeds"] = seeds;
    j["doubling_ratios"] = nlohmann::ordered_json::object();
    out.push_back(std::move(j));
  }
  for (auto& j : out) {
    const std::pair<std::string, std::size_t> key{j["algorithm"].get<std::string>(), j["n"].get<std::size_t>()};
    const auto doubled = agg.find({key.first, key.second * 2});
    if (doubled == agg.end()) continue;
    const auto& a = agg[key].median;
    const auto& b = doubled->second.median;
    std::optional<double> ratio;
    if (a && b && *a > 0) ratio = *b / *a;
    j["doubling_ratios"][std::to_string(key.second * 2)] = optional_json(ratio);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_oracle(const ConfigFlags& flags, std::uint64_t steps, std::uint64_t seed) {
  const auto config = flags.build();
  if (config.heterogeneous) throw std::invalid_argument("oracle: needs a standard board");
  const BoardConfig board = config.board.apply(BoardConfig{});
  board.validate();
  const double exact = oracle::catch_uniform_average_reward(board);

  MultiCatchEnv env({board}, seed, false);
  Rng policy(derive_seed(seed, "dump-policy"));
  std::vector<double> rewards;
  rewards.reserve(steps);
  for (std::uint64_t t = 0; t < steps; ++t)
    rewards.push_back(env.step(static_cast<Action>(policy.below(kNumActions))).reward);
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(rewards.size());
  const double se = oracle::batch_means_standard_error(rewards);
  const double z = (mean - exact) / se;
  std::cout << "uniform-policy average reward: exact " << format_double(exact) << ", simulated "
            << format_double(mean) << " (se " << format_double(se) << ", z " << format_double(z) << ")\n";
  return std::abs(z) <= 3.0 ? 0 : kExitRuntime;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nibbler multi-catch experiments"};
  app.require_subcommand(1);

  ConfigFlags run_flags, sweep_flags, oracle_flags;
  bool reuse = false;

  auto* run = app.add_subcommand("run", "Run every seed of one configuration");
  run_flags.add(run);
  run->add_flag("--reuse", reuse, "Skip seeds whose run directory already holds a completed log");

  auto* sweep = app.add_subcommand("sweep", "Cartesian sweep over grid axes");
  sweep_flags.add(sweep);
  SweepGrid grid;
  sweep->add_option("--grid-n", grid.n, "Board counts")->delimiter(',');
  sweep->add_option("--grid-hidden", grid.hidden, "Hidden widths (d or hidden_dim)")->delimiter(',');
  sweep->add_option("--grid-g", grid.g, "Answer-network input counts")->delimiter(',');
  sweep->add_option("--grid-h", grid.h, "Question counts")->delimiter(',');
  sweep->add_option("--grid-stepsize", grid.stepsize, "kappa (nibbler) or alpha (baselines)")->delimiter(',');
  sweep->add_flag("--reuse", reuse, "Skip runs that already hold a completed log");

  auto* metrics = app.add_subcommand("metrics", "Thresholds and doubling ratios from run directories");
  std::vector<std::string> dirs;
  double r_thresh = 0.0;
  metrics->add_option("dirs", dirs, "Run directories")->required()->check(CLI::ExistingDirectory);
  metrics->add_option("--r_thresh", r_thresh, "Performance threshold");

  auto* orc = app.add_subcommand("oracle", "Compare one board's simulated uniform-policy reward with the exact value");
  oracle_flags.add(orc);
  std::uint64_t oracle_steps = 1'000'000, oracle_seed = 1;
  orc->add_option("--steps", oracle_steps, "Simulated steps");
  orc->add_option("--seed", oracle_seed, "Dynamics seed");

  auto* dump = app.add_subcommand("dump", "Write an environment trajectory under a uniform policy");
  std::string env_path;
  std::size_t dump_steps = 100;
  std::uint64_t policy_seed = 0;
  dump->add_option("env", env_path, "Environment config file")->required()->check(CLI::ExistingFile);
  dump->add_option("--steps", dump_steps, "Number of steps");
  dump->add_option("--policy-seed", policy_seed, "Seed for the random policy");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(run_flags, reuse);
    if (*sweep) return cmd_sweep(sweep_flags, grid, reuse);
    if (*metrics) return cmd_metrics(dirs, r_thresh);
    if (*orc) return cmd_oracle(oracle_flags, oracle_steps, oracle_seed);
    if (*dump) {
      auto env = parse_env_spec(read_file(env_path)).build();
      dump_trajectory(env, dump_steps, policy_seed, std::cout);
      return 0;
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
