#pragma once

// Experiment driver: configuration, seeded runs, checkpoints and sweeps.

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "nibbler/agent.hpp"
#include "nibbler/baselines.hpp"
#include "nibbler/keyvalue.hpp"
#include "nibbler/metrics.hpp"
#include "nibbler/multicatch.hpp"
#include "nibbler/nibbler.hpp"

namespace nibbler {

enum class Algorithm : std::uint8_t { Nibbler, Q, QV };

std::string to_string(Algorithm a);
Algorithm parse_algorithm(const std::string& text);

/// Nibbler hyperparameters left unset fall back to default_config; alpha and
/// alpha_b, when unset, are derived from kappa and h.
struct NibblerOverrides {
  std::optional<std::size_t> h, g, d;
  std::optional<double> kappa, alpha, alpha_b, tau, gamma, epsilon, nu;
  std::optional<SlotResetMode> slot_reset;
};

struct ExperimentConfig {
  // Environment.
  std::size_t n = 2;
  bool heterogeneous = false;
  bool permute = true;
  BoardOverrides board;

  // Learner.
  Algorithm algorithm = Algorithm::Nibbler;
  NibblerOverrides nibbler;
  BaselineConfig baseline;

  // Run.
  std::uint64_t total_steps = 1'000'000;
  std::vector<std::uint64_t> seeds{1};
  std::size_t window = 100000;
  std::size_t interval = 10000;
  double r_thresh = 0.0;
  std::string output_dir = "runs";
  std::size_t workers = 1;

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;

  /// Every field that influences a run's log, as sorted "key = value" lines.
  /// Seeds, output location and worker count are excluded.
  std::string canonical_text() const;
  /// 16 hex digits of FNV-1a over canonical_text().
  std::string hash() const;

  NibblerConfig nibbler_config(std::size_t m) const;
  BaselineConfig baseline_config() const;
};

/// Applies recognized keys from a plain-text config on top of `base`.
/// Keys: env (standard|heterogeneous), num_parallel, p_arrival, p_reward,
/// paddle_noise, num_rows, num_cols, p_hot, permute, algorithm
/// (nibbler|q|qv), h, g, d, kappa, alpha, alpha_b, tau, gamma, epsilon, nu,
/// slot_reset (full|net), hidden_dim, total_steps, seeds, window, interval,
/// r_thresh, output_dir, workers.
void apply_config(ExperimentConfig& config, const KeyValues& kv);
ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig base = {});

MultiCatchEnv make_env(const ExperimentConfig& config, std::uint64_t seed);
std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, std::size_t m, std::uint64_t seed);

struct RunControl {
  /// Write a checkpoint after this many environment steps.
  std::optional<std::uint64_t> checkpoint_at;
  std::string checkpoint_path;
  /// Return right after writing the checkpoint (the log is partial).
  bool stop_after_checkpoint = false;
  /// Continue from a checkpoint written by a run with the same config and seed.
  std::string resume_path;
  /// Called at each eval point.
  std::function<void(const EvalPoint&)> on_eval;
};

/// One seed: env ("env" sub-seed) and agent ("agent" sub-seed) stepped for
/// total_steps. A run whose weights become non-finite stops at that eval point
/// and is marked diverged.
RunLog run_single(const ExperimentConfig& config, std::uint64_t seed, const RunControl& control = {});

std::string run_directory(const ExperimentConfig& config, std::uint64_t seed);

struct ExperimentOptions {
  /// Load a completed run from its directory instead of recomputing it.
  bool reuse_existing = false;
  /// Write each run under run_directory().
  bool write_logs = true;
};

/// All seeds, scheduled on up to config.workers threads; results in seed order.
std::vector<RunLog> run_experiment(const ExperimentConfig& config, const ExperimentOptions& options = {});

struct SweepGrid {
  std::vector<std::size_t> n;
  std::vector<std::size_t> hidden;  // d for nibbler, hidden_dim for baselines
  std::vector<std::size_t> g;
  std::vector<std::size_t> h;
  std::vector<double> stepsize;     // kappa for nibbler, alpha for baselines

  bool empty() const { return n.empty() && hidden.empty() && g.empty() && h.empty() && stepsize.empty(); }
};

struct SweepCell {
  std::map<std::string, std::string> params;
  std::string config_hash;
  std::vector<RunLog> logs;
  ThresholdAggregate threshold;
  std::optional<double> final_reward;  // mean over seeds of the last eval value
  std::string status;                  // "ok", "diverged" or "failed: <reason>"
};

/// Cell statistics computed only from the logs.
SweepCell summarize_cell(std::map<std::string, std::string> params, std::string hash, std::vector<RunLog> logs,
                         double r_thresh);

/// Configurations for the Cartesian product of the non-empty grid axes.
std::vector<std::pair<std::map<std::string, std::string>, ExperimentConfig>> expand_grid(
    const ExperimentConfig& base, const SweepGrid& grid);

std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                 const ExperimentOptions& options = {});

std::string sweep_to_json(const std::vector<SweepCell>& cells);
std::string sweep_to_csv(const std::vector<SweepCell>& cells);

}  // namespace nibbler
