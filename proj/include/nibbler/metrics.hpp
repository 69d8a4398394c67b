#pragma once

// Average-reward tracking and the scaling metrics: timesteps to a sustained
// performance threshold, and the ratio of those timesteps when the problem
// size doubles.

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace nibbler {

struct EvalPoint {
  std::uint64_t timestep = 0;
  double avg_reward = 0.0;
  bool operator==(const EvalPoint&) const = default;
};

struct RunMeta {
  std::size_t n = 0;
  std::string algorithm;
  std::uint64_t seed = 0;
  std::string config_hash;
  std::size_t window = 100000;
  std::size_t interval = 10000;
  std::uint64_t total_steps = 0;
  std::uint64_t parameter_count = 0;
  bool diverged = false;
  std::optional<std::uint64_t> diverged_at;

  bool operator==(const RunMeta&) const = default;
};

struct RunLog {
  std::vector<EvalPoint> points;
  RunMeta meta;

  std::optional<double> final_reward() const;
  bool operator==(const RunLog&) const = default;
};

/// Trailing-window mean of per-step rewards, emitted every `interval` steps.
/// Before `window` rewards have arrived the mean is over all rewards so far.
class RewardSmoother {
 public:
  RewardSmoother(std::size_t window, std::size_t interval);

  /// Adds the reward of step t (t counts from 1). Returns an eval point when
  /// t is a multiple of the interval.
  std::optional<EvalPoint> push(double reward);

  std::uint64_t steps() const { return steps_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  std::size_t window_;
  std::size_t interval_;
  std::uint64_t steps_ = 0;
  std::vector<double> ring_;
  std::size_t head_ = 0;  // slot receiving the next reward
};

std::vector<EvalPoint> smoothed_average(std::span<const double> rewards, std::size_t window, std::size_t interval);

/// Exponentially weighted alternative: s <- beta s + (1 - beta) r, with the
/// usual bias correction 1 / (1 - beta^t).
std::vector<EvalPoint> ewma_average(std::span<const double> rewards, double beta, std::size_t interval);

/// Earliest eval timestep whose value, and every later value, is >= threshold.
std::optional<std::uint64_t> timesteps_to_threshold(std::span<const EvalPoint> points, double threshold);
inline std::optional<std::uint64_t> timesteps_to_threshold(const RunLog& log, double threshold) {
  return timesteps_to_threshold(log.points, threshold);
}

/// t_2n / t_n; absent when either input is absent or t_n is zero.
std::optional<double> doubling_ratio(std::optional<std::uint64_t> t_2n, std::optional<std::uint64_t> t_n);

struct ThresholdAggregate {
  std::optional<double> median;  // absent when at least half the seeds never reach
  std::optional<double> min;
  std::optional<double> max;     // absent when any seed never reaches
  std::size_t reached = 0;
  std::size_t total = 0;
};

/// Median across seeds, counting a seed that never reaches as +infinity.
ThresholdAggregate aggregate_thresholds(std::span<const std::optional<std::uint64_t>> per_seed);

// CSV: header "timestep,avg_reward", then one row per eval point.
void write_csv(std::ostream& out, const RunLog& log);
std::vector<EvalPoint> read_csv(std::istream& in);

std::string meta_to_json(const RunMeta& meta);
RunMeta meta_from_json(const std::string& text);

/// Writes <dir>/log.csv then <dir>/meta.json, each via a temporary file and a
/// rename; meta.json marks the run as complete.
void write_run(const std::string& dir, const RunLog& log);
std::optional<RunLog> read_run(const std::string& dir);

/// Text formatting used in CSV/JSON so that logs are byte-reproducible.
std::string format_double(double v);

}  // namespace nibbler
