#include "nibbler/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "nibbler/snapshot.hpp"

namespace nibbler {

std::optional<double> RunLog::final_reward() const {
  if (points.empty()) return std::nullopt;
  return points.back().avg_reward;
}

RewardSmoother::RewardSmoother(std::size_t window, std::size_t interval)
    : window_(window), interval_(interval), ring_(window, 0.0) {
  if (window_ < 1) throw std::invalid_argument("RewardSmoother: window must be at least 1");
  if (interval_ < 1) throw std::invalid_argument("RewardSmoother: interval must be at least 1");
}

std::optional<EvalPoint> RewardSmoother::push(double reward) {
  ring_[head_] = reward;
  head_ = (head_ + 1) % window_;
  ++steps_;
  if (steps_ % interval_ != 0) return std::nullopt;

  // Exact re-summation in arrival order, oldest first.
  const std::size_t count = static_cast<std::size_t>(std::min<std::uint64_t>(steps_, window_));
  std::size_t idx = (head_ + window_ - count) % window_;
  double sum = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    sum += ring_[idx];
    idx = idx + 1 == window_ ? 0 : idx + 1;
  }
  return EvalPoint{steps_, sum / static_cast<double>(count)};
}

void RewardSmoother::save(std::ostream& out) const {
  SnapshotWriter w(out);
  w.tag("RewardSmoother");
  w.u64(window_);
  w.u64(interval_);
  w.u64(steps_);
  w.u64(head_);
  for (double r : ring_) w.f64(r);
}

void RewardSmoother::load(std::istream& in) {
  SnapshotReader r(in);
  r.expect_tag("RewardSmoother");
  if (r.u64() != window_ || r.u64() != interval_)
    throw std::runtime_error("RewardSmoother snapshot: window or interval mismatch");
  steps_ = r.u64();
  head_ = r.u64();
  if (head_ >= window_) throw std::runtime_error("RewardSmoother snapshot: bad ring position");
  for (double& v : ring_) v = r.f64();
}

std::vector<EvalPoint> smoothed_average(std::span<const double> rewards, std::size_t window, std::size_t interval) {
  RewardSmoother smoother(window, interval);
  std::vector<EvalPoint> out;
  for (double r : rewards)
    if (auto p = smoother.push(r)) out.push_back(*p);
  return out;
}

std::vector<EvalPoint> ewma_average(std::span<const double> rewards, double beta, std::size_t interval) {
  if (!(beta >= 0.0 && beta < 1.0)) throw std::invalid_argument("ewma_average: beta must lie in [0, 1)");
  if (interval < 1) throw std::invalid_argument("ewma_average: interval must be at least 1");
  std::vector<EvalPoint> out;
  double s = 0.0;
  double decay = 1.0;
  for (std::size_t t = 1; t <= rewards.size(); ++t) {
    s = beta * s + (1.0 - beta) * rewards[t - 1];
    decay *= beta;
    if (t % interval == 0) out.push_back({t, s / (1.0 - decay)});
  }
  return out;
}

std::optional<std::uint64_t> timesteps_to_threshold(std::span<const EvalPoint> points, double threshold) {
  std::optional<std::uint64_t> result;
  for (auto it = points.rbegin(); it != points.rend(); ++it) {
    if (!(it->avg_reward >= threshold)) break;
    result = it->timestep;
  }
  return result;
}

std::optional<double> doubling_ratio(std::optional<std::uint64_t> t_2n, std::optional<std::uint64_t> t_n) {
  if (!t_2n || !t_n || *t_n == 0) return std::nullopt;
  return static_cast<double>(*t_2n) / static_cast<double>(*t_n);
}

ThresholdAggregate aggregate_thresholds(std::span<const std::optional<std::uint64_t>> per_seed) {
  ThresholdAggregate agg;
  agg.total = per_seed.size();
  std::vector<double> values;
  for (const auto& t : per_seed) {
    if (t) {
      values.push_back(static_cast<double>(*t));
      ++agg.reached;
    } else {
      values.push_back(std::numeric_limits<double>::infinity());
    }
  }
  if (values.empty()) return agg;
  std::sort(values.begin(), values.end());
  const std::size_t k = values.size();
  const double med = k % 2 == 1 ? values[k / 2] : 0.5 * (values[k / 2 - 1] + values[k / 2]);
  if (std::isfinite(med)) agg.median = med;
  if (std::isfinite(values.front())) agg.min = values.front();
  if (std::isfinite(values.back())) agg.max = values.back();
  return agg;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_csv(std::ostream& out, const RunLog& log) {
  out << "timestep,avg_reward\n";
  for (const auto& p : log.points) out << p.timestep << ',' << format_double(p.avg_reward) << '\n';
}

std::vector<EvalPoint> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "timestep,avg_reward")
    throw std::runtime_error("run log CSV: missing 'timestep,avg_reward' header");
  std::vector<EvalPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) throw std::runtime_error("run log CSV: malformed row '" + line + "'");
    EvalPoint p;
    p.timestep = std::stoull(line.substr(0, comma));
    p.avg_reward = std::stod(line.substr(comma + 1));
    if (!points.empty() && p.timestep <= points.back().timestep)
      throw std::runtime_error("run log CSV: timesteps must be strictly increasing");
    points.push_back(p);
  }
  return points;
}

std::string meta_to_json(const RunMeta& meta) {
  nlohmann::ordered_json j;
  j["n"] = meta.n;
  j["algorithm"] = meta.algorithm;
  j["seed"] = meta.seed;
  j["config_hash"] = meta.config_hash;
  j["window"] = meta.window;
  j["interval"] = meta.interval;
  j["total_steps"] = meta.total_steps;
  j["parameter_count"] = meta.parameter_count;
  j["diverged"] = meta.diverged;
  j["diverged_at"] = meta.diverged_at ? nlohmann::ordered_json(*meta.diverged_at) : nlohmann::ordered_json();
  return j.dump(2) + "\n";
}

RunMeta meta_from_json(const std::string& text) {
  auto j = nlohmann::json::parse(text);
  RunMeta meta;
  meta.n = j.at("n").get<std::size_t>();
  meta.algorithm = j.at("algorithm").get<std::string>();
  meta.seed = j.at("seed").get<std::uint64_t>();
  meta.config_hash = j.at("config_hash").get<std::string>();
  meta.window = j.at("window").get<std::size_t>();
  meta.interval = j.at("interval").get<std::size_t>();
  meta.total_steps = j.at("total_steps").get<std::uint64_t>();
  meta.parameter_count = j.value("parameter_count", std::uint64_t{0});
  meta.diverged = j.at("diverged").get<bool>();
  if (j.contains("diverged_at") && !j["diverged_at"].is_null()) meta.diverged_at = j["diverged_at"].get<std::uint64_t>();
  return meta;
}

namespace {

void write_atomically(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << content;
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace

void write_run(const std::string& dir, const RunLog& log) {
  std::filesystem::create_directories(dir);
  std::ostringstream csv;
  write_csv(csv, log);
  write_atomically(std::filesystem::path(dir) / "log.csv", csv.str());
  write_atomically(std::filesystem::path(dir) / "meta.json", meta_to_json(log.meta));
}

std::optional<RunLog> read_run(const std::string& dir) {
  const auto meta_path = std::filesystem::path(dir) / "meta.json";
  const auto csv_path = std::filesystem::path(dir) / "log.csv";
  if (!std::filesystem::exists(meta_path) || !std::filesystem::exists(csv_path)) return std::nullopt;
  std::ifstream meta_in(meta_path);
  std::stringstream buf;
  buf << meta_in.rdbuf();
  RunLog log;
  log.meta = meta_from_json(buf.str());
  std::ifstream csv_in(csv_path);
  log.points = read_csv(csv_in);
  return log;
}

}  // namespace nibbler
