#include "nibbler/harness.hpp"

#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <set>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

#include "nibbler/rng.hpp"
#include "nibbler/snapshot.hpp"

namespace nibbler {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::Nibbler: return "nibbler";
    case Algorithm::Q: return "q";
    case Algorithm::QV: return "qv";
  }
  return "?";
}

Algorithm parse_algorithm(const std::string& text) {
  if (text == "nibbler") return Algorithm::Nibbler;
  if (text == "q") return Algorithm::Q;
  if (text == "qv") return Algorithm::QV;
  throw std::invalid_argument("config field 'algorithm': expected nibbler, q or qv, got '" + text + "'");
}

namespace {

template <typename T>
void put(std::map<std::string, std::string>& out, const std::string& key, const std::optional<T>& v) {
  if (v) out[key] = [&] {
    if constexpr (std::is_floating_point_v<T>) return format_double(*v);
    else return std::to_string(*v);
  }();
}

std::size_t positive_count(const KeyValues& kv, const std::string& key) {
  auto v = kv.get_int(key);
  if (v < 1) throw std::invalid_argument("config field '" + key + "' must be at least 1");
  return static_cast<std::size_t>(v);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (n < 1) throw std::invalid_argument("config field 'num_parallel' must be at least 1");
  if (seeds.empty()) throw std::invalid_argument("config field 'seeds' must list at least one seed");
  if (window < 1) throw std::invalid_argument("config field 'window' must be at least 1");
  if (interval < 1) throw std::invalid_argument("config field 'interval' must be at least 1");
  if (total_steps < window) throw std::invalid_argument("config field 'total_steps' must be at least 'window'");
  if (workers < 1) throw std::invalid_argument("config field 'workers' must be at least 1");
  if (!std::isfinite(r_thresh)) throw std::invalid_argument("config field 'r_thresh' must be finite");
  if (!heterogeneous) board.apply(BoardConfig{}).validate();
  std::set<std::uint64_t> unique(seeds.begin(), seeds.end());
  if (unique.size() != seeds.size()) throw std::invalid_argument("config field 'seeds' contains duplicates");
  // Learner fields are checked against the real feature count.
  const std::size_t m = heterogeneous ? 0 : n * static_cast<std::size_t>(board.apply(BoardConfig{}).observation_size());
  if (algorithm == Algorithm::Nibbler) {
    if (m > 0) nibbler_config(m).validate(m);
  } else {
    baseline_config().validate();
  }
}

std::string ExperimentConfig::canonical_text() const {
  std::map<std::string, std::string> kv;
  kv["env"] = heterogeneous ? "heterogeneous" : "standard";
  kv["num_parallel"] = std::to_string(n);
  kv["permute"] = permute ? "true" : "false";
  put(kv, "num_rows", board.num_rows);
  put(kv, "num_cols", board.num_cols);
  put(kv, "p_arrival", board.p_arrival);
  put(kv, "p_reward", board.p_reward);
  put(kv, "p_hot", board.p_hot);
  put(kv, "paddle_noise", board.paddle_noise);
  put(kv, "wind", board.wind);
  kv["algorithm"] = to_string(algorithm);
  if (algorithm == Algorithm::Nibbler) {
    put(kv, "h", nibbler.h);
    put(kv, "g", nibbler.g);
    put(kv, "d", nibbler.d);
    put(kv, "kappa", nibbler.kappa);
    put(kv, "alpha", nibbler.alpha);
    put(kv, "alpha_b", nibbler.alpha_b);
    put(kv, "tau", nibbler.tau);
    put(kv, "gamma", nibbler.gamma);
    put(kv, "epsilon", nibbler.epsilon);
    put(kv, "nu", nibbler.nu);
    if (nibbler.slot_reset) kv["slot_reset"] = *nibbler.slot_reset == SlotResetMode::Full ? "full" : "net";
  } else {
    kv["hidden_dim"] = std::to_string(baseline.hidden_dim);
    kv["alpha"] = format_double(baseline.alpha);
    kv["nu"] = format_double(baseline.nu);
    kv["epsilon"] = format_double(baseline.epsilon);
    kv["gamma"] = format_double(baseline.gamma);
  }
  kv["total_steps"] = std::to_string(total_steps);
  kv["window"] = std::to_string(window);
  kv["interval"] = std::to_string(interval);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string ExperimentConfig::hash() const {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text())));
  return buf;
}

NibblerConfig ExperimentConfig::nibbler_config(std::size_t m) const {
  NibblerConfig c = default_config(n, m);
  if (nibbler.h) c.h = *nibbler.h;
  if (nibbler.g) c.g = *nibbler.g;
  if (nibbler.d) c.d = *nibbler.d;
  if (nibbler.kappa) c.kappa = *nibbler.kappa;
  derive_stepsizes(c);
  if (nibbler.alpha) c.alpha = *nibbler.alpha;
  if (nibbler.alpha_b) c.alpha_b = *nibbler.alpha_b;
  if (nibbler.tau) c.tau_inputs = c.tau_cumulants = *nibbler.tau;
  if (nibbler.gamma) c.gamma = *nibbler.gamma;
  if (nibbler.epsilon) c.epsilon = *nibbler.epsilon;
  if (nibbler.nu) c.nu = *nibbler.nu;
  if (nibbler.slot_reset) c.slot_reset = *nibbler.slot_reset;
  return c;
}

BaselineConfig ExperimentConfig::baseline_config() const {
  BaselineConfig c = baseline;
  c.variant = algorithm == Algorithm::QV ? BaselineVariant::QV : BaselineVariant::Q;
  return c;
}

void apply_config(ExperimentConfig& c, const KeyValues& kv) {
  kv.require_known({"env", "num_parallel", "p_arrival", "p_reward", "paddle_noise", "num_rows", "num_cols", "p_hot",
                    "wind", "permute", "algorithm", "h", "g", "d", "kappa", "alpha", "alpha_b", "tau", "gamma",
                    "epsilon", "nu", "slot_reset", "hidden_dim", "total_steps", "seeds", "window", "interval",
                    "r_thresh", "output_dir", "workers"});
  if (kv.has("env")) {
    const auto& e = kv.raw("env");
    if (e != "standard" && e != "heterogeneous")
      throw std::invalid_argument("config field 'env': expected standard or heterogeneous, got '" + e + "'");
    c.heterogeneous = e == "heterogeneous";
  }
  if (kv.has("num_parallel")) c.n = positive_count(kv, "num_parallel");
  if (kv.has("permute")) c.permute = kv.get_bool("permute");
  if (kv.has("num_rows")) c.board.num_rows = static_cast<int>(kv.get_int("num_rows"));
  if (kv.has("num_cols")) c.board.num_cols = static_cast<int>(kv.get_int("num_cols"));
  if (kv.has("p_arrival")) c.board.p_arrival = kv.get_double("p_arrival");
  if (kv.has("p_reward")) c.board.p_reward = kv.get_double("p_reward");
  if (kv.has("p_hot")) c.board.p_hot = kv.get_double("p_hot");
  if (kv.has("paddle_noise")) c.board.paddle_noise = kv.get_double("paddle_noise");
  if (kv.has("wind")) c.board.wind = static_cast<int>(kv.get_int("wind"));
  if (kv.has("algorithm")) c.algorithm = parse_algorithm(kv.raw("algorithm"));

  // Shared learner keys go to whichever learner the config selects.
  const bool nib = c.algorithm == Algorithm::Nibbler;
  if (kv.has("h")) c.nibbler.h = positive_count(kv, "h");
  if (kv.has("g")) c.nibbler.g = positive_count(kv, "g");
  if (kv.has("d")) c.nibbler.d = positive_count(kv, "d");
  if (kv.has("kappa")) c.nibbler.kappa = kv.get_double("kappa");
  if (kv.has("alpha_b")) c.nibbler.alpha_b = kv.get_double("alpha_b");
  if (kv.has("tau")) c.nibbler.tau = kv.get_double("tau");
  if (kv.has("slot_reset")) {
    const auto& mode = kv.raw("slot_reset");
    if (mode == "full") c.nibbler.slot_reset = SlotResetMode::Full;
    else if (mode == "net") c.nibbler.slot_reset = SlotResetMode::NetOnly;
    else throw std::invalid_argument("config field 'slot_reset': expected full or net, got '" + mode + "'");
  }
  if (kv.has("hidden_dim")) c.baseline.hidden_dim = positive_count(kv, "hidden_dim");
  for (auto [key, nib_field, base_field] : {std::tuple{"alpha", &c.nibbler.alpha, &c.baseline.alpha},
                                             std::tuple{"gamma", &c.nibbler.gamma, &c.baseline.gamma},
                                             std::tuple{"epsilon", &c.nibbler.epsilon, &c.baseline.epsilon},
                                             std::tuple{"nu", &c.nibbler.nu, &c.baseline.nu}}) {
    if (!kv.has(key)) continue;
    if (nib) *nib_field = kv.get_double(key);
    else *base_field = kv.get_double(key);
  }

  if (kv.has("total_steps")) c.total_steps = kv.get_u64("total_steps");
  if (kv.has("seeds")) {
    c.seeds.clear();
    for (auto s : kv.get_int_list("seeds")) {
      if (s < 0) throw std::invalid_argument("config field 'seeds' must be non-negative");
      c.seeds.push_back(static_cast<std::uint64_t>(s));
    }
  }
  if (kv.has("window")) c.window = positive_count(kv, "window");
  if (kv.has("interval")) c.interval = positive_count(kv, "interval");
  if (kv.has("r_thresh")) c.r_thresh = kv.get_double("r_thresh");
  if (kv.has("output_dir")) c.output_dir = kv.raw("output_dir");
  if (kv.has("workers")) c.workers = positive_count(kv, "workers");
}

ExperimentConfig parse_experiment_config(const std::string& text, ExperimentConfig base) {
  apply_config(base, KeyValues::parse(text));
  base.validate();
  return base;
}

MultiCatchEnv make_env(const ExperimentConfig& config, std::uint64_t seed) {
  const auto env_seed = derive_seed(seed, "env");
  if (config.heterogeneous) return make_heterogeneous(config.n, env_seed, config.permute);
  return make_multicatch(config.n, env_seed, config.board, config.permute);
}

std::unique_ptr<Agent> make_agent(const ExperimentConfig& config, std::size_t m, std::uint64_t seed) {
  const auto agent_seed = derive_seed(seed, "agent");
  if (config.algorithm == Algorithm::Nibbler)
    return std::make_unique<NibblerAgent>(config.nibbler_config(m), m, agent_seed);
  return std::make_unique<BaselineAgent>(config.baseline_config(), m, agent_seed);
}

namespace {

void write_checkpoint(const std::string& path, const ExperimentConfig& config, std::uint64_t seed, std::uint64_t step,
                      int action, const MultiCatchEnv& env, const Agent& agent, const RewardSmoother& smoother,
                      const std::vector<EvalPoint>& points) {
  std::filesystem::path p(path);
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint " + tmp.string());
    SnapshotWriter w(out);
    w.tag("Checkpoint");
    w.str(config.hash());
    w.u64(seed);
    w.u64(step);
    w.u64(static_cast<std::uint64_t>(action));
    env.save(out);
    agent.save(out);
    smoother.save(out);
    w.u64(points.size());
    for (const auto& pt : points) {
      w.u64(pt.timestep);
      w.f64(pt.avg_reward);
    }
    if (!out) throw std::runtime_error("failed writing checkpoint " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

}  // namespace

RunLog run_single(const ExperimentConfig& config, std::uint64_t seed, const RunControl& control) {
  MultiCatchEnv env = make_env(config, seed);
  const std::size_t m = env.observation_size();
  std::unique_ptr<Agent> agent = make_agent(config, m, seed);
  RewardSmoother smoother(config.window, config.interval);

  RunLog log;
  log.meta.n = config.n;
  log.meta.algorithm = to_string(config.algorithm);
  log.meta.seed = seed;
  log.meta.config_hash = config.hash();
  log.meta.window = config.window;
  log.meta.interval = config.interval;
  log.meta.total_steps = config.total_steps;
  log.meta.parameter_count = agent->parameter_count();

  std::uint64_t step = 0;
  int action = 0;
  if (!control.resume_path.empty()) {
    std::ifstream in(control.resume_path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open checkpoint " + control.resume_path);
    SnapshotReader r(in);
    r.expect_tag("Checkpoint");
    if (r.str() != log.meta.config_hash) throw std::runtime_error("checkpoint was written for a different config");
    if (r.u64() != seed) throw std::runtime_error("checkpoint was written for a different seed");
    step = r.u64();
    action = static_cast<int>(r.u64());
    env.load(in);
    agent->load(in);
    smoother.load(in);
    const auto count = r.u64();
    for (std::uint64_t k = 0; k < count; ++k) {
      EvalPoint p;
      p.timestep = r.u64();
      p.avg_reward = r.f64();
      log.points.push_back(p);
    }
  } else {
    action = agent->step(0.0, env.observation());
  }

  while (step < config.total_steps) {
    ++step;
    auto result = env.step(static_cast<Action>(action));
    auto point = smoother.push(result.reward);
    action = agent->step(result.reward, result.observation);
    if (point) {
      log.points.push_back(*point);
      if (control.on_eval) control.on_eval(*point);
      if (!agent->all_finite()) {
        log.meta.diverged = true;
        log.meta.diverged_at = step;
        break;
      }
    }
    if (control.checkpoint_at && *control.checkpoint_at == step) {
      write_checkpoint(control.checkpoint_path, config, seed, step, action, env, *agent, smoother, log.points);
      if (control.stop_after_checkpoint) return log;
    }
  }
  return log;
}

std::string run_directory(const ExperimentConfig& config, std::uint64_t seed) {
  return (std::filesystem::path(config.output_dir) / (config.hash() + "_s" + std::to_string(seed))).string();
}

std::vector<RunLog> run_experiment(const ExperimentConfig& config, const ExperimentOptions& options) {
  config.validate();
  std::vector<RunLog> logs(config.seeds.size());
  std::vector<std::exception_ptr> errors(config.seeds.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < config.seeds.size(); i = next++) {
      try {
        const auto seed = config.seeds[i];
        const auto dir = run_directory(config, seed);
        if (options.reuse_existing) {
          if (auto existing = read_run(dir); existing && existing->meta.config_hash == config.hash()) {
            logs[i] = std::move(*existing);
            continue;
          }
        }
        logs[i] = run_single(config, seed);
        if (options.write_logs) write_run(dir, logs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };

  const std::size_t threads = std::min(config.workers, config.seeds.size());
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return logs;
}

SweepCell summarize_cell(std::map<std::string, std::string> params, std::string hash, std::vector<RunLog> logs,
                         double r_thresh) {
  SweepCell cell;
  cell.params = std::move(params);
  cell.config_hash = std::move(hash);
  std::vector<std::optional<std::uint64_t>> thresholds;
  double final_sum = 0.0;
  std::size_t final_count = 0;
  bool diverged = false;
  for (const auto& log : logs) {
    diverged = diverged || log.meta.diverged;
    thresholds.push_back(log.meta.diverged ? std::nullopt : timesteps_to_threshold(log, r_thresh));
    if (auto f = log.final_reward(); f && !log.meta.diverged) {
      final_sum += *f;
      ++final_count;
    }
  }
  cell.threshold = aggregate_thresholds(thresholds);
  if (final_count > 0) cell.final_reward = final_sum / static_cast<double>(final_count);
  cell.status = diverged ? "diverged" : "ok";
  cell.logs = std::move(logs);
  return cell;
}

std::vector<std::pair<std::map<std::string, std::string>, ExperimentConfig>> expand_grid(
    const ExperimentConfig& base, const SweepGrid& grid) {
  if (grid.empty()) throw std::invalid_argument("sweep grid has no axes");
  std::vector<std::pair<std::map<std::string, std::string>, ExperimentConfig>> cells{{{}, base}};
  const bool nib = base.algorithm == Algorithm::Nibbler;

  auto expand = [&](const auto& values, const std::string& key, auto&& assign) {
    if (values.empty()) return;
    std::vector<std::pair<std::map<std::string, std::string>, ExperimentConfig>> next;
    for (const auto& [params, cfg] : cells) {
      for (const auto& v : values) {
        auto p = params;
        auto c = cfg;
        if constexpr (std::is_floating_point_v<std::decay_t<decltype(v)>>) p[key] = format_double(v);
        else p[key] = std::to_string(v);
        assign(c, v);
        next.emplace_back(std::move(p), std::move(c));
      }
    }
    cells = std::move(next);
  };
  expand(grid.n, "n", [](ExperimentConfig& c, std::size_t v) { c.n = v; });
  expand(grid.hidden, "hidden", [&](ExperimentConfig& c, std::size_t v) {
    if (nib) c.nibbler.d = v;
    else c.baseline.hidden_dim = v;
  });
  expand(grid.g, "g", [](ExperimentConfig& c, std::size_t v) { c.nibbler.g = v; });
  expand(grid.h, "h", [](ExperimentConfig& c, std::size_t v) { c.nibbler.h = v; });
  expand(grid.stepsize, "stepsize", [&](ExperimentConfig& c, double v) {
    if (nib) c.nibbler.kappa = v;
    else c.baseline.alpha = v;
  });
  return cells;
}

std::vector<SweepCell> run_sweep(const ExperimentConfig& base, const SweepGrid& grid,
                                 const ExperimentOptions& options) {
  std::vector<SweepCell> out;
  for (auto& [params, cfg] : expand_grid(base, grid)) {
    try {
      auto logs = run_experiment(cfg, options);
      out.push_back(summarize_cell(params, cfg.hash(), std::move(logs), cfg.r_thresh));
    } catch (const std::exception& e) {
      SweepCell cell;
      cell.params = params;
      cell.status = std::string("failed: ") + e.what();
      try {
        cell.config_hash = cfg.hash();
      } catch (...) {
      }
      out.push_back(std::move(cell));
    }
  }
  return out;
}

namespace {

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json();
}

}  // namespace

std::string sweep_to_json(const std::vector<SweepCell>& cells) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& c : cells) {
    nlohmann::ordered_json j;
    j["params"] = c.params;
    j["config_hash"] = c.config_hash;
    j["status"] = c.status;
    j["seeds"] = c.logs.size();
    j["t_threshold_median"] = optional_json(c.threshold.median);
    j["t_threshold_min"] = optional_json(c.threshold.min);
    j["t_threshold_max"] = optional_json(c.threshold.max);
    j["reached"] = c.threshold.reached;
    j["final_reward"] = optional_json(c.final_reward);
    arr.push_back(std::move(j));
  }
  return arr.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepCell>& cells) {
  std::set<std::string> keys;
  for (const auto& c : cells)
    for (const auto& [k, v] : c.params) keys.insert(k);
  std::ostringstream out;
  for (const auto& k : keys) out << k << ',';
  out << "config_hash,status,seeds,reached,t_threshold_median,final_reward\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& c : cells) {
    for (const auto& k : keys) {
      auto it = c.params.find(k);
      out << (it == c.params.end() ? "" : it->second) << ',';
    }
    out << c.config_hash << ',' << '"' << c.status << '"' << ',' << c.logs.size() << ',' << c.threshold.reached
        << ',' << opt(c.threshold.median) << ',' << opt(c.final_reward) << '\n';
  }
  return out.str();
}

}  // namespace nibbler
