#pragma once

// Multi-trial learning-curve experiments: configuration, seeded parallel
// execution, confidence-interval aggregation and CSV/SVG export.

#include "atb/backup.hpp"
#include "atb/learner.hpp"
#include "atb/mdp.hpp"
#include "atb/seed.hpp"

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace atb {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::runtime_error("config field '" + field + "': " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

struct EnvironmentConfig {
  std::string name = "walk19";
  int walk_states = 19;
  GridworldParams gridworld;
};

enum class CiMethod { kNormal, kStudentT };

struct ExperimentConfig {
  EnvironmentConfig environment;
  std::vector<CoefficientStrategy> strategies;
  StepsizeSchedule alpha = StepsizeSchedule::constant(0.4);
  double gamma = 1.0;
  std::size_t episodes = 200;
  std::size_t trials = 50;
  std::uint64_t base_seed = 0;
  double confidence = 0.99;
  CiMethod ci_method = CiMethod::kNormal;
  double q_init = 0.0;
  std::size_t max_steps = kDefaultMaxSteps;
  std::size_t threads = 0;  ///< 0 = hardware concurrency
  std::string out_csv;
  std::string out_svg;
};

/// The comparison set: three fixed σ, the decaying-σ schedule and both adaptive variants.
inline std::vector<CoefficientStrategy> default_strategies() {
  return {strategy::QSigma{SigmaSchedule::fixed(0.0)},
          strategy::QSigma{SigmaSchedule::fixed(0.5)},
          strategy::QSigma{SigmaSchedule::fixed(1.0)},
          strategy::QSigma{SigmaSchedule::exponential(1.0, 0.95)},
          strategy::CountBased{},
          strategy::PolicyBased{}};
}

inline constexpr std::string_view kEnvironmentNames[] = {"walk19", "gridworld"};

inline Environment make_environment(const EnvironmentConfig& cfg) {
  if (cfg.name == "walk19") return make_random_walk(cfg.walk_states);
  if (cfg.name == "gridworld") return make_gridworld(cfg.gridworld);
  throw ConfigError("environment.name", "unknown environment '" + cfg.name + "'");
}

// ---------------------------------------------------------------------------
// Config parsing

namespace detail {

using nlohmann::json;

inline void reject_unknown_keys(const json& obj, const std::string& path, std::initializer_list<std::string_view> known) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError(path.empty() ? key : path + "." + key, "unknown key");
    }
  }
}

inline double get_number(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(path, "expected a number");
  return v.get<double>();
}

inline std::uint64_t get_count(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) throw ConfigError(path, "must be nonnegative");
  throw ConfigError(path, "expected an integer");
}

inline std::string get_string(const json& obj, const std::string& key, const std::string& path) {
  const auto& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(path, "expected a string");
  return v.get<std::string>();
}

inline void parse_environment(const json& node, EnvironmentConfig& env) {
  if (node.is_string()) {
    env.name = node.get<std::string>();
  } else if (node.is_object()) {
    reject_unknown_keys(node, "environment",
                        {"name", "states", "success_prob", "step_reward", "goal_reward", "pit_reward"});
    if (node.contains("name")) env.name = get_string(node, "name", "environment.name");
    if (env.name == "walk19") {
      for (const char* key : {"success_prob", "step_reward", "goal_reward", "pit_reward"}) {
        if (node.contains(key)) throw ConfigError(std::string("environment.") + key, "not a walk19 parameter");
      }
      if (node.contains("states")) {
        const auto n = get_count(node, "states", "environment.states");
        if (n == 0 || n % 2 == 0 || n > 100001) throw ConfigError("environment.states", "must be a positive odd integer");
        env.walk_states = static_cast<int>(n);
      }
    } else if (env.name == "gridworld") {
      if (node.contains("states")) throw ConfigError("environment.states", "not a gridworld parameter");
      auto& g = env.gridworld;
      if (node.contains("success_prob")) g.success_prob = get_number(node, "success_prob", "environment.success_prob");
      if (node.contains("step_reward")) g.step_reward = get_number(node, "step_reward", "environment.step_reward");
      if (node.contains("goal_reward")) g.goal_reward = get_number(node, "goal_reward", "environment.goal_reward");
      if (node.contains("pit_reward")) g.pit_reward = get_number(node, "pit_reward", "environment.pit_reward");
      if (!(g.success_prob >= 0.0 && g.success_prob <= 1.0)) {
        throw ConfigError("environment.success_prob", "must lie in [0,1]");
      }
    }
  } else {
    throw ConfigError("environment", "expected a name or an object");
  }
  if (std::find(std::begin(kEnvironmentNames), std::end(kEnvironmentNames), env.name) == std::end(kEnvironmentNames)) {
    throw ConfigError("environment.name", "unknown environment '" + env.name + "'");
  }
}

inline StepsizeSchedule parse_alpha(const json& node) {
  StepsizeSchedule alpha;
  if (node.is_number()) {
    alpha = StepsizeSchedule::constant(node.get<double>());
  } else if (node.is_object()) {
    reject_unknown_keys(node, "alpha", {"schedule", "alpha0", "exponent"});
    const std::string kind = node.contains("schedule") ? get_string(node, "schedule", "alpha.schedule") : "constant";
    if (kind == "constant") {
      if (node.contains("exponent")) throw ConfigError("alpha.exponent", "only valid for the polynomial schedule");
      alpha = StepsizeSchedule::constant(node.contains("alpha0") ? get_number(node, "alpha0", "alpha.alpha0") : 0.4);
    } else if (kind == "polynomial") {
      alpha = StepsizeSchedule::polynomial(node.contains("alpha0") ? get_number(node, "alpha0", "alpha.alpha0") : 1.0,
                                           node.contains("exponent") ? get_number(node, "exponent", "alpha.exponent")
                                                                     : 0.7);
    } else {
      throw ConfigError("alpha.schedule", "expected 'constant' or 'polynomial'");
    }
  } else {
    throw ConfigError("alpha", "expected a number or an object");
  }
  if (!(alpha.alpha0 > 0.0 && alpha.alpha0 <= 1.0)) throw ConfigError("alpha.alpha0", "must lie in (0,1]");
  if (alpha.kind == StepsizeSchedule::Kind::kPolynomialVisitDecay && !(alpha.exponent > 0.5 && alpha.exponent <= 1.0)) {
    throw ConfigError("alpha.exponent", "must lie in (0.5,1]");
  }
  return alpha;
}

}  // namespace detail

/**
 * Parses a JSON configuration document (comments allowed). Every field is
 * optional; an empty document yields walk19, α = 0.4, γ = 1, 200 episodes,
 * 50 trials and 99% normal-approximation intervals. Unknown keys are errors.
 *
 *   {
 *     "environment": "walk19" | {"name": "walk19", "states": 19}
 *                  | {"name": "gridworld", "success_prob": 0.8, "step_reward": -0.04,
 *                     "goal_reward": 1, "pit_reward": -1},
 *     "strategies": ["qsigma(sigma=0.5)", "policy-atb", ...],
 *     "alpha": 0.4 | {"schedule": "constant" | "polynomial", "alpha0": 1, "exponent": 0.7},
 *     "gamma": 1, "episodes": 200, "trials": 50, "seed": 0,
 *     "confidence": 0.99, "ci_method": "normal" | "t",
 *     "q_init": 0, "max_steps": 10000, "threads": 0,
 *     "output": {"csv": "curves.csv", "svg": "curves.svg"}
 *   }
 */
inline ExperimentConfig parse_config(std::string_view text) {
  using detail::json;
  json doc;
  const bool blank = std::all_of(text.begin(), text.end(), [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (blank) {
    doc = json::object();
  } else {
    try {
      doc = json::parse(text.begin(), text.end(), nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError("<document>", std::string("malformed JSON: ") + e.what());
    }
  }
  if (!doc.is_object()) throw ConfigError("<document>", "top level must be an object");
  detail::reject_unknown_keys(doc, "",
                              {"environment", "strategies", "alpha", "gamma", "episodes", "trials", "seed",
                               "confidence", "ci_method", "q_init", "max_steps", "threads", "output"});

  ExperimentConfig cfg;
  if (doc.contains("environment")) detail::parse_environment(doc["environment"], cfg.environment);

  if (doc.contains("strategies")) {
    const auto& list = doc["strategies"];
    if (!list.is_array() || list.empty()) throw ConfigError("strategies", "expected a nonempty list of names");
    for (std::size_t i = 0; i < list.size(); ++i) {
      const std::string path = "strategies[" + std::to_string(i) + "]";
      if (!list[i].is_string()) throw ConfigError(path, "expected a strategy name");
      try {
        cfg.strategies.push_back(parse_strategy(list[i].get<std::string>()));
      } catch (const std::invalid_argument& e) {
        throw ConfigError(path, e.what());
      }
    }
  } else {
    cfg.strategies = default_strategies();
  }

  if (doc.contains("alpha")) cfg.alpha = detail::parse_alpha(doc["alpha"]);
  if (doc.contains("gamma")) {
    cfg.gamma = detail::get_number(doc, "gamma", "gamma");
    if (!(cfg.gamma >= 0.0 && cfg.gamma <= 1.0)) throw ConfigError("gamma", "must lie in [0,1]");
  }
  if (doc.contains("episodes")) {
    cfg.episodes = detail::get_count(doc, "episodes", "episodes");
    if (cfg.episodes < 1) throw ConfigError("episodes", "must be at least 1");
  }
  if (doc.contains("trials")) {
    cfg.trials = detail::get_count(doc, "trials", "trials");
    if (cfg.trials < 1) throw ConfigError("trials", "must be at least 1");
  }
  if (doc.contains("seed")) cfg.base_seed = detail::get_count(doc, "seed", "seed");
  if (doc.contains("confidence")) {
    cfg.confidence = detail::get_number(doc, "confidence", "confidence");
    if (!(cfg.confidence > 0.0 && cfg.confidence < 1.0)) throw ConfigError("confidence", "must lie in (0,1)");
  }
  if (doc.contains("ci_method")) {
    const auto m = detail::get_string(doc, "ci_method", "ci_method");
    if (m == "normal") {
      cfg.ci_method = CiMethod::kNormal;
    } else if (m == "t") {
      cfg.ci_method = CiMethod::kStudentT;
    } else {
      throw ConfigError("ci_method", "expected 'normal' or 't'");
    }
  }
  if (doc.contains("q_init")) cfg.q_init = detail::get_number(doc, "q_init", "q_init");
  if (doc.contains("max_steps")) {
    cfg.max_steps = detail::get_count(doc, "max_steps", "max_steps");
    if (cfg.max_steps < 1) throw ConfigError("max_steps", "must be at least 1");
  }
  if (doc.contains("threads")) cfg.threads = detail::get_count(doc, "threads", "threads");
  if (doc.contains("output")) {
    const auto& out = doc["output"];
    if (!out.is_object()) throw ConfigError("output", "expected an object");
    detail::reject_unknown_keys(out, "output", {"csv", "svg"});
    if (out.contains("csv")) cfg.out_csv = detail::get_string(out, "csv", "output.csv");
    if (out.contains("svg")) cfg.out_svg = detail::get_string(out, "svg", "output.svg");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

// ---------------------------------------------------------------------------
// Execution

struct StrategyRun {
  std::string name;
  std::vector<double> rms;  ///< trials × episodes, row-major by trial
  std::vector<std::uint64_t> seeds;

  double at(std::size_t trial, std::size_t episode, std::size_t episodes) const { return rms[trial * episodes + episode]; }
};

struct RunResult {
  std::size_t trials = 0;
  std::size_t episodes = 0;
  double initial_rms = 0.0;  ///< error of the initial Q table, common to every run
  std::vector<StrategyRun> strategies;
  double wall_seconds = 0.0;

  double at(std::size_t strategy, std::size_t trial, std::size_t episode) const {
    return strategies[strategy].at(trial, episode, episodes);
  }
};

inline std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t strategy_index, std::size_t trial) {
  return derive_seed({base_seed, strategy_index, trial});
}

/**
 * Runs every (strategy, trial) pair with its own derived seed and records the
 * RMS error after each episode. Work is spread over `config.threads` workers;
 * the output does not depend on the thread count.
 */
inline RunResult run_experiment(const ExperimentConfig& config) {
  if (config.trials < 1 || config.episodes < 1) throw std::invalid_argument("run_experiment: trials and episodes must be positive");
  if (config.strategies.empty()) throw std::invalid_argument("run_experiment: no strategies");
  validate(config.alpha);
  const auto started = std::chrono::steady_clock::now();

  const Environment env = make_environment(config.environment);
  const QTable reference = exact_q(env.mdp, env.policy, config.gamma);

  RunResult result;
  result.trials = config.trials;
  result.episodes = config.episodes;
  result.initial_rms = rms_error(env.mdp, QTable(env.mdp, config.q_init), reference);
  for (std::size_t k = 0; k < config.strategies.size(); ++k) {
    StrategyRun run;
    run.name = to_string(config.strategies[k]);
    run.rms.assign(config.trials * config.episodes, 0.0);
    for (std::size_t i = 0; i < config.trials; ++i) run.seeds.push_back(trial_seed(config.base_seed, k, i));
    result.strategies.push_back(std::move(run));
  }

  const std::size_t tasks = config.strategies.size() * config.trials;
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t task = next++; task < tasks; task = next++) {
      try {
        const std::size_t k = task / config.trials;
        const std::size_t trial = task % config.trials;
        auto& run = result.strategies[k];
        LearnerState state(env.mdp, config.q_init, run.seeds[trial]);
        for (std::size_t e = 0; e < config.episodes; ++e) {
          run_episode(env.mdp, env.policy, config.strategies[k], config.alpha, config.gamma, state, config.max_steps);
          run.rms[trial * config.episodes + e] = rms_error(env.mdp, state.q, reference);
        }
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  std::size_t threads = config.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : config.threads;
  threads = std::min(threads, tasks);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  result.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

// ---------------------------------------------------------------------------
// Aggregation

struct StrategyCurve {
  std::string name;
  std::vector<double> mean;
  std::vector<double> half_width;
};

struct AggregateCurve {
  double confidence = 0.99;
  std::vector<StrategyCurve> strategies;
};

/// Two-sided critical value for the given confidence level.
inline double critical_value(double confidence, CiMethod method, std::size_t trials) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw std::invalid_argument("confidence must lie in (0,1)");
  const double upper = 0.5 * (1.0 + confidence);
  if (method == CiMethod::kStudentT) {
    return boost::math::quantile(boost::math::students_t(static_cast<double>(trials - 1)), upper);
  }
  return boost::math::quantile(boost::math::normal(), upper);
}

/// Mean across trials and CI half-width critical · stddev / √trials, per episode.
inline AggregateCurve aggregate(const RunResult& result, double confidence, CiMethod method = CiMethod::kNormal) {
  if (result.trials < 2) throw std::invalid_argument("aggregate: confidence intervals need at least 2 trials");
  const double crit = critical_value(confidence, method, result.trials);
  const auto n = static_cast<double>(result.trials);
  AggregateCurve curve;
  curve.confidence = confidence;
  for (const auto& run : result.strategies) {
    StrategyCurve sc;
    sc.name = run.name;
    for (std::size_t e = 0; e < result.episodes; ++e) {
      double sum = 0.0;
      for (std::size_t t = 0; t < result.trials; ++t) sum += run.at(t, e, result.episodes);
      const double mean = sum / n;
      double ss = 0.0;
      for (std::size_t t = 0; t < result.trials; ++t) {
        const double d = run.at(t, e, result.episodes) - mean;
        ss += d * d;
      }
      sc.mean.push_back(mean);
      sc.half_width.push_back(crit * std::sqrt(ss / (n - 1.0)) / std::sqrt(n));
    }
    curve.strategies.push_back(std::move(sc));
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Export

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline void write_file(const std::string& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << contents;
  if (!out.flush()) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace detail

inline constexpr std::string_view kCsvHeader = "strategy,episode,mean_rms,ci_halfwidth";

/// One row per (strategy, episode), episodes 1-based, numbers in shortest round-trip form.
inline std::string format_csv(const AggregateCurve& curve) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& sc : curve.strategies) {
    const std::string name = detail::csv_field(sc.name);
    for (std::size_t e = 0; e < sc.mean.size(); ++e) {
      out += name;
      out += ',' + std::to_string(e + 1) + ',' + detail::format_double(sc.mean[e]) + ',' +
             detail::format_double(sc.half_width[e]) + '\n';
    }
  }
  return out;
}

inline void write_csv(const AggregateCurve& curve, const std::string& path) { detail::write_file(path, format_csv(curve)); }

/// Maps data coordinates into the SVG plot area.
struct PlotFrame {
  double width = 800.0;
  double height = 500.0;
  double left = 70.0;
  double right = 190.0;
  double top = 30.0;
  double bottom = 60.0;
  double x_min = 1.0;
  double x_max = 2.0;
  double y_min = 0.0;
  double y_max = 1.0;

  double x_of(double episode) const { return left + (episode - x_min) / (x_max - x_min) * (width - left - right); }
  double y_of(double value) const { return height - bottom - (value - y_min) / (y_max - y_min) * (height - top - bottom); }
};

/// Frame auto-scaled to the union of all CI bands.
inline PlotFrame plot_frame(const AggregateCurve& curve) {
  if (curve.strategies.empty() || curve.strategies.front().mean.empty()) {
    throw std::invalid_argument("render_svg: nothing to plot");
  }
  PlotFrame f;
  std::size_t episodes = 0;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& sc : curve.strategies) {
    episodes = std::max(episodes, sc.mean.size());
    for (std::size_t e = 0; e < sc.mean.size(); ++e) {
      lo = std::min(lo, sc.mean[e] - sc.half_width[e]);
      hi = std::max(hi, sc.mean[e] + sc.half_width[e]);
    }
  }
  f.x_min = 1.0;
  f.x_max = episodes > 1 ? static_cast<double>(episodes) : 2.0;
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  f.y_min = lo - pad;
  f.y_max = hi + pad;
  return f;
}

namespace detail {

inline std::string fixed3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3f", x);
  return buf;
}

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
                                           "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

}  // namespace detail

/// Mean curves over translucent confidence bands with axes and a legend.
inline std::string svg_document(const AggregateCurve& curve) {
  using detail::fixed3;
  const PlotFrame f = plot_frame(curve);
  std::ostringstream os;
  os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
     << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << f.width << "\" height=\"" << f.height
     << "\" viewBox=\"0 0 " << f.width << ' ' << f.height << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect x=\"0\" y=\"0\" width=\"" << f.width << "\" height=\"" << f.height << "\" fill=\"white\"/>\n";

  const double x0 = f.left;
  const double x1 = f.width - f.right;
  const double y0 = f.height - f.bottom;
  const double y1 = f.top;
  os << "<g id=\"axes\" stroke=\"black\" fill=\"none\">\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n"
     << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n"
     << "</g>\n<g id=\"ticks\" fill=\"black\">\n";
  constexpr int kTicks = 5;
  for (int i = 0; i <= kTicks; ++i) {
    const double ex = f.x_min + (f.x_max - f.x_min) * i / kTicks;
    const double vy = f.y_min + (f.y_max - f.y_min) * i / kTicks;
    os << "<text x=\"" << fixed3(f.x_of(ex)) << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\">"
       << detail::format_double(std::round(ex * 10) / 10) << "</text>\n"
       << "<text x=\"" << x0 - 6 << "\" y=\"" << fixed3(f.y_of(vy) + 4) << "\" text-anchor=\"end\">"
       << detail::format_double(std::round(vy * 1000) / 1000) << "</text>\n";
  }
  os << "</g>\n"
     << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << f.height - 15 << "\" text-anchor=\"middle\">episode</text>\n"
     << "<text x=\"18\" y=\"" << (y0 + y1) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 "
     << (y0 + y1) / 2 << ")\">RMS error</text>\n";

  for (std::size_t k = 0; k < curve.strategies.size(); ++k) {
    const auto& sc = curve.strategies[k];
    const char* color = detail::kPalette[k % std::size(detail::kPalette)];
    const std::string name = detail::xml_escape(sc.name);
    std::string band;
    std::string line;
    for (std::size_t e = 0; e < sc.mean.size(); ++e) {
      const double x = f.x_of(static_cast<double>(e + 1));
      band += fixed3(x) + "," + fixed3(f.y_of(sc.mean[e] + sc.half_width[e])) + " ";
      line += fixed3(x) + "," + fixed3(f.y_of(sc.mean[e])) + " ";
    }
    for (std::size_t e = sc.mean.size(); e-- > 0;) {
      band += fixed3(f.x_of(static_cast<double>(e + 1))) + "," + fixed3(f.y_of(sc.mean[e] - sc.half_width[e])) + " ";
    }
    band.pop_back();
    line.pop_back();
    os << "<g class=\"series\" data-strategy=\"" << name << "\">\n"
       << "<polygon class=\"band\" points=\"" << band << "\" fill=\"" << color
       << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n"
       << "<polyline class=\"mean\" points=\"" << line << "\" fill=\"none\" stroke=\"" << color
       << "\" stroke-width=\"1.5\"/>\n</g>\n";

    const double ly = f.top + 10 + 18.0 * static_cast<double>(k);
    os << "<line x1=\"" << x1 + 15 << "\" y1=\"" << ly << "\" x2=\"" << x1 + 40 << "\" y2=\"" << ly << "\" stroke=\""
       << color << "\" stroke-width=\"2\"/>\n"
       << "<text x=\"" << x1 + 46 << "\" y=\"" << ly + 4 << "\">" << name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void render_svg(const AggregateCurve& curve, const std::string& path) {
  detail::write_file(path, svg_document(curve));
}

}  // namespace atb
