// Command-line front end: run experiments, verify the operator identities,
// list available strategies and environments.

#include "atb/atb.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

namespace {

int run_command(const std::string& config_path, const std::string& out_csv, const std::string& out_svg,
                std::optional<std::size_t> trials, std::optional<std::uint64_t> seed,
                std::optional<std::size_t> threads) {
  atb::ExperimentConfig cfg = config_path.empty() ? atb::parse_config("") : atb::load_config(config_path);
  if (trials) {
    if (*trials < 1) throw atb::ConfigError("trials", "must be at least 1");
    cfg.trials = *trials;
  }
  if (seed) cfg.base_seed = *seed;
  if (threads) cfg.threads = *threads;
  if (!out_csv.empty()) cfg.out_csv = out_csv;
  if (!out_svg.empty()) cfg.out_svg = out_svg;

  const bool wants_files = !cfg.out_csv.empty() || !cfg.out_svg.empty();
  if (wants_files && cfg.trials < 2) {
    throw atb::ConfigError("trials", "confidence intervals need at least 2 trials");
  }

  const atb::RunResult result = atb::run_experiment(cfg);
  std::cerr << "ran " << result.strategies.size() << " strategies x " << result.trials << " trials x "
            << result.episodes << " episodes in " << result.wall_seconds << " s\n";

  if (cfg.trials >= 2) {
    const auto curve = atb::aggregate(result, cfg.confidence, cfg.ci_method);
    if (!cfg.out_csv.empty()) atb::write_csv(curve, cfg.out_csv);
    if (!cfg.out_svg.empty()) atb::render_svg(curve, cfg.out_svg);
    std::cout << "strategy\tfinal_mean_rms\tci_halfwidth\n";
    for (const auto& sc : curve.strategies) {
      std::cout << sc.name << '\t' << sc.mean.back() << '\t' << sc.half_width.back() << '\n';
    }
  } else {
    std::cout << "strategy\tfinal_rms\n";
    for (const auto& run : result.strategies) std::cout << run.name << '\t' << run.rms.back() << '\n';
  }
  return 0;
}

int verify_command(std::size_t sweeps, std::uint64_t seed, bool convergence) {
  atb::VerifyOptions options;
  options.sweeps = sweeps;
  options.seed = seed;
  options.convergence = convergence;
  const auto records = atb::run_verification(options);
  atb::write_report(std::cout, records);
  std::size_t failed = 0;
  for (const auto& r : records) failed += r.pass ? 0 : 1;
  std::cout << "# " << records.size() - failed << "/" << records.size() << " checks passed";
  if (convergence) std::cout << " (convergence lines are empirical corroboration, not proof)";
  std::cout << '\n';
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular TD policy evaluation with adaptive tree backups"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run a learning-curve experiment");
  std::string config_path;
  std::string out_csv;
  std::string out_svg;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  run->add_option("--config", config_path, "JSON experiment configuration")->check(CLI::ExistingFile);
  run->add_option("--out-csv", out_csv, "Write aggregated curves as CSV");
  run->add_option("--out-svg", out_svg, "Write aggregated curves as SVG");
  run->add_option("--trials", trials, "Override the number of trials");
  run->add_option("--seed", seed, "Override the base seed");
  run->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* verify = app.add_subcommand("verify", "Check the Q(sigma) identities on random MDPs");
  std::size_t sweeps = 100;
  std::uint64_t verify_seed = 1;
  bool no_convergence = false;
  verify->add_option("--sweeps", sweeps, "Number of random MDP instances")->capture_default_str();
  verify->add_option("--seed", verify_seed, "Base seed for the random instances")->capture_default_str();
  verify->add_flag("--no-convergence", no_convergence, "Skip the stochastic convergence runs");

  auto* list_strategies = app.add_subcommand("list-strategies", "List coefficient strategies");
  auto* list_envs = app.add_subcommand("list-envs", "List environments");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return run_command(config_path, out_csv, out_svg, trials, seed, threads);
    if (*verify) return verify_command(sweeps, verify_seed, !no_convergence);
    if (*list_strategies) {
      for (const auto& info : atb::kStrategyCatalog) std::cout << info.syntax << '\t' << info.description << '\n';
      return 0;
    }
    if (*list_envs) {
      std::cout << "walk19\tdeterministic random walk; parameter: states (odd, default 19)\n"
                << "gridworld\t4x3 stochastic gridworld; parameters: success_prob, step_reward, goal_reward, "
                   "pit_reward\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
