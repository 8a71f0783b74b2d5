#pragma once

// Batch verification report behind the `verify` subcommand.

#include "atb/analysis.hpp"
#include "atb/seed.hpp"

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace atb {

struct CheckRecord {
  std::string check;
  std::uint64_t seed = 0;
  double residual = 0.0;
  bool pass = false;
};

inline constexpr double kIdentityTolerance = 1e-10;
inline constexpr double kOracleTolerance = 1e-8;
inline constexpr std::array<double, 5> kSigmaGrid = {0.0, 0.25, 0.5, 0.75, 1.0};

/// Worst residuals of the exact checks over every non-terminal (s,a) of one random instance.
struct InstanceResiduals {
  double variance_identity = 0.0;
  double covariance_identity = 0.0;
  double expected_operator = 0.0;
  double monotonicity_violation = 0.0;
  bool monotone = true;
};

inline InstanceResiduals check_instance(const RandomInstance& inst, std::uint64_t seed) {
  const auto& mdp = inst.env.mdp;
  const auto& policy = inst.env.policy;
  Rng rng(derive_seed({seed, 0x5167}));
  std::vector<double> sigmas(kSigmaGrid.begin(), kSigmaGrid.end());
  sigmas.push_back(uniform01(rng));

  InstanceResiduals out;
  for (double sigma : sigmas) {
    out.expected_operator = std::max(out.expected_operator, check_expected_operator(mdp, policy, inst.q, inst.gamma, sigma));
  }
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (double sigma : sigmas) {
        out.variance_identity =
            std::max(out.variance_identity, check_variance_identity(mdp, policy, inst.q, inst.gamma, s, a, sigma));
      }
      out.covariance_identity =
          std::max(out.covariance_identity, check_covariance_identity(mdp, policy, inst.q, inst.gamma, s, a));
      const auto profile = variance_profile(mdp, policy, inst.q, inst.gamma, s, a, kSigmaGrid);
      out.monotonicity_violation = std::max(out.monotonicity_violation, monotonicity_violation(profile));
      out.monotone = out.monotone && check_sigma_monotonicity(mdp, policy, inst.q, inst.gamma, s, a, kSigmaGrid);
    }
  }
  return out;
}

/// max over `pairs` random (q1, q2) of ‖T q1 - T q2‖∞ / ‖q1 - q2‖∞.
inline double max_contraction_ratio(const TabularMdp& mdp, const Policy& policy, double gamma, std::size_t pairs,
                                    std::uint64_t seed) {
  Rng rng(seed);
  auto random_q = [&] {
    QTable q(mdp, 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) q.at(s, a) = 20.0 * uniform01(rng) - 10.0;
    }
    return q;
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < pairs; ++i) {
    const QTable q1 = random_q();
    const QTable q2 = random_q();
    const double before = max_abs_difference(q1, q2);
    const double after =
        max_abs_difference(bellman_apply(mdp, policy, gamma, q1), bellman_apply(mdp, policy, gamma, q2));
    if (before > 0.0) worst = std::max(worst, after / before);
  }
  return worst;
}

/// ‖iterate_bellman from zero - exact_q‖∞.
inline double oracle_disagreement(const Environment& env, double gamma) {
  const QTable exact = exact_q(env.mdp, env.policy, gamma);
  const QTable iterated = iterate_bellman(env.mdp, env.policy, gamma, QTable(env.mdp, 0.0));
  return max_abs_difference(exact, iterated);
}

struct VerifyOptions {
  std::size_t sweeps = 100;
  std::uint64_t seed = 1;
  bool convergence = true;
  std::size_t convergence_episodes = 20000;
};

/**
 * Runs every check and returns one record per check and instance. The
 * convergence lines corroborate almost-sure convergence empirically; they
 * cannot certify it.
 */
inline std::vector<CheckRecord> run_verification(const VerifyOptions& options) {
  std::vector<CheckRecord> records;
  for (std::size_t i = 0; i < options.sweeps; ++i) {
    const std::uint64_t seed = derive_seed({options.seed, i});
    const auto inst = make_random_instance(seed);
    const auto r = check_instance(inst, seed);
    records.push_back({"variance-identity", seed, r.variance_identity, r.variance_identity <= kIdentityTolerance});
    records.push_back(
        {"covariance-identity", seed, r.covariance_identity, r.covariance_identity <= kIdentityTolerance});
    records.push_back({"expected-operator", seed, r.expected_operator, r.expected_operator <= kIdentityTolerance});
    records.push_back({"sigma-monotonicity", seed, r.monotonicity_violation, r.monotone});
  }

  for (const auto& env : {make_random_walk(19), make_gridworld()}) {
    const double gap = oracle_disagreement(env, 1.0);
    records.push_back({"oracle-agreement/" + env.name, 0, gap, gap <= kOracleTolerance});
  }
  {
    const auto grid = make_gridworld();
    const std::uint64_t seed = derive_seed({options.seed, 0xC0});
    const double ratio = max_contraction_ratio(grid.mdp, grid.policy, 0.9, 100, seed);
    records.push_back({"contraction/gridworld/gamma=0.9", seed, ratio, ratio <= 0.9 + 1e-12});
  }
  {
    const auto inst = make_count_bias_instance();
    const QTable biased = frozen_count_fixed_point(inst.env.mdp, inst.env.policy, inst.counts, inst.gamma);
    const double gap = max_abs_difference(biased, exact_q(inst.env.mdp, inst.env.policy, inst.gamma));
    records.push_back({"count-fixed-point-bias", 0, gap, gap > 0.01});
  }
  if (options.convergence) {
    const auto walk = make_random_walk(5);
    const char* names[] = {"qsigma(sigma=0)", "qsigma(sigma=0.5)", "qsigma(sigma=1)", "count-atb", "policy-atb"};
    for (std::size_t k = 0; k < std::size(names); ++k) {
      const std::uint64_t seed = derive_seed({options.seed, 0xC0417, k});
      const double rms = convergence_suite(walk.mdp, walk.policy, parse_strategy(names[k]), 1.0,
                                           options.convergence_episodes, seed);
      records.push_back({std::string("convergence-corroboration/walk5/") + names[k], seed, rms, rms < 0.05});
    }
  }
  return records;
}

inline void write_report(std::ostream& os, const std::vector<CheckRecord>& records) {
  os << "check\tseed\tresidual\tresult\n";
  for (const auto& r : records) {
    os << r.check << '\t' << r.seed << '\t' << detail::format_double(r.residual) << '\t'
       << (r.pass ? "PASS" : "FAIL") << '\n';
  }
}

}  // namespace atb
