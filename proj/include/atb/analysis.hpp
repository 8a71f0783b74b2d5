#pragma once

// Exact checks of the Q(σ) operator and variance results by enumerating the
// one-step target distribution, plus a stochastic convergence run.

#include "atb/backup.hpp"
#include "atb/learner.hpp"
#include "atb/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace atb {

struct TargetAtom {
  double probability = 0.0;
  double value = 0.0;
  StateId next_state = 0;
  std::optional<ActionId> next_action;  ///< empty for a terminal successor
};

/// Finite distribution of the one-step Q(σ) target for a fixed (s, a).
struct TargetDistribution {
  std::vector<TargetAtom> atoms;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

namespace detail {

/// Σ_a' π(a'|s') Q(s',a').
inline double expected_successor_value(const Policy& policy, const QTable& q, StateId next) {
  return dot(policy.row(next), q.row(next));
}

inline void check_nonterminal(const TabularMdp& mdp, StateId s, const char* who) {
  if (s >= mdp.num_states() || mdp.is_terminal(s)) {
    throw std::invalid_argument(std::string(who) + ": state must be a valid non-terminal state");
  }
}

}  // namespace detail

/**
 * One atom per reachable (s', a') with probability P(s'|s,a) π(a'|s') and value
 * r + γ (σ Q(s',a') + (1-σ) Σ_b π(b|s') Q(s',b)). A terminal successor yields a
 * single atom of value r.
 */
inline TargetDistribution enumerate_target(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                           StateId s, ActionId a, double sigma) {
  detail::check_nonterminal(mdp, s, "enumerate_target");
  TargetDistribution dist;
  const auto probs = mdp.successor_probs(s, a);
  for (StateId next = 0; next < mdp.num_states(); ++next) {
    if (probs[next] == 0.0) continue;
    const double r = mdp.reward(s, a, next);
    if (mdp.is_terminal(next)) {
      dist.atoms.push_back({probs[next], r, next, std::nullopt});
      continue;
    }
    const double expected = detail::expected_successor_value(policy, q, next);
    for (ActionId b = 0; b < mdp.num_actions(); ++b) {
      const double pb = policy(next, b);
      if (pb == 0.0) continue;
      const double value = r + gamma * (sigma * q.at(next, b) + (1.0 - sigma) * expected);
      dist.atoms.push_back({probs[next] * pb, value, next, b});
    }
  }
  return dist;
}

inline Moments moments(const TargetDistribution& dist) {
  Moments m;
  for (const auto& atom : dist.atoms) m.mean += atom.probability * atom.value;
  for (const auto& atom : dist.atoms) {
    const double d = atom.value - m.mean;
    m.variance += atom.probability * d * d;
  }
  return m;
}

/// |Var_σ - (Var_0 + σ² (Var_1 - Var_0))|, every variance by exact enumeration.
inline double check_variance_identity(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                      StateId s, ActionId a, double sigma) {
  const double var0 = moments(enumerate_target(mdp, policy, q, gamma, s, a, 0.0)).variance;
  const double var1 = moments(enumerate_target(mdp, policy, q, gamma, s, a, 1.0)).variance;
  const double var_sigma = moments(enumerate_target(mdp, policy, q, gamma, s, a, sigma)).variance;
  return std::abs(var_sigma - (var0 + sigma * sigma * (var1 - var0)));
}

struct CovarianceReport {
  double covariance = 0.0;           ///< Cov(sarsa target, expected-sarsa target)
  double expected_variance = 0.0;    ///< Var(expected-sarsa target)
  double residual = 0.0;
};

/// Joint distribution of the Sarsa and Expected Sarsa targets over (s', a').
inline CovarianceReport covariance_report(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                          StateId s, ActionId a) {
  const auto sample = enumerate_target(mdp, policy, q, gamma, s, a, 1.0);
  const auto expected = enumerate_target(mdp, policy, q, gamma, s, a, 0.0);
  // Both enumerations visit (s', a') in the same order, so atoms pair up.
  const double mean_sample = moments(sample).mean;
  const double mean_expected = moments(expected).mean;
  CovarianceReport report;
  for (std::size_t i = 0; i < sample.atoms.size(); ++i) {
    const double p = sample.atoms[i].probability;
    const double de = expected.atoms[i].value - mean_expected;
    report.covariance += p * (sample.atoms[i].value - mean_sample) * de;
    report.expected_variance += p * de * de;
  }
  report.residual = std::abs(report.covariance - report.expected_variance);
  return report;
}

inline double check_covariance_identity(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                        StateId s, ActionId a) {
  return covariance_report(mdp, policy, q, gamma, s, a).residual;
}

/// Variances of the Q(σ) target at each grid point.
inline std::vector<double> variance_profile(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                            StateId s, ActionId a, std::span<const double> sigma_grid) {
  std::vector<double> out;
  out.reserve(sigma_grid.size());
  for (double sigma : sigma_grid) out.push_back(moments(enumerate_target(mdp, policy, q, gamma, s, a, sigma)).variance);
  return out;
}

/// Round-off allowance when comparing variances that are equal in exact arithmetic.
inline double variance_slack(double scale) { return 1e-12 * std::max(1.0, std::abs(scale)); }

/**
 * Largest amount by which the variance profile decreases along the grid or
 * undercuts its first entry; zero for a monotone profile.
 */
inline double monotonicity_violation(std::span<const double> variances) {
  double worst = 0.0;
  for (std::size_t i = 1; i < variances.size(); ++i) {
    worst = std::max(worst, variances[i - 1] - variances[i]);
    worst = std::max(worst, variances.front() - variances[i]);
  }
  return worst;
}

/// True iff Var_σ is nondecreasing along the ascending grid and minimal at its first point.
inline bool check_sigma_monotonicity(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                     StateId s, ActionId a, std::span<const double> sigma_grid) {
  if (!std::is_sorted(sigma_grid.begin(), sigma_grid.end())) {
    throw std::invalid_argument("check_sigma_monotonicity: grid must be ascending");
  }
  const auto variances = variance_profile(mdp, policy, q, gamma, s, a, sigma_grid);
  if (variances.empty()) return true;
  const double scale = *std::max_element(variances.begin(), variances.end());
  return monotonicity_violation(variances) <= variance_slack(scale);
}

/// max over non-terminal (s,a) of |E[target_σ] - (T_π q)(s,a)|.
inline double check_expected_operator(const TabularMdp& mdp, const Policy& policy, const QTable& q, double gamma,
                                      double sigma) {
  const QTable tq = bellman_apply(mdp, policy, gamma, q);
  double worst = 0.0;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const double mean = moments(enumerate_target(mdp, policy, q, gamma, s, a, sigma)).mean;
      worst = std::max(worst, std::abs(mean - tq.at(s, a)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Stochastic convergence

/// Robbins-Monro stepsize used by the convergence runs: α = n(s,a)^(-0.7).
inline StepsizeSchedule robbins_monro_stepsize() { return StepsizeSchedule::polynomial(1.0, 0.7); }

/// Final RMS error against exact_q after `episodes` episodes of TD learning.
inline double convergence_suite(const TabularMdp& mdp, const Policy& policy, const CoefficientStrategy& strat,
                                double gamma, std::size_t episodes, std::uint64_t seed,
                                const StepsizeSchedule& stepsize = robbins_monro_stepsize()) {
  if (stepsize.kind != StepsizeSchedule::Kind::kPolynomialVisitDecay) {
    throw std::invalid_argument("convergence_suite: requires a polynomial-visit-decay stepsize");
  }
  validate(stepsize);
  const QTable reference = exact_q(mdp, policy, gamma);
  LearnerState state(mdp, 0.0, seed);
  for (std::size_t e = 0; e < episodes; ++e) run_episode(mdp, policy, strat, stepsize, gamma, state);
  return rms_error(mdp, state.q, reference);
}

// ---------------------------------------------------------------------------
// Frozen-count fixed point

/// The policy whose rows are the count-based coefficients of `counts`.
inline Policy count_induced_policy(const Policy& policy, const VisitCounts& counts) {
  std::vector<double> probs;
  probs.reserve(policy.num_states() * policy.num_actions());
  for (StateId s = 0; s < policy.num_states(); ++s) {
    const auto c = coeff_count_based(counts.row(s), policy.row(s));
    probs.insert(probs.end(), c.begin(), c.end());
  }
  return Policy(policy.num_states(), policy.num_actions(), std::move(probs));
}

/**
 * Iterates the expected count-based update with counts held fixed,
 * Q <- r̄ + γ Σ_{s'} P(s'|s,a) Σ_a' c(s',a') Q(s',a'), until it stops moving.
 */
inline QTable frozen_count_fixed_point(const TabularMdp& mdp, const Policy& policy, const VisitCounts& counts,
                                       double gamma, double tolerance = 1e-14,
                                       std::size_t max_iterations = 1'000'000) {
  check_compatible(mdp, policy);
  std::vector<CoefficientVector> coeffs;
  for (StateId s = 0; s < mdp.num_states(); ++s) coeffs.push_back(coeff_count_based(counts.row(s), policy.row(s)));

  QTable q(mdp, 0.0);
  std::vector<double> backed(mdp.num_states(), 0.0);
  for (std::size_t k = 0; k < max_iterations; ++k) {
    for (StateId s = 0; s < mdp.num_states(); ++s) backed[s] = mdp.is_terminal(s) ? 0.0 : dot(coeffs[s], q.row(s));
    double change = 0.0;
    QTable next(mdp, 0.0);
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        next.at(s, a) = mdp.expected_reward(s, a) + gamma * dot(mdp.successor_probs(s, a), backed);
        change = std::max(change, std::abs(next.at(s, a) - q.at(s, a)));
      }
    }
    q = std::move(next);
    if (change <= tolerance) break;
  }
  return q;
}

struct CountBiasInstance {
  Environment env;
  VisitCounts counts;
  double gamma;
};

/**
 * Two states: a non-terminal state 0 and a terminal state 1. Both actions in
 * state 0 return to it or terminate with equal odds; action 0 pays 1, action 1
 * pays 0. The policy is uniform but the frozen counts favour action 0 nine to
 * one, so the count-weighted backup overvalues the return to state 0.
 */
inline CountBiasInstance make_count_bias_instance() {
  const std::size_t ns = 2;
  const std::size_t na = 2;
  std::vector<double> transition(ns * na * ns, 0.0);
  std::vector<double> reward(ns * na * ns, 0.0);
  auto idx = [&](StateId s, ActionId a, StateId next) { return (s * na + a) * ns + next; };
  for (ActionId a = 0; a < na; ++a) {
    transition[idx(0, a, 0)] = 0.5;
    transition[idx(0, a, 1)] = 0.5;
    transition[idx(1, a, 1)] = 1.0;
  }
  reward[idx(0, 0, 0)] = reward[idx(0, 0, 1)] = 1.0;
  TabularMdp mdp(ns, na, std::move(transition), std::move(reward), {false, true}, {1.0, 0.0});
  VisitCounts counts(ns, na);
  for (int i = 0; i < 9; ++i) counts.increment(0, 0);
  counts.increment(0, 1);
  return {Environment{"count-bias", std::move(mdp), Policy::uniform(ns, na)}, std::move(counts), 0.9};
}

// ---------------------------------------------------------------------------
// Random instances

struct RandomInstance {
  Environment env;
  QTable q;
  double gamma;
};

namespace detail {

inline std::vector<double> random_simplex(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  double sum = 0.0;
  for (auto& x : w) {
    x = -std::log(1.0 - uniform01(rng));
    sum += x;
  }
  for (auto& x : w) x /= sum;
  return w;
}

}  // namespace detail

/**
 * Seeded random MDP with 2-5 states and 1-4 actions. Transition and policy rows
 * are uniform on the simplex, rewards uniform in [-1,1], γ drawn from
 * {0.5, 0.9, 0.99}. Half of the instances make the last state terminal. Q is
 * uniform in [-1,1] on non-terminal states.
 */
inline RandomInstance make_random_instance(std::uint64_t seed) {
  Rng rng(seed);
  const std::size_t ns = 2 + rng() % 4;
  const std::size_t na = 1 + rng() % 4;
  const bool has_terminal = rng() % 2 == 0;
  constexpr double kGammas[] = {0.5, 0.9, 0.99};
  const double gamma = kGammas[rng() % 3];

  std::vector<bool> terminal(ns, false);
  if (has_terminal) terminal.back() = true;
  std::vector<double> transition;
  std::vector<double> reward;
  transition.reserve(ns * na * ns);
  reward.reserve(ns * na * ns);
  for (StateId s = 0; s < ns; ++s) {
    for (ActionId a = 0; a < na; ++a) {
      if (terminal[s]) {
        for (StateId next = 0; next < ns; ++next) {
          transition.push_back(next == s ? 1.0 : 0.0);
          reward.push_back(0.0);
        }
        continue;
      }
      const auto row = detail::random_simplex(ns, rng);
      transition.insert(transition.end(), row.begin(), row.end());
      for (StateId next = 0; next < ns; ++next) reward.push_back(2.0 * uniform01(rng) - 1.0);
    }
  }
  std::vector<double> policy_probs;
  for (StateId s = 0; s < ns; ++s) {
    const auto row = detail::random_simplex(na, rng);
    policy_probs.insert(policy_probs.end(), row.begin(), row.end());
  }
  const std::size_t live = has_terminal ? ns - 1 : ns;
  std::vector<double> start(ns, 0.0);
  for (StateId s = 0; s < live; ++s) start[s] = 1.0 / static_cast<double>(live);
  // 1/live need not sum to exactly 1; put the rounding error on the first state.
  double sum = 0.0;
  for (double p : start) sum += p;
  start[0] += 1.0 - sum;

  TabularMdp mdp(ns, na, std::move(transition), std::move(reward), std::move(terminal), std::move(start));
  Policy policy(ns, na, std::move(policy_probs));
  QTable q(mdp, 0.0);
  for (StateId s = 0; s < ns; ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < na; ++a) q.at(s, a) = 2.0 * uniform01(rng) - 1.0;
  }
  return {Environment{"random-" + std::to_string(seed), std::move(mdp), std::move(policy)}, std::move(q), gamma};
}

}  // namespace atb
