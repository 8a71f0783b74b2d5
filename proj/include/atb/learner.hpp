#pragma once

// Episodic on-policy TD evaluation with the generic adaptive tree backup.

#include "atb/backup.hpp"
#include "atb/mdp.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace atb {

/// Stepsize α. Polynomial decay is per state-action pair: α = alpha0 · n(s,a)^(-exponent).
struct StepsizeSchedule {
  enum class Kind { kConstant, kPolynomialVisitDecay };
  Kind kind = Kind::kConstant;
  double alpha0 = 0.4;
  double exponent = 1.0;

  static StepsizeSchedule constant(double alpha) { return {Kind::kConstant, alpha, 1.0}; }
  static StepsizeSchedule polynomial(double alpha0, double exponent) {
    return {Kind::kPolynomialVisitDecay, alpha0, exponent};
  }

  friend bool operator==(const StepsizeSchedule&, const StepsizeSchedule&) = default;
};

inline void validate(const StepsizeSchedule& schedule) {
  if (!(schedule.alpha0 > 0.0 && schedule.alpha0 <= 1.0)) throw std::invalid_argument("alpha must lie in (0,1]");
  if (schedule.kind == StepsizeSchedule::Kind::kPolynomialVisitDecay &&
      !(schedule.exponent > 0.5 && schedule.exponent <= 1.0)) {
    throw std::invalid_argument("stepsize exponent must lie in (0.5,1]");
  }
}

/// `visits` is n(s,a) including the current selection, so it is at least 1.
inline double stepsize_value(const StepsizeSchedule& schedule, std::uint64_t visits) {
  if (schedule.kind == StepsizeSchedule::Kind::kConstant || visits <= 1) return schedule.alpha0;
  return schedule.alpha0 * std::pow(static_cast<double>(visits), -schedule.exponent);
}

struct LearnerState {
  QTable q;
  VisitCounts counts;
  std::size_t episode_index = 0;
  Rng rng;

  LearnerState(const TabularMdp& mdp, double q_init, std::uint64_t seed)
      : q(mdp, q_init), counts(mdp.num_states(), mdp.num_actions()), rng(seed) {}
};

inline constexpr double kSimplexTolerance = 1e-9;

/**
 * Q(s,a) <- (1-α) Q(s,a) + α (r + γ c·Q(s',.)). For a terminal successor the
 * bootstrap term is dropped and `coeffs` is ignored.
 */
inline void atb_update(QTable& q, const Transition& t, std::span<const double> coeffs, double alpha, double gamma) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("atb_update: alpha must lie in [0,1]");
  double target = t.reward;
  if (!t.done) {
    if (coeffs.size() != q.num_actions()) throw std::invalid_argument("atb_update: coefficient vector has wrong size");
    double sum = 0.0;
    for (double c : coeffs) {
      if (c < -kSimplexTolerance) throw std::invalid_argument("atb_update: negative backup coefficient");
      sum += c;
    }
    if (std::abs(sum - 1.0) > kSimplexTolerance) {
      throw std::invalid_argument("atb_update: backup coefficients do not sum to 1");
    }
    target += gamma * dot(coeffs, q.row(t.next_state));
  }
  double& entry = q.at(t.state, t.action);
  entry = (1.0 - alpha) * entry + alpha * target;
}

inline constexpr std::size_t kDefaultMaxSteps = 10'000;

/**
 * Runs one episode from a start-distribution draw, updating `state` in place.
 * n(s,a) is incremented when a is selected in s, so the successor action is
 * already counted when its transition is backed up. Returns the number of
 * transitions taken.
 */
inline std::size_t run_episode(const TabularMdp& mdp, const Policy& policy, const CoefficientStrategy& strat,
                               const StepsizeSchedule& stepsize, double gamma, LearnerState& state,
                               std::size_t max_steps = kDefaultMaxSteps) {
  if (max_steps == 0) throw std::invalid_argument("run_episode: max_steps must be positive");
  check_compatible(mdp, policy);
  check_compatible(mdp, state.q);

  std::vector<double> coeffs(mdp.num_actions());
  StateId s = sample_index(mdp.start(), state.rng);
  ActionId a = sample_index(policy.row(s), state.rng);
  state.counts.increment(s, a);

  std::size_t steps = 0;
  while (steps < max_steps) {
    const Transition t = sample_transition(mdp, policy, s, a, state.rng);
    ++steps;
    const double alpha = stepsize_value(stepsize, state.counts(s, a));
    if (!t.done) {
      state.counts.increment(t.next_state, *t.next_action);
      coefficients_for(strat,
                       CoefficientContext{policy.row(t.next_state), state.counts.row(t.next_state), t.next_action,
                                          state.episode_index},
                       coeffs);
    }
    atb_update(state.q, t, coeffs, alpha, gamma);
    if (t.done) break;
    s = t.next_state;
    a = *t.next_action;
  }
  ++state.episode_index;
  return steps;
}

/// Root-mean-square difference over the non-terminal state-action pairs of `mdp`.
inline double rms_error(const TabularMdp& mdp, const QTable& q, const QTable& q_ref) {
  check_compatible(mdp, q);
  check_compatible(mdp, q_ref);
  double sum = 0.0;
  std::size_t pairs = 0;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      const double d = q.at(s, a) - q_ref.at(s, a);
      sum += d * d;
      ++pairs;
    }
  }
  return pairs == 0 ? 0.0 : std::sqrt(sum / static_cast<double>(pairs));
}

}  // namespace atb
