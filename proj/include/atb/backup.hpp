#pragma once

// Backup coefficients c(s', .) for the generic one-step tree backup
//
//   Q(s,a) <- (1-α) Q(s,a) + α (r + γ Σ_a' c(s',a') Q(s',a')),   Σ_a' c(s',a') = 1.
//
// Every strategy below emits a point of the probability simplex.

#include "atb/mdp.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace atb {

using CoefficientVector = std::vector<double>;

/// n(s,a): number of times action a was selected in state s. Never decreases.
class VisitCounts {
 public:
  VisitCounts(std::size_t num_states, std::size_t num_actions)
      : num_actions_(num_actions), counts_(num_states * num_actions, 0) {}

  void increment(StateId s, ActionId a) { ++counts_[s * num_actions_ + a]; }
  std::uint64_t operator()(StateId s, ActionId a) const { return counts_[s * num_actions_ + a]; }
  std::span<const std::uint64_t> row(StateId s) const { return {counts_.data() + s * num_actions_, num_actions_}; }

  std::uint64_t total() const {
    std::uint64_t sum = 0;
    for (auto n : counts_) sum += n;
    return sum;
  }

  friend bool operator==(const VisitCounts&, const VisitCounts&) = default;

 private:
  std::size_t num_actions_;
  std::vector<std::uint64_t> counts_;
};

struct SigmaSchedule {
  enum class Kind { kFixed, kExponentialDecay };
  Kind kind = Kind::kFixed;
  double sigma0 = 0.0;
  double decay = 1.0;

  static SigmaSchedule fixed(double sigma) { return {Kind::kFixed, sigma, 1.0}; }
  static SigmaSchedule exponential(double sigma0, double decay) { return {Kind::kExponentialDecay, sigma0, decay}; }

  friend bool operator==(const SigmaSchedule&, const SigmaSchedule&) = default;
};

inline void validate(const SigmaSchedule& schedule) {
  if (!(schedule.sigma0 >= 0.0 && schedule.sigma0 <= 1.0)) {
    throw std::invalid_argument("sigma must lie in [0,1]");
  }
  if (schedule.kind == SigmaSchedule::Kind::kExponentialDecay && !(schedule.decay > 0.0 && schedule.decay <= 1.0)) {
    throw std::invalid_argument("sigma decay must lie in (0,1]");
  }
}

/// σ used during episode `episode_index` (0-based).
inline double sigma_schedule_value(const SigmaSchedule& schedule, std::size_t episode_index) {
  switch (schedule.kind) {
    case SigmaSchedule::Kind::kFixed:
      return schedule.sigma0;
    case SigmaSchedule::Kind::kExponentialDecay:
      return schedule.sigma0 * std::pow(schedule.decay, static_cast<double>(episode_index));
  }
  return schedule.sigma0;
}

// ---------------------------------------------------------------------------
// Coefficient rules

/// Q(σ): c(a) = (1-σ) π(a) + σ [a = a'].
inline void coeff_q_sigma(std::span<const double> policy_row, ActionId next_action, double sigma,
                          std::span<double> out) {
  if (!(sigma >= 0.0 && sigma <= 1.0)) throw std::invalid_argument("coeff_q_sigma: sigma must lie in [0,1]");
  if (next_action >= policy_row.size()) throw std::invalid_argument("coeff_q_sigma: action out of range");
  for (std::size_t a = 0; a < policy_row.size(); ++a) out[a] = (1.0 - sigma) * policy_row[a];
  out[next_action] += sigma;
}

inline CoefficientVector coeff_q_sigma(std::span<const double> policy_row, ActionId next_action, double sigma) {
  CoefficientVector c(policy_row.size());
  coeff_q_sigma(policy_row, next_action, sigma, c);
  return c;
}

/// Count-based: c(a) = n(a) / Σ n. Falls back to π when the row is unvisited.
inline void coeff_count_based(std::span<const std::uint64_t> counts_row, std::span<const double> policy_row,
                              std::span<double> out) {
  std::uint64_t total = 0;
  for (auto n : counts_row) total += n;
  if (total == 0) {
    std::copy(policy_row.begin(), policy_row.end(), out.begin());
    return;
  }
  const auto denom = static_cast<double>(total);
  for (std::size_t a = 0; a < counts_row.size(); ++a) out[a] = static_cast<double>(counts_row[a]) / denom;
}

inline CoefficientVector coeff_count_based(std::span<const std::uint64_t> counts_row,
                                           std::span<const double> policy_row) {
  CoefficientVector c(policy_row.size());
  coeff_count_based(counts_row, policy_row, c);
  return c;
}

/**
 * Policy-based: π restricted to visited actions and renormalised,
 * c(a) = u(n(a)) π(a) / Σ_a' u(n(a')) π(a'), with u the unit step.
 * Equals π once every action has been tried; falls back to π when no visited
 * action carries policy mass.
 */
inline void coeff_policy_based(std::span<const std::uint64_t> counts_row, std::span<const double> policy_row,
                               std::span<double> out) {
  double mass = 0.0;
  bool all_visited = true;
  for (std::size_t a = 0; a < counts_row.size(); ++a) {
    if (counts_row[a] > 0) {
      mass += policy_row[a];
    } else {
      all_visited = false;
    }
  }
  if (all_visited || mass <= 0.0) {
    std::copy(policy_row.begin(), policy_row.end(), out.begin());
    return;
  }
  for (std::size_t a = 0; a < counts_row.size(); ++a) out[a] = counts_row[a] > 0 ? policy_row[a] / mass : 0.0;
}

inline CoefficientVector coeff_policy_based(std::span<const std::uint64_t> counts_row,
                                            std::span<const double> policy_row) {
  CoefficientVector c(policy_row.size());
  coeff_policy_based(counts_row, policy_row, c);
  return c;
}

// ---------------------------------------------------------------------------
// Strategy dispatch

namespace strategy {
struct QSigma {
  SigmaSchedule schedule;
  friend bool operator==(const QSigma&, const QSigma&) = default;
};
struct CountBased {
  friend bool operator==(const CountBased&, const CountBased&) = default;
};
struct PolicyBased {
  friend bool operator==(const PolicyBased&, const PolicyBased&) = default;
};
struct ExpectedSarsa {
  friend bool operator==(const ExpectedSarsa&, const ExpectedSarsa&) = default;
};
struct Sarsa {
  friend bool operator==(const Sarsa&, const Sarsa&) = default;
};
/// One-step on-policy tree backup; coincides with Expected Sarsa.
struct TreeBackup {
  friend bool operator==(const TreeBackup&, const TreeBackup&) = default;
};
}  // namespace strategy

using CoefficientStrategy = std::variant<strategy::QSigma, strategy::CountBased, strategy::PolicyBased,
                                         strategy::ExpectedSarsa, strategy::Sarsa, strategy::TreeBackup>;

struct CoefficientContext {
  std::span<const double> policy_row;
  std::span<const std::uint64_t> counts_row;
  std::optional<ActionId> next_action;
  std::size_t episode_index = 0;
};

/// Whether the strategy reads the sampled successor action a'.
inline bool needs_next_action(const CoefficientStrategy& s) {
  if (const auto* q = std::get_if<strategy::QSigma>(&s)) {
    return !(q->schedule.kind == SigmaSchedule::Kind::kFixed && q->schedule.sigma0 == 0.0);
  }
  return std::holds_alternative<strategy::Sarsa>(s);
}

inline void coefficients_for(const CoefficientStrategy& strat, const CoefficientContext& ctx,
                             std::span<double> out) {
  if (needs_next_action(strat) && !ctx.next_action) {
    throw std::invalid_argument("coefficients_for: strategy requires the successor action");
  }
  struct Visitor {
    const CoefficientContext& ctx;
    std::span<double> out;
    void operator()(const strategy::QSigma& q) const {
      const double sigma = sigma_schedule_value(q.schedule, ctx.episode_index);
      if (sigma == 0.0) {
        std::copy(ctx.policy_row.begin(), ctx.policy_row.end(), out.begin());
      } else {
        coeff_q_sigma(ctx.policy_row, *ctx.next_action, sigma, out);
      }
    }
    void operator()(const strategy::CountBased&) const { coeff_count_based(ctx.counts_row, ctx.policy_row, out); }
    void operator()(const strategy::PolicyBased&) const { coeff_policy_based(ctx.counts_row, ctx.policy_row, out); }
    void operator()(const strategy::ExpectedSarsa&) const {
      std::copy(ctx.policy_row.begin(), ctx.policy_row.end(), out.begin());
    }
    void operator()(const strategy::Sarsa&) const { coeff_q_sigma(ctx.policy_row, *ctx.next_action, 1.0, out); }
    void operator()(const strategy::TreeBackup&) const {
      std::copy(ctx.policy_row.begin(), ctx.policy_row.end(), out.begin());
    }
  };
  std::visit(Visitor{ctx, out}, strat);
}

inline CoefficientVector coefficients_for(const CoefficientStrategy& strat, const CoefficientContext& ctx) {
  CoefficientVector c(ctx.policy_row.size());
  coefficients_for(strat, ctx, c);
  return c;
}

// ---------------------------------------------------------------------------
// Names

namespace detail {

inline std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view text, std::string_view what) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  const auto res = std::from_chars(first, last, value);
  if (res.ec != std::errc() || res.ptr != last) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " from '" + std::string(text) + "'");
  }
  return value;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Canonical text form, accepted back by parse_strategy.
inline std::string to_string(const CoefficientStrategy& strat) {
  struct Visitor {
    std::string operator()(const strategy::QSigma& q) const {
      const auto& sch = q.schedule;
      if (sch.kind == SigmaSchedule::Kind::kFixed) return "qsigma(sigma=" + detail::format_double(sch.sigma0) + ")";
      if (sch.sigma0 == 1.0) return "qsigma(decay=" + detail::format_double(sch.decay) + ")";
      return "qsigma(sigma=" + detail::format_double(sch.sigma0) + ",decay=" + detail::format_double(sch.decay) + ")";
    }
    std::string operator()(const strategy::CountBased&) const { return "count-atb"; }
    std::string operator()(const strategy::PolicyBased&) const { return "policy-atb"; }
    std::string operator()(const strategy::ExpectedSarsa&) const { return "expected-sarsa"; }
    std::string operator()(const strategy::Sarsa&) const { return "sarsa"; }
    std::string operator()(const strategy::TreeBackup&) const { return "tree-backup"; }
  };
  return std::visit(Visitor{}, strat);
}

/**
 * Parses a strategy name. Accepted forms:
 *   qsigma(sigma=S)               fixed σ
 *   qsigma(decay=D)               σ = D^episode, starting from 1
 *   qsigma(sigma=S,decay=D)       σ = S·D^episode
 *   count-atb | policy-atb | sarsa | expected-sarsa | tree-backup
 */
inline CoefficientStrategy parse_strategy(std::string_view text) {
  const auto name = detail::trim(text);
  if (name == "count-atb") return strategy::CountBased{};
  if (name == "policy-atb") return strategy::PolicyBased{};
  if (name == "expected-sarsa") return strategy::ExpectedSarsa{};
  if (name == "sarsa") return strategy::Sarsa{};
  if (name == "tree-backup") return strategy::TreeBackup{};

  constexpr std::string_view kPrefix = "qsigma(";
  if (name.size() <= kPrefix.size() || name.substr(0, kPrefix.size()) != kPrefix || name.back() != ')') {
    throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
  }
  auto args = name.substr(kPrefix.size(), name.size() - kPrefix.size() - 1);
  std::optional<double> sigma;
  std::optional<double> decay;
  while (!args.empty()) {
    const auto comma = args.find(',');
    const auto item = detail::trim(args.substr(0, comma));
    args = comma == std::string_view::npos ? std::string_view{} : args.substr(comma + 1);
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw std::invalid_argument("strategy '" + std::string(name) + "': expected key=value, got '" +
                                  std::string(item) + "'");
    }
    const auto key = detail::trim(item.substr(0, eq));
    const auto value = detail::trim(item.substr(eq + 1));
    if (key == "sigma" && !sigma) {
      sigma = detail::parse_double(value, "sigma");
    } else if (key == "decay" && !decay) {
      decay = detail::parse_double(value, "decay");
    } else {
      throw std::invalid_argument("strategy '" + std::string(name) + "': unexpected parameter '" +
                                  std::string(key) + "'");
    }
  }
  SigmaSchedule schedule;
  if (decay) {
    schedule = SigmaSchedule::exponential(sigma.value_or(1.0), *decay);
  } else if (sigma) {
    schedule = SigmaSchedule::fixed(*sigma);
  } else {
    throw std::invalid_argument("strategy '" + std::string(name) + "': needs sigma or decay");
  }
  validate(schedule);
  return strategy::QSigma{schedule};
}

struct StrategyInfo {
  std::string_view syntax;
  std::string_view description;
};

inline constexpr StrategyInfo kStrategyCatalog[] = {
    {"qsigma(sigma=S)", "Q(sigma) with fixed sigma in [0,1]"},
    {"qsigma(decay=D)", "Q(sigma) with sigma = D^episode (starts at 1)"},
    {"qsigma(sigma=S,decay=D)", "Q(sigma) with sigma = S * D^episode"},
    {"count-atb", "coefficients proportional to successor-action visit counts"},
    {"policy-atb", "policy probabilities renormalised over visited successor actions"},
    {"sarsa", "sampled successor action (sigma = 1)"},
    {"expected-sarsa", "full expectation under the policy (sigma = 0)"},
    {"tree-backup", "one-step tree backup (identical to expected-sarsa on-policy)"},
};

}  // namespace atb
