#pragma once

// Finite MDPs, fixed policies and the exact policy-evaluation oracles used as
// ground truth everywhere else in the library.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace atb {

using StateId = std::size_t;
using ActionId = std::size_t;
using Rng = std::mt19937_64;

inline constexpr double kProbabilityTolerance = 1e-12;

/// Thrown by exact_q when gamma = 1 and some state can avoid absorption forever.
class ImproperPolicyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SingularSystemError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Uniform double in [0, 1) built from the top 53 bits of one engine draw.
/// Independent of the standard library's distribution implementations, so
/// sampled trajectories are identical across toolchains.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Draws an index from a categorical distribution. Consumes exactly one draw.
inline std::size_t sample_index(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double acc = 0.0;
  std::size_t last_positive = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    acc += probs[i];
    last_positive = i;
    if (u < acc) return i;
  }
  // Rounding left u above the accumulated mass.
  return last_positive;
}

namespace detail {

inline void check_distribution(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double p : row) {
    if (!(p >= 0.0)) throw std::invalid_argument(what + ": negative or NaN probability");
    sum += p;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    throw std::invalid_argument(what + ": probabilities sum to " + std::to_string(sum));
  }
}

}  // namespace detail

/**
 * Finite MDP with next-state dependent rewards.
 *
 * Tensors are stored flat in (s, a, s') order. Terminal states are absorbing
 * with zero reward; the start distribution puts no mass on them. All
 * invariants are checked on construction and the object is immutable after.
 */
class TabularMdp {
 public:
  TabularMdp(std::size_t num_states, std::size_t num_actions, std::vector<double> transition,
             std::vector<double> reward, std::vector<bool> terminal, std::vector<double> start)
      : num_states_(num_states),
        num_actions_(num_actions),
        transition_(std::move(transition)),
        reward_(std::move(reward)),
        terminal_(std::move(terminal)),
        start_(std::move(start)) {
    validate();
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }

  double probability(StateId s, ActionId a, StateId next) const {
    return transition_[index(s, a, next)];
  }
  double reward(StateId s, ActionId a, StateId next) const { return reward_[index(s, a, next)]; }

  std::span<const double> successor_probs(StateId s, ActionId a) const {
    return {transition_.data() + index(s, a, 0), num_states_};
  }
  std::span<const double> successor_rewards(StateId s, ActionId a) const {
    return {reward_.data() + index(s, a, 0), num_states_};
  }

  /// r̄(s,a) = Σ_{s'} P(s'|s,a) R(s,a,s').
  double expected_reward(StateId s, ActionId a) const {
    const auto p = successor_probs(s, a);
    const auto r = successor_rewards(s, a);
    double sum = 0.0;
    for (std::size_t i = 0; i < num_states_; ++i) sum += p[i] * r[i];
    return sum;
  }

  bool is_terminal(StateId s) const { return terminal_[s]; }
  std::size_t num_terminal() const {
    std::size_t n = 0;
    for (bool t : terminal_) n += t ? 1 : 0;
    return n;
  }
  std::span<const double> start() const { return start_; }

 private:
  std::size_t index(StateId s, ActionId a, StateId next) const {
    return (s * num_actions_ + a) * num_states_ + next;
  }

  void validate() const {
    if (num_states_ == 0 || num_actions_ == 0) {
      throw std::invalid_argument("TabularMdp: empty state or action set");
    }
    const std::size_t cube = num_states_ * num_actions_ * num_states_;
    if (transition_.size() != cube || reward_.size() != cube ||
        terminal_.size() != num_states_ || start_.size() != num_states_) {
      throw std::invalid_argument("TabularMdp: tensor dimensions do not match");
    }
    for (StateId s = 0; s < num_states_; ++s) {
      for (ActionId a = 0; a < num_actions_; ++a) {
        const std::string where =
            "TabularMdp transition(" + std::to_string(s) + "," + std::to_string(a) + ",:)";
        detail::check_distribution(successor_probs(s, a), where);
        if (!terminal_[s]) continue;
        if (probability(s, a, s) != 1.0) throw std::invalid_argument(where + ": terminal state not absorbing");
        for (double r : successor_rewards(s, a)) {
          if (r != 0.0) throw std::invalid_argument(where + ": terminal state has nonzero reward");
        }
      }
    }
    detail::check_distribution(start_, "TabularMdp start");
    for (StateId s = 0; s < num_states_; ++s) {
      if (terminal_[s] && start_[s] != 0.0) {
        throw std::invalid_argument("TabularMdp start: mass on terminal state " + std::to_string(s));
      }
    }
  }

  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<bool> terminal_;
  std::vector<double> start_;
};

/// Row-stochastic action distribution π(a|s).
class Policy {
 public:
  Policy(std::size_t num_states, std::size_t num_actions, std::vector<double> probs)
      : num_states_(num_states), num_actions_(num_actions), probs_(std::move(probs)) {
    if (probs_.size() != num_states_ * num_actions_) {
      throw std::invalid_argument("Policy: table has wrong size");
    }
    for (StateId s = 0; s < num_states_; ++s) {
      detail::check_distribution(row(s), "Policy row " + std::to_string(s));
    }
  }

  static Policy uniform(std::size_t num_states, std::size_t num_actions) {
    return Policy(num_states, num_actions,
                  std::vector<double>(num_states * num_actions, 1.0 / static_cast<double>(num_actions)));
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  double operator()(StateId s, ActionId a) const { return probs_[s * num_actions_ + a]; }
  std::span<const double> row(StateId s) const { return {probs_.data() + s * num_actions_, num_actions_}; }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<double> probs_;
};

/// Action-value estimates. Entries of terminal states are zero and stay zero.
class QTable {
 public:
  QTable(const TabularMdp& mdp, double init_value = 0.0)
      : num_states_(mdp.num_states()),
        num_actions_(mdp.num_actions()),
        init_value_(init_value),
        values_(num_states_ * num_actions_, init_value) {
    for (StateId s = 0; s < num_states_; ++s) {
      if (!mdp.is_terminal(s)) continue;
      for (ActionId a = 0; a < num_actions_; ++a) at(s, a) = 0.0;
    }
  }

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  double init_value() const { return init_value_; }

  double& at(StateId s, ActionId a) { return values_[s * num_actions_ + a]; }
  double at(StateId s, ActionId a) const { return values_[s * num_actions_ + a]; }
  std::span<const double> row(StateId s) const { return {values_.data() + s * num_actions_, num_actions_}; }
  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  bool same_shape(const QTable& other) const {
    return num_states_ == other.num_states_ && num_actions_ == other.num_actions_;
  }

  friend bool operator==(const QTable& lhs, const QTable& rhs) {
    return lhs.same_shape(rhs) && lhs.values_ == rhs.values_;
  }

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  double init_value_;
  std::vector<double> values_;
};

/// One step of experience (s, a, r, s', a'). next_action is empty when done.
struct Transition {
  StateId state = 0;
  ActionId action = 0;
  double reward = 0.0;
  StateId next_state = 0;
  std::optional<ActionId> next_action;
  bool done = false;
};

/// An MDP bundled with the policy it is evaluated under.
struct Environment {
  std::string name;
  TabularMdp mdp;
  Policy policy;
};

inline void check_compatible(const TabularMdp& mdp, const Policy& policy) {
  if (policy.num_states() != mdp.num_states() || policy.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("policy dimensions do not match the MDP");
  }
}

inline void check_compatible(const TabularMdp& mdp, const QTable& q) {
  if (q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions()) {
    throw std::invalid_argument("QTable dimensions do not match the MDP");
  }
}

inline double dot(std::span<const double> lhs, std::span<const double> rhs) {
  double sum = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) sum += lhs[i] * rhs[i];
  return sum;
}

// ---------------------------------------------------------------------------
// Environments

/**
 * Deterministic random walk over `num_nonterminal` states (odd).
 *
 * State 0 and state n+1 are the terminal endpoints. Action 0 moves left,
 * action 1 moves right. Entering the left end pays -1, the right end +1,
 * every other step 0. Episodes start in the centre state.
 */
inline Environment make_random_walk(int num_nonterminal) {
  if (num_nonterminal < 1 || num_nonterminal % 2 == 0) {
    throw std::invalid_argument("make_random_walk: number of states must be a positive odd integer, got " +
                                std::to_string(num_nonterminal));
  }
  const std::size_t n = static_cast<std::size_t>(num_nonterminal);
  const std::size_t num_states = n + 2;
  const std::size_t num_actions = 2;
  const std::size_t cube = num_states * num_actions * num_states;
  std::vector<double> transition(cube, 0.0);
  std::vector<double> reward(cube, 0.0);
  auto idx = [&](StateId s, ActionId a, StateId next) { return (s * num_actions + a) * num_states + next; };

  std::vector<bool> terminal(num_states, false);
  terminal.front() = terminal.back() = true;
  for (StateId s = 0; s < num_states; ++s) {
    for (ActionId a = 0; a < num_actions; ++a) {
      if (terminal[s]) {
        transition[idx(s, a, s)] = 1.0;
        continue;
      }
      const StateId next = a == 0 ? s - 1 : s + 1;
      transition[idx(s, a, next)] = 1.0;
      if (next == 0) reward[idx(s, a, next)] = -1.0;
      if (next == num_states - 1) reward[idx(s, a, next)] = 1.0;
    }
  }
  std::vector<double> start(num_states, 0.0);
  start[(n + 1) / 2] = 1.0;

  TabularMdp mdp(num_states, num_actions, std::move(transition), std::move(reward), std::move(terminal),
                 std::move(start));
  return Environment{"walk" + std::to_string(n), std::move(mdp), Policy::uniform(num_states, num_actions)};
}

struct GridworldParams {
  double success_prob = 0.8;  ///< intended move; the remainder splits evenly between the two perpendicular moves
  double step_reward = -0.04;
  double goal_reward = 1.0;
  double pit_reward = -1.0;
};

/// Action order for the gridworld.
enum GridAction : ActionId { kNorth = 0, kSouth = 1, kEast = 2, kWest = 3 };

/// State index of gridworld cell (col, row), 1-based, or -1 for the wall / off-grid.
inline int gridworld_state(int col, int row) {
  if (col < 1 || col > 4 || row < 1 || row > 3) return -1;
  if (col == 2 && row == 2) return -1;
  int id = (row - 1) * 4 + (col - 1);
  if (row > 2 || (row == 2 && col > 2)) --id;
  return id;
}

/**
 * The classic 4x3 gridworld: wall at (2,2), +1 exit at (4,3), -1 exit at (4,2),
 * start at (1,1). Moves succeed with `success_prob` and otherwise slip to one
 * of the perpendicular directions; bumping into the wall or the border leaves
 * the agent in place. Non-exit steps pay `step_reward`, entering an exit pays
 * that exit's reward.
 */
inline Environment make_gridworld(const GridworldParams& params = {}) {
  if (!(params.success_prob >= 0.0 && params.success_prob <= 1.0)) {
    throw std::invalid_argument("make_gridworld: success_prob must lie in [0,1]");
  }
  const std::size_t num_states = 11;
  const std::size_t num_actions = 4;
  const std::size_t cube = num_states * num_actions * num_states;
  std::vector<double> transition(cube, 0.0);
  std::vector<double> reward(cube, 0.0);
  auto idx = [&](StateId s, ActionId a, StateId next) { return (s * num_actions + a) * num_states + next; };

  const int goal = gridworld_state(4, 3);
  const int pit = gridworld_state(4, 2);
  std::vector<bool> terminal(num_states, false);
  terminal[static_cast<std::size_t>(goal)] = terminal[static_cast<std::size_t>(pit)] = true;

  constexpr int kDeltaCol[] = {0, 0, 1, -1};
  constexpr int kDeltaRow[] = {1, -1, 0, 0};
  constexpr ActionId kPerpendicular[4][2] = {{kEast, kWest}, {kEast, kWest}, {kNorth, kSouth}, {kNorth, kSouth}};
  const double slip = (1.0 - params.success_prob) / 2.0;

  for (int row = 1; row <= 3; ++row) {
    for (int col = 1; col <= 4; ++col) {
      const int id = gridworld_state(col, row);
      if (id < 0) continue;
      const auto s = static_cast<StateId>(id);
      for (ActionId a = 0; a < num_actions; ++a) {
        if (terminal[s]) {
          transition[idx(s, a, s)] = 1.0;
          continue;
        }
        const std::pair<ActionId, double> outcomes[] = {
            {a, params.success_prob}, {kPerpendicular[a][0], slip}, {kPerpendicular[a][1], slip}};
        for (const auto& [move, prob] : outcomes) {
          int dest = gridworld_state(col + kDeltaCol[move], row + kDeltaRow[move]);
          if (dest < 0) dest = id;
          transition[idx(s, a, static_cast<StateId>(dest))] += prob;
        }
        for (StateId next = 0; next < num_states; ++next) {
          const int n = static_cast<int>(next);
          reward[idx(s, a, next)] = n == goal ? params.goal_reward : n == pit ? params.pit_reward : params.step_reward;
        }
      }
    }
  }
  std::vector<double> start(num_states, 0.0);
  start[static_cast<std::size_t>(gridworld_state(1, 1))] = 1.0;

  TabularMdp mdp(num_states, num_actions, std::move(transition), std::move(reward), std::move(terminal),
                 std::move(start));
  return Environment{"gridworld", std::move(mdp), Policy::uniform(num_states, num_actions)};
}

// ---------------------------------------------------------------------------
// Simulation

/// Samples s' ~ P(.|s,a) and, if s' is not terminal, a' ~ π(.|s').
inline Transition sample_transition(const TabularMdp& mdp, const Policy& policy, StateId s, ActionId a, Rng& rng) {
  if (s >= mdp.num_states() || a >= mdp.num_actions()) {
    throw std::invalid_argument("sample_transition: state or action out of range");
  }
  if (mdp.is_terminal(s)) throw std::invalid_argument("sample_transition: cannot act from a terminal state");
  Transition t;
  t.state = s;
  t.action = a;
  t.next_state = sample_index(mdp.successor_probs(s, a), rng);
  t.reward = mdp.reward(s, a, t.next_state);
  t.done = mdp.is_terminal(t.next_state);
  if (!t.done) t.next_action = sample_index(policy.row(t.next_state), rng);
  return t;
}

// ---------------------------------------------------------------------------
// Exact evaluation

/// True iff every non-terminal state reaches a terminal state with probability 1 under `policy`.
inline bool is_proper(const TabularMdp& mdp, const Policy& policy) {
  const std::size_t n = mdp.num_states();
  std::vector<bool> reaches(n, false);
  for (StateId s = 0; s < n; ++s) reaches[s] = mdp.is_terminal(s);
  // A finite chain is absorbed almost surely iff every state has a path to an
  // absorbing state; grow that set backwards to a fixpoint.
  for (bool changed = true; changed;) {
    changed = false;
    for (StateId s = 0; s < n; ++s) {
      if (reaches[s]) continue;
      for (ActionId a = 0; a < mdp.num_actions() && !reaches[s]; ++a) {
        if (policy(s, a) <= 0.0) continue;
        const auto p = mdp.successor_probs(s, a);
        for (StateId next = 0; next < n; ++next) {
          if (p[next] > 0.0 && reaches[next]) {
            reaches[s] = changed = true;
            break;
          }
        }
      }
    }
  }
  for (bool r : reaches) {
    if (!r) return false;
  }
  return true;
}

/// (T_π q)(s,a) = r̄(s,a) + γ Σ_{s',a'} P(s'|s,a) π(a'|s') q(s',a'); terminal rows stay 0.
inline QTable bellman_apply(const TabularMdp& mdp, const Policy& policy, double gamma, const QTable& q) {
  check_compatible(mdp, policy);
  check_compatible(mdp, q);
  QTable out(mdp, 0.0);
  std::vector<double> state_value(mdp.num_states(), 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_terminal(s)) state_value[s] = dot(policy.row(s), q.row(s));
  }
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      out.at(s, a) = mdp.expected_reward(s, a) + gamma * dot(mdp.successor_probs(s, a), state_value);
    }
  }
  return out;
}

/**
 * Q^π as the solution of (I - γ P_π) Q = r̄ over non-terminal state-action
 * pairs, terminal values pinned to zero. Dense LU with partial pivoting.
 */
inline QTable exact_q(const TabularMdp& mdp, const Policy& policy, double gamma) {
  check_compatible(mdp, policy);
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("exact_q: gamma must lie in [0,1]");
  if (gamma == 1.0 && !is_proper(mdp, policy)) {
    throw ImproperPolicyError("exact_q: policy is improper (some state never reaches a terminal) at gamma = 1");
  }

  const std::size_t num_actions = mdp.num_actions();
  std::vector<std::ptrdiff_t> unknown(mdp.num_states(), -1);
  std::ptrdiff_t count = 0;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!mdp.is_terminal(s)) unknown[s] = count++;
  }
  const auto dim = count * static_cast<std::ptrdiff_t>(num_actions);
  QTable q(mdp, 0.0);
  if (dim == 0) return q;

  auto row_of = [&](StateId s, ActionId a) { return unknown[s] * static_cast<std::ptrdiff_t>(num_actions) + static_cast<std::ptrdiff_t>(a); };
  Eigen::MatrixXd system = Eigen::MatrixXd::Identity(dim, dim);
  Eigen::VectorXd rhs(dim);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < num_actions; ++a) {
      const auto i = row_of(s, a);
      rhs(i) = mdp.expected_reward(s, a);
      const auto p = mdp.successor_probs(s, a);
      for (StateId next = 0; next < mdp.num_states(); ++next) {
        if (p[next] == 0.0 || mdp.is_terminal(next)) continue;
        for (ActionId b = 0; b < num_actions; ++b) {
          system(i, row_of(next, b)) -= gamma * p[next] * policy(next, b);
        }
      }
    }
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(system);
  const double pivot_floor = 1e-13 * std::max(1.0, system.cwiseAbs().maxCoeff());
  if (lu.matrixLU().diagonal().cwiseAbs().minCoeff() <= pivot_floor) {
    throw SingularSystemError("exact_q: Bellman system is singular");
  }
  const Eigen::VectorXd solution = lu.solve(rhs);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < num_actions; ++a) q.at(s, a) = solution(row_of(s, a));
  }
  return q;
}

/// V(s) = Σ_a π(a|s) Q(s,a).
inline std::vector<double> state_values(const Policy& policy, const QTable& q) {
  std::vector<double> v(q.num_states(), 0.0);
  for (StateId s = 0; s < q.num_states(); ++s) v[s] = dot(policy.row(s), q.row(s));
  return v;
}

inline double max_abs_difference(const QTable& lhs, const QTable& rhs) {
  if (!lhs.same_shape(rhs)) throw std::invalid_argument("max_abs_difference: dimension mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < lhs.values().size(); ++i) {
    worst = std::max(worst, std::abs(lhs.values()[i] - rhs.values()[i]));
  }
  return worst;
}

/// Repeats bellman_apply until successive iterates differ by at most `tolerance`.
inline QTable iterate_bellman(const TabularMdp& mdp, const Policy& policy, double gamma, QTable q,
                              double tolerance = 1e-13, std::size_t max_iterations = 1'000'000) {
  for (std::size_t k = 0; k < max_iterations; ++k) {
    QTable next = bellman_apply(mdp, policy, gamma, q);
    const double change = max_abs_difference(next, q);
    q = std::move(next);
    if (change <= tolerance) break;
  }
  return q;
}

}  // namespace atb
