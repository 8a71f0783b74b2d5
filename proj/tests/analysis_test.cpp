#include "atb/analysis.hpp"
#include "atb/verify.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <numeric>

namespace atb {
namespace {

QTable RandomQ(const TabularMdp& mdp, Rng& rng) {
  QTable q(mdp, 0.0);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) q.at(s, a) = 2 * uniform01(rng) - 1;
  }
  return q;
}

TEST(EnumerateTarget, SigmaZeroCollapsesSuccessorAction) {
  const auto env = make_gridworld();
  Rng rng(1);
  const QTable q = RandomQ(env.mdp, rng);
  const auto dist = enumerate_target(env.mdp, env.policy, q, 0.9, 0, kEast, 0.0);
  for (const auto& x : dist.atoms) {
    for (const auto& y : dist.atoms) {
      if (x.next_state == y.next_state) {
        EXPECT_EQ(x.value, y.value);
      }
    }
  }
}

TEST(EnumerateTarget, SingleStateWalk) {
  const auto env = make_random_walk(1);
  const QTable q(env.mdp, 0.0);
  const auto left = enumerate_target(env.mdp, env.policy, q, 1.0, 1, 0, 0.5);
  ASSERT_EQ(left.atoms.size(), 1u);
  EXPECT_EQ(left.atoms[0].probability, 1.0);
  EXPECT_EQ(left.atoms[0].value, -1.0);

  // The state-value target: mixing both actions by π gives the two atoms {(π(right), +1), (π(left), -1)}.
  TargetDistribution mixed;
  for (ActionId a : {ActionId{0}, ActionId{1}}) {
    for (auto atom : enumerate_target(env.mdp, env.policy, q, 1.0, 1, a, 0.5).atoms) {
      atom.probability *= env.policy(1, a);
      mixed.atoms.push_back(atom);
    }
  }
  ASSERT_EQ(mixed.atoms.size(), 2u);
  EXPECT_EQ(mixed.atoms[0].value, -1.0);
  EXPECT_EQ(mixed.atoms[1].value, 1.0);
  EXPECT_EQ(mixed.atoms[0].probability, 0.5);
  const auto m = moments(mixed);
  EXPECT_EQ(m.mean, 0.0);
  EXPECT_EQ(m.variance, 1.0);
}

TEST(EnumerateTarget, GridworldProbabilitiesSumToOne) {
  const auto env = make_gridworld();
  const QTable q(env.mdp, 0.0);
  for (StateId s = 0; s < 11; ++s) {
    if (env.mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < 4; ++a) {
      const auto dist = enumerate_target(env.mdp, env.policy, q, 1.0, s, a, 0.3);
      double sum = 0.0;
      for (const auto& atom : dist.atoms) sum += atom.probability;
      EXPECT_NEAR(sum, 1.0, 1e-12);
      EXPECT_LE(dist.atoms.size(), 11u * 4u);
    }
  }
}

TEST(EnumerateTarget, RejectsTerminalState) {
  const auto env = make_random_walk(3);
  EXPECT_THROW(enumerate_target(env.mdp, env.policy, QTable(env.mdp), 1.0, 0, 0, 0.5), std::invalid_argument);
}

TEST(Moments, Basics) {
  EXPECT_EQ(moments({{{1.0, 2.5, 0, std::nullopt}}}).mean, 2.5);
  EXPECT_EQ(moments({{{1.0, 2.5, 0, std::nullopt}}}).variance, 0.0);
  const auto m = moments({{{0.5, 1.0, 0, std::nullopt}, {0.5, -1.0, 1, std::nullopt}}});
  EXPECT_EQ(m.mean, 0.0);
  EXPECT_EQ(m.variance, 1.0);
}

// Independent check of the enumeration: sample the Sarsa target by simulation.
TEST(Moments, AgreeWithSimulation) {
  const auto env = make_gridworld();
  Rng rng(77);
  const QTable q = RandomQ(env.mdp, rng);
  const auto s = static_cast<StateId>(gridworld_state(3, 2));
  const auto exact = moments(enumerate_target(env.mdp, env.policy, q, 0.9, s, kNorth, 1.0));
  constexpr int kDraws = 200000;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (int i = 0; i < kDraws; ++i) {
    const auto t = sample_transition(env.mdp, env.policy, s, kNorth, rng);
    const double target = t.reward + (t.done ? 0.0 : 0.9 * q.at(t.next_state, *t.next_action));
    sum += target;
    sum_sq += target * target;
  }
  const double mean = sum / kDraws;
  EXPECT_NEAR(mean, exact.mean, 0.01);
  EXPECT_NEAR(sum_sq / kDraws - mean * mean, exact.variance, 0.01);
}

TEST(Moments, SharedMeanForSarsaAndExpectedSarsa) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto inst = make_random_instance(seed);
    const auto& mdp = inst.env.mdp;
    for (StateId s = 0; s < mdp.num_states(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        const double m0 = moments(enumerate_target(mdp, inst.env.policy, inst.q, inst.gamma, s, a, 0.0)).mean;
        const double m1 = moments(enumerate_target(mdp, inst.env.policy, inst.q, inst.gamma, s, a, 1.0)).mean;
        EXPECT_NEAR(m0, m1, 1e-12);
      }
    }
  }
}

TEST(VarianceIdentity, Endpoints) {
  const auto env = make_gridworld();
  Rng rng(3);
  const QTable q = RandomQ(env.mdp, rng);
  EXPECT_EQ(check_variance_identity(env.mdp, env.policy, q, 0.9, 0, kNorth, 0.0), 0.0);
  EXPECT_EQ(check_variance_identity(env.mdp, env.policy, q, 0.9, 0, kNorth, 1.0), 0.0);
}

TEST(VarianceIdentity, RandomSweep) {
  double worst = 0.0;
  for (std::uint64_t seed = 100; seed < 200; ++seed) {
    const auto inst = make_random_instance(seed);
    worst = std::max(worst, check_instance(inst, seed).variance_identity);
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(CovarianceIdentity, DeterministicTransition) {
  const auto env = make_random_walk(5);
  Rng rng(5);
  const QTable q = RandomQ(env.mdp, rng);
  const auto report = covariance_report(env.mdp, env.policy, q, 1.0, 3, 1);
  EXPECT_EQ(report.expected_variance, 0.0);
  EXPECT_EQ(report.covariance, 0.0);
  EXPECT_EQ(report.residual, 0.0);
}

TEST(CovarianceIdentity, SingleStateWalk) {
  // Two atoms of ±1 under π = (1/2, 1/2) when the action is integrated out as well;
  // per action the successor is terminal, so both targets coincide.
  const auto env = make_random_walk(1);
  for (ActionId a : {ActionId{0}, ActionId{1}}) {
    const auto report = covariance_report(env.mdp, env.policy, QTable(env.mdp), 1.0, 1, a);
    EXPECT_EQ(report.covariance, report.expected_variance);
  }
}

TEST(CovarianceIdentity, RandomSweep) {
  double worst = 0.0;
  for (std::uint64_t seed = 200; seed < 300; ++seed) {
    worst = std::max(worst, check_instance(make_random_instance(seed), seed).covariance_identity);
  }
  EXPECT_LE(worst, 1e-10);
}

TEST(SigmaMonotonicity, GridworldRandomQ) {
  const auto env = make_gridworld();
  Rng rng(12);
  const QTable q = RandomQ(env.mdp, rng);
  for (StateId s = 0; s < 11; ++s) {
    if (env.mdp.is_terminal(s)) continue;
    for (ActionId a = 0; a < 4; ++a) {
      EXPECT_TRUE(check_sigma_monotonicity(env.mdp, env.policy, q, 1.0, s, a, kSigmaGrid));
      const auto profile = variance_profile(env.mdp, env.policy, q, 1.0, s, a, std::vector<double>{0.0, 1.0});
      EXPECT_GE(profile[1], profile[0]);
    }
  }
}

TEST(SigmaMonotonicity, DeterministicPolicyDegenerate) {
  const auto walk = make_random_walk(5);
  std::vector<double> always_right;
  for (StateId s = 0; s < walk.mdp.num_states(); ++s) always_right.insert(always_right.end(), {0.0, 1.0});
  const Policy right(walk.mdp.num_states(), 2, always_right);
  Rng rng(2);
  const QTable q = RandomQ(walk.mdp, rng);
  const auto profile = variance_profile(walk.mdp, right, q, 1.0, 2, 0, kSigmaGrid);
  for (double v : profile) EXPECT_EQ(v, 0.0);
  EXPECT_TRUE(check_sigma_monotonicity(walk.mdp, right, q, 1.0, 2, 0, kSigmaGrid));
}

TEST(SigmaMonotonicity, RejectsUnsortedGrid) {
  const auto env = make_gridworld();
  EXPECT_THROW(check_sigma_monotonicity(env.mdp, env.policy, QTable(env.mdp), 1.0, 0, 0, std::vector<double>{0.5, 0.0}),
               std::invalid_argument);
}

TEST(ExpectedOperator, IndependentOfSigma) {
  const auto env = make_gridworld();
  Rng rng(21);
  const QTable q = RandomQ(env.mdp, rng);
  EXPECT_LE(check_expected_operator(env.mdp, env.policy, q, 0.9, 0.0), 1e-15);
  for (double sigma : kSigmaGrid) EXPECT_LE(check_expected_operator(env.mdp, env.policy, q, 0.9, sigma), 1e-10);
}

TEST(ConvergenceSuite, GammaZeroConvergesToExpectedReward) {
  const auto env = make_random_walk(5);
  EXPECT_LT(convergence_suite(env.mdp, env.policy, parse_strategy("qsigma(sigma=1)"), 0.0, 3000, 17), 0.05);
}

TEST(ConvergenceSuite, RequiresDecayingStepsize) {
  const auto env = make_random_walk(5);
  EXPECT_THROW(convergence_suite(env.mdp, env.policy, strategy::Sarsa{}, 1.0, 10, 1, StepsizeSchedule::constant(0.4)),
               std::invalid_argument);
}

TEST(CountBias, FrozenCountsShiftTheFixedPoint) {
  const auto inst = make_count_bias_instance();
  const auto& mdp = inst.env.mdp;
  const QTable biased = frozen_count_fixed_point(mdp, inst.env.policy, inst.counts, inst.gamma);
  // The frozen-count operator is the Bellman operator of the count-induced policy,
  // so its fixed point is available from the independent linear solve too.
  const auto induced = count_induced_policy(inst.env.policy, inst.counts);
  const auto oracle_q = oracle::action_values(mdp, induced, inst.gamma);
  for (std::size_t i = 0; i < oracle_q.size(); ++i) EXPECT_NEAR(biased.values()[i], oracle_q[i], 1e-10);
  // By hand: W = 0.9 + 0.45 W, Q(0,a) = r(a) + 0.45 W.
  EXPECT_NEAR(biased.at(0, 0), 1.0 + 0.45 * 0.9 / 0.55, 1e-10);
  EXPECT_GT(max_abs_difference(biased, exact_q(mdp, inst.env.policy, inst.gamma)), 0.01);
}

TEST(Verification, ReportPassesOnSmallSweep) {
  VerifyOptions options;
  options.sweeps = 10;
  options.convergence = false;
  const auto records = run_verification(options);
  EXPECT_EQ(records.size(), 10u * 4u + 4u);
  for (const auto& r : records) EXPECT_TRUE(r.pass) << r.check << " " << r.residual;
  std::ostringstream os;
  write_report(os, records);
  EXPECT_EQ(os.str().substr(0, os.str().find('\n')), "check\tseed\tresidual\tresult");
}

}  // namespace
}  // namespace atb
