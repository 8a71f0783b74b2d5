#include "atb/backup.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

namespace atb {
namespace {

void ExpectCoefficients(const CoefficientVector& got, std::initializer_list<double> want, double tol = 1e-15) {
  ASSERT_EQ(got.size(), want.size());
  std::size_t i = 0;
  for (double w : want) EXPECT_NEAR(got[i++], w, tol) << "index " << i - 1;
}

std::vector<double> RandomSimplex(std::size_t n, Rng& rng) {
  std::vector<double> w(n);
  for (auto& x : w) x = -std::log(1.0 - uniform01(rng));
  const double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& x : w) x /= sum;
  return w;
}

TEST(QSigma, Endpoints) {
  const std::vector<double> pi = {0.2, 0.3, 0.5};
  ExpectCoefficients(coeff_q_sigma(pi, 1, 0.0), {0.2, 0.3, 0.5});
  ExpectCoefficients(coeff_q_sigma(pi, 1, 1.0), {0.0, 1.0, 0.0});
}

TEST(QSigma, Interpolates) { ExpectCoefficients(coeff_q_sigma(std::vector<double>{0.5, 0.5}, 0, 0.5), {0.75, 0.25}); }

TEST(QSigma, RejectsSigmaOutOfRange) {
  const std::vector<double> pi = {0.5, 0.5};
  EXPECT_THROW(coeff_q_sigma(pi, 0, -0.1), std::invalid_argument);
  EXPECT_THROW(coeff_q_sigma(pi, 0, 1.1), std::invalid_argument);
}

TEST(QSigma, RecoversTargetInterpolation) {
  Rng rng(11);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 1 + rng() % 5;
    const auto pi = RandomSimplex(n, rng);
    std::vector<double> q(n);
    for (auto& x : q) x = 4 * uniform01(rng) - 2;
    const ActionId next = rng() % n;
    const double sigma = uniform01(rng);
    const double expected = sigma * q[next] + (1 - sigma) * dot(pi, q);
    EXPECT_NEAR(dot(coeff_q_sigma(pi, next, sigma), q), expected, 1e-12);
  }
}

TEST(CountBased, Proportions) {
  const std::vector<std::uint64_t> counts = {2, 1, 1};
  ExpectCoefficients(coeff_count_based(counts, std::vector<double>{0.1, 0.2, 0.7}), {0.5, 0.25, 0.25});
}

TEST(CountBased, UnvisitedFallsBackToPolicy) {
  ExpectCoefficients(coeff_count_based(std::vector<std::uint64_t>{0, 0}, std::vector<double>{0.3, 0.7}), {0.3, 0.7});
}

TEST(CountBased, LawOfLargeNumbers) {
  const std::vector<double> pi = {0.2, 0.8};
  Rng rng(5);
  for (auto [draws, tol] : {std::pair{1000, 0.05}, std::pair{100000, 0.01}}) {
    std::vector<std::uint64_t> counts(2, 0);
    for (int i = 0; i < draws; ++i) ++counts[sample_index(pi, rng)];
    const auto c = coeff_count_based(counts, pi);
    EXPECT_LT(std::max(std::abs(c[0] - pi[0]), std::abs(c[1] - pi[1])), tol) << draws << " draws";
  }
}

TEST(PolicyBased, FullVisitationIsPolicy) {
  Rng rng(3);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + rng() % 5;
    const auto pi = RandomSimplex(n, rng);
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = 1 + rng() % 10;
    EXPECT_EQ(coeff_policy_based(counts, pi), pi);
  }
}

TEST(PolicyBased, RenormalisesOverVisited) {
  const std::vector<double> pi = {0.3, 0.7};
  ExpectCoefficients(coeff_policy_based(std::vector<std::uint64_t>{1, 0}, pi), {1.0, 0.0});
  const std::vector<double> uniform(3, 1.0 / 3);
  ExpectCoefficients(coeff_policy_based(std::vector<std::uint64_t>{1, 0, 2}, uniform), {0.5, 0.0, 0.5});
}

TEST(PolicyBased, UnvisitedFallsBackToPolicy) {
  ExpectCoefficients(coeff_policy_based(std::vector<std::uint64_t>{0, 0}, std::vector<double>{0.3, 0.7}), {0.3, 0.7});
}

TEST(AdaptiveVariants, ExcludeUnvisitedActions) {
  Rng rng(8);
  for (int i = 0; i < 500; ++i) {
    const std::size_t n = 2 + rng() % 4;
    const auto pi = RandomSimplex(n, rng);
    std::vector<std::uint64_t> counts(n);
    for (auto& c : counts) c = rng() % 2 == 0 ? 0 : 1 + rng() % 5;
    counts[rng() % n] = 3;  // at least one visited action
    const auto cb = coeff_count_based(counts, pi);
    const auto pb = coeff_policy_based(counts, pi);
    for (std::size_t a = 0; a < n; ++a) {
      if (counts[a] != 0) continue;
      EXPECT_EQ(cb[a], 0.0);
      EXPECT_EQ(pb[a], 0.0);
    }
  }
}

TEST(SigmaSchedule, Values) {
  EXPECT_EQ(sigma_schedule_value(SigmaSchedule::fixed(0.3), 17), 0.3);
  EXPECT_EQ(sigma_schedule_value(SigmaSchedule::exponential(1.0, 0.95), 0), 1.0);
  EXPECT_NEAR(sigma_schedule_value(SigmaSchedule::exponential(1.0, 0.95), 2), 0.9025, 1e-15);
}

TEST(CoefficientsFor, Dispatch) {
  const std::vector<double> pi = {0.2, 0.3, 0.5};
  const std::vector<std::uint64_t> counts = {0, 4, 1};
  const CoefficientContext ctx{pi, counts, ActionId{2}, 0};
  ExpectCoefficients(coefficients_for(strategy::Sarsa{}, ctx), {0, 0, 1});
  ExpectCoefficients(coefficients_for(strategy::ExpectedSarsa{}, ctx), {0.2, 0.3, 0.5});
  ExpectCoefficients(coefficients_for(strategy::TreeBackup{}, ctx), {0.2, 0.3, 0.5});
  ExpectCoefficients(coefficients_for(strategy::CountBased{}, ctx), {0, 0.8, 0.2});
  ExpectCoefficients(coefficients_for(strategy::PolicyBased{}, ctx), {0, 0.375, 0.625});
  // Decaying schedule starts at σ = 1, i.e. Sarsa.
  ExpectCoefficients(coefficients_for(strategy::QSigma{SigmaSchedule::exponential(1.0, 0.95)}, ctx), {0, 0, 1});
  const CoefficientContext later{pi, counts, ActionId{2}, 1};
  ExpectCoefficients(coefficients_for(strategy::QSigma{SigmaSchedule::exponential(1.0, 0.95)}, later),
                     {0.05 * 0.2, 0.05 * 0.3, 0.05 * 0.5 + 0.95}, 1e-15);
}

TEST(CoefficientsFor, MissingSuccessorAction) {
  const std::vector<double> pi = {0.5, 0.5};
  const std::vector<std::uint64_t> counts = {1, 1};
  const CoefficientContext ctx{pi, counts, std::nullopt, 0};
  EXPECT_THROW(coefficients_for(strategy::Sarsa{}, ctx), std::invalid_argument);
  EXPECT_THROW(coefficients_for(parse_strategy("qsigma(sigma=0.5)"), ctx), std::invalid_argument);
  EXPECT_NO_THROW(coefficients_for(strategy::ExpectedSarsa{}, ctx));
  EXPECT_NO_THROW(coefficients_for(strategy::CountBased{}, ctx));
}

TEST(StrategyNames, ParseAndPrint) {
  for (const char* name : {"qsigma(sigma=0.5)", "qsigma(decay=0.95)", "qsigma(sigma=0.8,decay=0.9)", "count-atb",
                           "policy-atb", "sarsa", "expected-sarsa", "tree-backup"}) {
    EXPECT_EQ(to_string(parse_strategy(name)), name);
  }
  EXPECT_EQ(parse_strategy("qsigma(decay=0.95)"), CoefficientStrategy(strategy::QSigma{SigmaSchedule::exponential(1.0, 0.95)}));
  EXPECT_EQ(to_string(parse_strategy(" qsigma( sigma = 1 ) ")), "qsigma(sigma=1)");
}

TEST(StrategyNames, Rejects) {
  for (const char* bad : {"", "qsigma", "qsigma()", "qsigma(sigma=2)", "qsigma(decay=0)", "qsigma(sigma=x)",
                          "qsigma(foo=1)", "qsigma(sigma=0.1,sigma=0.2)", "watkins"}) {
    EXPECT_THROW(parse_strategy(bad), std::invalid_argument) << bad;
  }
}

}  // namespace
}  // namespace atb
