#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "sketchpriv/error.hpp"
#include "sketchpriv/privacy_bounds.hpp"

namespace sp = sketchpriv;
namespace b = sketchpriv::bounds;

namespace {

constexpr long double kNegInf = -std::numeric_limits<long double>::infinity();

// ln of ((1 - c^k) / c^k) (n - kN) in long double, given gap = 1 - c.
auto log_term(long double gap, std::int64_t big_n, std::int64_t n, std::int64_t k) -> long double {
  const long double slack = static_cast<long double>(n - k * big_n);
  if (slack <= 0) return kNegInf;
  const long double a = static_cast<long double>(k) * std::log1p(-gap);
  const long double l1m = a > -0.5L ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
  return l1m - a + std::log(slack);
}

auto gap_for(b::Regime regime, double eps, long double delta) -> long double {
  const long double e = std::exp(-static_cast<long double>(eps));
  switch (regime) {
    case b::Regime::pure:
      return e;
    case b::Regime::delta:
      return (0.5L - delta) * e;
    case b::Regime::average:
      return e * e * e * e / 4.0L;
  }
  return 0;
}

struct OracleMax {
  long double log_value;
  std::int64_t k;
};

// Every k in [1, n/N].
auto exhaustive(long double gap, std::int64_t big_n, std::int64_t n) -> OracleMax {
  OracleMax best{kNegInf, 1};
  for (std::int64_t k = 1; k <= n / big_n; ++k) {
    const long double v = log_term(gap, big_n, n, k);
    if (v > best.log_value) best = {v, k};
  }
  return best;
}

auto direct_target(int p, std::int64_t n, int rho) -> long double {
  const long double x = std::ldexp(1.0L, -(p + rho));
  const long double a = static_cast<long double>(n) * std::log1p(-x);
  return a > -0.5L ? -std::log(-std::expm1(a)) : -std::log1p(-std::exp(a));
}

}  // namespace

TEST(RegimeConstant, Values) {
  EXPECT_DOUBLE_EQ(b::regime_constant(b::Regime::pure, std::numbers::ln2, std::nullopt), 0.5);
  EXPECT_NEAR(b::regime_constant(b::Regime::delta, std::numbers::ln2, 0.1), 1.0 - 0.4 * 0.5, 1e-15);
  EXPECT_NEAR(b::regime_constant(b::Regime::average, std::numbers::ln2, std::nullopt), 1.0 - 1.0 / 64.0, 1e-15);
  EXPECT_THROW((void)b::regime_constant(b::Regime::delta, 1.0, std::nullopt), sp::Error);
  EXPECT_THROW((void)b::regime_constant(b::Regime::delta, 1.0, 0.5), sp::Error);
  EXPECT_THROW((void)b::regime_constant(b::Regime::pure, 0.0, std::nullopt), sp::Error);
  EXPECT_EQ(b::parse_regime("average"), b::Regime::average);
  EXPECT_THROW((void)b::parse_regime("renyi"), sp::Error);
}

TEST(VarianceBound, HalfCaseIsIntegerArithmetic) {
  // c = 1/2: term k is (2^k - 1)(n - kN). For n = 1000, N = 100 the maximum is k = 9: 511 * 100.
  const auto r = b::variance_lower_bound({std::numbers::ln2, std::nullopt, 100, 1000}, b::Regime::pure);
  EXPECT_EQ(r.best_k, 9);
  EXPECT_NEAR(r.variance_bound, 51100.0, 51100.0 * 1e-12);
  EXPECT_NEAR(r.std_error_bound, std::sqrt(51100.0) / 1000.0, 1e-14);
}

TEST(VarianceBound, MatchesExhaustiveOracle) {
  for (const auto regime : {b::Regime::pure, b::Regime::delta, b::Regime::average}) {
    for (const double eps : {0.05, 0.3, std::numbers::ln2, 1.0, 2.5}) {
      for (const std::int64_t big_n : {1, 7, 100}) {
        for (const std::int64_t n : {big_n, big_n + 1, 3 * big_n + 2, 1000L, 4321L}) {
          if (n < big_n) continue;
          const std::optional<double> delta = regime == b::Regime::delta ? std::optional(0.01) : std::nullopt;
          const auto r = b::variance_lower_bound({eps, delta, big_n, n}, regime);
          const auto gap = gap_for(regime, eps, 0.01L);
          EXPECT_NEAR(r.c, static_cast<double>(1.0L - gap), 1e-15);
          const auto o = exhaustive(gap, big_n, n);
          if (std::isinf(o.log_value)) {
            EXPECT_EQ(r.variance_bound, 0.0);
            EXPECT_EQ(r.best_k, 1);
            continue;
          }
          const double tol = 1e-12 * std::max(1.0, std::abs(static_cast<double>(o.log_value)));
          EXPECT_NEAR(r.log_variance_bound, static_cast<double>(o.log_value), tol) << eps << " " << big_n << " " << n;
          // Near-flat maxima can tie to rounding; the reported k must attain the maximum.
          EXPECT_NEAR(static_cast<double>(log_term(gap, big_n, n, r.best_k)), static_cast<double>(o.log_value), tol);
        }
      }
    }
  }
}

TEST(VarianceBound, RegimesOrdered) {
  // Larger c means a weaker bound: delta > 0 and the average variant never exceed pure.
  for (const std::int64_t n : {500L, 5000L}) {
    const auto pure = b::variance_lower_bound({1.0, std::nullopt, 100, n}, b::Regime::pure);
    const auto del = b::variance_lower_bound({1.0, 0.1, 100, n}, b::Regime::delta);
    const auto avg = b::variance_lower_bound({1.0, std::nullopt, 100, n}, b::Regime::average);
    EXPECT_GE(pure.log_variance_bound, del.log_variance_bound);
    EXPECT_GE(pure.log_variance_bound, avg.log_variance_bound);
  }
}

TEST(VarianceBound, HugeValuesStayFiniteInLogSpace) {
  const auto r = b::variance_lower_bound({0.01, std::nullopt, 1, 1'000'000}, b::Regime::pure);
  EXPECT_TRUE(std::isinf(r.variance_bound));
  EXPECT_TRUE(std::isfinite(r.log_variance_bound));
  EXPECT_GT(r.log_variance_bound, 1e6);
}

TEST(VarianceBound, DomainErrors) {
  EXPECT_THROW((void)b::variance_lower_bound({1.0, std::nullopt, 100, 99}, b::Regime::pure), sp::Error);
  EXPECT_THROW((void)b::variance_lower_bound({1.0, std::nullopt, 0, 10}, b::Regime::pure), sp::Error);
  EXPECT_THROW((void)b::variance_lower_bound({-1.0, std::nullopt, 1, 10}, b::Regime::pure), sp::Error);
}

TEST(StdErrorCurve, GrowsForLn2AndN100) {
  std::vector<std::int64_t> grid;
  for (std::int64_t n = 100; n <= 20000; n += 100) grid.push_back(n);
  const auto curve = b::min_std_error_curve(std::numbers::ln2, 100, grid);
  ASSERT_EQ(curve.size(), grid.size());
  for (std::size_t i = 1; i < curve.size(); ++i) {
    EXPECT_GE(curve[i].std_error_bound, curve[i - 1].std_error_bound) << curve[i].n;
  }
  EXPECT_GT(curve.back().std_error_bound, 0.1);
}

TEST(HllEpsilon, FrozenValues) {
  EXPECT_NEAR(b::hll_epsilon_avg(9, 1000), 1.0196, 5e-5);
  EXPECT_NEAR(b::hll_epsilon_avg(12, 1000), 2.8366, 5e-5);
  EXPECT_NEAR(b::hll_epsilon_avg(15, 1000), 4.8808, 5e-5);
  EXPECT_NEAR(b::hll_epsilon_target(9, 1000, 8), 4.8796, 5e-5);
  EXPECT_NEAR(b::prob_high_rho_user(1000, 8), 0.98004, 5e-6);
}

TEST(HllEpsilon, TargetMatchesDirectFormula) {
  for (const int p : {4, 9, 15, 18}) {
    for (const std::int64_t n : {1L, 100L, 1000L, 100000L}) {
      for (int rho = 1; rho <= 20; ++rho) {
        EXPECT_NEAR(b::hll_epsilon_target(p, n, rho), static_cast<double>(direct_target(p, n, rho)),
                    1e-9 * static_cast<double>(direct_target(p, n, rho)));
      }
    }
  }
}

TEST(HllEpsilon, AverageIsWeightedSumOfTargets) {
  for (const int p : {4, 9, 12, 15, 18}) {
    for (const std::int64_t n : {1L, 10L, 1000L, 1'000'000L, 1'000'000'000L}) {
      double sum = 0;
      for (int k = 1; k <= 64 - p; ++k) sum += std::ldexp(b::hll_epsilon_target(p, n, k), -k);
      // The series stops once terms drop below 1e-12 past the peak.
      EXPECT_NEAR(b::hll_epsilon_avg(p, n), sum, 2e-12) << p << " " << n;
      EXPECT_NEAR(b::hll_epsilon_avg_truncated(p, n, 64 - p), sum, 1e-12 * sum);
    }
  }
}

TEST(HllEpsilon, EarlyTermsAreNotTruncatedAway) {
  // At large n the first terms are tiny; stopping on them would return ~0.
  constexpr std::int64_t n = 1'000'000'000'000L;
  const double v = b::hll_epsilon_avg(4, n);
  const double full = b::hll_epsilon_avg_truncated(4, n, 60);
  EXPECT_GT(v, 1e-11);
  EXPECT_NEAR(v, full, 1e-9);
  EXPECT_LT(b::hll_epsilon_avg_truncated(4, n, 20), 1e-6 * full);
}

TEST(HllEpsilon, TruncationErrorIsSmall) {
  for (const int p : {4, 9, 15}) {
    for (const std::int64_t n : {10L, 1000L, 100000L}) {
      const double v = b::hll_epsilon_avg(p, n);
      int stop = 1;
      while (stop < 64 - p && std::abs(b::hll_epsilon_avg_truncated(p, n, stop) - v) > 0) ++stop;
      const int longer = std::min(64 - p, stop + 16);
      EXPECT_LT(std::abs(b::hll_epsilon_avg_truncated(p, n, longer) - v), 1e-9) << p << " " << n;
    }
  }
}

TEST(HllEpsilon, DecreasesWithNAndIncreasesWithP) {
  EXPECT_GT(b::hll_epsilon_avg(9, 1000), b::hll_epsilon_avg(9, 10000));
  EXPECT_GT(b::hll_epsilon_avg(12, 1000), b::hll_epsilon_avg(9, 1000));
  EXPECT_THROW((void)b::hll_epsilon_avg(3, 1000), sp::Error);
  EXPECT_THROW((void)b::hll_epsilon_target(9, 1000, 0), sp::Error);
}

TEST(Posterior, KnownOdds) {
  const double eps = std::log(18.0);
  EXPECT_NEAR(b::posterior_from_prior({0.01, eps}), 18.0 * 0.01 / (18.0 * 0.01 + 0.99), 1e-12);
  EXPECT_NEAR(b::posterior_from_prior({0.01, eps}), 0.154, 0.01);
  EXPECT_NEAR(b::posterior_from_prior({0.10, eps}), 0.667, 0.01);
  EXPECT_NEAR(b::posterior_from_prior({0.25, eps}), 0.857, 0.01);
  const double eps_q = b::ignore_prob_to_epsilon(0.055);
  EXPECT_NEAR(eps_q, -std::log(0.055), 1e-15);
  EXPECT_NEAR(b::posterior_from_prior({0.10, eps_q}), 0.6689, 1e-4);
}

TEST(Posterior, EdgeCases) {
  EXPECT_EQ(b::posterior_from_prior({0.3, 0.0}), 0.3);
  EXPECT_EQ(b::posterior_from_prior({0.3, std::numeric_limits<double>::infinity()}), 1.0);
  EXPECT_NEAR(b::posterior_from_prior({0.3, 800.0}), 1.0, 1e-15);
  EXPECT_THROW((void)b::posterior_from_prior({0.0, 1.0}), sp::Error);
  EXPECT_THROW((void)b::posterior_from_prior({1.0, 1.0}), sp::Error);
  EXPECT_THROW((void)b::posterior_from_prior({0.5, -1.0}), sp::Error);
  EXPECT_TRUE(std::isinf(b::ignore_prob_to_epsilon(0.0)));
  EXPECT_EQ(b::ignore_prob_to_epsilon(1.0), 0.0);
  EXPECT_THROW((void)b::ignore_prob_to_epsilon(1.5), sp::Error);
}

TEST(Posterior, MonotoneInEpsilonAndPrior) {
  double last = 0;
  for (double eps = 0; eps < 10; eps += 0.25) {
    const double v = b::posterior_from_prior({0.05, eps});
    EXPECT_GE(v, last);
    last = v;
  }
  EXPECT_LT(b::posterior_from_prior({0.05, 1.0}), b::posterior_from_prior({0.06, 1.0}));
}

TEST(VarianceBound, ZeroAtMinimumCardinality) {
  for (const double eps : {0.1, 1.0, 5.0}) {
    const auto r = b::variance_lower_bound({eps, std::nullopt, 100, 100}, b::Regime::pure);
    EXPECT_EQ(r.variance_bound, 0.0);
    EXPECT_EQ(r.std_error_bound, 0.0);
  }
}

TEST(VarianceBound, VanishesAsEpsilonGrows) {
  double last = std::numeric_limits<double>::infinity();
  for (double eps = 0.5; eps <= 40; eps += 0.5) {
    const auto r = b::variance_lower_bound({eps, std::nullopt, 10, 1000}, b::Regime::pure);
    EXPECT_LE(r.variance_bound, last) << eps;
    last = r.variance_bound;
  }
  EXPECT_LT(last, 1e-10);
}

TEST(HllEpsilon, LimitsInN) {
  EXPECT_NEAR(b::hll_epsilon_avg(15, 1000), 4.9, 0.05);
  double last = std::numeric_limits<double>::infinity();
  for (std::int64_t n = 1000; n <= 100'000'000; n *= 10) {
    const double v = b::hll_epsilon_avg(9, n);
    EXPECT_LT(v, last);
    EXPECT_GT(v, 0.0);
    last = v;
  }
  EXPECT_LT(last, 1e-3);
  // e^-97700 is below the smallest double.
  EXPECT_EQ(b::hll_epsilon_target(9, 100'000'000, 1), 0.0);
  EXPECT_GT(b::hll_epsilon_target(9, 100'000, 1), 0.0);
}

TEST(ProbHighRho, SmallCases) {
  EXPECT_DOUBLE_EQ(b::prob_high_rho_user(1, 1), 0.5);
  EXPECT_NEAR(b::prob_high_rho_user(10, 30), 10 * std::ldexp(1.0, -30), 1e-6 * 10 * std::ldexp(1.0, -30));
}

TEST(Posterior, FromIgnoreProbabilities) {
  EXPECT_NEAR(std::exp(b::ignore_prob_to_epsilon(0.055)), 18.18, 0.01);
  EXPECT_NEAR(b::posterior_from_prior({0.01, b::ignore_prob_to_epsilon(1.0 / 44.5)}), 0.31, 0.005);
}
