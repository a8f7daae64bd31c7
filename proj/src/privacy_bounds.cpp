#include "sketchpriv/privacy_bounds.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sketchpriv/error.hpp"
#include "sketchpriv/sketch.hpp"

namespace sketchpriv::bounds {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw Error(Errc::domain_error, what);
  }
}

void require_precision(int p) {
  require(p >= kMinPrecision && p <= kMaxPrecision,
          "p=" + std::to_string(p) + " outside [4, 18]");
}

// ln(1 - e^a) for a < 0, switching form at -ln 2 to avoid cancellation.
auto log1mexp(double a) -> double {
  return a > -std::numbers::ln2 ? std::log(-std::expm1(a)) : std::log1p(-std::exp(a));
}

// ln(1 - (1 - x)^n) without cancellation for tiny x or huge n.
auto log_one_minus_pow(double x, double n) -> double { return log1mexp(n * std::log1p(-x)); }

}  // namespace

auto regime_name(Regime r) noexcept -> std::string_view {
  switch (r) {
    case Regime::pure:
      return "pure";
    case Regime::delta:
      return "delta";
    case Regime::average:
      return "average";
  }
  return "unknown";
}

auto parse_regime(std::string_view name) -> Regime {
  for (const auto r : {Regime::pure, Regime::delta, Regime::average}) {
    if (regime_name(r) == name) {
      return r;
    }
  }
  throw Error(Errc::domain_error, "unknown regime '" + std::string(name) + "'");
}

namespace {

// 1 - c, computed without forming c so that c close to 1 keeps full precision.
auto one_minus_c(Regime regime, double epsilon, std::optional<double> delta) -> double {
  require(epsilon > 0.0 && std::isfinite(epsilon), "epsilon must be positive and finite");
  switch (regime) {
    case Regime::pure:
      return std::exp(-epsilon);
    case Regime::delta:
      require(delta.has_value(), "delta regime requires delta");
      require(*delta >= 0.0 && *delta < 0.5, "delta must lie in [0, 1/2)");
      return (0.5 - *delta) * std::exp(-epsilon);
    case Regime::average:
      return std::exp(-4.0 * epsilon) / 4.0;
  }
  throw Error(Errc::domain_error, "unknown regime");
}

}  // namespace

auto regime_constant(Regime regime, double epsilon, std::optional<double> delta) -> double {
  return 1.0 - one_minus_c(regime, epsilon, delta);
}

auto variance_lower_bound(const BoundQuery& q, Regime regime) -> BoundResult {
  require(q.min_cardinality >= 1, "N must be at least 1");
  require(q.cardinality >= q.min_cardinality, "n must be at least N");
  BoundResult out;
  const double gap = one_minus_c(regime, q.epsilon, q.delta);
  out.c = 1.0 - gap;

  // Term k in log space: ln(1 - c^k) - k ln c + ln(n - kN).
  const double log_c = std::log1p(-gap);
  const auto n = q.cardinality;
  const auto big_n = q.min_cardinality;
  const std::int64_t k_max = n / big_n;
  double best = -kInf;
  std::int64_t best_k = 1;
  for (std::int64_t k = 1; k <= k_max; ++k) {
    const auto slack = n - k * big_n;
    if (slack <= 0) {
      continue;
    }
    const double kd = static_cast<double>(k);
    const double term = log1mexp(kd * log_c) - kd * log_c +
                        std::log(static_cast<double>(slack));
    if (term > best) {
      best = term;
      best_k = k;
    }
  }
  out.best_k = best_k;
  out.log_variance_bound = best;
  out.variance_bound = std::exp(best);
  out.std_error_bound = std::exp(0.5 * best - std::log(static_cast<double>(n)));
  return out;
}

auto min_std_error_curve(double epsilon, std::int64_t min_cardinality,
                         std::span<const std::int64_t> n_values, Regime regime,
                         std::optional<double> delta) -> std::vector<CurvePoint> {
  std::vector<CurvePoint> out;
  out.reserve(n_values.size());
  for (const auto n : n_values) {
    const auto r = variance_lower_bound({epsilon, delta, min_cardinality, n}, regime);
    out.push_back({n, r.std_error_bound, r.best_k});
  }
  return out;
}

auto hll_epsilon_target(int p, std::int64_t n, int rho) -> double {
  require_precision(p);
  require(n >= 1, "n must be at least 1");
  require(rho >= 1 && rho <= 64 - p, "rho outside [1, 64-p]");
  return -log_one_minus_pow(std::ldexp(1.0, -(p + rho)), static_cast<double>(n));
}

auto hll_epsilon_avg_truncated(int p, std::int64_t n, int k_max) -> double {
  require_precision(p);
  require(n >= 1, "n must be at least 1");
  require(k_max >= 1, "k_max must be at least 1");
  const double nd = static_cast<double>(n);
  double sum = 0.0;
  for (int k = 1; k <= k_max; ++k) {
    sum += -std::ldexp(log_one_minus_pow(std::ldexp(1.0, -(p + k)), nd), -k);
  }
  return sum;
}

auto hll_epsilon_avg(int p, std::int64_t n) -> double {
  require_precision(p);
  require(n >= 1, "n must be at least 1");
  // Terms rise until 2^(p+k) is comparable to n and decay geometrically after,
  // so the small-term cutoff only applies past that peak.
  const double nd = static_cast<double>(n);
  const double peak = std::log2(nd) - p + 1.0;
  double sum = 0.0;
  for (int k = 1; k <= 64 - p; ++k) {
    const double term = -std::ldexp(log_one_minus_pow(std::ldexp(1.0, -(p + k)), nd), -k);
    sum += term;
    if (k > peak && term < 1e-12) {
      break;
    }
  }
  return sum;
}

auto prob_high_rho_user(std::int64_t n, int rho) -> double {
  require(n >= 1, "n must be at least 1");
  require(rho >= 1, "rho must be at least 1");
  return -std::expm1(static_cast<double>(n) * std::log1p(-std::ldexp(1.0, -rho)));
}

auto posterior_from_prior(const PosteriorQuery& q) -> double {
  require(q.prior > 0.0 && q.prior < 1.0, "prior must lie strictly inside (0, 1)");
  require(q.epsilon >= 0.0, "epsilon must be non-negative");
  if (q.epsilon == 0.0) {
    return q.prior;
  }
  if (std::isinf(q.epsilon)) {
    return 1.0;
  }
  // Odds multiply by e^eps; logistic form avoids overflow for large eps.
  const double log_odds = std::log(q.prior) - std::log1p(-q.prior) + q.epsilon;
  return 1.0 / (1.0 + std::exp(-log_odds));
}

auto ignore_prob_to_epsilon(double ignore_prob) -> double {
  require(ignore_prob >= 0.0 && ignore_prob <= 1.0, "ignore probability outside [0, 1]");
  if (ignore_prob == 0.0) {
    return kInf;
  }
  return -std::log(ignore_prob);
}

}  // namespace sketchpriv::bounds
