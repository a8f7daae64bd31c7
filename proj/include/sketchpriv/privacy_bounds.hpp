#pragma once

// Closed-form privacy bounds for deterministic cardinality estimators:
// variance lower bounds under sketch privacy (pure, (eps, delta) and average
// variants), the HyperLogLog average and per-target privacy loss, and the
// Bayesian prior -> posterior update. All logarithms are natural.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace sketchpriv::bounds {

enum class Regime { pure, delta, average };

[[nodiscard]] auto regime_name(Regime r) noexcept -> std::string_view;
[[nodiscard]] auto parse_regime(std::string_view name) -> Regime;

struct BoundQuery {
  double epsilon = 1.0;
  std::optional<double> delta;
  std::int64_t min_cardinality = 1;  // N
  std::int64_t cardinality = 1;      // n >= N
};

struct BoundResult {
  // max over k in [1, n/N] of ((1 - c^k) / c^k) (n - k N). Can be +inf when
  // the maximum exceeds double range; log_variance_bound stays finite.
  double variance_bound = 0.0;
  double log_variance_bound = 0.0;  // -inf when variance_bound == 0
  double std_error_bound = 0.0;     // sqrt(variance_bound) / n
  std::int64_t best_k = 1;          // smallest maximiser
  double c = 0.0;
};

// c for each regime: 1 - e^-eps, 1 - (1/2 - delta) e^-eps, 1 - e^-4eps / 4.
[[nodiscard]] auto regime_constant(Regime regime, double epsilon, std::optional<double> delta)
    -> double;

// Throws DomainError on n < N, N < 1, eps <= 0, or a missing / out-of-range delta.
[[nodiscard]] auto variance_lower_bound(const BoundQuery& q, Regime regime) -> BoundResult;

struct CurvePoint {
  std::int64_t n;
  double std_error_bound;
  std::int64_t best_k;
};

[[nodiscard]] auto min_std_error_curve(double epsilon, std::int64_t min_cardinality,
                                       std::span<const std::int64_t> n_values,
                                       Regime regime = Regime::pure,
                                       std::optional<double> delta = std::nullopt)
    -> std::vector<CurvePoint>;

// Worst-case loss of a target with the given rho: -ln(1 - (1 - 2^-(p+rho))^n).
[[nodiscard]] auto hll_epsilon_target(int p, std::int64_t n, int rho) -> double;

// Rho-weighted average of hll_epsilon_target: sum_k 2^-k eps(p, n, k).
[[nodiscard]] auto hll_epsilon_avg(int p, std::int64_t n) -> double;

// Same series with an explicit last index, for truncation checks.
[[nodiscard]] auto hll_epsilon_avg_truncated(int p, std::int64_t n, int k_max) -> double;

// Chance that at least one of n uniform users has rho >= rho: 1 - (1 - 2^-rho)^n.
[[nodiscard]] auto prob_high_rho_user(std::int64_t n, int rho) -> double;

struct PosteriorQuery {
  double prior = 0.5;    // attacker's P[t in E], strictly inside (0, 1)
  double epsilon = 0.0;  // >= 0; +inf allowed
};

[[nodiscard]] auto posterior_from_prior(const PosteriorQuery& q) -> double;

// -ln(q): the privacy loss implied by an ignore probability q. q = 0 gives +inf.
[[nodiscard]] auto ignore_prob_to_epsilon(double ignore_prob) -> double;

}  // namespace sketchpriv::bounds
