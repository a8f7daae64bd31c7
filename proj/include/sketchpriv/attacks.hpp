#pragma once

// Membership-inference attacks against cardinality sketches and the
// Monte-Carlo machinery that measures how often sketches ignore a new element.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sketchpriv/hash.hpp"
#include "sketchpriv/service.hpp"
#include "sketchpriv/sketch.hpp"

namespace sketchpriv::attacks {

// ---------------------------------------------------------------------------
// Add-and-check membership oracle

struct MembershipVerdict {
  bool changed = false;
  double posterior = 0.0;
  double ignore_prob = 0.0;  // q used for the Bayes update
};

// Probability that a sketch of `cardinality` random elements not containing
// the target would already ignore a target hashing to h.
[[nodiscard]] auto ignore_probability(const Sketch& shape, HashValue h, double cardinality) -> double;

// Exact HLL/LogLog ignore law for a target with the given rho:
// P[some element lands in its bucket with rho' >= rho] = 1 - (1 - 2^(1-p-rho))^n.
[[nodiscard]] auto register_ignore_probability(int p, std::int64_t n, int rho) -> double;

// Adds the target to a copy of m and compares. A change proves t is not in E
// (posterior 0). No change multiplies the prior odds by 1/q, with q supplied
// or estimated from estimate(m).
[[nodiscard]] auto membership_attack(const Sketch& m, std::string_view target, const Salt& salt,
                                     double prior, std::optional<double> ignore_prob = std::nullopt)
    -> MembershipVerdict;

// Same, for an attacker holding a hash but not necessarily the sketch's salt.
[[nodiscard]] auto membership_attack_with_hash(const Sketch& m, HashValue target_hash, double prior,
                                               std::optional<double> ignore_prob = std::nullopt)
    -> MembershipVerdict;

// Empirical knowledge gain of an attacker who runs the oracle with
// `attacker_salt` against sketches built with `secret_salt`. Each trial draws
// membership with probability `prior`, builds a sketch of `cardinality`
// elements (containing the target when a member) and records the verdict.
struct CalibrationResult {
  std::int64_t trials = 0;
  std::int64_t changed = 0;
  std::int64_t changed_members = 0;
  std::int64_t unchanged = 0;
  std::int64_t unchanged_members = 0;

  // P[t in E | observation], empirical; nullopt when the class is empty.
  [[nodiscard]] auto posterior_given_changed() const -> std::optional<double>;
  [[nodiscard]] auto posterior_given_unchanged() const -> std::optional<double>;
};

[[nodiscard]] auto membership_calibration(Algorithm algo, int param, std::int64_t cardinality,
                                          int trials, double prior, const Salt& secret_salt,
                                          const Salt& attacker_salt, std::uint64_t seed)
    -> CalibrationResult;

// ---------------------------------------------------------------------------
// Monte-Carlo ignore-probability study

struct PercentileSpec {
  std::string_view label;
  double percentile;  // in (0, 100]
};

inline constexpr std::array<PercentileSpec, 5> kReportPercentiles = {{
    {"p0.1", 0.1},
    {"p1", 1.0},
    {"p10", 10.0},
    {"p50", 50.0},
    {"p100", 100.0},
}};

struct SimulationConfig {
  int p = 15;
  std::vector<std::int64_t> cardinalities = {1000, 10000};
  int num_targets = 500;
  int num_sketches = 200;
  std::uint64_t seed = 1;
  int threads = 1;  // does not affect results
};

struct TargetOutcome {
  int rho = 0;
  std::int64_t ignored = 0;  // sketches (out of num_sketches) that ignored it
};

struct CardinalityResult {
  std::int64_t cardinality = 0;
  std::array<double, kReportPercentiles.size()> percentiles{};
  std::vector<TargetOutcome> targets;
};

struct IgnoreReport {
  SimulationConfig config;
  std::vector<CardinalityResult> rows;

  // cardinality,percentile_label,ignore_fraction
  [[nodiscard]] auto to_csv() const -> std::string;
  // Config + seed + table + per-rho aggregates.
  [[nodiscard]] auto to_json() const -> std::string;
};

// Nearest-rank percentile over ascending-sorted values.
[[nodiscard]] auto nearest_rank(std::span<const double> sorted, double percentile) -> double;

// Throws DomainError below the statistical floors (100 targets, 100 sketches)
// or for p outside [4, 18].
[[nodiscard]] auto simulate_ignore_probabilities(const SimulationConfig& config) -> IgnoreReport;

// Element bytes used by the simulation; targets and sketch elements live in
// disjoint namespaces so t is never in E.
[[nodiscard]] auto simulation_target(std::uint64_t seed, std::int64_t cardinality, int index)
    -> std::string;
[[nodiscard]] auto simulation_salt(std::uint64_t seed) -> Salt;

// ---------------------------------------------------------------------------
// Intersection attack

struct RegisterConstraint {
  std::uint32_t bucket;
  int max_rho;  // rho(t) <= max_rho if t hashes into this bucket
  friend auto operator==(const RegisterConstraint&, const RegisterConstraint&) -> bool = default;
};

struct BitConstraint {
  std::uint32_t bucket;
  int bit;
  friend auto operator==(const BitConstraint&, const BitConstraint&) -> bool = default;
};

struct IntersectionFinding {
  Algorithm algo = Algorithm::kmv;
  std::size_t num_sketches_used = 0;
  std::vector<std::uint64_t> kmv_candidates;           // KMV
  std::vector<RegisterConstraint> register_constraints;  // LogLog / HLL
  std::vector<BitConstraint> pcsa_constraints;          // PCSA
  std::optional<bool> contains_target;

  [[nodiscard]] auto candidate_count() const noexcept -> std::size_t;
};

// Information shared by every sketch about an element present in all of them.
// The register and bit constraints are necessary conditions only.
[[nodiscard]] auto intersection_attack(std::span<const Sketch> sketches,
                                       std::optional<HashValue> true_target_hash = std::nullopt)
    -> IntersectionFinding;

// ---------------------------------------------------------------------------
// Attack through the restricted merge/estimate API

struct ExternalVerdict {
  bool guess = false;  // true: target believed to be in the sketch
  double estimate_without = 0.0;
  double estimate_with = 0.0;
  service::SketchKey probe_key;
};

// Ingests a singleton sketch for the target through the service, then
// compares estimate(M) with estimate(merge(M, M_t)) at the given rounding.
[[nodiscard]] auto external_api_attack(service::SketchQueryApi& api, const service::SketchKey& sketch_id,
                                       std::string_view target, std::int64_t rounding)
    -> ExternalVerdict;

}  // namespace sketchpriv::attacks
