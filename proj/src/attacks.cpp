#include "sketchpriv/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>
#include <nlohmann/json.hpp>
#include <thread>

#include "sketchpriv/error.hpp"
#include "sketchpriv/privacy_bounds.hpp"
#include "sketchpriv/rng.hpp"

namespace sketchpriv::attacks {

namespace {

// Substream tags.
constexpr std::uint64_t kTagSalt = 0x53414C54;     // "SALT"
constexpr std::uint64_t kTagTarget = 0x54524754;   // "TRGT"
constexpr std::uint64_t kTagSketch = 0x534B4554;   // "SKET"
constexpr std::uint64_t kTagTrial = 0x5452494C;    // "TRIL"

void require(bool ok, const std::string& what) {
  if (!ok) {
    throw Error(Errc::domain_error, what);
  }
}

void append_le64(std::string& s, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    s.push_back(static_cast<char>(v >> (8 * i)));
  }
}

auto element_bytes(char ns, std::uint64_t nonce, std::uint64_t index) -> std::string {
  std::string s(1, ns);
  s.reserve(17);
  append_le64(s, nonce);
  append_le64(s, index);
  return s;
}

// 1 - (1 - x)^n, stable for small x.
auto at_least_one(double x, double n) -> double {
  if (n <= 0.0) {
    return 0.0;
  }
  return -std::expm1(n * std::log1p(-x));
}

// P[Binomial(n, x) >= k].
auto binomial_upper_tail(double n, double x, int k) -> double {
  if (n < k) {
    return 0.0;
  }
  const double log_x = std::log(x);
  const double log_1mx = std::log1p(-x);
  const double lg_n = std::lgamma(n + 1.0);
  double below = 0.0;
  for (int j = 0; j < k; ++j) {
    const double jd = j;
    below += std::exp(lg_n - std::lgamma(jd + 1.0) - std::lgamma(n - jd + 1.0) + jd * log_x +
                      (n - jd) * log_1mx);
  }
  return std::clamp(1.0 - below, 0.0, 1.0);
}

}  // namespace

auto register_ignore_probability(int p, std::int64_t n, int rho) -> double {
  require(p >= kMinPrecision && p <= kMaxPrecision, "p outside [4, 18]");
  require(rho >= 1 && rho <= 65 - p, "rho outside [1, 65-p]");
  require(n >= 0, "n must be non-negative");
  return at_least_one(std::ldexp(1.0, 1 - p - rho), static_cast<double>(n));
}

auto ignore_probability(const Sketch& shape, HashValue h, double cardinality) -> double {
  const double n = std::max(0.0, std::round(cardinality));
  switch (shape.algorithm()) {
    case Algorithm::kmv: {
      const double x = (static_cast<double>(h.bits) + 1.0) / 18446744073709551616.0;
      return binomial_upper_tail(n, x, shape.param());
    }
    case Algorithm::pcsa: {
      const auto slot = pcsa_slot(h, shape.param());
      const double bit_prob = slot.bit == kPcsaBitmapBits - 1 ? std::ldexp(1.0, -31)
                                                              : std::ldexp(1.0, -(slot.bit + 1));
      return at_least_one(bit_prob / shape.param(), n);
    }
    case Algorithm::loglog:
    case Algorithm::hll: {
      const int p = shape.param();
      return at_least_one(std::ldexp(1.0, 1 - p - h.rho(p)), n);
    }
  }
  throw Error(Errc::domain_error, "unknown algorithm");
}

auto membership_attack_with_hash(const Sketch& m, HashValue target_hash, double prior,
                                 std::optional<double> ignore_prob) -> MembershipVerdict {
  require(prior > 0.0 && prior < 1.0, "prior must lie strictly inside (0, 1)");
  if (ignore_prob) {
    require(*ignore_prob >= 0.0 && *ignore_prob <= 1.0, "ignore probability outside [0, 1]");
  }
  MembershipVerdict v;
  v.changed = !m.ignores(target_hash);
  v.ignore_prob = ignore_prob ? *ignore_prob : ignore_probability(m, target_hash, estimate(m));
  if (v.changed) {
    v.posterior = 0.0;
    return v;
  }
  v.posterior = bounds::posterior_from_prior({prior, bounds::ignore_prob_to_epsilon(v.ignore_prob)});
  return v;
}

auto membership_attack(const Sketch& m, std::string_view target, const Salt& salt, double prior,
                       std::optional<double> ignore_prob) -> MembershipVerdict {
  check_salt(m, salt);
  return membership_attack_with_hash(m, hash_element(target, salt), prior, ignore_prob);
}

auto CalibrationResult::posterior_given_changed() const -> std::optional<double> {
  if (changed == 0) {
    return std::nullopt;
  }
  return static_cast<double>(changed_members) / static_cast<double>(changed);
}

auto CalibrationResult::posterior_given_unchanged() const -> std::optional<double> {
  if (unchanged == 0) {
    return std::nullopt;
  }
  return static_cast<double>(unchanged_members) / static_cast<double>(unchanged);
}

auto membership_calibration(Algorithm algo, int param, std::int64_t cardinality, int trials,
                            double prior, const Salt& secret_salt, const Salt& attacker_salt,
                            std::uint64_t seed) -> CalibrationResult {
  require(prior > 0.0 && prior < 1.0, "prior must lie strictly inside (0, 1)");
  require(cardinality >= 1, "cardinality must be at least 1");
  require(trials >= 1, "trials must be at least 1");
  CalibrationResult out;
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < trials; ++i) {
    auto rng = substream(seed, {kTagTrial, static_cast<std::uint64_t>(i)});
    const bool member = unit(rng) < prior;
    const auto nonce = rng();
    const auto target = element_bytes('X', nonce, 0);
    auto sketch = Sketch::empty(algo, param, secret_salt);
    const auto others = member ? cardinality - 1 : cardinality;
    for (std::int64_t e = 0; e < others; ++e) {
      sketch.insert(secret_salt.hash(element_bytes('C', nonce, static_cast<std::uint64_t>(e))));
    }
    if (member) {
      sketch.insert(secret_salt.hash(target));
    }
    const auto verdict = membership_attack_with_hash(sketch, attacker_salt.hash(target), prior);
    ++out.trials;
    if (verdict.changed) {
      ++out.changed;
      out.changed_members += member ? 1 : 0;
    } else {
      ++out.unchanged;
      out.unchanged_members += member ? 1 : 0;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

auto nearest_rank(std::span<const double> sorted, double percentile) -> double {
  require(!sorted.empty(), "no values");
  require(percentile > 0.0 && percentile <= 100.0, "percentile outside (0, 100]");
  const double n = static_cast<double>(sorted.size());
  auto rank = static_cast<std::size_t>(std::ceil(percentile * n / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, sorted.size());
  return sorted[rank - 1];
}

auto simulation_salt(std::uint64_t seed) -> Salt {
  auto rng = substream(seed, {kTagSalt});
  std::vector<std::uint8_t> key(32);
  for (std::size_t i = 0; i < key.size(); i += 8) {
    const auto word = rng();
    std::memcpy(key.data() + i, &word, 8);
  }
  return Salt::from_key(key);
}

auto simulation_target(std::uint64_t seed, std::int64_t cardinality, int index) -> std::string {
  auto rng = substream(seed, {kTagTarget, static_cast<std::uint64_t>(cardinality),
                              static_cast<std::uint64_t>(index)});
  return element_bytes('T', rng(), static_cast<std::uint64_t>(index));
}

auto simulate_ignore_probabilities(const SimulationConfig& config) -> IgnoreReport {
  require(config.p >= kMinPrecision && config.p <= kMaxPrecision, "p outside [4, 18]");
  require(config.num_targets >= 100, "num_targets must be at least 100");
  require(config.num_sketches >= 100, "num_sketches must be at least 100");
  require(!config.cardinalities.empty(), "no cardinalities");
  for (const auto n : config.cardinalities) {
    require(n >= 1, "cardinalities must be positive");
  }
  const int threads = std::max(1, config.threads);
  const auto salt = simulation_salt(config.seed);
  const int p = config.p;

  IgnoreReport report{config, {}};
  for (const auto n : config.cardinalities) {
    std::vector<HashValue> targets(static_cast<std::size_t>(config.num_targets));
    for (int i = 0; i < config.num_targets; ++i) {
      targets[static_cast<std::size_t>(i)] = salt.hash(simulation_target(config.seed, n, i));
    }

    // Each worker owns a strided subset of sketch indices and private counts;
    // integer sums make the reduction order irrelevant.
    std::vector<std::vector<std::int64_t>> partial(static_cast<std::size_t>(threads),
                                                   std::vector<std::int64_t>(targets.size(), 0));
    auto work = [&](int worker) {
      auto& counts = partial[static_cast<std::size_t>(worker)];
      auto sketch = Sketch::empty(Algorithm::hll, p, salt);
      const auto blank = sketch;
      for (int j = worker; j < config.num_sketches; j += threads) {
        sketch = blank;
        auto rng = substream(config.seed, {kTagSketch, static_cast<std::uint64_t>(n),
                                           static_cast<std::uint64_t>(j)});
        const auto nonce = rng();
        for (std::int64_t e = 0; e < n; ++e) {
          sketch.insert(salt.hash(element_bytes('E', nonce, static_cast<std::uint64_t>(e))));
        }
        for (std::size_t t = 0; t < targets.size(); ++t) {
          counts[t] += sketch.ignores(targets[t]) ? 1 : 0;
        }
      }
    };
    if (threads == 1) {
      work(0);
    } else {
      std::vector<std::thread> pool;
      pool.reserve(static_cast<std::size_t>(threads));
      for (int w = 0; w < threads; ++w) {
        pool.emplace_back(work, w);
      }
      for (auto& th : pool) {
        th.join();
      }
    }

    CardinalityResult row;
    row.cardinality = n;
    row.targets.resize(targets.size());
    std::vector<double> fractions(targets.size());
    for (std::size_t t = 0; t < targets.size(); ++t) {
      std::int64_t total = 0;
      for (const auto& c : partial) {
        total += c[t];
      }
      row.targets[t] = {targets[t].rho(p), total};
      fractions[t] = static_cast<double>(total) / config.num_sketches;
    }
    std::sort(fractions.begin(), fractions.end());
    for (std::size_t i = 0; i < kReportPercentiles.size(); ++i) {
      row.percentiles[i] = nearest_rank(fractions, kReportPercentiles[i].percentile);
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

namespace {

auto format_g9(double v) -> std::string {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

auto IgnoreReport::to_csv() const -> std::string {
  std::string out = "cardinality,percentile_label,ignore_fraction\n";
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < kReportPercentiles.size(); ++i) {
      out += std::to_string(row.cardinality) + "," + std::string(kReportPercentiles[i].label) + "," +
             format_g9(row.percentiles[i]) + "\n";
    }
  }
  return out;
}

auto IgnoreReport::to_json() const -> std::string {
  using nlohmann::ordered_json;
  ordered_json j;
  j["config"] = {{"algorithm", "hll"},
                 {"p", config.p},
                 {"cardinalities", config.cardinalities},
                 {"num_targets", config.num_targets},
                 {"num_sketches", config.num_sketches},
                 {"seed", config.seed},
                 {"percentile_rule", "nearest-rank"},
                 {"universe", "targets and sketch elements drawn from disjoint namespaces"}};
  auto& rows_json = j["rows"] = ordered_json::array();
  for (const auto& row : rows) {
    ordered_json r;
    r["cardinality"] = row.cardinality;
    auto& pct = r["percentiles"] = ordered_json::object();
    for (std::size_t i = 0; i < kReportPercentiles.size(); ++i) {
      pct[std::string(kReportPercentiles[i].label)] = row.percentiles[i];
    }
    std::map<int, std::pair<std::int64_t, std::int64_t>> by_rho;
    for (const auto& t : row.targets) {
      auto& [count, ignored] = by_rho[t.rho];
      ++count;
      ignored += t.ignored;
    }
    auto& rho_json = r["by_rho"] = ordered_json::array();
    for (const auto& [rho, agg] : by_rho) {
      rho_json.push_back({{"rho", rho},
                          {"targets", agg.first},
                          {"ignored", agg.second},
                          {"sketches_per_target", config.num_sketches}});
    }
    rows_json.push_back(std::move(r));
  }
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------

auto IntersectionFinding::candidate_count() const noexcept -> std::size_t {
  switch (algo) {
    case Algorithm::kmv:
      return kmv_candidates.size();
    case Algorithm::pcsa:
      return pcsa_constraints.size();
    default:
      return register_constraints.size();
  }
}

auto intersection_attack(std::span<const Sketch> sketches, std::optional<HashValue> true_target_hash)
    -> IntersectionFinding {
  if (sketches.size() < 2) {
    throw Error(Errc::invalid_argument, "intersection needs at least two sketches");
  }
  const auto& first = sketches.front();
  for (const auto& s : sketches) {
    if (!s.same_shape(first) || s.salt_fingerprint() != first.salt_fingerprint()) {
      throw Error(Errc::param_mismatch, "sketches differ in algorithm, parameter or salt");
    }
  }
  IntersectionFinding f;
  f.algo = first.algorithm();
  f.num_sketches_used = sketches.size();

  switch (f.algo) {
    case Algorithm::kmv: {
      const auto h0 = first.kmv_hashes();
      std::vector<std::uint64_t> acc(h0.begin(), h0.end());
      for (const auto& s : sketches.subspan(1)) {
        const auto h = s.kmv_hashes();
        std::vector<std::uint64_t> next;
        std::set_intersection(acc.begin(), acc.end(), h.begin(), h.end(), std::back_inserter(next));
        acc = std::move(next);
      }
      f.kmv_candidates = std::move(acc);
      if (true_target_hash) {
        f.contains_target = std::binary_search(f.kmv_candidates.begin(), f.kmv_candidates.end(),
                                               true_target_hash->bits);
      }
      break;
    }
    case Algorithm::pcsa: {
      const auto b0 = first.pcsa_bitmaps();
      std::vector<std::uint32_t> acc(b0.begin(), b0.end());
      for (const auto& s : sketches.subspan(1)) {
        const auto b = s.pcsa_bitmaps();
        for (std::size_t i = 0; i < acc.size(); ++i) {
          acc[i] &= b[i];
        }
      }
      for (std::size_t i = 0; i < acc.size(); ++i) {
        for (int bit = 0; bit < kPcsaBitmapBits; ++bit) {
          if ((acc[i] >> bit & 1U) != 0) {
            f.pcsa_constraints.push_back({static_cast<std::uint32_t>(i), bit});
          }
        }
      }
      if (true_target_hash) {
        const auto slot = pcsa_slot(*true_target_hash, first.param());
        f.contains_target = (acc[slot.bucket] >> slot.bit & 1U) != 0;
      }
      break;
    }
    case Algorithm::loglog:
    case Algorithm::hll: {
      const auto r0 = first.registers();
      std::vector<std::uint8_t> acc(r0.begin(), r0.end());
      for (const auto& s : sketches.subspan(1)) {
        const auto r = s.registers();
        for (std::size_t i = 0; i < acc.size(); ++i) {
          acc[i] = std::min(acc[i], r[i]);
        }
      }
      for (std::size_t i = 0; i < acc.size(); ++i) {
        if (acc[i] > 0) {
          f.register_constraints.push_back({static_cast<std::uint32_t>(i), acc[i]});
        }
      }
      if (true_target_hash) {
        const int p = first.param();
        const auto b = true_target_hash->bucket(p);
        f.contains_target = acc[b] > 0 && true_target_hash->rho(p) <= acc[b];
      }
      break;
    }
  }
  return f;
}

// ---------------------------------------------------------------------------

auto external_api_attack(service::SketchQueryApi& api, const service::SketchKey& sketch_id,
                         std::string_view target, std::int64_t rounding) -> ExternalVerdict {
  require(rounding >= 0, "rounding must be non-negative");
  // Probe dimension derived from the target so repeated probes reuse one record.
  const auto tag = Salt::unsalted().hash(target).bits;
  ExternalVerdict v;
  v.probe_key = {"probe-" + to_hex(std::span(reinterpret_cast<const std::uint8_t*>(&tag), 6)),
                 sketch_id.period};

  service::IngestRequest probe;
  probe.key = v.probe_key;
  probe.like = sketch_id;
  probe.elements = {std::string(target)};
  probe.overwrite = true;
  try {
    api.ingest(probe);
  } catch (const Error& e) {
    if (e.code() == Errc::unknown_key) {
      throw Error(Errc::unknown_sketch, sketch_id.to_string());
    }
    throw;
  }
  v.estimate_without = api.estimate({sketch_id}, rounding).estimate;
  v.estimate_with = api.estimate({sketch_id, v.probe_key}, rounding).estimate;
  v.guess = v.estimate_without == v.estimate_with;
  return v;
}

}  // namespace sketchpriv::attacks
