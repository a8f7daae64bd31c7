// sketchpriv: build and query cardinality sketches, evaluate privacy bounds,
// and run the membership-inference attacks from the command line.
//
// Exit codes: 0 success, 1 other failure, 2 domain error, 3 I/O error,
// 4 policy violation.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cmath>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sketchpriv/attacks.hpp"
#include "sketchpriv/error.hpp"
#include "sketchpriv/http.hpp"
#include "sketchpriv/kernels.hpp"
#include "sketchpriv/privacy_bounds.hpp"
#include "sketchpriv/serialize.hpp"
#include "sketchpriv/service.hpp"

namespace sp = sketchpriv;
using nlohmann::ordered_json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitDomain = 2;
constexpr int kExitIo = 3;
constexpr int kExitPolicy = 4;
constexpr std::int64_t kDeskAddBudget = 100'000'000;

auto exit_code_for(sp::Errc code) -> int {
  switch (code) {
    case sp::Errc::domain_error:
    case sp::Errc::invalid_argument:
    case sp::Errc::invalid_memory:
      return kExitDomain;
    case sp::Errc::io_error:
    case sp::Errc::service_unavailable:
      return kExitIo;
    case sp::Errc::policy_violation:
      return kExitPolicy;
    default:
      return kExitOther;
  }
}

auto g9(double v) -> std::string {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

void print_config(const ordered_json& config) { std::cerr << "# config " << config.dump() << '\n'; }

auto load_salt(const std::string& path) -> sp::Salt {
  return path.empty() ? sp::Salt::unsalted() : sp::Salt::load(path);
}

// Writes to the named file, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) {
    throw sp::Error(sp::Errc::io_error, "cannot write " + path);
  }
}

struct SketchArgs {
  std::string algo = "hll";
  int p = 12;
  int k = 1024;

  [[nodiscard]] auto algorithm() const -> sp::Algorithm { return sp::parse_algorithm(algo); }
  [[nodiscard]] auto param() const -> int {
    const auto a = algorithm();
    return a == sp::Algorithm::kmv || a == sp::Algorithm::pcsa ? k : p;
  }
  void add_to(CLI::App& cmd) {
    cmd.add_option("--algo", algo, "kmv | pcsa | loglog | hll")->capture_default_str();
    cmd.add_option("--p", p, "precision for loglog/hll (2^p registers)")->capture_default_str();
    cmd.add_option("--k", k, "k for kmv (list size) and pcsa (bitmaps)")->capture_default_str();
  }
};

auto merge_files(const std::vector<std::string>& paths) -> sp::Sketch {
  auto merged = sp::read_sketch_file(paths.at(0));
  for (std::size_t i = 1; i < paths.size(); ++i) {
    merged.merge_from(sp::read_sketch_file(paths[i]));
  }
  return merged;
}

// n_min, n_min + step, ..., up to n_max (inclusive when it lands on the grid).
auto linear_grid(std::int64_t lo, std::int64_t hi, std::int64_t step) -> std::vector<std::int64_t> {
  if (step <= 0 || hi < lo) {
    throw sp::Error(sp::Errc::domain_error, "bad n range");
  }
  std::vector<std::int64_t> out;
  for (auto n = lo; n <= hi; n += step) {
    out.push_back(n);
  }
  return out;
}

auto log_grid(std::int64_t lo, std::int64_t hi, int per_decade) -> std::vector<std::int64_t> {
  if (lo < 1 || hi < lo || per_decade < 1) {
    throw sp::Error(sp::Errc::domain_error, "bad n range");
  }
  std::vector<std::int64_t> out;
  const double step = 1.0 / per_decade;
  for (double e = std::log10(static_cast<double>(lo));; e += step) {
    const auto n = static_cast<std::int64_t>(std::llround(std::pow(10.0, e)));
    if (n > hi) break;
    if (out.empty() || n > out.back()) out.push_back(n);
  }
  if (out.empty() || out.back() != hi) out.push_back(hi);
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"sketchpriv: cardinality sketches and their privacy"};
  app.require_subcommand(1);

  // build ------------------------------------------------------------------
  auto* build = app.add_subcommand("build", "Build a sketch from newline-delimited elements");
  SketchArgs build_args;
  build_args.add_to(*build);
  std::string build_input, build_out, build_salt;
  build->add_option("input", build_input, "element file ('-' for stdin)")->required();
  build->add_option("--out", build_out, "sketch file")->required();
  build->add_option("--salt-file", build_salt, "hex salt key (default: well-known unsalted key)");

  // estimate / merge ---------------------------------------------------------
  auto* est = app.add_subcommand("estimate", "Merge sketch files and print the estimate");
  std::vector<std::string> est_files;
  bool est_json = false;
  est->add_option("files", est_files)->required();
  est->add_flag("--json", est_json);

  auto* mrg = app.add_subcommand("merge", "Merge sketch files into one");
  std::vector<std::string> mrg_files;
  std::string mrg_out;
  mrg->add_option("files", mrg_files)->required();
  mrg->add_option("--out", mrg_out)->required();

  auto* salt_cmd = app.add_subcommand("salt", "Generate a random salt key file");
  std::string salt_out;
  salt_cmd->add_option("--out", salt_out)->required();

  // bounds -------------------------------------------------------------------
  auto* bounds_cmd = app.add_subcommand("bounds", "Minimum standard error of a private estimator");
  std::string regime = "pure";
  double epsilon = std::numbers::ln2;
  std::optional<double> delta;
  std::int64_t big_n = 100, n_min = 0, n_max = 20000, n_step = 100;
  std::string bounds_out;
  bounds_cmd->add_option("--regime", regime, "pure | delta | average")->capture_default_str();
  bounds_cmd->add_option("--epsilon", epsilon)->capture_default_str();
  bounds_cmd->add_option("--delta", delta);
  bounds_cmd->add_option("--N", big_n, "minimum cardinality N")->capture_default_str();
  bounds_cmd->add_option("--n-min", n_min, "first n (default N)");
  bounds_cmd->add_option("--n-max", n_max)->capture_default_str();
  bounds_cmd->add_option("--n-step", n_step)->capture_default_str();
  bounds_cmd->add_option("--out", bounds_out, "CSV path (default stdout)");

  // hll-privacy --------------------------------------------------------------
  auto* hllp = app.add_subcommand("hll-privacy", "Average HLL privacy loss eps_n over n");
  std::vector<int> hllp_p{9, 12, 15};
  std::int64_t hllp_min = 1, hllp_max = 1'000'000;
  int hllp_per_decade = 20;
  std::string hllp_out;
  hllp->add_option("--p", hllp_p, "precisions")->delimiter(',')->capture_default_str();
  hllp->add_option("--n-min", hllp_min)->capture_default_str();
  hllp->add_option("--n-max", hllp_max)->capture_default_str();
  hllp->add_option("--per-decade", hllp_per_decade, "grid points per decade")->capture_default_str();
  hllp->add_option("--out", hllp_out, "CSV path (default stdout)");

  // simulate -----------------------------------------------------------------
  auto* sim = app.add_subcommand("simulate", "Monte-Carlo ignore probabilities for HLL");
  std::string scale = "desk";
  sp::attacks::SimulationConfig sim_cfg;
  std::vector<std::int64_t> sim_cards;
  std::optional<int> sim_targets, sim_sketches;
  std::string sim_out;
  bool sim_json = false;
  sim->add_option("--p", sim_cfg.p)->capture_default_str();
  sim->add_option("--cardinalities", sim_cards)->delimiter(',');
  sim->add_option("--targets", sim_targets);
  sim->add_option("--sketches", sim_sketches);
  sim->add_option("--seed", sim_cfg.seed)->capture_default_str();
  sim->add_option("--threads", sim_cfg.threads)->capture_default_str();
  sim->add_option("--scale", scale, "desk | full")->capture_default_str();
  sim->add_option("--out", sim_out, "output path (default stdout)");
  sim->add_flag("--json", sim_json, "JSON report instead of CSV");

  // attack -------------------------------------------------------------------
  auto* attack = app.add_subcommand("attack", "Run a membership-inference attack");
  attack->require_subcommand(1);
  bool attack_json = false;
  attack->add_flag("--json", attack_json, "print machine-readable JSON");

  auto* mem = attack->add_subcommand("membership", "Add-and-check oracle on a sketch file");
  std::string mem_sketch, mem_target, mem_salt;
  double mem_prior = 0.01;
  std::optional<double> mem_q;
  mem->add_option("--sketch", mem_sketch)->required();
  mem->add_option("--target", mem_target)->required();
  mem->add_option("--salt-file", mem_salt);
  mem->add_option("--prior", mem_prior)->capture_default_str();
  mem->add_option("--ignore-prob", mem_q, "q; estimated from the sketch when omitted");
  mem->add_flag("--json", attack_json);

  auto* inter = attack->add_subcommand("intersect", "Intersect sketches known to share a user");
  std::vector<std::string> inter_files;
  std::string inter_target, inter_salt;
  inter->add_option("files", inter_files)->required();
  inter->add_option("--target", inter_target, "ground-truth target for evaluation");
  inter->add_option("--salt-file", inter_salt);
  inter->add_flag("--json", attack_json);

  auto* ext = attack->add_subcommand("external", "Attack through the service API");
  std::string ext_host = "127.0.0.1", ext_dim, ext_period, ext_target;
  int ext_port = 8080;
  std::int64_t ext_rounding = 0;
  ext->add_option("--host", ext_host)->capture_default_str();
  ext->add_option("--port", ext_port)->capture_default_str();
  ext->add_option("--dimension", ext_dim)->required();
  ext->add_option("--period", ext_period)->required();
  ext->add_option("--target", ext_target)->required();
  ext->add_option("--rounding", ext_rounding)->capture_default_str();
  ext->add_flag("--json", attack_json);

  auto* fetch = app.add_subcommand("fetch", "Download a raw sketch from a service (RAW mode only)");
  std::string fetch_host = "127.0.0.1", fetch_dim, fetch_period, fetch_out;
  int fetch_port = 8080;
  fetch->add_option("--host", fetch_host)->capture_default_str();
  fetch->add_option("--port", fetch_port)->capture_default_str();
  fetch->add_option("--dimension", fetch_dim)->required();
  fetch->add_option("--period", fetch_period)->required();
  fetch->add_option("--out", fetch_out)->required();

  // ingest / serve -----------------------------------------------------------
  auto* ingest = app.add_subcommand("ingest", "Ingest an element stream into a local store");
  SketchArgs ingest_args;
  ingest_args.add_to(*ingest);
  std::string ingest_root, ingest_dim, ingest_period, ingest_input, ingest_salt;
  bool ingest_keep = false;
  ingest->add_option("--root", ingest_root)->required();
  ingest->add_option("--dimension", ingest_dim)->required();
  ingest->add_option("--period", ingest_period)->required();
  ingest->add_option("--salt-file", ingest_salt, "service salt (default <root>/.salt)");
  ingest->add_flag("--keep-streams", ingest_keep, "retain raw elements for salt rotation");
  ingest->add_option("input", ingest_input)->required();

  auto* serve = app.add_subcommand("serve", "Serve the sketch store over HTTP");
  std::string serve_root, serve_host = "127.0.0.1", serve_audit, serve_salt;
  int serve_port = 8080;
  bool serve_restricted = false, serve_keep = false;
  std::int64_t serve_rounding = 1;
  serve->add_option("--root", serve_root)->required();
  serve->add_option("--host", serve_host)->capture_default_str();
  serve->add_option("--port", serve_port)->capture_default_str();
  serve->add_flag("--restricted", serve_restricted, "merge-and-estimate only");
  serve->add_option("--rounding", serve_rounding)->capture_default_str();
  serve->add_option("--audit-log", serve_audit, "default <root>/audit.log");
  serve->add_option("--salt-file", serve_salt, "service salt (default <root>/.salt)");
  serve->add_flag("--keep-streams", serve_keep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitDomain;
  }

  try {
    if (*build) {
      const auto salt = load_salt(build_salt);
      print_config({{"command", "build"},
                    {"algo", build_args.algo},
                    {"param", build_args.param()},
                    {"input", build_input},
                    {"out", build_out},
                    {"salt_fingerprint", salt.fingerprint()}});
      sp::Sketch sketch = sp::Sketch::empty(build_args.algorithm(), build_args.param(), salt);
      if (build_input == "-") {
        sketch = sp::service::build_sketch(std::cin, build_args.algorithm(), build_args.param(), salt);
      } else {
        std::ifstream in(build_input);
        if (!in) throw sp::Error(sp::Errc::io_error, "cannot open " + build_input);
        sketch = sp::service::build_sketch(in, build_args.algorithm(), build_args.param(), salt);
      }
      sp::write_sketch_file(build_out, sketch);
      std::cout << g9(sp::estimate(sketch)) << '\n';
    } else if (*est) {
      print_config({{"command", "estimate"}, {"files", est_files}});
      const auto m = merge_files(est_files);
      if (est_json) {
        std::cout << ordered_json{{"algo", sp::algorithm_name(m.algorithm())},
                                  {"param", m.param()},
                                  {"merged", est_files.size()},
                                  {"estimate", sp::estimate(m)}}
                         .dump()
                  << '\n';
      } else {
        std::cout << g9(sp::estimate(m)) << '\n';
      }
    } else if (*mrg) {
      print_config({{"command", "merge"}, {"files", mrg_files}, {"out", mrg_out}});
      sp::write_sketch_file(mrg_out, merge_files(mrg_files));
    } else if (*salt_cmd) {
      print_config({{"command", "salt"}, {"out", salt_out}});
      sp::Salt::generate().save(salt_out);
    } else if (*bounds_cmd) {
      const auto r = sp::bounds::parse_regime(regime);
      const auto lo = n_min > 0 ? n_min : big_n;
      print_config({{"command", "bounds"},
                    {"regime", regime},
                    {"epsilon", epsilon},
                    {"delta", delta ? ordered_json(*delta) : ordered_json(nullptr)},
                    {"N", big_n},
                    {"n_min", lo},
                    {"n_max", n_max},
                    {"n_step", n_step}});
      const auto grid = linear_grid(lo, n_max, n_step);
      const auto curve = sp::bounds::min_std_error_curve(epsilon, big_n, grid, r, delta);
      std::string csv = "n,std_error_bound,best_k\n";
      for (const auto& pt : curve) {
        csv += std::to_string(pt.n) + "," + g9(pt.std_error_bound) + "," + std::to_string(pt.best_k) + "\n";
      }
      emit(bounds_out, csv);
    } else if (*hllp) {
      print_config({{"command", "hll-privacy"},
                    {"p", hllp_p},
                    {"n_min", hllp_min},
                    {"n_max", hllp_max},
                    {"per_decade", hllp_per_decade},
                    {"approximation", "P[M | t not in E] taken as P[M] (large universe)"}});
      const auto grid = log_grid(hllp_min, hllp_max, hllp_per_decade);
      std::string csv = "p,n,epsilon_n,ref_two,ref_ln2\n";
      for (const int p : hllp_p) {
        for (const auto n : grid) {
          csv += std::to_string(p) + "," + std::to_string(n) + "," + g9(sp::bounds::hll_epsilon_avg(p, n)) +
                 ",2," + g9(std::numbers::ln2) + "\n";
        }
      }
      emit(hllp_out, csv);
    } else if (*sim) {
      const bool full = scale == "full";
      if (!full && scale != "desk") throw sp::Error(sp::Errc::domain_error, "scale must be desk or full");
      sim_cfg.cardinalities = !sim_cards.empty() ? sim_cards
                              : full ? std::vector<std::int64_t>{1000, 10000, 100000, 1000000}
                                     : std::vector<std::int64_t>{1000, 10000};
      sim_cfg.num_targets = sim_targets.value_or(full ? 10000 : 500);
      sim_cfg.num_sketches = sim_sketches.value_or(full ? 1000 : 200);
      print_config({{"command", "simulate"},
                    {"scale", scale},
                    {"p", sim_cfg.p},
                    {"cardinalities", sim_cfg.cardinalities},
                    {"targets", sim_cfg.num_targets},
                    {"sketches", sim_cfg.num_sketches},
                    {"seed", sim_cfg.seed},
                    {"threads", sim_cfg.threads},
                    {"simd", sp::kernels::isa_name(sp::kernels::active().isa)}});
      if (!full) {
        std::int64_t adds = 0;
        for (const auto n : sim_cfg.cardinalities) adds += n * sim_cfg.num_sketches;
        if (adds > kDeskAddBudget) {
          throw sp::Error(sp::Errc::domain_error, "desk scale is capped at 1e8 add operations (" +
                                                      std::to_string(adds) + " requested); use --scale full");
        }
      }
      const auto report = sp::attacks::simulate_ignore_probabilities(sim_cfg);
      emit(sim_out, sim_json ? report.to_json() : report.to_csv());
    } else if (*attack) {
      if (*mem) {
        const auto salt = load_salt(mem_salt);
        print_config({{"command", "attack membership"},
                      {"sketch", mem_sketch},
                      {"target", mem_target},
                      {"prior", mem_prior},
                      {"ignore_prob", mem_q ? ordered_json(*mem_q) : ordered_json(nullptr)}});
        const auto m = sp::read_sketch_file(mem_sketch);
        const auto v = sp::attacks::membership_attack(m, mem_target, salt, mem_prior, mem_q);
        if (attack_json) {
          std::cout << ordered_json{{"attack", "membership"},
                                    {"changed", v.changed},
                                    {"prior", mem_prior},
                                    {"ignore_prob", v.ignore_prob},
                                    {"posterior", v.posterior}}
                           .dump()
                    << '\n';
        } else if (v.changed) {
          std::cout << "sketch changed: target is NOT in the set (posterior 0)\n";
        } else {
          std::cout << "sketch unchanged: posterior " << g9(v.posterior) << " (prior " << g9(mem_prior)
                    << ", ignore probability " << g9(v.ignore_prob) << ")\n";
        }
      } else if (*inter) {
        print_config({{"command", "attack intersect"}, {"files", inter_files}, {"target", inter_target}});
        std::vector<sp::Sketch> sketches;
        for (const auto& f : inter_files) sketches.push_back(sp::read_sketch_file(f));
        std::optional<sp::HashValue> truth;
        if (!inter_target.empty()) {
          const auto salt = load_salt(inter_salt);
          sp::check_salt(sketches.front(), salt);
          truth = salt.hash(inter_target);
        }
        const auto f = sp::attacks::intersection_attack(sketches, truth);
        if (attack_json) {
          ordered_json j{{"attack", "intersect"},
                         {"algo", sp::algorithm_name(f.algo)},
                         {"num_sketches_used", f.num_sketches_used},
                         {"candidate_count", f.candidate_count()}};
          if (f.algo == sp::Algorithm::kmv) {
            auto& c = j["kmv_candidates"] = ordered_json::array();
            for (const auto h : f.kmv_candidates) c.push_back(h);
          } else if (f.algo == sp::Algorithm::pcsa) {
            auto& c = j["pcsa_constraints"] = ordered_json::array();
            for (const auto& b : f.pcsa_constraints) c.push_back({{"bucket", b.bucket}, {"bit", b.bit}});
          } else {
            auto& c = j["register_constraints"] = ordered_json::array();
            for (const auto& r : f.register_constraints) c.push_back({{"bucket", r.bucket}, {"max_rho", r.max_rho}});
          }
          j["contains_target"] = f.contains_target ? ordered_json(*f.contains_target) : ordered_json(nullptr);
          std::cout << j.dump() << '\n';
        } else {
          std::cout << f.candidate_count() << " candidate constraints shared by " << f.num_sketches_used
                    << " sketches";
          if (f.contains_target) {
            std::cout << "; target " << (*f.contains_target ? "satisfies" : "violates") << " them";
          }
          std::cout << '\n';
        }
      } else if (*ext) {
        print_config({{"command", "attack external"},
                      {"host", ext_host},
                      {"port", ext_port},
                      {"dimension", ext_dim},
                      {"period", ext_period},
                      {"rounding", ext_rounding}});
        sp::service::HttpSketchClient client(ext_host, ext_port);
        const auto v = sp::attacks::external_api_attack(client, {ext_dim, ext_period}, ext_target, ext_rounding);
        if (attack_json) {
          std::cout << ordered_json{{"attack", "external"},
                                    {"guess_in_set", v.guess},
                                    {"estimate_without", v.estimate_without},
                                    {"estimate_with", v.estimate_with},
                                    {"probe", v.probe_key.to_string()}}
                           .dump()
                    << '\n';
        } else {
          std::cout << (v.guess ? "estimates equal: target probably IN the set"
                                : "estimates differ: target NOT in the set")
                    << " (" << g9(v.estimate_without) << " vs " << g9(v.estimate_with) << ")\n";
        }
      }
    } else if (*fetch) {
      print_config({{"command", "fetch"},
                    {"host", fetch_host},
                    {"port", fetch_port},
                    {"dimension", fetch_dim},
                    {"period", fetch_period},
                    {"out", fetch_out}});
      sp::service::HttpSketchClient client(fetch_host, fetch_port);
      const auto bytes = client.get_raw({fetch_dim, fetch_period});
      sp::write_sketch_file(fetch_out, sp::deserialize(bytes));
    } else if (*ingest) {
      const std::filesystem::path root(ingest_root);
      const auto salt_path = ingest_salt.empty() ? root / ".salt" : std::filesystem::path(ingest_salt);
      sp::service::SketchStore store(root);
      sp::service::SketchService svc(store, sp::service::SketchService::load_or_create_salt(salt_path),
                                     {sp::service::ApiMode::raw, 0, std::nullopt},
                                     {ingest_keep, salt_path});
      print_config({{"command", "ingest"},
                    {"root", ingest_root},
                    {"dimension", ingest_dim},
                    {"period", ingest_period},
                    {"algo", ingest_args.algo},
                    {"param", ingest_args.param()},
                    {"salt_fingerprint", svc.salt_fingerprint()}});
      std::ifstream in(ingest_input);
      if (!in) throw sp::Error(sp::Errc::io_error, "cannot open " + ingest_input);
      const auto rec = svc.ingest_stream({ingest_dim, ingest_period}, in, ingest_args.algorithm(),
                                         ingest_args.param());
      std::cout << g9(sp::estimate(rec.sketch)) << '\n';
    } else if (*serve) {
      const std::filesystem::path root(serve_root);
      const auto salt_path = serve_salt.empty() ? root / ".salt" : std::filesystem::path(serve_salt);
      const auto audit = serve_audit.empty() ? root / "audit.log" : std::filesystem::path(serve_audit);
      sp::service::SketchStore store(root);
      sp::service::SketchService svc(
          store, sp::service::SketchService::load_or_create_salt(salt_path),
          {serve_restricted ? sp::service::ApiMode::restricted : sp::service::ApiMode::raw, serve_rounding,
           audit},
          {serve_keep, salt_path});
      sp::service::HttpServer server(svc);
      const int port = server.bind(serve_host, serve_port);
      print_config({{"command", "serve"},
                    {"root", serve_root},
                    {"host", serve_host},
                    {"port", port},
                    {"mode", sp::service::api_mode_name(svc.policy().mode)},
                    {"rounding", serve_rounding},
                    {"audit_log", audit.string()},
                    {"salt_fingerprint", svc.salt_fingerprint()}});
      std::cout << "listening on " << serve_host << ":" << port << std::endl;
      server.listen();
    }
  } catch (const sp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return 0;
}
