#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <tuple>
#include <filesystem>
#include <fstream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "sketchpriv/error.hpp"
#include "sketchpriv/http.hpp"
#include "sketchpriv/serialize.hpp"
#include "sketchpriv/service.hpp"
#include "sketchpriv/sketch.hpp"

namespace sp = sketchpriv;
namespace sv = sketchpriv::service;
namespace fs = std::filesystem;
using sp::Algorithm;

namespace {

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = fs::temp_directory_path() /
            ("sketchpriv_service_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  [[nodiscard]] auto path() const -> const fs::path& { return path_; }

 private:
  fs::path path_;
};

auto code_of(auto&& fn) -> sp::Errc {
  try {
    fn();
  } catch (const sp::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no exception";
  return sp::Errc::io_error;
}

auto lines_of(const fs::path& p) -> std::vector<std::string> {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

auto ingest_request(const sv::SketchKey& key, int from, int to) -> sv::IngestRequest {
  sv::IngestRequest r;
  r.key = key;
  r.algo = Algorithm::hll;
  r.param = 10;
  for (int i = from; i < to; ++i) r.elements.push_back("user" + std::to_string(i));
  return r;
}

}  // namespace

TEST(Keys, Validation) {
  EXPECT_NO_THROW(sv::validate_key({"daily-users", "2024-02-29"}));
  EXPECT_NO_THROW(sv::validate_key({"a.b_c", "2000-02-29"}));
  EXPECT_EQ(code_of([] { sv::validate_key({"x", "2023-02-29"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"x", "1900-02-29"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"x", "2024-13-01"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"x", "2024-1-01"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"../etc", "2024-01-01"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"_streams", "2024-01-01"}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([] { sv::validate_key({"", "2024-01-01"}); }), sp::Errc::invalid_argument);
}

TEST(Rounding, HalfToEven) {
  EXPECT_EQ(sv::round_estimate(1234.4, 1), 1234.0);
  EXPECT_EQ(sv::round_estimate(1234.5, 1), 1234.0);
  EXPECT_EQ(sv::round_estimate(1235.5, 1), 1236.0);
  EXPECT_EQ(sv::round_estimate(1250.0, 100), 1200.0);
  EXPECT_EQ(sv::round_estimate(1350.0, 100), 1400.0);
  EXPECT_EQ(sv::round_estimate(1234.56, 0), 1234.56);
  EXPECT_THROW((void)sv::round_estimate(1.0, -1), sp::Error);
}

TEST(Store, PutGetListScan) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto m = sp::add(sp::Sketch::empty(Algorithm::hll, 6, sp::Salt::unsalted()), "a", sp::Salt::unsalted());
  for (const auto* period : {"2024-01-03", "2024-01-01", "2024-01-02"}) {
    store.put({{"clicks", period}, m, {}});
  }
  store.put({{"views", "2024-01-01"}, m, {}});
  EXPECT_EQ(code_of([&] { store.put({{"views", "2024-01-01"}, m, {}}); }), sp::Errc::duplicate_key);
  EXPECT_NO_THROW(store.put({{"views", "2024-01-01"}, m, {}}, true));
  const auto keys = store.list();
  ASSERT_EQ(keys.size(), 4U);
  EXPECT_EQ(keys[0].period, "2024-01-01");
  EXPECT_EQ(keys[3].dimension, "views");
  const auto range = store.scan("clicks", "2024-01-02", "2024-01-03");
  ASSERT_EQ(range.size(), 2U);
  EXPECT_EQ(range[0].period, "2024-01-02");
  EXPECT_EQ(store.get({"clicks", "2024-01-02"}).sketch, m);
  EXPECT_GT(store.get({"clicks", "2024-01-02"}).created_at.time_since_epoch().count(), 0);
  EXPECT_EQ(store.get_bytes({"clicks", "2024-01-02"}), sp::serialize(m));
  EXPECT_EQ(code_of([&] { (void)store.get({"clicks", "2030-01-01"}); }), sp::Errc::unknown_key);
}

TEST(Store, AbandonedTempFilesAreInvisible) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto m = sp::Sketch::empty(Algorithm::hll, 4, 1);
  store.put({{"d", "2024-05-05"}, m, {}});
  // A writer that died between write and rename leaves only its temp file behind.
  std::ofstream(dir.path() / "d" / ".2024-05-06.skp.tmp.999.0") << "partial";
  const auto keys = store.list();
  ASSERT_EQ(keys.size(), 1U);
  EXPECT_EQ(keys[0].period, "2024-05-05");
  EXPECT_FALSE(store.contains({"d", "2024-05-06"}));
}

TEST(Store, ConcurrentWritersLeaveAValidRecord) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const sv::SketchKey key{"hot", "2024-01-01"};
  std::vector<std::thread> writers;
  for (int w = 0; w < 4; ++w) {
    writers.emplace_back([&, w] {
      for (int i = 0; i < 25; ++i) {
        auto m = sp::Sketch::empty(Algorithm::hll, 8, 1);
        m.insert(sp::HashValue{static_cast<std::uint64_t>(w * 1000 + i) * 0x9E3779B97F4A7C15ULL});
        store.put({key, m, {}}, true);
        (void)store.get(key);
      }
    });
  }
  for (auto& t : writers) t.join();
  EXPECT_NO_THROW((void)store.get(key));
  std::size_t files = 0;
  for (const auto& f : fs::directory_iterator(dir.path() / "hot")) files += f.is_regular_file() ? 1 : 0;
  EXPECT_EQ(files, 1U);
}

TEST(Service, BuildSketchSkipsBlankLines) {
  std::istringstream a("x\ny\n\nz\n");
  std::istringstream b("z\ny\nx");
  const auto salt = sp::Salt::unsalted();
  EXPECT_EQ(sv::build_sketch(a, Algorithm::kmv, 8, salt), sv::build_sketch(b, Algorithm::kmv, 8, salt));
}

TEST(Service, IngestMergesAndEstimates) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  sv::SketchService svc(store, sp::Salt::generate(), {sv::ApiMode::raw, 0, std::nullopt});
  const sv::SketchKey k1{"users", "2024-01-01"}, k2{"users", "2024-01-02"};
  svc.ingest(ingest_request(k1, 0, 300));
  svc.ingest(ingest_request(k1, 200, 400));
  svc.ingest(ingest_request(k2, 300, 500));
  const auto one = svc.estimate({k1});
  EXPECT_NEAR(one.estimate, 400, 40);
  const auto both = svc.estimate({k1, k2});
  EXPECT_EQ(both.merged, 2);
  EXPECT_NEAR(both.estimate, 500, 50);
  auto over = ingest_request(k1, 0, 10);
  over.overwrite = true;
  svc.ingest(over);
  EXPECT_NEAR(svc.estimate({k1}).estimate, 10, 1);
  EXPECT_EQ(code_of([&] { (void)svc.estimate({}); }), sp::Errc::invalid_argument);
  EXPECT_EQ(code_of([&] { (void)svc.estimate({{"users", "1999-01-01"}}); }), sp::Errc::unknown_key);
}

TEST(Service, LikeCopiesShape) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  sv::SketchService svc(store, sp::Salt::generate(), {sv::ApiMode::restricted, 1, std::nullopt});
  auto base = ingest_request({"base", "2024-01-01"}, 0, 10);
  base.algo = Algorithm::kmv;
  base.param = 64;
  svc.ingest(base);
  sv::IngestRequest probe;
  probe.key = {"probe", "2024-01-01"};
  probe.elements = {"someone"};
  probe.like = base.key;
  svc.ingest(probe);
  EXPECT_EQ(store.get(probe.key).sketch.algorithm(), Algorithm::kmv);
  EXPECT_EQ(svc.estimate({base.key, probe.key}).estimate, 11.0);
}

TEST(Service, RestrictedModeRefusesRawAccessAndRounds) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  sv::SketchService svc(store, sp::Salt::generate(), {sv::ApiMode::restricted, 100, dir.path() / "audit.log"});
  const sv::SketchKey key{"users", "2024-01-01"};
  svc.ingest(ingest_request(key, 0, 1234));
  EXPECT_EQ(code_of([&] { (void)svc.get_raw(key); }), sp::Errc::policy_violation);
  const double e = svc.estimate({key}, 10).estimate;
  EXPECT_EQ(std::fmod(e, 100.0), 0.0);
  EXPECT_EQ(std::fmod(svc.estimate({key}, 1000).estimate, 1000.0), 0.0);
}

TEST(Service, AuditLogsEveryRequest) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto log = dir.path() / "audit.log";
  sv::SketchService svc(store, sp::Salt::generate(), {sv::ApiMode::restricted, 1, log});
  const sv::SketchKey key{"users", "2024-01-01"};
  svc.ingest(ingest_request(key, 0, 10));
  (void)svc.estimate({key});
  (void)code_of([&] { (void)svc.get_raw(key); });
  (void)code_of([&] { (void)svc.estimate({{"users", "2024-01-09"}}); });
  const auto lines = lines_of(log);
  ASSERT_EQ(lines.size(), 4U);
  const auto denied = nlohmann::json::parse(lines[2]);
  EXPECT_EQ(denied["endpoint"], "get_sketch");
  EXPECT_EQ(denied["mode"], "RESTRICTED");
  EXPECT_EQ(denied["outcome"], "PolicyViolation");
  EXPECT_EQ(denied["keys"][0], "users/2024-01-01");
  EXPECT_TRUE(denied.contains("timestamp"));
  EXPECT_EQ(nlohmann::json::parse(lines[3])["outcome"], "UnknownKey");
}

TEST(Service, PutRawChecksSalt) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto salt = sp::Salt::generate();
  sv::SketchService svc(store, salt, {sv::ApiMode::raw, 0, std::nullopt});
  const auto good = sp::add(sp::Sketch::empty(Algorithm::hll, 8, salt), "a", salt);
  svc.put_raw({"ext", "2024-01-01"}, sp::serialize(good), false);
  EXPECT_EQ(svc.get_raw({"ext", "2024-01-01"}), sp::serialize(good));
  const auto other = sp::Salt::generate();
  const auto bad = sp::add(sp::Sketch::empty(Algorithm::hll, 8, other), "a", other);
  EXPECT_EQ(code_of([&] { svc.put_raw({"ext", "2024-01-02"}, sp::serialize(bad), false); }), sp::Errc::salt_mismatch);
  EXPECT_EQ(code_of([&] { svc.put_raw({"ext", "2024-01-01"}, sp::serialize(good), false); }), sp::Errc::duplicate_key);
}

TEST(Service, SaltRotation) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto salt_path = dir.path() / ".salt";
  const auto salt = sv::SketchService::load_or_create_salt(salt_path);
  EXPECT_EQ(sv::SketchService::load_or_create_salt(salt_path), salt);
  sv::SketchService svc(store, salt, {sv::ApiMode::raw, 0, std::nullopt}, {true, salt_path});
  const sv::SketchKey key{"users", "2024-01-01"};
  svc.ingest(ingest_request(key, 0, 500));
  svc.ingest(ingest_request({"users", "2024-01-02"}, 100, 300));
  const double before = svc.estimate({key}).estimate;

  const auto refused = svc.rotate_salt(sp::Salt::generate(), false);
  EXPECT_TRUE(refused.refused);
  EXPECT_EQ(refused.stranded, 2U);
  EXPECT_EQ(svc.salt_fingerprint(), salt.fingerprint());

  const auto fresh = sp::Salt::generate();
  const auto report = svc.rotate_salt(fresh, true);
  EXPECT_FALSE(report.refused);
  EXPECT_EQ(report.rebuilt, 2U);
  EXPECT_EQ(svc.salt_fingerprint(), fresh.fingerprint());
  EXPECT_EQ(store.get(key).sketch.salt_fingerprint(), fresh.fingerprint());
  EXPECT_EQ(sp::Salt::load(salt_path.string()), fresh);
  std::istringstream elems([] {
    std::string s;
    for (int i = 0; i < 500; ++i) s += "user" + std::to_string(i) + "\n";
    return s;
  }());
  EXPECT_EQ(store.get(key).sketch, sv::build_sketch(elems, Algorithm::hll, 10, fresh));
  EXPECT_NEAR(svc.estimate({key}).estimate, before, 0.1 * before);
  svc.ingest(ingest_request(key, 500, 600));
  EXPECT_NEAR(svc.estimate({key}).estimate, 600, 60);
}

TEST(Store, ThousandPutsScanInOrder) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto m = sp::Sketch::empty(Algorithm::hll, 4, 1);
  std::vector<sv::SketchKey> keys;
  for (int d = 0; d < 40; ++d) {
    for (int day = 1; day <= 25; ++day) {
      char period[11];
      std::snprintf(period, sizeof period, "2024-03-%02d", day);
      keys.push_back({"dim" + std::to_string(d), period});
    }
  }
  std::shuffle(keys.begin(), keys.end(), std::mt19937_64(8));
  for (const auto& k : keys) store.put({k, m, {}});
  const auto listed = store.list();
  ASSERT_EQ(listed.size(), 1000U);
  EXPECT_TRUE(std::is_sorted(listed.begin(), listed.end(), [](const auto& a, const auto& b) {
    return std::tie(a.dimension, a.period) < std::tie(b.dimension, b.period);
  }));
  std::size_t scanned = 0;
  for (int d = 0; d < 40; ++d) {
    const auto month = store.scan("dim" + std::to_string(d), "2024-03-01", "2024-03-31");
    ASSERT_EQ(month.size(), 25U);
    EXPECT_TRUE(std::is_sorted(month.begin(), month.end(),
                               [](const auto& a, const auto& b) { return a.period < b.period; }));
    scanned += month.size();
  }
  EXPECT_EQ(scanned, 1000U);
}

TEST(Service, IngestIsIdempotentAndShardable) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto salt = sp::Salt::generate();
  sv::SketchService svc(store, salt, {sv::ApiMode::raw, 0, std::nullopt});
  auto once = ingest_request({"once", "2024-01-01"}, 0, 200);
  auto repeated = ingest_request({"repeated", "2024-01-01"}, 0, 0);
  for (int r = 0; r < 5; ++r) {
    repeated.elements.insert(repeated.elements.end(), once.elements.begin(), once.elements.end());
  }
  svc.ingest(once);
  svc.ingest(repeated);
  EXPECT_EQ(store.get(once.key).sketch, store.get(repeated.key).sketch);

  svc.ingest(ingest_request({"sharded", "2024-01-01"}, 0, 120));
  svc.ingest(ingest_request({"sharded", "2024-01-01"}, 120, 200));
  EXPECT_EQ(store.get({"sharded", "2024-01-01"}).sketch, store.get(once.key).sketch);

  svc.ingest(ingest_request({"empty", "2024-01-01"}, 0, 0));
  EXPECT_EQ(store.get({"empty", "2024-01-01"}).sketch, sp::Sketch::empty(Algorithm::hll, 10, salt));
  EXPECT_EQ(svc.estimate({{"empty", "2024-01-01"}}).estimate, 0.0);
}

TEST(Service, RoundedSingleKeyEstimate) {
  EXPECT_EQ(sv::round_estimate(1042.0, 100), 1000.0);
  TempDir dir;
  sv::SketchStore store(dir.path());
  sv::SketchService raw(store, sp::Salt::unsalted(), {sv::ApiMode::raw, 0, std::nullopt});
  const sv::SketchKey key{"users", "2024-01-01"};
  raw.ingest(ingest_request(key, 0, 777));
  const double direct = sp::estimate(store.get(key).sketch);
  sv::SketchService restricted(store, sp::Salt::unsalted(), {sv::ApiMode::restricted, 1, std::nullopt});
  EXPECT_EQ(restricted.estimate({key}).estimate, std::nearbyint(direct));
}

TEST(Service, OldSaltSketchesDoNotMixAfterRotation) {
  TempDir dir;
  sv::SketchStore store(dir.path());
  const auto old_salt = sp::Salt::generate();
  sv::SketchService svc(store, old_salt, {sv::ApiMode::raw, 0, std::nullopt}, {true, std::nullopt});
  const sv::SketchKey key{"users", "2024-01-01"};
  svc.ingest(ingest_request(key, 0, 50));
  const auto stale = store.get(key).sketch;
  (void)svc.rotate_salt(sp::Salt::generate(), true);
  svc.ingest(ingest_request({"users", "2024-01-02"}, 0, 50));
  EXPECT_NO_THROW((void)svc.estimate({key, {"users", "2024-01-02"}}));
  EXPECT_EQ(code_of([&] { (void)sp::merge(stale, store.get(key).sketch); }), sp::Errc::salt_mismatch);
  EXPECT_EQ(code_of([&] { svc.put_raw({"users", "2024-01-03"}, sp::serialize(stale), false); }),
            sp::Errc::salt_mismatch);
}

class HttpTest : public ::testing::Test {
 protected:
  void start(sv::ApiMode mode, std::int64_t rounding) {
    store_ = std::make_unique<sv::SketchStore>(dir_.path());
    service_ = std::make_unique<sv::SketchService>(*store_, salt_, sv::ApiPolicy{mode, rounding, dir_.path() / "audit.log"});
    server_ = std::make_unique<sv::HttpServer>(*service_);
    port_ = server_->bind("127.0.0.1", 0);
    server_->start_background();
  }
  void TearDown() override {
    if (server_) server_->stop();
  }

  TempDir dir_;
  sp::Salt salt_ = sp::Salt::generate();
  std::unique_ptr<sv::SketchStore> store_;
  std::unique_ptr<sv::SketchService> service_;
  std::unique_ptr<sv::HttpServer> server_;
  int port_ = 0;
};

TEST_F(HttpTest, RawModeRoundTrip) {
  start(sv::ApiMode::raw, 0);
  sv::HttpSketchClient client("127.0.0.1", port_);
  const sv::SketchKey key{"users", "2024-01-01"};
  client.ingest(ingest_request(key, 0, 100));
  const auto bytes = client.get_raw(key);
  EXPECT_EQ(bytes, store_->get_bytes(key));
  client.put_raw({"copy", "2024-01-01"}, bytes, false);
  EXPECT_EQ(store_->get_bytes({"copy", "2024-01-01"}), bytes);
  const auto r = client.estimate({key, {"copy", "2024-01-01"}}, 0);
  EXPECT_EQ(r.merged, 2);
  EXPECT_EQ(r.estimate, service_->estimate({key}).estimate);
}

TEST_F(HttpTest, RestrictedModeNeverReturnsSketchBytes) {
  start(sv::ApiMode::restricted, 10);
  sv::HttpSketchClient client("127.0.0.1", port_);
  const sv::SketchKey key{"users", "2024-01-01"};
  client.ingest(ingest_request(key, 0, 1000));
  const auto raw = store_->get_bytes(key);
  const auto hex = sp::to_hex(raw);
  const auto payload_hex = sp::to_hex(std::span(raw).subspan(sp::kHeaderBytes));
  auto r = client.estimate({key}, 0);
  EXPECT_EQ(std::fmod(r.estimate, 10.0), 0.0);
  EXPECT_EQ(client.last_body().find(payload_hex), std::string::npos);
  EXPECT_EQ(code_of([&] { (void)client.get_raw(key); }), sp::Errc::policy_violation);
  EXPECT_EQ(client.last_body().find(hex), std::string::npos);
  EXPECT_EQ(client.last_body().find(payload_hex), std::string::npos);
  EXPECT_EQ(code_of([&] { (void)client.estimate({{"users", "2024-02-01"}}, 0); }), sp::Errc::unknown_key);
  EXPECT_EQ(code_of([&] { (void)client.estimate({{"bad/dim", "2024-02-01"}}, 0); }), sp::Errc::invalid_argument);
}

TEST(Http, StatusMapping) {
  EXPECT_EQ(sv::http_status_for(sp::Errc::unknown_key), 404);
  EXPECT_EQ(sv::http_status_for(sp::Errc::duplicate_key), 409);
  EXPECT_EQ(sv::http_status_for(sp::Errc::policy_violation), 403);
  EXPECT_EQ(sv::http_status_for(sp::Errc::domain_error), 400);
}

TEST(Http, UnreachableServer) {
  sv::HttpSketchClient client("127.0.0.1", 1);
  EXPECT_EQ(code_of([&] { (void)client.estimate({{"a", "2024-01-01"}}, 0); }), sp::Errc::service_unavailable);
}
