#include <catch_amalgamated.hpp>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "sb/harness.hpp"

using namespace sb;
using namespace sb::harness;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("img" + std::to_string(i) + ".png");
  return out;
}

Json small_config(const std::string& method, const std::string& payload_kind = "text") {
  Json cfg;
  cfg["seed"] = 11;
  cfg["covers"] = {{"synthetic", {{"count", 40}, {"size", 64}}}};
  cfg["split"] = {{"train", 24}, {"val", 4}, {"test", 12}};
  cfg["stego"] = {{"method", method}};
  cfg["payload"] = {{"kind", payload_kind}};
  cfg["detector"] = {{"n_learners", 15}};
  return cfg;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / "sb_harness_tests" / name;
  fs::remove_all(d);
  return d;
}

struct ThreadsEnv {
  explicit ThreadsEnv(const char* v) { setenv("SB_THREADS", v, 1); }
  ~ThreadsEnv() { unsetenv("SB_THREADS"); }
};

}  // namespace

TEST_CASE("dataset splits", "[harness]") {
  const auto m = split_dataset(names(10), 4);
  CHECK(m.count(Split::Train) == 7);
  CHECK(m.count(Split::Val) == 1);
  CHECK(m.count(Split::Test) == 2);
  const auto again = split_dataset(names(10), 4);
  CHECK(again.splits == m.splits);
  CHECK(split_dataset(names(10), 5).splits != m.splits);

  const auto big = split_dataset(names(7200), 1);
  CHECK(big.count(Split::Train) == 5040);
  CHECK(big.count(Split::Val) == 720);
  CHECK(big.count(Split::Test) == 1440);

  for (std::size_t n : {11u, 13u, 27u, 101u}) {
    const auto s = split_dataset(names(n), 2);
    CHECK(s.splits.size() == n);
    CHECK(std::abs(double(s.count(Split::Train)) - 0.7 * n) <= 1.0);
    CHECK(std::abs(double(s.count(Split::Val)) - 0.1 * n) <= 1.0);
    CHECK(std::abs(double(s.count(Split::Test)) - 0.2 * n) <= 1.0);
  }
  const auto c = split_dataset_counts(names(320), 3, 200, 40, 80);
  CHECK(c.count(Split::Test) == 80);
  CHECK_THROWS_AS(split_dataset_counts(names(320), 3, 200, 40, 79), Error);
  try {
    split_dataset(names(9), 1);
    FAIL("expected TooFewImages");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooFewImages);
  }
}

TEST_CASE("report emission", "[harness]") {
  RunReport r;
  r.task = "demo";
  r.timestamp = "2000-01-01T00:00:00Z";
  r.config = {{"seed", 1}};
  Table t{{"item", "value"}, {}};
  t.add({std::string("a,b"), 1.5});
  t.add({std::string("c"), std::numeric_limits<double>::infinity()});
  r.tables.emplace_back("items", t);
  r.matrices.emplace_back("f1", Matrix{{"lsb", "qim"}, {"lsb", "qim"}, {{1.0, 0.25}, {0.5, 0.75}}});
  r.aggregates["mean"] = number(t.column_mean("value"));
  CHECK(std::isinf(t.column_mean("value")));
  CHECK_THROWS_AS(t.add({std::string("x")}), Error);

  const auto d = temp_dir("emit");
  emit_report(r, d);
  const auto first = slurp(d / "report.json");
  const auto csv = slurp(d / "f1.csv");
  CHECK(csv == "train\\test,lsb,qim\nlsb,1.0,0.25\nqim,0.5,0.75\n");
  CHECK(slurp(d / "items.csv") == "item,value\n\"a,b\",1.5\nc,inf\n");
  emit_report(r, d);
  CHECK(slurp(d / "report.json") == first);

  const auto parsed = Json::parse(first);
  CHECK(parsed == to_json(r));
  CHECK(parsed.at("matrices").at("f1").at("values")[0][1].get<double>() == 0.25);
  CHECK(parsed.at("aggregates").at("mean") == "inf");
}

TEST_CASE("capability runs", "[harness]") {
  Context ctx;
  SECTION("identity embedder leaves covers untouched") {
    const auto r = run_capability(small_config("identity", "random"), ctx);
    const auto& means = r.aggregates.at("means");
    CHECK(means.at("cover_mae").get<double>() == 0.0);
    CHECK(means.at("cover_psnr_db") == "inf");
  }
  SECTION("LSB text payloads round trip and aggregates are row means") {
    auto r = run_capability(small_config("lsb_replace"), ctx);
    const auto& means = r.aggregates.at("means");
    CHECK(means.at("ber").get<double>() == 0.0);
    CHECK(means.at("emr").get<double>() == 1.0);
    auto& t = r.table("items");
    CHECK(t.rows.size() == 12);
    double sum = 0.0;
    for (const auto& row : t.rows) sum += std::get<double>(row[2]);
    CHECK(means.at("cover_psnr_db").get<double>() == Catch::Approx(sum / 12).epsilon(1e-15));
  }
  SECTION("image payloads report secret fidelity") {
    auto cfg = small_config("lsb_replace", "image");
    cfg["payload"]["ratio"] = 0.25;
    const auto r = run_capability(cfg, ctx);
    CHECK(r.aggregates.at("means").at("secret_mae").get<double>() == 0.0);
    CHECK(r.aggregates.at("means").at("secret_psnr_db") == "inf");
  }
  SECTION("config errors surface") {
    auto cfg = small_config("lsb_replace");
    cfg["stego"]["method"] = "nope";
    CHECK_THROWS_AS(run_capability(cfg, ctx), Error);
    cfg = small_config("lsb_replace");
    cfg["covers"] = {{"dir", "/definitely/missing"}};
    try {
      run_capability(cfg, ctx);
      FAIL("expected FileNotFound");
    } catch (const Error& e) {
      CHECK(e.is_config_error());
    }
  }
}

TEST_CASE("text corpora from files", "[harness]") {
  const auto d = temp_dir("corpus");
  fs::create_directories(d);
  {
    std::ofstream out(d / "corpus.txt");
    for (int i = 0; i < 12; ++i) out << "payload line number " << i << " with some words\n";
  }
  auto cfg = small_config("lsb_replace");
  cfg["payload"] = {{"kind", "text"}, {"corpus", "corpus.txt"}};
  Context ctx(d);
  const auto r = run_capability(cfg, ctx);
  CHECK(r.aggregates.at("means").at("emr").get<double>() == 1.0);
}

TEST_CASE("covers from a directory", "[harness]") {
  const auto d = temp_dir("covers");
  fs::create_directories(d);
  for (std::uint64_t i = 0; i < 10; ++i)
    imagecore::write_image(synth::synthetic_cover(32, 32, i), d / ("c" + std::to_string(i) + ".png"));
  Json cfg;
  cfg["covers"] = {{"dir", d.string()}};
  cfg["payload"] = {{"kind", "random"}, {"rate", 0.5}};
  Context ctx;
  const auto r = run_capability(cfg, ctx);
  CHECK(r.aggregates.at("n_items") == 2);
  CHECK(r.aggregates.at("means").at("ber").get<double>() == 0.0);
}

TEST_CASE("detection runs", "[harness]") {
  Context ctx;
  const auto idr = run_detection(small_config("identity", "random"), ctx);
  CHECK(idr.aggregates.at("auc").get<double>() == Catch::Approx(0.5).margin(0.1));
  const auto& c = idr.aggregates.at("confusion");
  CHECK(c.at("tp").get<int>() + c.at("fp").get<int>() + c.at("tn").get<int>() + c.at("fn").get<int>() == 24);

  auto weak = small_config("lsb_replace", "random");
  auto strong = weak;
  strong["stego"]["k_planes"] = 4;
  const double f1_weak = run_detection(weak, ctx).aggregates.at("f1").get<double>();
  const double f1_strong = run_detection(strong, ctx).aggregates.at("f1").get<double>();
  CHECK(f1_strong >= f1_weak);
}

TEST_CASE("transfer runs", "[harness]") {
  Context ctx;
  SECTION("a single condition reproduces the in-domain detection run") {
    auto cfg = small_config("lsb_replace", "random");
    cfg["conditions"] = Json::array({{{"label", "lsb"}}});
    const auto t = run_transfer(cfg, ctx);
    const auto& f1 = t.matrix("f1");
    REQUIRE(f1.values.size() == 1);
    Context fresh;
    const auto d = run_detection(small_config("lsb_replace", "random"), fresh);
    CHECK(f1.values[0][0] == d.aggregates.at("f1").get<double>());
    CHECK(t.matrix("auc").values[0][0] == d.aggregates.at("auc").get<double>());
  }
  SECTION("diagonal entries equal separate runs") {
    auto cfg = small_config("lsb_replace", "random");
    cfg["conditions"] = Json::array({{{"label", "lsb"}}, {{"label", "qim"}, {"stego", {{"method", "dct_qim"}, {"delta", 8}}}}});
    const auto t = run_transfer(cfg, ctx);
    auto qim = small_config("dct_qim", "random");
    qim["stego"]["delta"] = 8;
    Context fresh;
    CHECK(t.matrix("f1").values[1][1] == run_detection(qim, fresh).aggregates.at("f1").get<double>());
  }
  SECTION("attack-side cross-cover LSB stays within 1 dB") {
    auto cfg = small_config("lsb_replace", "random");
    cfg["side"] = "attack";
    cfg["conditions"] = Json::array({{{"label", "natural"}},
                                     {{"label", "textured"}, {"covers", {{"synthetic", {{"style", "textured"}}}}}}});
    const auto t = run_transfer(cfg, ctx);
    const auto& p = t.matrix("cover_psnr_db").values;
    CHECK(std::abs(p[0][1] - p[1][1]) <= 1.0);
    CHECK(std::abs(p[1][0] - p[0][0]) <= 1.0);
    CHECK(t.matrix("ber").values[0][1] == 0.0);
  }
  SECTION("no conditions") {
    try {
      run_transfer(small_config("lsb_replace"), ctx);
      FAIL("expected AxisTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::AxisTooSmall);
    }
  }
}

TEST_CASE("robustness runs", "[harness]") {
  Context ctx;
  auto cfg = small_config("lsb_replace");
  cfg["payload"]["min_chars"] = 32;
  cfg["channels"] = Json::array({"identity", "jpeg75"});
  const auto r = run_robustness(cfg, ctx);
  const auto cap = run_capability(small_config("lsb_replace"), ctx);
  CHECK(r.aggregates.at("channels").at("identity").at("means") == cap.aggregates.at("means"));
  CHECK(r.aggregates.at("channels").at("jpeg75").at("means").at("emr").get<double>() == 0.0);
}

TEST_CASE("efficiency runs", "[harness]") {
  Context ctx;
  Json cfg;
  cfg["covers"] = {{"synthetic", {{"count", 100}, {"size", 64}}}};
  cfg["payload"] = {{"kind", "random"}, {"rate", 0.5}};
  cfg["detector"] = {{"n_learners", 5}};
  cfg["stegos"] = Json::array({{{"label", "lsb"}, {"method", "lsb_replace"}}, {{"label", "qim"}, {"method", "dct_qim"}}});
  const auto r = run_efficiency(cfg, ctx);
  double phase_sum = 0.0, total = 0.0;
  bool saw_score = false;
  for (const auto& t : r.timings) {
    if (t.phase == "total") {
      total = t.total_ms;
      continue;
    }
    phase_sum += t.total_ms;
    if (t.phase == "lsb/detector_score") {
      saw_score = true;
      CHECK(t.n == 20);
      CHECK(t.median_ms > 0.0);
      CHECK(t.p90_ms >= t.median_ms);
    }
  }
  CHECK(saw_score);
  CHECK(std::abs(total - phase_sum) <= 0.05 * total);

  cfg["covers"]["synthetic"]["count"] = 40;
  CHECK_THROWS_AS(run_efficiency(cfg, ctx), Error);
}

TEST_CASE("reports do not depend on the thread count", "[harness]") {
  auto cfg = small_config("dct_qim", "text");
  cfg["stego"]["repetition"] = 1;
  cfg["payload"]["max_chars"] = 40;
  std::string one, three;
  {
    ThreadsEnv env("1");
    Context ctx;
    one = strip_volatile(to_json(run_capability(cfg, ctx))).dump();
  }
  {
    ThreadsEnv env("3");
    Context ctx;
    three = strip_volatile(to_json(run_capability(cfg, ctx))).dump();
  }
  CHECK(one == three);
}

TEST_CASE("run_task dispatch", "[harness]") {
  auto cfg = small_config("lsb_replace");
  cfg["task"] = "capability";
  CHECK(run_task(cfg).task == "capability");
  cfg["task"] = "bogus";
  CHECK_THROWS_AS(run_task(cfg), Error);
}
