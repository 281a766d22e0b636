#include <catch_amalgamated.hpp>

#include "sb/steganalysis.hpp"
#include "sb/stego.hpp"
#include "sb/synth.hpp"

using namespace sb;
using namespace sb::steganalysis;
using imagecore::ColorSpace;

namespace {

std::vector<ImageBuffer> covers(std::size_t n, std::uint64_t seed, std::size_t size = 64) {
  return synth::synthetic_covers(n, size, seed);
}

std::vector<ImageBuffer> lsb_stegos(const std::vector<ImageBuffer>& cs, int k) {
  std::vector<ImageBuffer> out;
  stego::StegoConfig c;
  c.k_planes = k;
  for (std::size_t i = 0; i < cs.size(); ++i) {
    Rng rng(i);
    std::vector<std::uint8_t> bits(stego::capacity(cs[i], c));
    for (auto& b : bits) b = rng.coin();
    out.push_back(stego::embed(cs[i], payload::BitString(std::move(bits)), c).stego);
  }
  return out;
}

}  // namespace

TEST_CASE("feature layout", "[steganalysis]") {
  const auto f = residual_features(synth::synthetic_cover(32, 32, 1));
  CHECK(f.values.size() == kFeatureLength);
  CHECK(kFeatureLength == 275);
  CHECK(f.schema_id == kSchemaId);
  try {
    residual_features(ImageBuffer(7, 30, 1, ColorSpace::Gray));
    FAIL("expected TooSmall");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::TooSmall);
  }
}

TEST_CASE("constant images give point-mass marginals", "[steganalysis]") {
  const ImageBuffer flat(16, 16, 3, ColorSpace::RGB, 90);
  const auto f = residual_features(flat);
  for (std::size_t r = 0; r < kResiduals; ++r) {
    const std::size_t base = r * kPerResidual;
    for (std::size_t b = 0; b < kBins; ++b) CHECK(f.values[base + b] == (b == kTruncation ? 1.0 : 0.0));
  }
}

TEST_CASE("hand residual maps", "[steganalysis]") {
  ImageBuffer img(5, 3, 1, ColorSpace::Gray, {0, 0, 0, 0, 0, 10, 11, 14, 14, 13, 0, 0, 0, 0, 0});
  const auto luma = detail::scaled_luma(img);
  const auto d1h = residual_map(luma, 5, 3, 0);
  REQUIRE(d1h.width == 3);
  REQUIRE(d1h.height == 1);
  CHECK(d1h.q == std::vector<int>{2, 0, -1});  // 3 is truncated to 2
  const auto d2h = residual_map(luma, 5, 3, 2);
  CHECK(d2h.q == std::vector<int>{2, -2, -1});
  const auto d1v = residual_map(luma, 5, 3, 1);
  CHECK(d1v.q == std::vector<int>{-2, -2, -2});
}

TEST_CASE("features are shift invariant and deterministic", "[steganalysis]") {
  const auto x = synth::synthetic_cover(48, 40, 5);
  ImageBuffer y = x;
  for (auto& v : y.samples()) v = static_cast<std::uint8_t>(v + 10);
  CHECK(residual_features(x).values == residual_features(y).values);
  CHECK(residual_features(x).values == residual_features(x).values);
}

TEST_CASE("separable blobs train to perfect accuracy", "[steganalysis]") {
  Rng rng(3);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 60; ++i) {
    std::vector<double> u(12), v(12);
    for (int k = 0; k < 12; ++k) {
      u[k] = rng.normal();
      v[k] = rng.normal() + (k < 3 ? 6.0 : 0.0);
    }
    a.push_back(u);
    b.push_back(v);
  }
  TrainOptions opt;
  opt.n_learners = 9;
  const auto model = train_on_features(a, b, opt);
  const auto ev = evaluate_on_features(model, a, b);
  CHECK(ev.metrics.accuracy == 1.0);
  CHECK(*ev.metrics.auc == 1.0);
}

TEST_CASE("identical classes are indistinguishable", "[steganalysis]") {
  const auto cs = covers(30, 7);
  TrainOptions opt;
  opt.n_learners = 11;
  const auto model = train_detector(cs, cs, opt);
  const auto ev = evaluate_detector(model, cs, cs);
  CHECK(*ev.metrics.auc == Catch::Approx(0.5).margin(0.1));
}

TEST_CASE("ensemble of one full-space learner is a single FLD", "[steganalysis]") {
  Rng rng(8);
  std::vector<std::vector<double>> a, b;
  for (int i = 0; i < 40; ++i) {
    std::vector<double> u(6), v(6);
    for (int k = 0; k < 6; ++k) {
      u[k] = rng.normal();
      v[k] = rng.normal() + 0.5 * k;
    }
    a.push_back(u);
    b.push_back(v);
  }
  TrainOptions opt;
  opt.n_learners = 1;
  opt.subspace_dim = 6;
  const auto model = train_on_features(a, b, opt);
  REQUIRE(model.base_learners.size() == 1);
  CHECK(model.base_learners[0].subspace.size() == 6);
  for (const auto& x : a) CHECK(model.score_features(x) == model.base_learners[0].project(x));
}

TEST_CASE("detector behaviour on LSB stegos", "[steganalysis]") {
  const auto train_c = covers(60, 21), test_c = covers(30, 22);
  const auto train_s4 = lsb_stegos(train_c, 4);
  TrainOptions opt;
  opt.seed = 5;
  opt.n_learners = 25;
  const auto model = train_detector(train_c, train_s4, opt);

  SECTION("strong embedding scores above the threshold on training stegos") {
    std::size_t above = 0;
    for (const auto& s : train_s4) above += score_image(model, s) >= model.threshold;
    CHECK(static_cast<double>(above) / static_cast<double>(train_s4.size()) >= 0.95);
  }
  SECTION("training fit is at least as good as held-out") {
    const auto train_f1 = evaluate_detector(model, train_c, train_s4).metrics.f1;
    const auto test_f1 = evaluate_detector(model, test_c, lsb_stegos(test_c, 4)).metrics.f1;
    CHECK(train_f1 >= test_f1);
  }
  SECTION("scores are deterministic, offset invariant and learner-order invariant") {
    const auto& img = test_c[3];
    CHECK(score_image(model, img) == score_image(model, img));
    ImageBuffer shifted = img;
    for (auto& v : shifted.samples()) v = static_cast<std::uint8_t>(v + 7);
    CHECK(score_image(model, shifted) == score_image(model, img));
    auto reversed = model;
    std::reverse(reversed.base_learners.begin(), reversed.base_learners.end());
    CHECK(score_image(reversed, img) == Catch::Approx(score_image(model, img)).margin(1e-12));
  }
  SECTION("training is reproducible and the model round-trips through JSON") {
    const auto again = train_detector(train_c, train_s4, opt);
    CHECK(to_json(again).dump() == to_json(model).dump());
    const auto rt = model_from_json(nlohmann::json::parse(to_json(model).dump()));
    CHECK(nlohmann::json(to_json(rt)) == nlohmann::json(to_json(model)));
    CHECK(score_image(rt, test_c[0]) == score_image(model, test_c[0]));
    auto j = nlohmann::json::parse(to_json(model).dump());
    j["version"] = 99;
    CHECK_THROWS_AS(model_from_json(j), Error);
    auto other = model;
    other.schema_id = "something-else";
    try {
      score_image(other, test_c[0]);
      FAIL("expected SchemaMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::SchemaMismatch);
    }
  }
  SECTION("stronger embedding is at least as detectable") {
    const auto train_s1 = lsb_stegos(train_c, 1);
    const auto m1 = train_detector(train_c, train_s1, opt);
    const auto f1_weak = evaluate_detector(m1, test_c, lsb_stegos(test_c, 1)).metrics.f1;
    const auto f1_strong = evaluate_detector(model, test_c, lsb_stegos(test_c, 4)).metrics.f1;
    CHECK(f1_strong >= f1_weak);
  }
}

TEST_CASE("empty classes are rejected", "[steganalysis]") {
  try {
    train_on_features({}, {{1.0}});
    FAIL("expected EmptyClass");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EmptyClass);
  }
}
