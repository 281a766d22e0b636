#include <catch_amalgamated.hpp>

#include <fstream>
#include <nlohmann/json.hpp>

#include "sb/channel.hpp"
#include "sb/dct.hpp"
#include "sb/metrics.hpp"
#include "sb/stego.hpp"
#include "sb/synth.hpp"

using namespace sb;
using namespace sb::channel;
using imagecore::ColorSpace;

namespace {

nlohmann::json fixtures() {
  std::ifstream in(std::string(SB_TEST_DATA) + "/fixtures.json");
  return nlohmann::json::parse(in);
}

// Direct 2D Gaussian unsharp mask, independent of the separable code path.
ImageBuffer unsharp_reference(const ImageBuffer& img, double sigma, double amount) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  const int w = static_cast<int>(img.width()), h = static_cast<int>(img.height());
  double norm = 0.0;
  for (int dy = -half; dy <= half; ++dy)
    for (int dx = -half; dx <= half; ++dx) norm += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma));
  ImageBuffer out(img.width(), img.height(), img.channels(), img.colorspace());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (std::size_t c = 0; c < img.channels(); ++c) {
        double blur = 0.0;
        for (int dy = -half; dy <= half; ++dy)
          for (int dx = -half; dx <= half; ++dx) {
            const int sx = std::clamp(x + dx, 0, w - 1), sy = std::clamp(y + dy, 0, h - 1);
            blur += std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / norm * img.at(sx, sy, c);
          }
        const double v = img.at(x, y, c);
        out.at(x, y, c) = imagecore::round_clamp_u8(v + amount * (v - blur));
      }
  return out;
}

}  // namespace

TEST_CASE("quantization tables follow the IJG scaling", "[channel]") {
  const auto fx = fixtures().at("quant_tables");
  for (int q : {10, 50, 90, 95, 100}) {
    const auto t = quant_tables_for_quality(q);
    const auto& ref = fx.at(std::to_string(q));
    INFO("quality " << q);
    CHECK(std::vector<int>(t.luma.begin(), t.luma.end()) == ref.at("luma").get<std::vector<int>>());
    CHECK(std::vector<int>(t.chroma.begin(), t.chroma.end()) == ref.at("chroma").get<std::vector<int>>());
  }
  CHECK(quant_tables_for_quality(50).luma == kBaseLuma);
  for (int v : quant_tables_for_quality(100).luma) CHECK(v == 1);
  CHECK(quant_tables_for_quality(90).luma[0] == 3);
  CHECK_THROWS_AS(quant_tables_for_quality(0), Error);
}

TEST_CASE("orthonormal DCT matches the reference transform", "[channel]") {
  const auto fx = fixtures().at("dct");
  const auto in = fx.at("input").get<std::vector<double>>();
  const auto ref = fx.at("output").get<std::vector<double>>();
  dct::Block b{};
  std::copy(in.begin(), in.end(), b.begin());
  const auto f = dct::forward(b);
  for (int i = 0; i < 64; ++i) CHECK(f[i] == Catch::Approx(ref[i]).margin(1e-9));
  const auto back = dct::inverse(f);
  for (int i = 0; i < 64; ++i) CHECK(back[i] == Catch::Approx(in[i]).margin(1e-9));
}

TEST_CASE("presets", "[channel]") {
  CHECK(platform_preset("x-sim").stages.empty());
  CHECK(platform_preset("instagram-sim").stages.empty());
  const auto fb = platform_preset("facebook-sim");
  REQUIRE(fb.stages.size() == 1);
  const auto& cc = std::get<CodecCycle>(fb.stages[0]);
  CHECK(cc.quality == 90);
  CHECK(cc.subsampling == Subsampling::S420);
  const auto sh = std::get<Sharpen>(platform_preset("sharpen").stages[0]);
  CHECK(sh.radius == 1.0);
  CHECK(sh.amount == 0.5);
  CHECK(std::get<CodecCycle>(platform_preset("jpeg95").stages[0]).quality == 95);
  CHECK(std::get<ResizeCycle>(platform_preset("resize075").stages[0]).scale == 0.75);
  try {
    platform_preset("tiktok-sim");
    FAIL("expected UnknownPreset");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnknownPreset);
  }
  for (const auto& name : preset_names()) {
    const auto spec = platform_preset(name);
    const auto rt = from_json(nlohmann::json(to_json(spec)));
    CHECK(to_json(rt) == to_json(spec));
  }
}

TEST_CASE("sharpen", "[channel]") {
  const ImageBuffer flat(9, 9, 3, ColorSpace::RGB, 90);
  CHECK(sharpen(flat, 1.0, 0.5) == flat);
  CHECK(apply_channel(flat, platform_preset("sharpen")) == flat);
  const auto img = synth::synthetic_cover(23, 17, 8);
  CHECK(sharpen(img, 1.0, 0.0) == img);

  ImageBuffer dot(7, 7, 1, ColorSpace::Gray);
  dot.at(3, 3) = 255;
  const auto s = sharpen(dot, 1.0, 0.5);
  CHECK(s.at(3, 3) == 255);
  CHECK(s.at(2, 3) == 0);
  CHECK(s.at(3, 4) == 0);

  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto x = synth::synthetic_cover(7, 7, seed, synth::CoverStyle::Textured);
    for (double sigma : {0.7, 1.0, 2.0}) CHECK(sharpen(x, sigma, 0.8) == unsharp_reference(x, sigma, 0.8));
  }
  try {
    sharpen(img, 0.0, 0.5);
    FAIL("expected NonPositiveRadius");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::NonPositiveRadius);
  }
}

TEST_CASE("resize cycle", "[channel]") {
  const ImageBuffer flat(40, 30, 3, ColorSpace::RGB, 200);
  const auto cycled = resize_cycle(flat, 0.75, Kernel::Lanczos3);
  for (auto v : cycled.samples()) CHECK(std::abs(int(v) - 200) <= 1);
  ImageBuffer checker(32, 32, 1, ColorSpace::Gray);
  for (std::size_t y = 0; y < 32; ++y)
    for (std::size_t x = 0; x < 32; ++x) checker.at(x, y) = (x + y) % 2 ? 255 : 0;
  const auto half = imagecore::resample(checker, 16, 16, Kernel::Lanczos3);
  // Clamped edges ring a little at the corners; the interior is flat.
  for (std::size_t y = 0; y < 16; ++y)
    for (std::size_t x = 0; x < 16; ++x) {
      const bool interior = x >= 3 && x < 13 && y >= 3 && y < 13;
      CHECK(std::abs(int(half.at(x, y)) - 128) <= (interior ? 1 : 8));
    }
  CHECK_THROWS_AS(resize_cycle(flat, 1.5, Kernel::Box), Error);
  try {
    resize_cycle(ImageBuffer(2, 2, 1, ColorSpace::Gray), 0.1, Kernel::Box);
    FAIL("expected DegenerateSize");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::DegenerateSize);
  }
}

TEST_CASE("codec cycle", "[channel]") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto img = synth::synthetic_cover(67, 45, seed);
    CHECK(metrics::pixel_fidelity(img, codec_cycle(img, 100, Subsampling::S444)).psnr_db >= 50.0);
  }
  // Gray content in RGB keeps neutral chroma through 4:2:0.
  auto g = synth::synthetic_cover(48, 40, 3, synth::CoverStyle::Natural, 1);
  ImageBuffer rgb(48, 40, 3, ColorSpace::RGB);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int c = 0; c < 3; ++c) rgb.samples()[3 * i + c] = g.samples()[i];
  const auto out = codec_cycle(rgb, 100, Subsampling::S420);
  for (std::size_t i = 0; i < g.size(); ++i) {
    CHECK(out.samples()[3 * i] == out.samples()[3 * i + 1]);
    CHECK(out.samples()[3 * i + 1] == out.samples()[3 * i + 2]);
  }
  // Lower quality costs fidelity.
  const auto img = synth::synthetic_cover(64, 64, 11, synth::CoverStyle::Textured);
  const double p95 = metrics::pixel_fidelity(img, codec_cycle(img, 95, Subsampling::S420)).psnr_db;
  const double p75 = metrics::pixel_fidelity(img, codec_cycle(img, 75, Subsampling::S420)).psnr_db;
  CHECK(p95 > p75);
  CHECK(p75 > 25.0);
  // Gray images go through a single plane.
  const auto gray = codec_cycle(g, 90, Subsampling::S420);
  CHECK(gray.channels() == 1);
  CHECK(metrics::pixel_fidelity(g, gray).psnr_db > 35.0);
}

TEST_CASE("channel application and spec parsing", "[channel]") {
  const auto img = synth::synthetic_cover(32, 32, 5);
  CHECK(apply_channel(img, ChannelSpec{}) == img);
  const auto spec = from_json(nlohmann::json::parse(
      R"({"name":"mix","stages":[{"kind":"sharpen","radius":1.5,"amount":0.3},{"kind":"codec_cycle","quality":80,"subsampling":"444"}]})"));
  REQUIRE(spec.stages.size() == 2);
  const auto expect = codec_cycle(sharpen(img, 1.5, 0.3), 80, Subsampling::S444);
  CHECK(apply_channel(img, spec) == expect);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"stages":[{"kind":"blur"}]})")), Error);
  CHECK_THROWS_AS(from_json(nlohmann::json::parse(R"({"stages":[{"kind":"codec_cycle","quality":0}]})")), Error);
}

TEST_CASE("LSB payloads do not survive jpeg75", "[channel]") {
  const auto cover = synth::synthetic_cover(64, 64, 17);
  stego::StegoConfig c;
  const auto bits = payload::text_to_bits(synth::synthetic_text(4, 40, 80));
  const auto st = stego::embed(cover, bits, c).stego;
  const auto got = stego::extract(apply_channel(st, platform_preset("jpeg75")), bits.size(), c);
  CHECK(metrics::bit_error_rate(bits, got) >= 0.4);
}
