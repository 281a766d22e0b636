#include <catch_amalgamated.hpp>

#include "sb/stego.hpp"
#include "sb/synth.hpp"

using namespace sb;
using namespace sb::stego;
using imagecore::ImageBuffer;
using payload::BitString;

namespace {

BitString random_bits(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::uint8_t> b(n);
  for (auto& v : b) v = rng.coin();
  return BitString(std::move(b));
}

double ber(const BitString& a, const BitString& b) { return metrics::bit_error_rate(a, b); }

StegoConfig cfg_of(Method m) {
  StegoConfig c;
  c.method = m;
  return c;
}

}  // namespace

TEST_CASE("capacity", "[stego]") {
  const ImageBuffer cover(256, 256, 3, imagecore::ColorSpace::RGB);
  CHECK(capacity(cover, cfg_of(Method::LsbReplace)) == 196608);
  auto q = cfg_of(Method::DctQim);
  CHECK(capacity(cover, q) == 8192);
  q.repetition = 3;
  CHECK(capacity(cover, q) == 2730);
  auto k2 = cfg_of(Method::LsbReplace);
  k2.k_planes = 2;
  CHECK(capacity(cover, k2) == 2 * 196608);
}

TEST_CASE("config validation", "[stego]") {
  auto c = cfg_of(Method::DctQim);
  c.repetition = 2;
  CHECK_THROWS_AS(validate(c), Error);
  c.repetition = 1;
  c.band = {0, 3};
  try {
    validate(c);
    FAIL("expected BandOutOfRange");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::BandOutOfRange);
  }
  c.band = {3, 3};
  CHECK_THROWS_AS(validate(c), Error);
  auto m = cfg_of(Method::LsbMatch);
  m.k_planes = 2;
  CHECK_THROWS_AS(validate(m), Error);
  CHECK_THROWS_AS(method_from_string("f5"), Error);
  const auto rt = from_json(to_json(c = cfg_of(Method::DctQim)));
  CHECK(rt == c);
}

TEST_CASE("QIM lattice", "[stego]") {
  CHECK(detail::qim_quantize(10.0, 0, 8.0) == 8.0);
  CHECK(detail::qim_quantize(10.0, 1, 8.0) == 12.0);
  CHECK(detail::qim_decide(11.9, 8.0) == 1);
  CHECK(detail::qim_decide(8.2, 8.0) == 0);
  CHECK(detail::qim_decide(-4.1, 8.0) == 1);
}

TEST_CASE("empty payload leaves the cover untouched", "[stego]") {
  const auto cover = synth::synthetic_cover(64, 64, 1);
  for (auto m : {Method::LsbReplace, Method::LsbMatch, Method::DctQim, Method::Identity})
    CHECK(embed(cover, BitString{}, cfg_of(m)).stego == cover);
}

TEST_CASE("clean-channel round trip for every embedder", "[stego]") {
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const auto cover = synth::synthetic_cover(128, 96, 100 + seed);
    for (auto m : {Method::LsbReplace, Method::LsbMatch, Method::DctQim}) {
      for (int variant = 0; variant < 2; ++variant) {
        auto c = cfg_of(m);
        c.key = 77 + seed;
        if (m == Method::LsbReplace && variant) c.k_planes = 3;
        if (m == Method::DctQim && variant) {
          c.delta = 4;
          c.repetition = 3;
        }
        const auto bits = random_bits(capacity(cover, c), seed * 31 + variant);
        const auto res = embed(cover, bits, c);
        CHECK(res.embedded_bits == bits.size());
        INFO(to_string(m) << " variant " << variant);
        CHECK(extract(res.stego, bits.size(), c) == bits);
      }
    }
  }
}

TEST_CASE("gray covers round trip", "[stego]") {
  const auto cover = synth::synthetic_cover(64, 64, 9, synth::CoverStyle::Natural, 1);
  for (auto m : {Method::LsbReplace, Method::LsbMatch, Method::DctQim}) {
    const auto c = cfg_of(m);
    const auto bits = random_bits(capacity(cover, c) / 2, 3);
    CHECK(extract(embed(cover, bits, c).stego, bits.size(), c) == bits);
  }
}

TEST_CASE("LSB flips change samples by one", "[stego]") {
  const auto cover = synth::synthetic_cover(64, 64, 2);
  for (auto m : {Method::LsbReplace, Method::LsbMatch}) {
    const auto c = cfg_of(m);
    const auto st = embed(cover, random_bits(capacity(cover, c), 5), c).stego;
    for (std::size_t i = 0; i < cover.size(); ++i) CHECK(std::abs(int(st.raw()[i]) - int(cover.raw()[i])) <= 1);
  }
}

TEST_CASE("LSB matching keeps saturated samples in range", "[stego]") {
  ImageBuffer cover(8, 8, 1, imagecore::ColorSpace::Gray);
  for (std::size_t i = 0; i < cover.size(); ++i) cover.samples()[i] = i % 2 ? 255 : 0;
  std::vector<std::uint8_t> b(cover.size());
  for (std::size_t i = 0; i < b.size(); ++i) b[i] = 1;
  const auto c = cfg_of(Method::LsbMatch);
  const auto st = embed(cover, BitString(b), c).stego;
  CHECK(extract(st, b.size(), c) == BitString(b));
  for (std::size_t i = 0; i < st.size(); ++i) CHECK(st.raw()[i] == (i % 2 ? 255 : 1));
}

TEST_CASE("wrong key gives chance-level BER", "[stego]") {
  const auto cover = synth::synthetic_cover(128, 128, 3);
  for (auto m : {Method::LsbReplace, Method::DctQim}) {
    auto c = cfg_of(m);
    const auto bits = random_bits(capacity(cover, c) / 4, 8);
    const auto st = embed(cover, bits, c).stego;
    c.key ^= 0xABCDEF;
    CHECK(ber(bits, extract(st, bits.size(), c)) == Catch::Approx(0.5).margin(0.05));
  }
}

TEST_CASE("capacity errors", "[stego]") {
  const auto cover = synth::synthetic_cover(32, 32, 4);
  const auto c = cfg_of(Method::DctQim);
  try {
    embed(cover, random_bits(capacity(cover, c) + 1, 1), c);
    FAIL("expected PayloadTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::PayloadTooLarge);
  }
  try {
    extract(cover, capacity(cover, c) + 1, c);
    FAIL("expected CapacityExceeded");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::CapacityExceeded);
  }
}

TEST_CASE("identity embedder is a no-op", "[stego]") {
  const auto cover = synth::synthetic_cover(32, 32, 4);
  const auto r = embed(cover, random_bits(100, 2), cfg_of(Method::Identity));
  CHECK(r.stego == cover);
  CHECK(r.embedded_bits == 0);
}

TEST_CASE("DctQim PSNR shrinks as the step grows", "[stego]") {
  const auto cover = synth::synthetic_cover(128, 128, 12);
  double prev = 1e9;
  for (double d : {4.0, 8.0, 16.0, 32.0}) {
    auto c = cfg_of(Method::DctQim);
    c.delta = d;
    const auto st = embed(cover, random_bits(capacity(cover, c), 1), c).stego;
    const double p = metrics::pixel_fidelity(cover, st).psnr_db;
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("calibration", "[stego]") {
  std::vector<ImageBuffer> covers;
  std::vector<BitString> payloads;
  for (std::uint64_t i = 0; i < 4; ++i) {
    covers.push_back(synth::synthetic_cover(64, 64, 40 + i));
    payloads.push_back(random_bits(120, i));
  }
  SECTION("identity channel picks the smallest step at r = 1") {
    const auto r = calibrate_robust(covers, payloads, channel::platform_preset("identity"), 0.0, {4, 8, 16}, {1, 3});
    CHECK_FALSE(r.best_effort);
    CHECK(r.config.delta == 4);
    CHECK(r.config.repetition == 1);
    CHECK(r.mean_ber == 0.0);
    CHECK(r.candidates.size() == 6);
  }
  SECTION("an exhausted grid is flagged best effort") {
    const auto r = calibrate_robust(covers, payloads, channel::platform_preset("jpeg75"), 0.0, {2}, {1});
    CHECK(r.best_effort);
    CHECK(r.mean_ber > 0.0);
  }
  SECTION("errors") {
    CHECK_THROWS_AS(calibrate_robust({}, payloads, channel::platform_preset("identity"), 0.0, {4}, {1}), Error);
    try {
      calibrate_robust(covers, payloads, channel::platform_preset("identity"), 0.0, {}, {1});
      FAIL("expected EmptyGrid");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyGrid);
    }
  }
}
