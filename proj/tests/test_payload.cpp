#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "sb/payload.hpp"
#include "sb/rng.hpp"

using namespace sb;
using namespace sb::payload;

TEST_CASE("text to bits", "[payload]") {
  CHECK(text_to_bits("A").to_string() == "01000001");
  CHECK(text_to_bits("").empty());
  CHECK(text_to_bits("é").to_string() == "1100001110101001");
}

TEST_CASE("bits to text", "[payload]") {
  for (const std::string t : {"hello", "café naïve", "", "日本語 text", "emoji \xF0\x9F\x98\x80"})
    CHECK(bits_to_text(text_to_bits(t)) == t);
  CHECK(bits_to_text(BitString::from_string("00000001")) == "\x01");
  CHECK(bits_to_text(BitString::from_string("11111111")) == "\xEF\xBF\xBD");
  // Trailing partial byte is dropped.
  CHECK(bits_to_text(BitString::from_string("01000001 0100")) == "A");
}

TEST_CASE("invalid UTF-8 is replaced per maximal subpart", "[payload]") {
  // Truncated 3-byte sequence followed by ASCII: one replacement.
  CHECK(sanitize_utf8("\xE6\x97" "a") == "\xEF\xBF\xBD" "a");
  // Overlong encoding of '/': two invalid bytes, two replacements.
  CHECK(sanitize_utf8("\xC0\xAF") == "\xEF\xBF\xBD\xEF\xBF\xBD");
  // Surrogate code point encoded directly.
  CHECK(sanitize_utf8("\xED\xA0\x80") == "\xEF\xBF\xBD\xEF\xBF\xBD\xEF\xBF\xBD");
  CHECK(sanitize_utf8("ok") == "ok");
}

TEST_CASE("payload rate", "[payload]") {
  CHECK(payload_rate(1.0 / 8).bits_per_pixel == Catch::Approx(0.375));
  CHECK(payload_rate(0.25).bits_per_pixel == Catch::Approx(1.5));
  CHECK(payload_rate(0.5).bits_per_pixel == Catch::Approx(6.0));
  CHECK(payload_rate(1.0).bits_per_pixel == Catch::Approx(24.0));
  CHECK_THROWS_AS(payload_rate(0.0), Error);
  CHECK_THROWS_AS(payload_rate(1.5), Error);
}

TEST_CASE("repetition code", "[payload]") {
  CHECK(repetition_encode(BitString::from_string("101"), 1).to_string() == "101");
  CHECK(repetition_encode(BitString::from_string("1"), 3).to_string() == "111");
  CHECK(repetition_encode(BitString::from_string("10"), 5).to_string() == "1111100000");
  CHECK(repetition_decode(BitString::from_string("111"), 3).to_string() == "1");
  CHECK(repetition_decode(BitString::from_string("101"), 3).to_string() == "1");
  try {
    repetition_encode(BitString::from_string("1"), 2);
    FAIL("expected EvenRepetition");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::EvenRepetition);
  }
  try {
    repetition_decode(BitString::from_string("1111"), 3);
    FAIL("expected LengthMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::LengthMismatch);
  }
}

TEST_CASE("repetition decoding corrects every pattern below the majority", "[payload]") {
  // Exhaustive over all 3-bit messages, r in {3, 5}, and every flip mask with
  // fewer than floor(r/2)+1 flips in each block.
  for (std::size_t r : {std::size_t{3}, std::size_t{5}})
    for (unsigned msg = 0; msg < 8; ++msg) {
      BitString b;
      for (int k = 2; k >= 0; --k) b.push_back((msg >> k) & 1u);
      const auto enc = repetition_encode(b, r);
      const unsigned n = static_cast<unsigned>(enc.size());
      for (unsigned long mask = 0; mask < (1ul << n); ++mask) {
        bool ok = true;
        for (std::size_t blk = 0; blk < 3 && ok; ++blk) {
          const auto flips = __builtin_popcountl((mask >> (blk * r)) & ((1ul << r) - 1));
          ok = static_cast<std::size_t>(flips) <= r / 2;
        }
        if (!ok) continue;
        BitString noisy = enc;
        for (unsigned i = 0; i < n; ++i)
          if ((mask >> i) & 1u) noisy.set(i, !noisy[i]);
        REQUIRE(repetition_decode(noisy, r) == b);
      }
    }
}

TEST_CASE("secret image bitstream", "[payload]") {
  imagecore::ImageBuffer img(3, 2, 3, imagecore::ColorSpace::RGB);
  Rng rng(4);
  for (auto& v : img.samples()) v = static_cast<std::uint8_t>(rng.below(256));
  const auto bits = image_to_bits(img);
  CHECK(bits.size() == 3 * 2 * 3 * 8);
  CHECK(bits_to_image(bits, 3, 2, 3) == img);
  CHECK_THROWS_AS(bits_to_image(bits, 4, 2, 3), Error);
}

TEST_CASE("text corpus reading", "[payload]") {
  const auto p = std::filesystem::temp_directory_path() / "sb_corpus.txt";
  {
    std::ofstream out(p, std::ios::binary);
    out << "first line\r\n\nsecond\n";
  }
  const auto lines = read_text_corpus(p);
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "first line");
  CHECK(lines[1] == "second");
  CHECK_THROWS_AS(read_text_corpus(p.string() + ".missing"), Error);
}
