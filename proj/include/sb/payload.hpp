#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

#include "sb/error.hpp"
#include "sb/image.hpp"

namespace sb::payload {

// Ordered bit sequence, one bit per element. Length is the element count.
class BitString {
 public:
  BitString() = default;
  explicit BitString(std::vector<std::uint8_t> bits) : bits_(std::move(bits)) {
    for (auto& b : bits_) b = b ? 1 : 0;
  }

  // "0110 1" style literal; whitespace ignored, anything else rejected.
  static BitString from_string(std::string_view s) {
    std::vector<std::uint8_t> bits;
    for (char ch : s) {
      if (ch == '0' || ch == '1')
        bits.push_back(static_cast<std::uint8_t>(ch - '0'));
      else if (ch != ' ' && ch != '\n' && ch != '\t')
        fail(Errc::InvalidConfig, "bit literal may only contain 0 and 1");
    }
    return BitString(std::move(bits));
  }

  std::string to_string() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i) s[i] = bits_[i] ? '1' : '0';
    return s;
  }

  std::size_t size() const noexcept { return bits_.size(); }
  bool empty() const noexcept { return bits_.empty(); }
  std::uint8_t operator[](std::size_t i) const { return bits_[i]; }
  void set(std::size_t i, bool v) { bits_[i] = v ? 1 : 0; }
  void push_back(bool v) { bits_.push_back(v ? 1 : 0); }
  const std::vector<std::uint8_t>& bits() const noexcept { return bits_; }

  friend bool operator==(const BitString&, const BitString&) = default;

 private:
  std::vector<std::uint8_t> bits_;
};

// MSB-first expansion of raw bytes.
inline BitString bytes_to_bits(std::string_view bytes) {
  std::vector<std::uint8_t> bits;
  bits.reserve(bytes.size() * 8);
  for (unsigned char byte : bytes)
    for (int k = 7; k >= 0; --k) bits.push_back((byte >> k) & 1u);
  return BitString(std::move(bits));
}

// MSB-first regrouping; a trailing partial byte is dropped.
inline std::string bits_to_bytes(const BitString& b) {
  std::string out(b.size() / 8, '\0');
  for (std::size_t i = 0; i < out.size(); ++i) {
    unsigned v = 0;
    for (std::size_t k = 0; k < 8; ++k) v = (v << 1) | b[i * 8 + k];
    out[i] = static_cast<char>(v);
  }
  return out;
}

inline BitString text_to_bits(std::string_view utf8_text) { return bytes_to_bits(utf8_text); }

// Lossy UTF-8 decode: every maximal invalid subsequence becomes U+FFFD.
inline std::string sanitize_utf8(std::string_view in) {
  static constexpr std::string_view kReplacement = "\xEF\xBF\xBD";
  std::string out;
  out.reserve(in.size());
  std::size_t i = 0;
  const std::size_t n = in.size();
  auto byte = [&](std::size_t k) { return static_cast<unsigned char>(in[k]); };
  while (i < n) {
    const unsigned char c = byte(i);
    if (c < 0x80) {
      out.push_back(static_cast<char>(c));
      ++i;
      continue;
    }
    std::size_t need = 0;
    unsigned char lo = 0x80, hi = 0xBF;
    if (c >= 0xC2 && c <= 0xDF) {
      need = 1;
    } else if (c >= 0xE0 && c <= 0xEF) {
      need = 2;
      if (c == 0xE0) lo = 0xA0;
      if (c == 0xED) hi = 0x9F;
    } else if (c >= 0xF0 && c <= 0xF4) {
      need = 3;
      if (c == 0xF0) lo = 0x90;
      if (c == 0xF4) hi = 0x8F;
    } else {
      out.append(kReplacement);
      ++i;
      continue;
    }
    std::size_t k = 1;
    for (; k <= need && i + k < n; ++k) {
      const unsigned char cc = byte(i + k);
      const unsigned char l = k == 1 ? lo : 0x80, h = k == 1 ? hi : 0xBF;
      if (cc < l || cc > h) break;
    }
    if (k == need + 1) {
      out.append(in.substr(i, need + 1));
      i += need + 1;
    } else {
      out.append(kReplacement);
      i += k;
    }
  }
  return out;
}

inline std::string bits_to_text(const BitString& b) { return sanitize_utf8(bits_to_bytes(b)); }

// Code points of a valid UTF-8 string (input is assumed sanitized).
inline std::u32string utf8_codepoints(std::string_view s) {
  std::u32string out;
  std::size_t i = 0;
  while (i < s.size()) {
    const auto c = static_cast<unsigned char>(s[i]);
    std::size_t len = c < 0x80 ? 1 : c < 0xE0 ? 2 : c < 0xF0 ? 3 : 4;
    if (i + len > s.size()) len = s.size() - i;
    char32_t cp = len == 1 ? c : len == 2 ? (c & 0x1F) : len == 3 ? (c & 0x0F) : (c & 0x07);
    for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    out.push_back(cp);
    i += len;
  }
  return out;
}

struct PayloadRate {
  double bits_per_pixel = 0.0;
};

// Secret image at resolution ratio rho of an 8-bit RGB cover: 24*rho^2 bpp.
inline PayloadRate payload_rate(double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) fail(Errc::OutOfRange, "resolution ratio must lie in (0, 1]");
  return {24.0 * ratio * ratio};
}

inline BitString repetition_encode(const BitString& b, std::size_t r) {
  if (r == 0 || r % 2 == 0) fail(Errc::EvenRepetition, "repetition factor must be odd");
  std::vector<std::uint8_t> out;
  out.reserve(b.size() * r);
  for (std::size_t i = 0; i < b.size(); ++i) out.insert(out.end(), r, b[i]);
  return BitString(std::move(out));
}

inline BitString repetition_decode(const BitString& b, std::size_t r) {
  if (r == 0 || r % 2 == 0) fail(Errc::EvenRepetition, "repetition factor must be odd");
  if (b.size() % r != 0) fail(Errc::LengthMismatch, "length is not a multiple of the repetition factor");
  std::vector<std::uint8_t> out(b.size() / r);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < r; ++k) ones += b[i * r + k];
    out[i] = ones * 2 > r ? 1 : 0;
  }
  return BitString(std::move(out));
}

// Raw sample bitstream of a secret image (no compression).
inline BitString image_to_bits(const imagecore::ImageBuffer& img) {
  return bytes_to_bits(std::string_view(reinterpret_cast<const char*>(img.raw().data()), img.size()));
}

inline imagecore::ImageBuffer bits_to_image(const BitString& b, std::size_t w, std::size_t h,
                                            std::size_t channels) {
  const std::size_t n = w * h * channels;
  if (b.size() < n * 8) fail(Errc::LengthMismatch, "bitstream too short for the secret image");
  std::vector<std::uint8_t> data(n);
  for (std::size_t i = 0; i < n; ++i) {
    unsigned v = 0;
    for (std::size_t k = 0; k < 8; ++k) v = (v << 1) | b[i * 8 + k];
    data[i] = static_cast<std::uint8_t>(v);
  }
  return imagecore::ImageBuffer(w, h, channels,
                                channels == 1 ? imagecore::ColorSpace::Gray : imagecore::ColorSpace::RGB,
                                std::move(data));
}

// Newline-delimited UTF-8 corpus; blank lines are skipped, CR stripped.
inline std::vector<std::string> read_text_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::FileNotFound, "cannot open text corpus: " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  if (lines.empty()) fail(Errc::EmptyCorpus, "text corpus has no payloads: " + path.string());
  return lines;
}

}  // namespace sb::payload
