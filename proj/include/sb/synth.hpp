#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sb/image.hpp"
#include "sb/rng.hpp"

// Deterministic stand-ins for the cover datasets and payload corpora.
namespace sb::synth {

using imagecore::ImageBuffer;

enum class CoverStyle { Natural, Smooth, Textured };

inline const char* to_string(CoverStyle s) {
  switch (s) {
    case CoverStyle::Natural: return "natural";
    case CoverStyle::Smooth: return "smooth";
    case CoverStyle::Textured: return "textured";
  }
  return "?";
}

inline CoverStyle style_from_string(const std::string& s) {
  if (s == "natural") return CoverStyle::Natural;
  if (s == "smooth") return CoverStyle::Smooth;
  if (s == "textured") return CoverStyle::Textured;
  fail(Errc::InvalidConfig, "unknown synthetic cover style: " + s);
}

namespace detail {

inline std::vector<double> blur(const std::vector<double>& src, std::size_t w, std::size_t h, double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * half + 1));
  double total = 0.0;
  for (int i = -half; i <= half; ++i) total += taps[static_cast<std::size_t>(i + half)] = std::exp(-i * i / (2 * sigma * sigma));
  for (double& t : taps) t /= total;
  std::vector<double> tmp(src.size()), out(src.size());
  const long lw = static_cast<long>(w) - 1, lh = static_cast<long>(h) - 1;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double a = 0.0;
      for (int k = -half; k <= half; ++k)
        a += taps[static_cast<std::size_t>(k + half)] * src[y * w + static_cast<std::size_t>(std::clamp(static_cast<long>(x) + k, 0L, lw))];
      tmp[y * w + x] = a;
    }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      double a = 0.0;
      for (int k = -half; k <= half; ++k)
        a += taps[static_cast<std::size_t>(k + half)] * tmp[static_cast<std::size_t>(std::clamp(static_cast<long>(y) + k, 0L, lh)) * w + x];
      out[y * w + x] = a;
    }
  return out;
}

}  // namespace detail

// Piecewise-smooth scene: low-frequency illumination, a few soft-edged
// shapes, band-limited texture and mild per-channel sensor noise.
inline ImageBuffer synthetic_cover(std::size_t w, std::size_t h, std::uint64_t seed,
                                   CoverStyle style = CoverStyle::Natural, std::size_t channels = 3) {
  Rng rng(mix_seed(seed));
  const double pi = std::numbers::pi;
  const double texture_amp = style == CoverStyle::Smooth ? rng.uniform(0.5, 2.0)
                             : style == CoverStyle::Textured ? rng.uniform(6.0, 14.0)
                                                             : rng.uniform(1.5, 6.0);
  const double noise_sigma = style == CoverStyle::Textured ? rng.uniform(0.8, 1.6) : rng.uniform(0.3, 1.0);
  const std::size_t n = w * h;
  std::vector<double> luma(n, rng.uniform(80.0, 170.0));

  const int waves = 6;
  for (int k = 0; k < waves; ++k) {
    const double fx = rng.uniform(-3.0, 3.0) / static_cast<double>(w);
    const double fy = rng.uniform(-3.0, 3.0) / static_cast<double>(h);
    const double amp = rng.uniform(5.0, 30.0) / (1.0 + k);
    const double ph = rng.uniform(0.0, 2.0 * pi);
    for (std::size_t y = 0; y < h; ++y)
      for (std::size_t x = 0; x < w; ++x)
        luma[y * w + x] += amp * std::cos(2 * pi * (fx * x + fy * y) + ph);
  }

  struct Shape {
    double cx, cy, rx, ry, level, edge;
    std::array<double, 3> tint;
  };
  std::vector<Shape> shapes(static_cast<std::size_t>(3 + rng.below(5)));
  for (auto& s : shapes) {
    s = {rng.uniform(0.0, static_cast<double>(w)), rng.uniform(0.0, static_cast<double>(h)),
         rng.uniform(0.05, 0.3) * static_cast<double>(w), rng.uniform(0.05, 0.3) * static_cast<double>(h),
         rng.uniform(-50.0, 50.0), rng.uniform(0.7, 3.0),
         {rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0), rng.uniform(-12.0, 12.0)}};
  }

  std::vector<double> noise(n);
  for (double& v : noise) v = rng.normal();
  auto texture = detail::blur(noise, w, h, style == CoverStyle::Textured ? 0.8 : 1.2);
  double tvar = 0.0;
  for (double v : texture) tvar += v * v;
  const double tnorm = texture_amp / std::sqrt(tvar / static_cast<double>(n) + 1e-12);

  const std::array<double, 3> base_tint = {rng.uniform(-15.0, 15.0), rng.uniform(-8.0, 8.0), rng.uniform(-15.0, 15.0)};
  ImageBuffer img(w, h, channels, channels == 1 ? imagecore::ColorSpace::Gray : imagecore::ColorSpace::RGB);
  auto out = img.samples();
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t i = y * w + x;
      double l = luma[i] + texture[i] * tnorm;
      std::array<double, 3> tint = base_tint;
      for (const auto& s : shapes) {
        const double dx = (static_cast<double>(x) - s.cx) / s.rx, dy = (static_cast<double>(y) - s.cy) / s.ry;
        const double dist = (std::sqrt(dx * dx + dy * dy) - 1.0) * std::min(s.rx, s.ry);
        const double inside = 1.0 / (1.0 + std::exp(dist / s.edge));
        l += inside * s.level;
        for (int c = 0; c < 3; ++c) tint[static_cast<std::size_t>(c)] += inside * s.tint[static_cast<std::size_t>(c)];
      }
      for (std::size_t c = 0; c < channels; ++c) {
        const double v = l + (channels == 3 ? tint[c] : 0.0) + noise_sigma * rng.normal();
        // Soft range compression keeps samples away from saturation.
        const double squashed = 127.5 + 118.0 * std::tanh((v - 127.5) / 118.0);
        out[i * channels + c] = imagecore::round_clamp_u8(squashed);
      }
    }
  return img;
}

inline std::vector<ImageBuffer> synthetic_covers(std::size_t count, std::size_t size, std::uint64_t seed,
                                                 CoverStyle style = CoverStyle::Natural) {
  std::vector<ImageBuffer> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_cover(size, size, item_seed(seed, i), style));
  return out;
}

// Benign pseudo-sentences of 32..max_chars bytes, occasionally with
// non-ASCII letters.
inline std::string synthetic_text(std::uint64_t seed, std::size_t min_chars = 32, std::size_t max_chars = 96) {
  static const std::array<const char*, 40> kWords = {
      "river", "lantern", "orbit", "copper", "meadow", "signal", "harbor", "quiet", "velvet", "summit",
      "pixel", "garden", "thunder", "mosaic", "ember", "canyon", "willow", "anchor", "prism", "marble",
      "cedar", "falcon", "glacier", "ribbon", "saddle", "tundra", "violet", "walnut", "zephyr", "beacon",
      "café", "naïve", "über", "façade", "piñata", "jalapeño", "crème", "señor", "smörgås", "résumé"};
  Rng rng(mix_seed(seed ^ 0x7E47ull));
  const std::size_t target = min_chars + rng.below(max_chars - min_chars + 1);
  std::string s;
  while (s.size() < target) {
    if (!s.empty()) s.push_back(' ');
    const std::size_t pick = rng.below(rng.uniform() < 0.85 ? 30 : kWords.size());
    s += kWords[pick];
  }
  // Trim back to a whole word boundary at or above min_chars.
  while (s.size() > max_chars) {
    const auto cut = s.rfind(' ');
    if (cut == std::string::npos || cut < min_chars) break;
    s.resize(cut);
  }
  return s;
}

inline std::vector<std::string> synthetic_corpus(std::size_t count, std::uint64_t seed, std::size_t min_chars = 32,
                                                 std::size_t max_chars = 96) {
  std::vector<std::string> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(synthetic_text(item_seed(seed, i), min_chars, max_chars));
  return out;
}

}  // namespace sb::synth
