#pragma once

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "sb/image.hpp"

namespace sb::imagecore {

enum class Kernel { Lanczos3, Bilinear, Box };

inline const char* to_string(Kernel k) {
  switch (k) {
    case Kernel::Lanczos3: return "lanczos3";
    case Kernel::Bilinear: return "bilinear";
    case Kernel::Box: return "box";
  }
  return "?";
}

inline Kernel kernel_from_string(const std::string& s) {
  if (s == "lanczos3" || s == "lanczos") return Kernel::Lanczos3;
  if (s == "bilinear") return Kernel::Bilinear;
  if (s == "box") return Kernel::Box;
  fail(Errc::InvalidConfig, "unknown resampling kernel: " + s);
}

namespace detail {

inline double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

inline double kernel_support(Kernel k) {
  switch (k) {
    case Kernel::Lanczos3: return 3.0;
    case Kernel::Bilinear: return 1.0;
    case Kernel::Box: return 0.5;
  }
  return 1.0;
}

inline double kernel_eval(Kernel k, double x) {
  switch (k) {
    case Kernel::Lanczos3:
      return std::abs(x) < 3.0 ? sinc(x) * sinc(x / 3.0) : 0.0;
    case Kernel::Bilinear: {
      const double a = std::abs(x);
      return a < 1.0 ? 1.0 - a : 0.0;
    }
    case Kernel::Box:
      return (x >= -0.5 && x < 0.5) ? 1.0 : 0.0;
  }
  return 0.0;
}

// Sparse weight row for one output coordinate; taps index clamped sources.
struct Taps {
  std::vector<std::size_t> index;
  std::vector<double> weight;
};

// Pixel-center mapping: output i samples input at (i + 0.5) * in/out. On
// downscaling the kernel is stretched by the scale factor (antialiasing).
inline std::vector<Taps> build_taps(std::size_t in_size, std::size_t out_size, Kernel k) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double filter_scale = std::max(scale, 1.0);
  const double support = kernel_support(k) * filter_scale;
  std::vector<Taps> taps(out_size);
  const auto last = static_cast<long>(in_size) - 1;
  for (std::size_t i = 0; i < out_size; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    const long lo = static_cast<long>(std::floor(center - support));
    const long hi = static_cast<long>(std::ceil(center + support));
    Taps& t = taps[i];
    double total = 0.0;
    for (long j = lo; j <= hi; ++j) {
      const double w = kernel_eval(k, (static_cast<double>(j) + 0.5 - center) / filter_scale);
      if (w == 0.0) continue;
      t.index.push_back(static_cast<std::size_t>(std::clamp(j, 0L, last)));
      t.weight.push_back(w);
      total += w;
    }
    if (t.index.empty() || total == 0.0) {
      // Only reachable for Box at exact half-way alignments; take nearest.
      t.index.assign(1, static_cast<std::size_t>(std::clamp(static_cast<long>(center), 0L, last)));
      t.weight.assign(1, 1.0);
      continue;
    }
    for (double& w : t.weight) w /= total;
  }
  return taps;
}

}  // namespace detail

// Separable resampling in double precision; no rounding.
inline ImageF32 resample(const ImageF32& img, std::size_t new_w, std::size_t new_h, Kernel kernel) {
  if (new_w == 0 || new_h == 0) fail(Errc::ZeroDimension, "resample target must be at least 1x1");
  const std::size_t w = img.width(), h = img.height(), c = img.channels();
  const auto xt = detail::build_taps(w, new_w, kernel);
  const auto yt = detail::build_taps(h, new_h, kernel);

  std::vector<double> horiz(new_w * h * c);
  const auto src = img.samples();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < new_w; ++x) {
      const auto& t = xt[x];
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.index.size(); ++k)
          acc += t.weight[k] * src[(y * w + t.index[k]) * c + ch];
        horiz[(y * new_w + x) * c + ch] = acc;
      }
    }
  }
  ImageF32 out(new_w, new_h, c, img.colorspace());
  auto dst = out.samples();
  for (std::size_t y = 0; y < new_h; ++y) {
    const auto& t = yt[y];
    for (std::size_t x = 0; x < new_w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (std::size_t k = 0; k < t.index.size(); ++k)
          acc += t.weight[k] * horiz[(t.index[k] * new_w + x) * c + ch];
        dst[(y * new_w + x) * c + ch] = static_cast<float>(acc);
      }
    }
  }
  return out;
}

inline ImageBuffer resample(const ImageBuffer& img, std::size_t new_w, std::size_t new_h,
                            Kernel kernel) {
  return to_u8(resample(to_f32(img), new_w, new_h, kernel));
}

}  // namespace sb::imagecore
