#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sb/error.hpp"

namespace sb::imagecore {

enum class ColorSpace { RGB, YCbCr, Gray };

inline const char* to_string(ColorSpace cs) {
  switch (cs) {
    case ColorSpace::RGB: return "RGB";
    case ColorSpace::YCbCr: return "YCbCr";
    case ColorSpace::Gray: return "Gray";
  }
  return "?";
}

// The single rounding rule of the toolkit: half away from zero, then clamp.
inline std::uint8_t round_clamp_u8(double v) {
  const double r = std::round(v);
  if (!(r > 0.0)) return 0;  // also maps NaN to 0
  if (r >= 255.0) return 255;
  return static_cast<std::uint8_t>(r);
}

namespace detail {

inline void check_shape(std::size_t w, std::size_t h, std::size_t c, ColorSpace cs) {
  if (w == 0 || h == 0) fail(Errc::ZeroDimension, "image dimensions must be positive");
  if (c != 1 && c != 3) fail(Errc::ShapeMismatch, "channel count must be 1 or 3");
  if (cs == ColorSpace::Gray && c != 1) fail(Errc::ShapeMismatch, "Gray implies one channel");
  if (cs != ColorSpace::Gray && c != 3) fail(Errc::ShapeMismatch, "RGB/YCbCr imply three channels");
}

}  // namespace detail

// Interleaved, row-major raster. Sample (x, y, c) lives at (y*W + x)*C + c.
template <typename T>
class Raster {
 public:
  using value_type = T;

  Raster() = default;

  Raster(std::size_t width, std::size_t height, std::size_t channels, ColorSpace cs, T fill = T{})
      : width_(width), height_(height), channels_(channels), cs_(cs),
        data_(width * height * channels, fill) {
    detail::check_shape(width, height, channels, cs);
  }

  Raster(std::size_t width, std::size_t height, std::size_t channels, ColorSpace cs,
         std::vector<T> data)
      : width_(width), height_(height), channels_(channels), cs_(cs), data_(std::move(data)) {
    detail::check_shape(width, height, channels, cs);
    if (data_.size() != width * height * channels)
      fail(Errc::ShapeMismatch, "sample count does not match width*height*channels");
  }

  std::size_t width() const noexcept { return width_; }
  std::size_t height() const noexcept { return height_; }
  std::size_t channels() const noexcept { return channels_; }
  ColorSpace colorspace() const noexcept { return cs_; }
  std::size_t size() const noexcept { return data_.size(); }
  std::size_t pixel_count() const noexcept { return width_ * height_; }
  bool empty() const noexcept { return data_.empty(); }

  T& at(std::size_t x, std::size_t y, std::size_t c = 0) {
    return data_[(y * width_ + x) * channels_ + c];
  }
  const T& at(std::size_t x, std::size_t y, std::size_t c = 0) const {
    return data_[(y * width_ + x) * channels_ + c];
  }

  std::span<T> samples() noexcept { return data_; }
  std::span<const T> samples() const noexcept { return data_; }
  std::vector<T>& raw() noexcept { return data_; }
  const std::vector<T>& raw() const noexcept { return data_; }

  void set_colorspace(ColorSpace cs) {
    detail::check_shape(width_, height_, channels_, cs);
    cs_ = cs;
  }

  bool same_shape(const Raster& o) const noexcept {
    return width_ == o.width_ && height_ == o.height_ && channels_ == o.channels_;
  }

  friend bool operator==(const Raster& a, const Raster& b) {
    return a.same_shape(b) && a.cs_ == b.cs_ && a.data_ == b.data_;
  }

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  ColorSpace cs_ = ColorSpace::Gray;
  std::vector<T> data_;
};

using ImageBuffer = Raster<std::uint8_t>;
using ImageF32 = Raster<float>;

inline ImageF32 to_f32(const ImageBuffer& img) {
  std::vector<float> v(img.samples().begin(), img.samples().end());
  return ImageF32(img.width(), img.height(), img.channels(), img.colorspace(), std::move(v));
}

inline ImageBuffer to_u8(const ImageF32& img) {
  std::vector<std::uint8_t> v(img.size());
  std::transform(img.samples().begin(), img.samples().end(), v.begin(),
                 [](float s) { return round_clamp_u8(s); });
  return ImageBuffer(img.width(), img.height(), img.channels(), img.colorspace(), std::move(v));
}

// Full-range BT.601 (JPEG/JFIF) coefficients.
struct Bt601 {
  static constexpr double kYR = 0.299, kYG = 0.587, kYB = 0.114;
  static constexpr double kCbR = -0.168736, kCbG = -0.331264, kCbB = 0.5;
  static constexpr double kCrR = 0.5, kCrG = -0.418688, kCrB = -0.081312;
  static constexpr double kRCr = 1.402;
  static constexpr double kGCb = -0.344136, kGCr = -0.714136;
  static constexpr double kBCb = 1.772;
};

inline double luma(double r, double g, double b) {
  return Bt601::kYR * r + Bt601::kYG * g + Bt601::kYB * b;
}

struct Ycc {
  double y, cb, cr;
};

// Forward transform of one triple; chroma is clamped to [0, 255] (pure red
// and pure blue would otherwise land at 255.5).
inline Ycc rgb_to_ycc(double r, double g, double b) {
  const double y = luma(r, g, b);
  const double cb = 128.0 + Bt601::kCbR * r + Bt601::kCbG * g + Bt601::kCbB * b;
  const double cr = 128.0 + Bt601::kCrR * r + Bt601::kCrG * g + Bt601::kCrB * b;
  return {std::clamp(y, 0.0, 255.0), std::clamp(cb, 0.0, 255.0), std::clamp(cr, 0.0, 255.0)};
}

inline void ycc_to_rgb(double y, double cb, double cr, double& r, double& g, double& b) {
  r = y + Bt601::kRCr * (cr - 128.0);
  g = y + Bt601::kGCb * (cb - 128.0) + Bt601::kGCr * (cr - 128.0);
  b = y + Bt601::kBCb * (cb - 128.0);
}

inline ImageF32 rgb_to_ycbcr(const ImageBuffer& img) {
  if (img.colorspace() != ColorSpace::RGB) fail(Errc::WrongColorspace, "expected an RGB image");
  ImageF32 out(img.width(), img.height(), 3, ColorSpace::YCbCr);
  const auto in = img.samples();
  auto o = out.samples();
  for (std::size_t i = 0; i < in.size(); i += 3) {
    const Ycc p = rgb_to_ycc(in[i], in[i + 1], in[i + 2]);
    o[i] = static_cast<float>(p.y);
    o[i + 1] = static_cast<float>(p.cb);
    o[i + 2] = static_cast<float>(p.cr);
  }
  return out;
}

inline ImageBuffer ycbcr_to_rgb(const ImageF32& img) {
  if (img.colorspace() != ColorSpace::YCbCr) fail(Errc::WrongColorspace, "expected a YCbCr image");
  ImageBuffer out(img.width(), img.height(), 3, ColorSpace::RGB);
  const auto in = img.samples();
  auto o = out.samples();
  for (std::size_t i = 0; i < in.size(); i += 3) {
    double r, g, b;
    ycc_to_rgb(in[i], in[i + 1], in[i + 2], r, g, b);
    o[i] = round_clamp_u8(r);
    o[i + 1] = round_clamp_u8(g);
    o[i + 2] = round_clamp_u8(b);
  }
  return out;
}

// Real-valued luminance plane (Gray passes through).
inline ImageF32 luminance(const ImageBuffer& img) {
  ImageF32 out(img.width(), img.height(), 1, ColorSpace::Gray);
  const auto in = img.samples();
  auto o = out.samples();
  if (img.channels() == 1) {
    std::copy(in.begin(), in.end(), o.begin());
    return out;
  }
  for (std::size_t i = 0, p = 0; p < o.size(); i += 3, ++p)
    o[p] = static_cast<float>(luma(in[i], in[i + 1], in[i + 2]));
  return out;
}

}  // namespace sb::imagecore
