#pragma once

#include <array>
#include <cmath>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "sb/dct.hpp"
#include "sb/image.hpp"
#include "sb/resample.hpp"

namespace sb::channel {

using imagecore::ImageBuffer;
using imagecore::Kernel;

enum class Subsampling { S444, S420 };

struct Sharpen {
  double radius = 1.0;
  double amount = 0.5;
  friend bool operator==(const Sharpen&, const Sharpen&) = default;
};

struct ResizeCycle {
  double scale = 0.75;
  Kernel kernel = Kernel::Lanczos3;
  friend bool operator==(const ResizeCycle&, const ResizeCycle&) = default;
};

struct CodecCycle {
  int quality = 95;
  Subsampling subsampling = Subsampling::S420;
  friend bool operator==(const CodecCycle&, const CodecCycle&) = default;
};

using Stage = std::variant<Sharpen, ResizeCycle, CodecCycle>;

struct ChannelSpec {
  std::string name;
  std::vector<Stage> stages;
  friend bool operator==(const ChannelSpec&, const ChannelSpec&) = default;
};

struct QuantTables {
  std::array<int, 64> luma{};
  std::array<int, 64> chroma{};
};

// ITU-T T.81 Annex K tables, natural (row-major) order.
inline constexpr std::array<int, 64> kBaseLuma = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,
    14, 13, 16, 24, 40,  57,  69,  56,  14, 17, 22, 29, 51,  87,  80,  62,
    18, 22, 37, 56, 68,  109, 103, 77,  24, 35, 55, 64, 81,  104, 113, 92,
    49, 64, 78, 87, 103, 121, 120, 101, 72, 92, 95, 98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kBaseChroma = {
    17, 18, 24, 47, 99, 99, 99, 99, 18, 21, 26, 66, 99, 99, 99, 99,
    24, 26, 56, 99, 99, 99, 99, 99, 47, 66, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99,
    99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99, 99};

// IJG quality scaling.
inline QuantTables quant_tables_for_quality(int quality) {
  if (quality < 1 || quality > 100) fail(Errc::OutOfRange, "JPEG quality must lie in [1, 100]");
  const long s = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  auto scale = [s](int base) {
    const long v = (base * s + 50) / 100;
    return static_cast<int>(std::clamp(v, 1L, 255L));
  };
  QuantTables t;
  for (int i = 0; i < 64; ++i) {
    t.luma[i] = scale(kBaseLuma[i]);
    t.chroma[i] = scale(kBaseChroma[i]);
  }
  return t;
}

namespace detail {

struct Plane {
  std::size_t w = 0, h = 0;
  std::vector<double> v;
  double& at(std::size_t x, std::size_t y) { return v[y * w + x]; }
  double at(std::size_t x, std::size_t y) const { return v[y * w + x]; }
};

inline std::vector<double> gaussian_taps(double sigma) {
  const int half = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(2 * half + 1);
  double total = 0.0;
  for (int i = -half; i <= half; ++i) {
    taps[i + half] = std::exp(-(i * i) / (2.0 * sigma * sigma));
    total += taps[i + half];
  }
  for (double& t : taps) t /= total;
  return taps;
}

inline Plane pad_edge(const Plane& p, std::size_t w, std::size_t h) {
  Plane out{w, h, std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      out.at(x, y) = p.at(std::min(x, p.w - 1), std::min(y, p.h - 1));
  return out;
}

inline Plane crop(const Plane& p, std::size_t w, std::size_t h) {
  Plane out{w, h, std::vector<double>(w * h)};
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x) out.at(x, y) = p.at(x, y);
  return out;
}

// Level shift, DCT, quantize/dequantize, inverse DCT; dimensions multiple of 8.
inline void quantize_plane(Plane& p, const std::array<int, 64>& table) {
  for (std::size_t by = 0; by < p.h; by += 8)
    for (std::size_t bx = 0; bx < p.w; bx += 8) {
      dct::Block blk;
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) blk[y * 8 + x] = p.at(bx + x, by + y) - 128.0;
      dct::Block coef = dct::forward(blk);
      for (int i = 0; i < 64; ++i) coef[i] = std::round(coef[i] / table[i]) * table[i];
      const dct::Block rec = dct::inverse(coef);
      for (int y = 0; y < 8; ++y)
        for (int x = 0; x < 8; ++x) p.at(bx + x, by + y) = rec[y * 8 + x] + 128.0;
    }
}

inline Plane box_down2(const Plane& p) {
  Plane out{p.w / 2, p.h / 2, std::vector<double>((p.w / 2) * (p.h / 2))};
  for (std::size_t y = 0; y < out.h; ++y)
    for (std::size_t x = 0; x < out.w; ++x)
      out.at(x, y) = 0.25 * (p.at(2 * x, 2 * y) + p.at(2 * x + 1, 2 * y) + p.at(2 * x, 2 * y + 1) +
                             p.at(2 * x + 1, 2 * y + 1));
  return out;
}

inline Plane bilinear_up2(const Plane& p) {
  imagecore::ImageF32 tmp(p.w, p.h, 1, imagecore::ColorSpace::Gray);
  for (std::size_t i = 0; i < p.v.size(); ++i) tmp.raw()[i] = static_cast<float>(p.v[i]);
  const auto up = imagecore::resample(tmp, p.w * 2, p.h * 2, Kernel::Bilinear);
  Plane out{up.width(), up.height(), std::vector<double>(up.size())};
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = up.raw()[i];
  return out;
}

inline std::size_t round_up(std::size_t v, std::size_t m) { return (v + m - 1) / m * m; }

}  // namespace detail

inline ImageBuffer sharpen(const ImageBuffer& img, double radius, double amount) {
  if (!(radius > 0.0)) fail(Errc::NonPositiveRadius, "sharpen radius must be positive");
  if (!(amount >= 0.0)) fail(Errc::InvalidConfig, "sharpen amount must be non-negative");
  const auto taps = detail::gaussian_taps(radius);
  const long half = static_cast<long>(taps.size() / 2);
  const std::size_t w = img.width(), h = img.height(), c = img.channels();
  const auto src = img.samples();
  const auto lastx = static_cast<long>(w) - 1, lasty = static_cast<long>(h) - 1;
  std::vector<double> tmp(src.size()), blur(src.size());
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (long k = -half; k <= half; ++k) {
          const auto sx = static_cast<std::size_t>(std::clamp(static_cast<long>(x) + k, 0L, lastx));
          acc += taps[k + half] * src[(y * w + sx) * c + ch];
        }
        tmp[(y * w + x) * c + ch] = acc;
      }
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      for (std::size_t ch = 0; ch < c; ++ch) {
        double acc = 0.0;
        for (long k = -half; k <= half; ++k) {
          const auto sy = static_cast<std::size_t>(std::clamp(static_cast<long>(y) + k, 0L, lasty));
          acc += taps[k + half] * tmp[(sy * w + x) * c + ch];
        }
        blur[(y * w + x) * c + ch] = acc;
      }
  ImageBuffer out(w, h, c, img.colorspace());
  auto dst = out.samples();
  for (std::size_t i = 0; i < src.size(); ++i)
    dst[i] = imagecore::round_clamp_u8(src[i] + amount * (src[i] - blur[i]));
  return out;
}

inline ImageBuffer resize_cycle(const ImageBuffer& img, double scale, Kernel kernel) {
  if (!(scale > 0.0 && scale < 1.0)) fail(Errc::OutOfRange, "resize scale must lie in (0, 1)");
  const auto dw = static_cast<std::size_t>(std::round(scale * static_cast<double>(img.width())));
  const auto dh = static_cast<std::size_t>(std::round(scale * static_cast<double>(img.height())));
  if (dw == 0 || dh == 0) fail(Errc::DegenerateSize, "downscaled dimension would be zero");
  return imagecore::resample(imagecore::resample(img, dw, dh, kernel), img.width(), img.height(),
                             kernel);
}

// In-memory JPEG-equivalent encode/decode. Entropy coding is lossless and
// therefore left out.
inline ImageBuffer codec_cycle(const ImageBuffer& img, int quality, Subsampling sub) {
  if (img.colorspace() == imagecore::ColorSpace::YCbCr)
    fail(Errc::WrongColorspace, "codec_cycle expects RGB or Gray input");
  const QuantTables tables = quant_tables_for_quality(quality);
  const std::size_t w = img.width(), h = img.height();
  const bool color = img.channels() == 3;
  const std::size_t mcu = (color && sub == Subsampling::S420) ? 16 : 8;
  const std::size_t pw = detail::round_up(w, mcu), ph = detail::round_up(h, mcu);

  std::array<detail::Plane, 3> planes;
  const std::size_t nplanes = color ? 3 : 1;
  for (std::size_t p = 0; p < nplanes; ++p) planes[p] = {w, h, std::vector<double>(w * h)};
  const auto src = img.samples();
  if (color) {
    for (std::size_t i = 0; i < w * h; ++i) {
      const auto ycc = imagecore::rgb_to_ycc(src[3 * i], src[3 * i + 1], src[3 * i + 2]);
      planes[0].v[i] = ycc.y;
      planes[1].v[i] = ycc.cb;
      planes[2].v[i] = ycc.cr;
    }
  } else {
    for (std::size_t i = 0; i < w * h; ++i) planes[0].v[i] = src[i];
  }

  for (std::size_t p = 0; p < nplanes; ++p) {
    detail::Plane padded = detail::pad_edge(planes[p], pw, ph);
    const auto& table = p == 0 ? tables.luma : tables.chroma;
    if (p > 0 && sub == Subsampling::S420) {
      detail::Plane small = detail::box_down2(padded);
      detail::quantize_plane(small, table);
      padded = detail::bilinear_up2(small);
    } else {
      detail::quantize_plane(padded, table);
    }
    planes[p] = detail::crop(padded, w, h);
  }

  ImageBuffer out(w, h, img.channels(), img.colorspace());
  auto dst = out.samples();
  if (color) {
    for (std::size_t i = 0; i < w * h; ++i) {
      double r, g, b;
      imagecore::ycc_to_rgb(planes[0].v[i], planes[1].v[i], planes[2].v[i], r, g, b);
      dst[3 * i] = imagecore::round_clamp_u8(r);
      dst[3 * i + 1] = imagecore::round_clamp_u8(g);
      dst[3 * i + 2] = imagecore::round_clamp_u8(b);
    }
  } else {
    for (std::size_t i = 0; i < w * h; ++i) dst[i] = imagecore::round_clamp_u8(planes[0].v[i]);
  }
  return out;
}

inline void validate(const Stage& stage) {
  std::visit(
      [](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sharpen>) {
          if (!(s.radius > 0.0)) fail(Errc::NonPositiveRadius, "sharpen radius must be positive");
          if (!(s.amount >= 0.0)) fail(Errc::InvalidConfig, "sharpen amount must be non-negative");
        } else if constexpr (std::is_same_v<T, ResizeCycle>) {
          if (!(s.scale > 0.0 && s.scale < 1.0)) fail(Errc::OutOfRange, "resize scale must lie in (0, 1)");
        } else {
          if (s.quality < 1 || s.quality > 100) fail(Errc::OutOfRange, "JPEG quality must lie in [1, 100]");
        }
      },
      stage);
}

inline ImageBuffer apply_stage(const ImageBuffer& img, const Stage& stage) {
  return std::visit(
      [&](const auto& s) -> ImageBuffer {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Sharpen>)
          return sharpen(img, s.radius, s.amount);
        else if constexpr (std::is_same_v<T, ResizeCycle>)
          return resize_cycle(img, s.scale, s.kernel);
        else
          return codec_cycle(img, s.quality, s.subsampling);
      },
      stage);
}

inline ImageBuffer apply_channel(const ImageBuffer& img, const ChannelSpec& spec) {
  for (const auto& s : spec.stages) validate(s);
  ImageBuffer cur = img;
  for (const auto& s : spec.stages) cur = apply_stage(cur, s);
  return cur;
}

inline const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {"x-sim",  "instagram-sim", "facebook-sim",
                                                 "jpeg75", "jpeg95",        "subsample420",
                                                 "resize075", "sharpen",    "identity"};
  return names;
}

inline ChannelSpec platform_preset(const std::string& name) {
  if (name == "x-sim" || name == "instagram-sim" || name == "identity") return {name, {}};
  if (name == "facebook-sim") return {name, {CodecCycle{90, Subsampling::S420}}};
  if (name == "jpeg75") return {name, {CodecCycle{75, Subsampling::S420}}};
  if (name == "jpeg95") return {name, {CodecCycle{95, Subsampling::S420}}};
  if (name == "subsample420") return {name, {CodecCycle{100, Subsampling::S420}}};
  if (name == "resize075") return {name, {ResizeCycle{0.75, Kernel::Lanczos3}}};
  if (name == "sharpen") return {name, {Sharpen{1.0, 0.5}}};
  fail(Errc::UnknownPreset, "unknown channel preset: " + name);
}

// JSON form: {"name": ..., "stages": [{"kind": "codec_cycle", "quality": 90,
// "subsampling": "420"}, ...]}.
inline nlohmann::ordered_json to_json(const ChannelSpec& spec) {
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& st : spec.stages) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          nlohmann::ordered_json j;
          if constexpr (std::is_same_v<T, Sharpen>) {
            j["kind"] = "sharpen";
            j["radius"] = s.radius;
            j["amount"] = s.amount;
          } else if constexpr (std::is_same_v<T, ResizeCycle>) {
            j["kind"] = "resize_cycle";
            j["scale"] = s.scale;
            j["kernel"] = imagecore::to_string(s.kernel);
          } else {
            j["kind"] = "codec_cycle";
            j["quality"] = s.quality;
            j["subsampling"] = s.subsampling == Subsampling::S420 ? "420" : "444";
          }
          stages.push_back(std::move(j));
        },
        st);
  }
  nlohmann::ordered_json j;
  j["name"] = spec.name;
  j["stages"] = std::move(stages);
  return j;
}

// Accepts a full spec object or a bare preset name string.
inline ChannelSpec from_json(const nlohmann::json& j) {
  try {
    if (j.is_string()) return platform_preset(j.get<std::string>());
    ChannelSpec spec;
    spec.name = j.value("name", std::string("custom"));
    for (const auto& s : j.at("stages")) {
      const auto kind = s.at("kind").get<std::string>();
      if (kind == "sharpen") {
        spec.stages.emplace_back(Sharpen{s.value("radius", 1.0), s.value("amount", 0.5)});
      } else if (kind == "resize_cycle") {
        spec.stages.emplace_back(ResizeCycle{
            s.value("scale", 0.75), imagecore::kernel_from_string(s.value("kernel", std::string("lanczos3")))});
      } else if (kind == "codec_cycle") {
        const auto sub = s.value("subsampling", std::string("420"));
        if (sub != "420" && sub != "444") fail(Errc::InvalidConfig, "subsampling must be \"420\" or \"444\"");
        spec.stages.emplace_back(
            CodecCycle{s.value("quality", 95), sub == "420" ? Subsampling::S420 : Subsampling::S444});
      } else {
        fail(Errc::InvalidConfig, "unknown stage kind: " + kind);
      }
      validate(spec.stages.back());
    }
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed channel spec: ") + e.what());
  }
}

}  // namespace sb::channel
