#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sb/image.hpp"

namespace sb::metrics {

// H x W x C feature map, channel-fastest layout.
struct FeatureMap {
  std::size_t height = 0, width = 0, channels = 0;
  std::vector<double> data;

  double* at(std::size_t y, std::size_t x) { return data.data() + (y * width + x) * channels; }
  const double* at(std::size_t y, std::size_t x) const {
    return data.data() + (y * width + x) * channels;
  }
};

class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::vector<FeatureMap> extract(const imagecore::ImageBuffer& img) const = 0;
  virtual std::vector<std::size_t> layer_channels(std::size_t image_channels) const = 0;
  virtual std::string name() const = 0;
};

// Deterministic three-level pyramid standing in for a pretrained backbone:
// layer 0 is the centred raw samples, layers 1 and 2 are horizontal and
// vertical gradients of 2x and 4x average-pooled images.
class PyramidExtractor final : public FeatureExtractor {
 public:
  std::vector<FeatureMap> extract(const imagecore::ImageBuffer& img) const override {
    const std::size_t c = img.channels();
    FeatureMap base{img.height(), img.width(), c, std::vector<double>(img.size())};
    for (std::size_t i = 0; i < img.size(); ++i) base.data[i] = img.raw()[i] / 255.0 - 0.5;
    std::vector<FeatureMap> layers;
    layers.push_back(base);
    FeatureMap cur = base;
    for (int level = 0; level < 2; ++level) {
      cur = pool2(cur);
      layers.push_back(gradients(cur));
    }
    return layers;
  }

  std::vector<std::size_t> layer_channels(std::size_t c) const override { return {c, 2 * c, 2 * c}; }
  std::string name() const override { return "pyramid-gradient-v1"; }

 private:
  static FeatureMap pool2(const FeatureMap& f) {
    FeatureMap out{std::max<std::size_t>(f.height / 2, 1), std::max<std::size_t>(f.width / 2, 1),
                   f.channels, {}};
    out.data.assign(out.height * out.width * out.channels, 0.0);
    for (std::size_t y = 0; y < out.height; ++y)
      for (std::size_t x = 0; x < out.width; ++x)
        for (std::size_t ch = 0; ch < f.channels; ++ch) {
          double acc = 0.0;
          int n = 0;
          for (std::size_t dy = 0; dy < 2; ++dy)
            for (std::size_t dx = 0; dx < 2; ++dx) {
              const std::size_t sy = std::min(2 * y + dy, f.height - 1);
              const std::size_t sx = std::min(2 * x + dx, f.width - 1);
              acc += f.at(sy, sx)[ch];
              ++n;
            }
          out.at(y, x)[ch] = acc / n;
        }
    return out;
  }

  static FeatureMap gradients(const FeatureMap& f) {
    FeatureMap out{f.height, f.width, 2 * f.channels, {}};
    out.data.assign(out.height * out.width * out.channels, 0.0);
    for (std::size_t y = 0; y < f.height; ++y)
      for (std::size_t x = 0; x < f.width; ++x)
        for (std::size_t ch = 0; ch < f.channels; ++ch) {
          const std::size_t xr = std::min(x + 1, f.width - 1), yd = std::min(y + 1, f.height - 1);
          out.at(y, x)[2 * ch] = f.at(y, xr)[ch] - f.at(y, x)[ch];
          out.at(y, x)[2 * ch + 1] = f.at(yd, x)[ch] - f.at(y, x)[ch];
        }
    return out;
  }
};

struct LpipsModel {
  std::shared_ptr<const FeatureExtractor> extractor;
  std::vector<std::vector<double>> weights;  // one vector per layer, length C_l

  // Unit weights matching the extractor's layers for a given channel count.
  static LpipsModel uniform(std::shared_ptr<const FeatureExtractor> ex, std::size_t image_channels) {
    LpipsModel m{std::move(ex), {}};
    for (std::size_t c : m.extractor->layer_channels(image_channels)) m.weights.emplace_back(c, 1.0);
    return m;
  }
};

// Weights file: {"layers": [{"channels": C, "weights": [...]}, ...]}.
inline std::vector<std::vector<double>> parse_lpips_weights(const nlohmann::json& j) {
  std::vector<std::vector<double>> out;
  try {
    for (const auto& layer : j.at("layers")) {
      const auto c = layer.at("channels").get<std::size_t>();
      auto w = layer.at("weights").get<std::vector<double>>();
      if (w.size() != c) fail(Errc::WeightDimensionMismatch, "weights length differs from channels");
      for (double v : w)
        if (!(v >= 0.0) || !std::isfinite(v)) fail(Errc::InvalidConfig, "LPIPS weights must be finite and >= 0");
      out.push_back(std::move(w));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed LPIPS weights: ") + e.what());
  }
  return out;
}

inline std::vector<std::vector<double>> load_lpips_weights(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::FileNotFound, "cannot open LPIPS weights: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed LPIPS weights: ") + e.what());
  }
  return parse_lpips_weights(j);
}

namespace detail {

inline void unit_normalize(const double* v, std::size_t n, double* out) {
  double norm = 0.0;
  for (std::size_t i = 0; i < n; ++i) norm += v[i] * v[i];
  norm = std::sqrt(norm);
  for (std::size_t i = 0; i < n; ++i) out[i] = norm > 0.0 ? v[i] / norm : 0.0;
}

}  // namespace detail

// Sum over layers of the spatial mean of ||w (.) (unit(phi_x) - unit(phi_y))||^2.
inline double lpips(const imagecore::ImageBuffer& x, const imagecore::ImageBuffer& y,
                    const LpipsModel& model) {
  if (!x.same_shape(y)) fail(Errc::ShapeMismatch, "images differ in shape");
  if (!model.extractor) fail(Errc::InvalidConfig, "LPIPS model has no extractor");
  const auto fx = model.extractor->extract(x);
  const auto fy = model.extractor->extract(y);
  if (fx.size() != model.weights.size())
    fail(Errc::WeightDimensionMismatch, "layer count differs from weight vectors");
  double total = 0.0;
  for (std::size_t l = 0; l < fx.size(); ++l) {
    const auto& a = fx[l];
    const auto& b = fy[l];
    const auto& w = model.weights[l];
    if (w.size() != a.channels) fail(Errc::WeightDimensionMismatch, "weight vector length differs from C_l");
    std::vector<double> na(a.channels), nb(a.channels);
    double layer_sum = 0.0;
    for (std::size_t yy = 0; yy < a.height; ++yy)
      for (std::size_t xx = 0; xx < a.width; ++xx) {
        detail::unit_normalize(a.at(yy, xx), a.channels, na.data());
        detail::unit_normalize(b.at(yy, xx), b.channels, nb.data());
        for (std::size_t ch = 0; ch < a.channels; ++ch) {
          const double d = w[ch] * (na[ch] - nb[ch]);
          layer_sum += d * d;
        }
      }
    total += layer_sum / static_cast<double>(a.height * a.width);
  }
  return total;
}

}  // namespace sb::metrics
