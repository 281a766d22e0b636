#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "sb/image.hpp"
#include "sb/metrics.hpp"
#include "sb/parallel.hpp"
#include "sb/rng.hpp"

namespace sb::steganalysis {

using imagecore::ImageBuffer;

inline constexpr int kTruncation = 2;  // residuals clipped to [-T, T]
inline constexpr int kBins = 2 * kTruncation + 1;
inline constexpr int kQuant = 1;
inline constexpr const char* kSchemaId = "sb-residual-v1:d1h,d1v,d2h,d2v,kv5;q1;T2;marg+coh+cov";
inline constexpr std::size_t kResiduals = 5;
inline constexpr std::size_t kPerResidual = kBins + 2 * kBins * kBins;
inline constexpr std::size_t kFeatureLength = kResiduals * kPerResidual;
inline constexpr std::size_t kMinSide = 8;

struct FeatureVector {
  std::vector<double> values;
  std::string schema_id = kSchemaId;
};

// Integer residual map: value = numerator / denominator before quantization.
struct ResidualMap {
  std::size_t width = 0, height = 0;
  std::vector<int> q;  // quantized and truncated
};

namespace detail {

// Luminance scaled by 1000 so it stays integral: 299 R + 587 G + 114 B.
inline std::vector<std::int64_t> scaled_luma(const ImageBuffer& img) {
  std::vector<std::int64_t> l(img.pixel_count());
  const auto s = img.samples();
  if (img.channels() == 1) {
    for (std::size_t i = 0; i < l.size(); ++i) l[i] = 1000 * static_cast<std::int64_t>(s[i]);
  } else {
    for (std::size_t i = 0; i < l.size(); ++i)
      l[i] = 299 * static_cast<std::int64_t>(s[3 * i]) + 587 * static_cast<std::int64_t>(s[3 * i + 1]) +
             114 * static_cast<std::int64_t>(s[3 * i + 2]);
  }
  return l;
}

// round(num / den) half away from zero, den > 0, then truncate to [-T, T].
inline int quantize_truncate(std::int64_t num, std::int64_t den) {
  const std::int64_t mag = (2 * (num < 0 ? -num : num) + den) / (2 * den);
  const std::int64_t v = num < 0 ? -mag : mag;
  return static_cast<int>(std::clamp<std::int64_t>(v, -kTruncation, kTruncation));
}

struct Kernel {
  int radius;                 // kernel spans [-radius, radius] in each used axis
  std::vector<int> taps;      // (2r+1)^2 row-major
  std::int64_t denominator;   // scale of the taps
};

inline const std::array<Kernel, kResiduals>& residual_bank() {
  static const std::array<Kernel, kResiduals> bank = [] {
    std::array<Kernel, kResiduals> b;
    auto zero3 = [] { return std::vector<int>(9, 0); };
    // First-order differences: right neighbour minus centre, below minus centre.
    b[0] = {1, zero3(), 1};
    b[0].taps[4] = -1;
    b[0].taps[5] = 1;
    b[1] = {1, zero3(), 1};
    b[1].taps[4] = -1;
    b[1].taps[7] = 1;
    // Second-order differences.
    b[2] = {1, zero3(), 1};
    b[2].taps[3] = 1;
    b[2].taps[4] = -2;
    b[2].taps[5] = 1;
    b[3] = {1, zero3(), 1};
    b[3].taps[1] = 1;
    b[3].taps[4] = -2;
    b[3].taps[7] = 1;
    // KV predictor residual, taps / 12.
    b[4] = {2,
            {-1, 2, -2, 2, -1, 2, -6, 8, -6, 2, -2, 8, -12, 8, -2, 2, -6, 8, -6, 2, -1, 2, -2, 2, -1},
            12};
    return b;
  }();
  return bank;
}

}  // namespace detail

// Quantized (q = 1) and truncated (T = 2) residual over the valid region.
inline ResidualMap residual_map(const std::vector<std::int64_t>& luma1000, std::size_t w, std::size_t h,
                                std::size_t which) {
  const auto& k = detail::residual_bank().at(which);
  const auto r = static_cast<std::size_t>(k.radius);
  const std::size_t side = 2 * r + 1;
  ResidualMap m{w - 2 * r, h - 2 * r, {}};
  m.q.resize(m.width * m.height);
  const std::int64_t den = k.denominator * 1000 * kQuant;
  for (std::size_t y = 0; y < m.height; ++y)
    for (std::size_t x = 0; x < m.width; ++x) {
      std::int64_t acc = 0;
      for (std::size_t dy = 0; dy < side; ++dy)
        for (std::size_t dx = 0; dx < side; ++dx) {
          const int t = k.taps[dy * side + dx];
          if (t != 0) acc += t * luma1000[(y + dy) * w + (x + dx)];
        }
      m.q[y * m.width + x] = detail::quantize_truncate(acc, den);
    }
  return m;
}

inline FeatureVector residual_features(const ImageBuffer& img) {
  if (img.width() < kMinSide || img.height() < kMinSide)
    fail(Errc::TooSmall, "residual features need at least 8x8 pixels");
  const auto luma = detail::scaled_luma(img);
  FeatureVector f;
  f.values.reserve(kFeatureLength);
  for (std::size_t which = 0; which < kResiduals; ++which) {
    const auto m = residual_map(luma, img.width(), img.height(), which);
    std::array<double, kBins> marg{};
    std::array<double, kBins * kBins> coh{}, cov{};
    double n_h = 0, n_v = 0;
    for (std::size_t y = 0; y < m.height; ++y)
      for (std::size_t x = 0; x < m.width; ++x) {
        const int a = m.q[y * m.width + x] + kTruncation;
        marg[static_cast<std::size_t>(a)] += 1.0;
        if (x + 1 < m.width) {
          coh[static_cast<std::size_t>(a * kBins + m.q[y * m.width + x + 1] + kTruncation)] += 1.0;
          n_h += 1.0;
        }
        if (y + 1 < m.height) {
          cov[static_cast<std::size_t>(a * kBins + m.q[(y + 1) * m.width + x] + kTruncation)] += 1.0;
          n_v += 1.0;
        }
      }
    const double n = static_cast<double>(m.q.size());
    for (double v : marg) f.values.push_back(v / n);
    for (double v : coh) f.values.push_back(n_h > 0 ? v / n_h : 0.0);
    for (double v : cov) f.values.push_back(n_v > 0 ? v / n_v : 0.0);
  }
  return f;
}

// ---- ensemble of Fisher linear discriminants ----------------------------

struct BaseLearner {
  std::vector<std::size_t> subspace;
  std::vector<double> direction;
  double bias = 0.0;

  double project(const std::vector<double>& x) const {
    double s = bias;
    for (std::size_t i = 0; i < subspace.size(); ++i) s += direction[i] * x[subspace[i]];
    return s;
  }
};

struct DetectorModel {
  std::string schema_id = kSchemaId;
  std::size_t feature_length = kFeatureLength;
  std::vector<BaseLearner> base_learners;
  double threshold = 0.0;
  nlohmann::ordered_json train_manifest = nlohmann::ordered_json::object();

  // Mean of the learners' signed projections; higher is more stego-like.
  double score_features(const std::vector<double>& x) const {
    if (x.size() != feature_length) fail(Errc::SchemaMismatch, "feature length does not match the model");
    double s = 0.0;
    for (const auto& l : base_learners) s += l.project(x);
    return s / static_cast<double>(base_learners.size());
  }
};

struct TrainOptions {
  std::uint64_t seed = 1;
  std::size_t n_learners = 51;
  std::size_t subspace_dim = 0;  // 0 selects ceil(sqrt(D)) * 4, capped at D
  double holdout_fraction = 0.2;
};

namespace detail {

inline BaseLearner fit_fld(const std::vector<std::vector<double>>& x0, const std::vector<std::vector<double>>& x1,
                           std::vector<std::size_t> subspace) {
  const auto d = static_cast<Eigen::Index>(subspace.size());
  auto mean_of = [&](const std::vector<std::vector<double>>& xs) {
    Eigen::VectorXd m = Eigen::VectorXd::Zero(d);
    for (const auto& x : xs)
      for (Eigen::Index i = 0; i < d; ++i) m[i] += x[subspace[static_cast<std::size_t>(i)]];
    return Eigen::VectorXd(m / static_cast<double>(xs.size()));
  };
  const Eigen::VectorXd m0 = mean_of(x0), m1 = mean_of(x1);
  Eigen::MatrixXd sw = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd v(d);
  for (const auto* set : {&x0, &x1}) {
    const Eigen::VectorXd& m = set == &x0 ? m0 : m1;
    for (const auto& x : *set) {
      for (Eigen::Index i = 0; i < d; ++i) v[i] = x[subspace[static_cast<std::size_t>(i)]] - m[i];
      sw.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
  }
  sw = sw.selfadjointView<Eigen::Lower>();
  const double trace = sw.trace();
  if (!(trace > 0.0)) fail(Errc::DegenerateScatter, "within-class scatter is zero on a feature subspace");
  const Eigen::MatrixXd raw = sw;
  sw.diagonal().array() += 1e-4 * trace / static_cast<double>(d);
  const Eigen::LDLT<Eigen::MatrixXd> ldlt(sw);
  if (ldlt.info() != Eigen::Success) fail(Errc::DegenerateScatter, "scatter matrix factorization failed");
  Eigen::VectorXd w = ldlt.solve(m1 - m0);
  if (!w.allFinite()) fail(Errc::DegenerateScatter, "discriminant direction is not finite");
  // Scale to unit pooled within-class deviation so every learner votes on a
  // comparable scale.
  const double n = static_cast<double>(x0.size() + x1.size());
  const double var = w.dot(raw * w) / std::max(1.0, n - 2.0);
  if (var > 0.0) w /= std::sqrt(var);
  BaseLearner l;
  l.subspace = std::move(subspace);
  l.direction.assign(w.data(), w.data() + w.size());
  l.bias = -0.5 * w.dot(m0 + m1);
  return l;
}

// Threshold maximizing F1 on a validation set; ties prefer higher accuracy,
// then the lower threshold.
inline double tune_threshold(const std::vector<double>& s0, const std::vector<double>& s1) {
  std::vector<double> all(s0);
  all.insert(all.end(), s1.begin(), s1.end());
  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());
  std::vector<double> candidates;
  candidates.push_back(all.front() - 1.0);
  for (std::size_t i = 0; i + 1 < all.size(); ++i) candidates.push_back(0.5 * (all[i] + all[i + 1]));
  candidates.push_back(all.back() + 1.0);
  double best_t = candidates.front(), best_f1 = -1.0, best_acc = -1.0;
  for (double t : candidates) {
    metrics::Confusion c;
    for (double s : s0) (s >= t ? c.fp : c.tn)++;
    for (double s : s1) (s >= t ? c.tp : c.fn)++;
    const double f1 = metrics::f1_from_confusion(c);
    const double acc = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    if (f1 > best_f1 || (f1 == best_f1 && acc > best_acc)) {
      best_f1 = f1;
      best_acc = acc;
      best_t = t;
    }
  }
  return best_t;
}

}  // namespace detail

inline std::size_t default_subspace_dim(std::size_t d) {
  const auto s = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(d)))) * 4;
  return std::min(s, d);
}

// Trains on cover (class 0) and stego (class 1) feature vectors. A seeded
// fifth of each class is held out to choose the F1-maximizing threshold;
// learners are fit on the remainder.
inline DetectorModel train_on_features(const std::vector<std::vector<double>>& covers,
                                       const std::vector<std::vector<double>>& stegos,
                                       const TrainOptions& opt = {}) {
  if (covers.empty() || stegos.empty()) fail(Errc::EmptyClass, "both classes need at least one sample");
  const std::size_t d = covers.front().size();
  for (const auto* set : {&covers, &stegos})
    for (const auto& x : *set)
      if (x.size() != d) fail(Errc::SchemaMismatch, "feature vectors differ in length");
  const std::size_t sub = opt.subspace_dim == 0 ? default_subspace_dim(d) : opt.subspace_dim;
  if (sub == 0 || sub > d) fail(Errc::InvalidConfig, "subspace_dim must lie in [1, feature length]");
  if (opt.n_learners == 0) fail(Errc::InvalidConfig, "n_learners must be positive");

  auto split = [&](const std::vector<std::vector<double>>& xs, std::uint64_t stream,
                   std::vector<std::vector<double>>& fit, std::vector<std::vector<double>>& val) {
    const auto perm = keyed_permutation(xs.size(), derive_seed(opt.seed, stream));
    auto n_val = static_cast<std::size_t>(std::floor(static_cast<double>(xs.size()) * opt.holdout_fraction));
    if (xs.size() - n_val < 1) n_val = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) (i < n_val ? val : fit).push_back(xs[perm[i]]);
  };
  std::vector<std::vector<double>> fit0, val0, fit1, val1;
  split(covers, 10, fit0, val0);
  split(stegos, 11, fit1, val1);
  // Too little data for a separate validation split: tune on the fit set.
  const bool tune_on_fit = val0.empty() || val1.empty();
  if (tune_on_fit) {
    fit0.insert(fit0.end(), val0.begin(), val0.end());
    fit1.insert(fit1.end(), val1.begin(), val1.end());
    val0 = fit0;
    val1 = fit1;
  }

  DetectorModel model;
  model.feature_length = d;
  model.base_learners.resize(opt.n_learners);
  parallel_for(opt.n_learners, [&](std::size_t k) {
    auto perm = keyed_permutation(d, derive_seed(opt.seed, 1000 + k));
    std::vector<std::size_t> subspace(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(sub));
    std::sort(subspace.begin(), subspace.end());
    model.base_learners[k] = detail::fit_fld(fit0, fit1, std::move(subspace));
  });

  std::vector<double> s0, s1;
  for (const auto& x : val0) s0.push_back(model.score_features(x));
  for (const auto& x : val1) s1.push_back(model.score_features(x));
  model.threshold = detail::tune_threshold(s0, s1);
  model.train_manifest["n_cover"] = covers.size();
  model.train_manifest["n_stego"] = stegos.size();
  model.train_manifest["n_validation"] = tune_on_fit ? 0 : val0.size() + val1.size();
  model.train_manifest["seed"] = opt.seed;
  model.train_manifest["n_learners"] = opt.n_learners;
  model.train_manifest["subspace_dim"] = sub;
  model.train_manifest["threshold_rule"] = "max F1 on held-out fifth";
  return model;
}

inline std::vector<std::vector<double>> features_of(const std::vector<ImageBuffer>& imgs) {
  return parallel_map<std::vector<double>>(imgs.size(),
                                           [&](std::size_t i) { return residual_features(imgs[i]).values; });
}

inline DetectorModel train_detector(const std::vector<ImageBuffer>& covers, const std::vector<ImageBuffer>& stegos,
                                    const TrainOptions& opt = {}) {
  if (covers.empty() || stegos.empty()) fail(Errc::EmptyClass, "both classes need at least one image");
  auto model = train_on_features(features_of(covers), features_of(stegos), opt);
  model.schema_id = kSchemaId;
  return model;
}

inline double score_image(const DetectorModel& model, const ImageBuffer& img) {
  if (model.schema_id != kSchemaId) fail(Errc::SchemaMismatch, "model schema " + model.schema_id + " is not supported");
  return model.score_features(residual_features(img).values);
}

struct Evaluation {
  metrics::DetectionScores scores;
  metrics::DetectionMetrics metrics;
};

inline Evaluation evaluate_on_features(const DetectorModel& model, const std::vector<std::vector<double>>& covers,
                                       const std::vector<std::vector<double>>& stegos) {
  if (covers.empty() || stegos.empty()) fail(Errc::EmptyClass, "both classes need at least one sample");
  Evaluation e;
  e.scores.threshold = model.threshold;
  for (const auto& x : covers) {
    e.scores.labels.push_back(0);
    e.scores.scores.push_back(model.score_features(x));
  }
  for (const auto& x : stegos) {
    e.scores.labels.push_back(1);
    e.scores.scores.push_back(model.score_features(x));
  }
  e.metrics = metrics::detection_metrics(e.scores);
  return e;
}

inline Evaluation evaluate_detector(const DetectorModel& model, const std::vector<ImageBuffer>& covers,
                                    const std::vector<ImageBuffer>& stegos) {
  if (covers.empty() || stegos.empty()) fail(Errc::EmptyClass, "both classes need at least one image");
  if (model.schema_id != kSchemaId) fail(Errc::SchemaMismatch, "model schema " + model.schema_id + " is not supported");
  return evaluate_on_features(model, features_of(covers), features_of(stegos));
}

// ---- serialization ---------------------------------------------------------

inline constexpr int kModelVersion = 1;

inline nlohmann::ordered_json to_json(const DetectorModel& m) {
  nlohmann::ordered_json j;
  j["format"] = "sb-detector";
  j["version"] = kModelVersion;
  j["schema_id"] = m.schema_id;
  j["feature_length"] = m.feature_length;
  j["threshold"] = m.threshold;
  j["train_manifest"] = m.train_manifest;
  auto& learners = j["base_learners"] = nlohmann::ordered_json::array();
  for (const auto& l : m.base_learners) {
    nlohmann::ordered_json lj;
    lj["subspace"] = l.subspace;
    lj["direction"] = l.direction;
    lj["bias"] = l.bias;
    learners.push_back(std::move(lj));
  }
  return j;
}

inline DetectorModel model_from_json(const nlohmann::json& j) {
  DetectorModel m;
  try {
    if (j.at("format").get<std::string>() != "sb-detector") fail(Errc::SchemaMismatch, "not a detector model");
    if (j.at("version").get<int>() != kModelVersion) fail(Errc::SchemaMismatch, "unsupported model version");
    m.schema_id = j.at("schema_id").get<std::string>();
    m.feature_length = j.at("feature_length").get<std::size_t>();
    m.threshold = j.at("threshold").get<double>();
    m.train_manifest = j.at("train_manifest");
    for (const auto& lj : j.at("base_learners")) {
      BaseLearner l;
      l.subspace = lj.at("subspace").get<std::vector<std::size_t>>();
      l.direction = lj.at("direction").get<std::vector<double>>();
      l.bias = lj.at("bias").get<double>();
      if (l.subspace.size() != l.direction.size()) fail(Errc::SchemaMismatch, "learner subspace/direction mismatch");
      for (auto idx : l.subspace)
        if (idx >= m.feature_length) fail(Errc::SchemaMismatch, "learner subspace index out of range");
      m.base_learners.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed detector model: ") + e.what());
  }
  if (m.base_learners.empty()) fail(Errc::SchemaMismatch, "model has no base learners");
  return m;
}

}  // namespace sb::steganalysis
