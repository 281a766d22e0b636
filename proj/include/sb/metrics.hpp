#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sb/image.hpp"
#include "sb/payload.hpp"

namespace sb::metrics {

using imagecore::ImageBuffer;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kPeak = 255.0;

struct PixelFidelity {
  double mae = 0.0;
  double psnr_db = kInf;  // +inf for identical images
};

inline void require_same_shape(const ImageBuffer& x, const ImageBuffer& y) {
  if (!x.same_shape(y)) fail(Errc::ShapeMismatch, "images differ in shape");
}

// MAE and PSNR pooled over all N = H*W*C samples.
inline PixelFidelity pixel_fidelity(const ImageBuffer& x, const ImageBuffer& y) {
  require_same_shape(x, y);
  const auto a = x.samples(), b = y.samples();
  std::uint64_t abs_sum = 0, sq_sum = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const int d = static_cast<int>(a[i]) - static_cast<int>(b[i]);
    abs_sum += static_cast<std::uint64_t>(std::abs(d));
    sq_sum += static_cast<std::uint64_t>(d * d);
  }
  const double n = static_cast<double>(a.size());
  PixelFidelity out;
  out.mae = static_cast<double>(abs_sum) / n;
  out.psnr_db = sq_sum == 0 ? kInf : 10.0 * std::log10(kPeak * kPeak / (static_cast<double>(sq_sum) / n));
  return out;
}

inline double psnr_from_mse(double mse) {
  return mse == 0.0 ? kInf : 10.0 * std::log10(kPeak * kPeak / mse);
}

struct SsimParams {
  double k1 = 0.01;
  double k2 = 0.03;
  int window = 11;
  double sigma = 1.5;
  double dynamic_range = 255.0;

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

namespace detail {

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> g(static_cast<std::size_t>(size));
  const double mid = (size - 1) / 2.0;
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - mid;
    g[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[static_cast<std::size_t>(i)];
  }
  for (double& v : g) v /= total;
  return g;
}

// Separable 'valid' correlation of a single plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, std::size_t w, std::size_t h,
                                        const std::vector<double>& g) {
  const std::size_t k = g.size();
  const std::size_t ow = w - k + 1, oh = h - k + 1;
  std::vector<double> tmp(ow * h), out(ow * oh);
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * src[y * w + x + i];
      tmp[y * ow + x] = acc;
    }
  for (std::size_t y = 0; y < oh; ++y)
    for (std::size_t x = 0; x < ow; ++x) {
      double acc = 0.0;
      for (std::size_t i = 0; i < k; ++i) acc += g[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = acc;
    }
  return out;
}

}  // namespace detail

// Mean local SSIM over every fully-contained Gaussian window, then over
// channels.
inline double ssim(const ImageBuffer& x, const ImageBuffer& y, const SsimParams& p = {}) {
  require_same_shape(x, y);
  const auto win = static_cast<std::size_t>(p.window);
  if (x.width() < win || x.height() < win)
    fail(Errc::TooSmall, "SSIM needs both dimensions >= window size");
  const std::size_t w = x.width(), h = x.height(), c = x.channels();
  const auto g = detail::gaussian_window(p.window, p.sigma);
  const double c1 = p.c1(), c2 = p.c2();
  double total = 0.0;
  std::vector<double> a(w * h), b(w * h), aa(w * h), bb(w * h), ab(w * h);
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < w * h; ++i) {
      a[i] = x.raw()[i * c + ch];
      b[i] = y.raw()[i * c + ch];
      aa[i] = a[i] * a[i];
      bb[i] = b[i] * b[i];
      ab[i] = a[i] * b[i];
    }
    const auto mu_a = detail::filter_valid(a, w, h, g);
    const auto mu_b = detail::filter_valid(b, w, h, g);
    const auto s_aa = detail::filter_valid(aa, w, h, g);
    const auto s_bb = detail::filter_valid(bb, w, h, g);
    const auto s_ab = detail::filter_valid(ab, w, h, g);
    double sum = 0.0;
    for (std::size_t i = 0; i < mu_a.size(); ++i) {
      const double va = s_aa[i] - mu_a[i] * mu_a[i];
      const double vb = s_bb[i] - mu_b[i] * mu_b[i];
      const double cov = s_ab[i] - mu_a[i] * mu_b[i];
      sum += ((2.0 * mu_a[i] * mu_b[i] + c1) * (2.0 * cov + c2)) /
             ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + c1) * (va + vb + c2));
    }
    total += sum / static_cast<double>(mu_a.size());
  }
  return total / static_cast<double>(c);
}

// ---- text recovery -------------------------------------------------------

inline std::size_t levenshtein(std::u32string_view a, std::u32string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0u : 1u)});
      diag = up;
    }
  }
  return row[b.size()];
}

// Mismatches over the common prefix plus the length difference, normalized
// by the longer length. Two empty strings score 0.
inline double bit_error_rate(const payload::BitString& ref, const payload::BitString& got) {
  const std::size_t n = std::min(ref.size(), got.size());
  const std::size_t m = std::max(ref.size(), got.size());
  if (m == 0) return 0.0;
  std::size_t errors = m - n;
  for (std::size_t i = 0; i < n; ++i) errors += ref[i] != got[i];
  return static_cast<double>(errors) / static_cast<double>(m);
}

struct TextRecovery {
  bool emr_match = false;
  double cer = 0.0;
  double ber = 0.0;
};

inline TextRecovery text_recovery(std::string_view t, std::string_view t_hat) {
  const auto ref = payload::utf8_codepoints(payload::sanitize_utf8(t));
  const auto got = payload::utf8_codepoints(payload::sanitize_utf8(t_hat));
  TextRecovery r;
  r.emr_match = t == t_hat;
  r.cer = static_cast<double>(levenshtein(ref, got)) /
          static_cast<double>(std::max<std::size_t>(ref.size(), 1));
  r.ber = bit_error_rate(payload::text_to_bits(t), payload::text_to_bits(t_hat));
  return r;
}

struct CorpusTextMetrics {
  double emr = 0.0;
  double cer = 0.0;
  double ber = 0.0;
};

inline CorpusTextMetrics corpus_text_metrics(const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (pairs.empty()) fail(Errc::EmptyCorpus, "corpus_text_metrics needs at least one pair");
  CorpusTextMetrics m;
  for (const auto& [t, t_hat] : pairs) {
    const auto r = text_recovery(t, t_hat);
    m.emr += r.emr_match ? 1.0 : 0.0;
    m.cer += r.cer;
    m.ber += r.ber;
  }
  const double n = static_cast<double>(pairs.size());
  m.emr /= n;
  m.cer /= n;
  m.ber /= n;
  return m;
}

// ---- detection -----------------------------------------------------------

struct DetectionScores {
  std::vector<int> labels;  // 0 = cover, 1 = stego
  std::vector<double> scores;
  double threshold = 0.0;
};

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  std::size_t total() const { return tp + fp + tn + fn; }
};

struct DetectionMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // absent when only one class is present
  Confusion confusion;
};

inline double f1_from_confusion(const Confusion& c) {
  const double denom = 2.0 * static_cast<double>(c.tp) + static_cast<double>(c.fp + c.fn);
  return denom == 0.0 ? 0.0 : 2.0 * static_cast<double>(c.tp) / denom;
}

// Mann-Whitney statistic over all (stego, cover) pairs, ties worth one half.
inline std::optional<double> auc_rank(const std::vector<int>& labels, const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t n_pos = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = (static_cast<double>(i) + static_cast<double>(j) + 1.0) / 2.0;
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1) {
        pos_rank_sum += avg_rank;
        ++n_pos;
      }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) return std::nullopt;
  const double np = static_cast<double>(n_pos), nn = static_cast<double>(n_neg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

inline DetectionMetrics detection_metrics(const DetectionScores& d) {
  if (d.labels.size() != d.scores.size() || d.labels.empty())
    fail(Errc::ShapeMismatch, "labels and scores must be non-empty and of equal length");
  DetectionMetrics m;
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    const bool pred = d.scores[i] >= d.threshold;
    const bool pos = d.labels[i] == 1;
    if (pred && pos) ++m.confusion.tp;
    else if (pred && !pos) ++m.confusion.fp;
    else if (!pred && pos) ++m.confusion.fn;
    else ++m.confusion.tn;
  }
  const auto& c = m.confusion;
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  m.precision = c.tp + c.fp == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  m.recall = c.tp + c.fn == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  m.f1 = f1_from_confusion(c);
  m.auc = auc_rank(d.labels, d.scores);
  return m;
}

}  // namespace sb::metrics
