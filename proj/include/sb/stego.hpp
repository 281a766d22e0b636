#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sb/channel.hpp"
#include "sb/dct.hpp"
#include "sb/image.hpp"
#include "sb/metrics.hpp"
#include "sb/parallel.hpp"
#include "sb/payload.hpp"
#include "sb/rng.hpp"

namespace sb::stego {

using imagecore::ImageBuffer;
using payload::BitString;

// Identity is a control embedder: it never modifies the cover.
enum class Method { LsbReplace, LsbMatch, DctQim, Identity };

inline const char* to_string(Method m) {
  switch (m) {
    case Method::LsbReplace: return "lsb_replace";
    case Method::LsbMatch: return "lsb_match";
    case Method::DctQim: return "dct_qim";
    case Method::Identity: return "identity";
  }
  return "?";
}

inline Method method_from_string(const std::string& s) {
  if (s == "lsb_replace") return Method::LsbReplace;
  if (s == "lsb_match") return Method::LsbMatch;
  if (s == "dct_qim") return Method::DctQim;
  if (s == "identity") return Method::Identity;
  fail(Errc::InvalidConfig, "unknown embedding method: " + s);
}

struct StegoConfig {
  Method method = Method::LsbReplace;
  int k_planes = 1;
  double delta = 16.0;
  std::vector<int> band = {3, 4, 5, 6, 7, 8, 9, 10};  // zigzag indices
  int repetition = 1;
  std::uint64_t key = 0x5EED;

  friend bool operator==(const StegoConfig&, const StegoConfig&) = default;
};

inline void validate(const StegoConfig& cfg) {
  if (cfg.repetition < 1 || cfg.repetition % 2 == 0)
    fail(Errc::EvenRepetition, "repetition factor must be odd and >= 1");
  switch (cfg.method) {
    case Method::LsbReplace:
      if (cfg.k_planes < 1 || cfg.k_planes > 8) fail(Errc::InvalidConfig, "k_planes must lie in [1, 8]");
      [[fallthrough]];
    case Method::LsbMatch:
      if (cfg.method == Method::LsbMatch && cfg.k_planes != 1)
        fail(Errc::InvalidConfig, "lsb_match operates on a single plane (k_planes = 1)");
      if (cfg.repetition != 1) fail(Errc::InvalidConfig, "repetition applies to dct_qim only");
      break;
    case Method::DctQim:
      if (!(cfg.delta > 0.0) || !std::isfinite(cfg.delta)) fail(Errc::InvalidConfig, "QIM step must be positive");
      if (cfg.band.empty()) fail(Errc::BandOutOfRange, "QIM band must be non-empty");
      for (int z : cfg.band)
        if (z < 1 || z > 63) fail(Errc::BandOutOfRange, "band indices must lie in [1, 63]");
      {
        auto sorted = cfg.band;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
          fail(Errc::BandOutOfRange, "band indices must be distinct");
      }
      break;
    case Method::Identity:
      break;
  }
}

inline std::size_t capacity(const ImageBuffer& cover, const StegoConfig& cfg) {
  validate(cfg);
  switch (cfg.method) {
    case Method::LsbReplace:
      return cover.size() * static_cast<std::size_t>(cfg.k_planes);
    case Method::LsbMatch:
    case Method::Identity:
      return cover.size();
    case Method::DctQim:
      return (cover.height() / 8) * (cover.width() / 8) * cfg.band.size() /
             static_cast<std::size_t>(cfg.repetition);
  }
  return 0;
}

struct EmbedResult {
  ImageBuffer stego;
  std::size_t embedded_bits = 0;
  std::size_t capacity_bits = 0;
};

namespace detail {

inline constexpr std::uint64_t kMatchStream = 0x4D41544348ull;

// Snap c onto the lattice of `bit`: offsets 0 and delta/2.
inline double qim_quantize(double c, int bit, double delta) {
  const double d = bit ? delta / 2.0 : 0.0;
  return delta * std::round((c - d) / delta) + d;
}

inline double qim_distance(double c, int bit, double delta) {
  return std::abs(c - qim_quantize(c, bit, delta));
}

inline int qim_decide(double c, double delta) {
  return qim_distance(c, 1, delta) < qim_distance(c, 0, delta) ? 1 : 0;
}

// Luminance plane (double precision) of an RGB or Gray image.
inline std::vector<double> luma_plane(const ImageBuffer& img) {
  std::vector<double> y(img.pixel_count());
  const auto s = img.samples();
  if (img.channels() == 1) {
    std::copy(s.begin(), s.end(), y.begin());
  } else {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = imagecore::luma(s[3 * i], s[3 * i + 1], s[3 * i + 2]);
  }
  return y;
}

struct QimLayout {
  std::size_t blocks_x = 0, blocks_y = 0;
  std::vector<int> band_natural;  // natural-order coefficient indices
  std::size_t slots() const { return blocks_x * blocks_y * band_natural.size(); }
};

inline QimLayout qim_layout(const ImageBuffer& img, const StegoConfig& cfg) {
  QimLayout l{img.width() / 8, img.height() / 8, {}};
  for (int z : cfg.band) l.band_natural.push_back(dct::kZigzag[static_cast<std::size_t>(z)]);
  return l;
}

inline dct::Block load_block(const std::vector<double>& y, std::size_t w, std::size_t bx, std::size_t by) {
  dct::Block blk;
  for (std::size_t r = 0; r < 8; ++r)
    for (std::size_t c = 0; c < 8; ++c) blk[r * 8 + c] = y[(by * 8 + r) * w + bx * 8 + c] - 128.0;
  return blk;
}

// Coefficients of every slot, slot = block * |band| + band position.
inline std::vector<double> slot_coefficients(const ImageBuffer& img, const QimLayout& l) {
  const auto y = luma_plane(img);
  std::vector<double> out(l.slots());
  const std::size_t nb = l.band_natural.size();
  for (std::size_t by = 0; by < l.blocks_y; ++by)
    for (std::size_t bx = 0; bx < l.blocks_x; ++bx) {
      const auto coef = dct::forward(load_block(y, img.width(), bx, by));
      const std::size_t b = by * l.blocks_x + bx;
      for (std::size_t j = 0; j < nb; ++j) out[b * nb + j] = coef[static_cast<std::size_t>(l.band_natural[j])];
    }
  return out;
}

// Applies a luminance delta per pixel. Gray samples are rounded directly. For
// RGB the integer part moves all channels and the fractional part is matched
// by the channel subset whose luma weights sum closest to it, which gives a
// luma resolution of about 0.1 instead of 1.
inline void apply_luma_delta(ImageBuffer& img, const std::vector<double>& base,
                             const std::vector<double>& delta_y) {
  auto s = img.samples();
  if (img.channels() == 1) {
    for (std::size_t p = 0; p < delta_y.size(); ++p) s[p] = imagecore::round_clamp_u8(base[p] + delta_y[p]);
    return;
  }
  static constexpr double kW[3] = {imagecore::Bt601::kYR, imagecore::Bt601::kYG, imagecore::Bt601::kYB};
  for (std::size_t p = 0; p < delta_y.size(); ++p) {
    const double t = delta_y[p];
    const double whole = std::floor(t);
    const double frac = t - whole;
    unsigned best = 0;
    double best_err = frac;
    for (unsigned mask = 1; mask < 8; ++mask) {
      double sum = 0.0;
      for (int c = 0; c < 3; ++c)
        if (mask & (1u << c)) sum += kW[c];
      const double err = std::abs(frac - sum);
      if (err < best_err) {
        best_err = err;
        best = mask;
      }
    }
    for (std::size_t c = 0; c < 3; ++c)
      s[p * 3 + c] = imagecore::round_clamp_u8(base[p * 3 + c] + whole + ((best >> c) & 1u));
  }
}

inline ImageBuffer embed_qim(const ImageBuffer& cover, const BitString& coded, const StegoConfig& cfg) {
  const QimLayout l = qim_layout(cover, cfg);
  const auto perm = keyed_permutation(l.slots(), cfg.key);
  const std::size_t nb = l.band_natural.size();
  const std::size_t w = cover.width();

  // Slots grouped by block so each block is transformed once per pass.
  std::vector<std::vector<std::pair<std::size_t, int>>> per_block(l.blocks_x * l.blocks_y);
  for (std::size_t i = 0; i < coded.size(); ++i) {
    const std::size_t slot = perm[i];
    per_block[slot / nb].emplace_back(slot % nb, coded[i]);
  }

  const std::vector<double> base(cover.samples().begin(), cover.samples().end());
  std::vector<double> delta_y(cover.pixel_count(), 0.0);
  ImageBuffer stego = cover;
  constexpr int kMaxPasses = 8;
  for (int pass = 0; pass < kMaxPasses; ++pass) {
    const auto y = luma_plane(stego);
    bool all_ok = true;
    for (std::size_t b = 0; b < per_block.size(); ++b) {
      if (per_block[b].empty()) continue;
      const std::size_t bx = b % l.blocks_x, by = b / l.blocks_x;
      const auto coef = dct::forward(load_block(y, w, bx, by));
      dct::Block change{};
      bool touched = false;
      for (auto [j, bit] : per_block[b]) {
        const auto idx = static_cast<std::size_t>(l.band_natural[j]);
        const double c = coef[idx];
        // First pass snaps every coefficient; later passes only fix those
        // that rounding pushed outside their decision region.
        if (pass == 0 || qim_distance(c, bit, cfg.delta) >= cfg.delta / 4.0) {
          change[idx] = qim_quantize(c, bit, cfg.delta) - c;
          touched = true;
          if (pass > 0) all_ok = false;
        }
      }
      if (!touched) continue;
      const auto dy = dct::inverse(change);
      for (std::size_t r = 0; r < 8; ++r)
        for (std::size_t cc = 0; cc < 8; ++cc) delta_y[(by * 8 + r) * w + bx * 8 + cc] += dy[r * 8 + cc];
    }
    if (pass > 0 && all_ok) break;
    apply_luma_delta(stego, base, delta_y);
  }
  return stego;
}

}  // namespace detail

inline EmbedResult embed(const ImageBuffer& cover, const BitString& bits, const StegoConfig& cfg) {
  const std::size_t cap = capacity(cover, cfg);
  if (bits.size() > cap)
    fail(Errc::PayloadTooLarge, "payload of " + std::to_string(bits.size()) + " bits exceeds capacity " +
                                    std::to_string(cap));
  EmbedResult res{cover, bits.size(), cap};
  if (bits.empty() || cfg.method == Method::Identity) {
    res.embedded_bits = cfg.method == Method::Identity ? 0 : bits.size();
    return res;
  }
  auto s = res.stego.samples();
  switch (cfg.method) {
    case Method::LsbReplace: {
      const auto k = static_cast<std::size_t>(cfg.k_planes);
      const auto perm = keyed_permutation(cover.size(), cfg.key);
      for (std::size_t i = 0; i < bits.size(); ++i) {
        auto& v = s[perm[i / k]];
        const auto mask = static_cast<std::uint8_t>(1u << (i % k));
        v = static_cast<std::uint8_t>(bits[i] ? (v | mask) : (v & ~mask));
      }
      break;
    }
    case Method::LsbMatch: {
      const auto perm = keyed_permutation(cover.size(), cfg.key);
      Rng dir(derive_seed(cfg.key, detail::kMatchStream));
      for (std::size_t i = 0; i < bits.size(); ++i) {
        auto& v = s[perm[i]];
        const bool up = dir.coin();  // drawn for every bit to keep the stream aligned
        if ((v & 1u) == bits[i]) continue;
        if (v == 0) v = 1;
        else if (v == 255) v = 254;
        else v = static_cast<std::uint8_t>(up ? v + 1 : v - 1);
      }
      break;
    }
    case Method::DctQim:
      res.stego = detail::embed_qim(cover, payload::repetition_encode(bits, static_cast<std::size_t>(cfg.repetition)), cfg);
      break;
    case Method::Identity:
      break;
  }
  return res;
}

inline BitString extract(const ImageBuffer& stego, std::size_t n_bits, const StegoConfig& cfg) {
  const std::size_t cap = capacity(stego, cfg);
  if (n_bits > cap)
    fail(Errc::CapacityExceeded, "requested " + std::to_string(n_bits) + " bits beyond capacity " +
                                     std::to_string(cap));
  std::vector<std::uint8_t> out(n_bits, 0);
  if (n_bits == 0) return BitString(std::move(out));
  const auto s = stego.samples();
  switch (cfg.method) {
    case Method::LsbReplace:
    case Method::LsbMatch: {
      const auto k = static_cast<std::size_t>(cfg.k_planes);
      const auto perm = keyed_permutation(stego.size(), cfg.key);
      for (std::size_t i = 0; i < n_bits; ++i) out[i] = (s[perm[i / k]] >> (i % k)) & 1u;
      return BitString(std::move(out));
    }
    case Method::DctQim: {
      const auto l = detail::qim_layout(stego, cfg);
      const auto perm = keyed_permutation(l.slots(), cfg.key);
      const auto coefs = detail::slot_coefficients(stego, l);
      const auto r = static_cast<std::size_t>(cfg.repetition);
      std::vector<std::uint8_t> coded(n_bits * r);
      for (std::size_t i = 0; i < coded.size(); ++i)
        coded[i] = static_cast<std::uint8_t>(detail::qim_decide(coefs[perm[i]], cfg.delta));
      return payload::repetition_decode(BitString(std::move(coded)), r);
    }
    case Method::Identity:
      break;
  }
  return BitString(std::move(out));
}

// ---- channel calibration -------------------------------------------------

struct CalibrationCandidate {
  double delta = 0.0;
  int repetition = 1;
  bool feasible = true;  // payloads fit within capacity
  double mean_ber = 1.0;
  double mean_psnr_db = 0.0;
};

struct CalibrationResult {
  StegoConfig config;
  bool best_effort = false;
  double mean_ber = 1.0;
  double mean_psnr_db = 0.0;
  std::vector<CalibrationCandidate> candidates;  // grid order: deltas outer, repetitions inner
};

// Grid search over (delta, repetition) for a DctQim config: embed, pass the
// stego through `channel`, extract, and score BER. Among candidates meeting
// target_ber the highest mean cover/stego PSNR wins; otherwise the lowest BER
// is returned flagged best-effort. Ties keep grid order.
inline CalibrationResult calibrate_robust(const std::vector<ImageBuffer>& covers,
                                          const std::vector<BitString>& payloads,
                                          const channel::ChannelSpec& ch, double target_ber,
                                          const std::vector<double>& deltas,
                                          const std::vector<int>& repetitions,
                                          StegoConfig base = {}) {
  if (covers.empty()) fail(Errc::EmptyCoverSet, "calibration needs at least one cover");
  if (payloads.empty()) fail(Errc::EmptyCoverSet, "calibration needs at least one payload");
  if (deltas.empty() || repetitions.empty()) fail(Errc::EmptyGrid, "calibration grid is empty");
  base.method = Method::DctQim;

  CalibrationResult result;
  for (double d : deltas)
    for (int r : repetitions) {
      StegoConfig cfg = base;
      cfg.delta = d;
      cfg.repetition = r;
      validate(cfg);
      CalibrationCandidate cand{d, r, true, 0.0, 0.0};
      struct Item {
        bool fits = true;
        double ber = 0.0;
        double psnr_db = 0.0;
      };
      const auto items = parallel_map<Item>(covers.size(), [&](std::size_t i) {
        const auto& cover = covers[i];
        const auto& bits = payloads[i % payloads.size()];
        if (bits.size() > capacity(cover, cfg)) return Item{false, 1.0, 0.0};
        const auto stego = embed(cover, bits, cfg).stego;
        const auto received = channel::apply_channel(stego, ch);
        const auto got = extract(received, bits.size(), cfg);
        return Item{true, metrics::bit_error_rate(bits, got), metrics::pixel_fidelity(cover, stego).psnr_db};
      });
      double psnr_sum = 0.0;
      for (const auto& it : items) {
        if (!it.fits) cand.feasible = false;
        cand.mean_ber += it.ber;
        psnr_sum += it.psnr_db;
      }
      cand.mean_ber /= static_cast<double>(items.size());
      cand.mean_psnr_db = psnr_sum / static_cast<double>(items.size());
      result.candidates.push_back(cand);
    }

  const CalibrationCandidate* best = nullptr;
  for (const auto& c : result.candidates)
    if (c.feasible && c.mean_ber <= target_ber && (!best || c.mean_psnr_db > best->mean_psnr_db)) best = &c;
  result.best_effort = best == nullptr;
  if (!best) {
    for (const auto& c : result.candidates) {
      if (!c.feasible) continue;
      if (!best || c.mean_ber < best->mean_ber ||
          (c.mean_ber == best->mean_ber && c.mean_psnr_db > best->mean_psnr_db))
        best = &c;
    }
  }
  if (!best) fail(Errc::PayloadTooLarge, "no calibration candidate can carry the payloads");
  result.config = base;
  result.config.delta = best->delta;
  result.config.repetition = best->repetition;
  result.mean_ber = best->mean_ber;
  result.mean_psnr_db = best->mean_psnr_db;
  return result;
}

// ---- JSON ------------------------------------------------------------------

inline nlohmann::ordered_json to_json(const StegoConfig& c) {
  nlohmann::ordered_json j;
  j["method"] = to_string(c.method);
  j["k_planes"] = c.k_planes;
  j["delta"] = c.delta;
  j["band"] = c.band;
  j["repetition"] = c.repetition;
  j["key"] = c.key;
  return j;
}

inline StegoConfig from_json(const nlohmann::json& j) {
  StegoConfig c;
  try {
    c.method = method_from_string(j.at("method").get<std::string>());
    c.k_planes = j.value("k_planes", c.k_planes);
    c.delta = j.value("delta", c.delta);
    if (j.contains("band")) c.band = j.at("band").get<std::vector<int>>();
    c.repetition = j.value("repetition", c.repetition);
    c.key = j.value("key", c.key);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("malformed stego config: ") + e.what());
  }
  validate(c);
  return c;
}

}  // namespace sb::stego
