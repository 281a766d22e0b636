#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "sb/channel.hpp"
#include "sb/image_io.hpp"
#include "sb/lpips.hpp"
#include "sb/metrics.hpp"
#include "sb/parallel.hpp"
#include "sb/payload.hpp"
#include "sb/report.hpp"
#include "sb/rng.hpp"
#include "sb/steganalysis.hpp"
#include "sb/stego.hpp"
#include "sb/synth.hpp"

namespace sb::harness {

using imagecore::ImageBuffer;
using payload::BitString;
namespace fs = std::filesystem;

// ---- dataset splits --------------------------------------------------------

enum class Split { Train, Val, Test };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "?";
}

struct DatasetManifest {
  std::string name;
  std::vector<std::string> paths;
  std::vector<Split> splits;  // parallel to paths
  std::uint64_t seed = 0;

  // Indices in `paths` assigned to s, ascending.
  std::vector<std::size_t> indices(Split s) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < splits.size(); ++i)
      if (splits[i] == s) out.push_back(i);
    return out;
  }
  std::size_t count(Split s) const { return static_cast<std::size_t>(std::count(splits.begin(), splits.end(), s)); }
};

inline constexpr std::size_t kMinSplitItems = 10;

// Seeded shuffle followed by a partition of the given sizes.
inline DatasetManifest split_dataset_counts(const std::vector<std::string>& paths, std::uint64_t seed,
                                            std::size_t n_train, std::size_t n_val, std::size_t n_test,
                                            std::string name = {}) {
  if (paths.size() < kMinSplitItems) fail(Errc::TooFewImages, "splitting needs at least 10 items");
  if (n_train + n_val + n_test != paths.size())
    fail(Errc::InvalidConfig, "split counts must add up to the number of items (" + std::to_string(paths.size()) + ")");
  DatasetManifest m{std::move(name), paths, std::vector<Split>(paths.size(), Split::Test), seed};
  const auto perm = keyed_permutation(paths.size(), seed);
  for (std::size_t k = 0; k < perm.size(); ++k)
    m.splits[perm[k]] = k < n_train ? Split::Train : k < n_train + n_val ? Split::Val : Split::Test;
  return m;
}

// 7:1:2 partition; train and val sizes are rounded, test takes the rest.
inline DatasetManifest split_dataset(const std::vector<std::string>& paths, std::uint64_t seed, std::string name = {}) {
  if (paths.size() < kMinSplitItems) fail(Errc::TooFewImages, "splitting needs at least 10 items");
  const double n = static_cast<double>(paths.size());
  const auto n_train = static_cast<std::size_t>(std::llround(0.7 * n));
  const auto n_val = static_cast<std::size_t>(std::llround(0.1 * n));
  return split_dataset_counts(paths, seed, n_train, n_val, paths.size() - n_train - n_val, std::move(name));
}

inline Json to_json(const DatasetManifest& m) {
  Json j;
  j["name"] = m.name;
  j["seed"] = m.seed;
  j["counts"] = {{"train", m.count(Split::Train)}, {"val", m.count(Split::Val)}, {"test", m.count(Split::Test)}};
  Json items = Json::array();
  for (std::size_t i = 0; i < m.paths.size(); ++i) items.push_back({{"path", m.paths[i]}, {"split", to_string(m.splits[i])}});
  j["items"] = std::move(items);
  return j;
}

// ---- config helpers ----------------------------------------------------------

// Seed streams; every random choice in a run hangs off one of these.
enum Stream : std::uint64_t { kCoverStream = 1, kSplitStream = 2, kPayloadStream = 3, kDetectorStream = 4 };

namespace detail {

template <typename T>
T get_or(const Json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::InvalidConfig, std::string("bad value for \"") + key + "\": " + e.what());
  }
}

inline const Json& require(const Json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) fail(Errc::InvalidConfig, std::string("missing config field \"") + key + "\"");
  return j.at(key);
}

inline fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() || base.empty() ? path : base / path;
}

inline double ms_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

inline TimingRecord summarize(std::string phase, std::vector<double> samples) {
  TimingRecord r{std::move(phase), samples.size(), 0.0, 0.0, 0.0};
  if (samples.empty()) return r;
  for (double s : samples) r.total_ms += s;
  std::sort(samples.begin(), samples.end());
  const auto pick = [&](double q) {
    const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size()))) - 1;
    return samples[std::min(idx, samples.size() - 1)];
  };
  const std::size_t n = samples.size();
  r.median_ms = n % 2 ? samples[n / 2] : 0.5 * (samples[n / 2 - 1] + samples[n / 2]);
  r.p90_ms = pick(0.9);
  return r;
}

}  // namespace detail

// ---- covers -----------------------------------------------------------------

struct Dataset {
  DatasetManifest manifest;
  std::vector<ImageBuffer> images;  // parallel to manifest.paths
  std::string key;                  // cache key: identical specs share a dataset

  std::vector<std::size_t> indices(Split s) const { return manifest.indices(s); }
};

inline std::vector<std::string> list_image_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail(Errc::FileNotFound, "cover directory not found: " + dir.string());
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    auto ext = e.path().extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    if (ext == ".png" || ext == ".ppm" || ext == ".pgm" || ext == ".pnm") out.push_back(e.path().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

// covers: {"synthetic": {"count", "size", "style", "seed"?}} | {"paths": [...]} | {"dir": "..."}
// split:  absent or "7:1:2" for the ratio split, or {"train", "val", "test"} counts.
inline Dataset load_dataset(const Json& covers, const Json& split, std::uint64_t seed, const fs::path& base_dir) {
  Dataset ds;
  ds.manifest.name = detail::get_or<std::string>(covers, "name", "");
  std::vector<std::string> ids;
  if (covers.contains("synthetic")) {
    const Json& s = covers.at("synthetic");
    const auto count = detail::get_or<std::size_t>(s, "count", 320);
    const auto size = detail::get_or<std::size_t>(s, "size", 256);
    const auto style = synth::style_from_string(detail::get_or<std::string>(s, "style", "natural"));
    const auto cover_seed = detail::get_or<std::uint64_t>(s, "seed", derive_seed(seed, kCoverStream));
    if (size < 16) fail(Errc::InvalidConfig, "synthetic cover size must be at least 16");
    for (std::size_t i = 0; i < count; ++i)
      ids.push_back(std::string("synthetic:") + synth::to_string(style) + ":" + std::to_string(size) + ":" +
                    std::to_string(cover_seed) + ":" + std::to_string(i));
    ds.images = parallel_map<ImageBuffer>(count, [&](std::size_t i) {
      return synth::synthetic_cover(size, size, item_seed(cover_seed, i), style);
    });
    if (ds.manifest.name.empty()) ds.manifest.name = std::string("synthetic-") + synth::to_string(style);
  } else {
    if (covers.contains("paths")) {
      for (const auto& p : detail::get_or<std::vector<std::string>>(covers, "paths", {}))
        ids.push_back(detail::resolve(base_dir, p).string());
    } else if (covers.contains("dir")) {
      ids = list_image_dir(detail::resolve(base_dir, covers.at("dir").get<std::string>()));
    } else {
      fail(Errc::InvalidConfig, "covers needs one of \"synthetic\", \"paths\" or \"dir\"");
    }
    for (const auto& p : ids)
      if (!fs::exists(p)) fail(Errc::FileNotFound, "cover image not found: " + p);
    ds.images = parallel_map<ImageBuffer>(ids.size(), [&](std::size_t i) { return imagecore::read_image(ids[i]); });
  }
  const std::uint64_t split_seed = derive_seed(seed, kSplitStream);
  if (split.is_null() || (split.is_string() && split.get<std::string>() == "7:1:2")) {
    auto m = split_dataset(ids, split_seed, ds.manifest.name);
    ds.manifest = std::move(m);
  } else if (split.is_object()) {
    auto m = split_dataset_counts(ids, split_seed, detail::get_or<std::size_t>(split, "train", 0),
                                  detail::get_or<std::size_t>(split, "val", 0),
                                  detail::get_or<std::size_t>(split, "test", 0), ds.manifest.name);
    ds.manifest = std::move(m);
  } else {
    fail(Errc::InvalidConfig, "split must be \"7:1:2\" or an object of counts");
  }
  ds.key = covers.dump() + "|" + split.dump() + "|" + std::to_string(seed);
  return ds;
}

// ---- payloads ------------------------------------------------------------------

enum class PayloadKind { Text, Image, Random };

struct PayloadSpec {
  PayloadKind kind = PayloadKind::Text;
  std::vector<std::string> corpus;  // empty: synthetic texts
  std::size_t min_chars = 32, max_chars = 96;
  double ratio = 0.125;  // image payloads: secret side / cover side
  synth::CoverStyle secret_style = synth::CoverStyle::Smooth;
  double rate = 1.0;  // random payloads: fraction of capacity
  std::uint64_t seed = 0;
  // Corpus indices per split: a 7:1:2 partition for corpora of 10+ lines,
  // otherwise the whole corpus everywhere.
  std::map<Split, std::vector<std::size_t>> corpus_split;
};

struct Payload {
  PayloadKind kind = PayloadKind::Text;
  std::string text;
  std::optional<ImageBuffer> secret;
  BitString bits;
};

inline const char* to_string(PayloadKind k) {
  switch (k) {
    case PayloadKind::Text: return "text";
    case PayloadKind::Image: return "image";
    case PayloadKind::Random: return "random";
  }
  return "?";
}

// payload: {"kind": "text", "corpus"?: path, "min_chars", "max_chars"}
//        | {"kind": "image", "ratio", "style"} | {"kind": "random", "rate"}
inline PayloadSpec parse_payload(const Json& j, std::uint64_t seed, const fs::path& base_dir) {
  PayloadSpec p;
  p.seed = detail::get_or<std::uint64_t>(j, "seed", derive_seed(seed, kPayloadStream));
  const auto kind = detail::get_or<std::string>(j, "kind", "text");
  if (kind == "text") {
    p.kind = PayloadKind::Text;
    p.min_chars = detail::get_or<std::size_t>(j, "min_chars", p.min_chars);
    p.max_chars = detail::get_or<std::size_t>(j, "max_chars", p.max_chars);
    if (p.min_chars == 0 || p.max_chars < p.min_chars) fail(Errc::InvalidConfig, "need 0 < min_chars <= max_chars");
    if (j.is_object() && j.contains("corpus")) {
      const auto path = detail::resolve(base_dir, j.at("corpus").get<std::string>());
      if (!fs::exists(path)) fail(Errc::FileNotFound, "payload corpus not found: " + path.string());
      p.corpus = payload::read_text_corpus(path);
      if (p.corpus.empty()) fail(Errc::EmptyCorpus, "payload corpus is empty: " + path.string());
      std::vector<std::string> ids(p.corpus.size());
      for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = std::to_string(i);
      if (p.corpus.size() >= kMinSplitItems) {
        const auto m = split_dataset(ids, derive_seed(p.seed, kSplitStream));
        for (Split s : {Split::Train, Split::Val, Split::Test}) p.corpus_split[s] = m.indices(s);
      } else {
        std::vector<std::size_t> all(p.corpus.size());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        for (Split s : {Split::Train, Split::Val, Split::Test}) p.corpus_split[s] = all;
      }
    }
  } else if (kind == "image") {
    p.kind = PayloadKind::Image;
    p.ratio = detail::get_or<double>(j, "ratio", p.ratio);
    payload::payload_rate(p.ratio);  // range check
    p.secret_style = synth::style_from_string(detail::get_or<std::string>(j, "style", "smooth"));
  } else if (kind == "random") {
    p.kind = PayloadKind::Random;
    p.rate = detail::get_or<double>(j, "rate", p.rate);
    if (!(p.rate > 0.0 && p.rate <= 1.0)) fail(Errc::InvalidConfig, "random payload rate must lie in (0, 1]");
  } else {
    fail(Errc::InvalidConfig, "unknown payload kind: " + kind);
  }
  return p;
}

// Payload for the k-th item of a split. Corpora cycle when shorter than the split.
inline Payload make_payload(const PayloadSpec& spec, Split split, std::size_t k, const ImageBuffer& cover,
                            const stego::StegoConfig& cfg) {
  Payload p;
  p.kind = spec.kind;
  const std::uint64_t s = item_seed(derive_seed(spec.seed, static_cast<std::uint64_t>(split) + 1), k);
  switch (spec.kind) {
    case PayloadKind::Text: {
      if (spec.corpus.empty()) {
        p.text = synth::synthetic_text(s, spec.min_chars, spec.max_chars);
      } else {
        const auto& idx = spec.corpus_split.at(split);
        p.text = spec.corpus[idx[k % idx.size()]];
      }
      p.bits = payload::text_to_bits(p.text);
      break;
    }
    case PayloadKind::Image: {
      const auto sw = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(cover.width()))));
      const auto sh = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(spec.ratio * static_cast<double>(cover.height()))));
      p.secret = synth::synthetic_cover(sw, sh, s, spec.secret_style, cover.channels());
      p.bits = payload::image_to_bits(*p.secret);
      break;
    }
    case PayloadKind::Random: {
      const auto cap = stego::capacity(cover, cfg);
      const auto n = static_cast<std::size_t>(std::floor(spec.rate * static_cast<double>(cap)));
      Rng rng(mix_seed(s));
      std::vector<std::uint8_t> bits(n);
      for (auto& b : bits) b = rng.coin() ? 1 : 0;
      p.bits = BitString(std::move(bits));
      break;
    }
  }
  return p;
}

// ---- experiment context -----------------------------------------------------------

// One fully resolved condition: covers, payloads, embedder, channel, detector.
struct Condition {
  std::string label;
  Json config;  // effective config after overrides
  std::shared_ptr<const Dataset> dataset;
  PayloadSpec payload;
  stego::StegoConfig stego;
  channel::ChannelSpec channel;
  steganalysis::TrainOptions detector;
};

class Context {
 public:
  explicit Context(fs::path base_dir = {}) : base_dir_(std::move(base_dir)) {}

  const fs::path& base_dir() const { return base_dir_; }

  Condition resolve(const Json& cfg, std::string label = {}) {
    Condition c;
    c.label = std::move(label);
    c.config = cfg;
    const auto seed = detail::get_or<std::uint64_t>(cfg, "seed", 1);
    const Json covers = cfg.contains("covers") ? cfg.at("covers") : Json{{"synthetic", Json::object()}};
    const Json split = cfg.contains("split") ? cfg.at("split") : Json(nullptr);
    const std::string key = covers.dump() + "|" + split.dump() + "|" + std::to_string(seed);
    auto it = datasets_.find(key);
    if (it == datasets_.end())
      it = datasets_.emplace(key, std::make_shared<Dataset>(load_dataset(covers, split, seed, base_dir_))).first;
    c.dataset = it->second;
    c.payload = parse_payload(cfg.contains("payload") ? cfg.at("payload") : Json::object(), seed, base_dir_);
    c.stego = stego::from_json(cfg.contains("stego") ? cfg.at("stego") : Json{{"method", "lsb_replace"}});
    c.channel = cfg.contains("channel") ? channel::from_json(cfg.at("channel")) : channel::platform_preset("identity");
    const Json det = cfg.contains("detector") ? cfg.at("detector") : Json::object();
    c.detector.seed = detail::get_or<std::uint64_t>(det, "seed", derive_seed(seed, kDetectorStream));
    c.detector.n_learners = detail::get_or<std::size_t>(det, "n_learners", c.detector.n_learners);
    c.detector.subspace_dim = detail::get_or<std::size_t>(det, "subspace_dim", c.detector.subspace_dim);
    c.detector.holdout_fraction = detail::get_or<double>(det, "holdout_fraction", c.detector.holdout_fraction);
    if (!(c.detector.holdout_fraction >= 0.0 && c.detector.holdout_fraction < 1.0))
      fail(Errc::InvalidConfig, "holdout_fraction must lie in [0, 1)");
    if (cfg.contains("lpips_weights") && !lpips_weights_)
      lpips_weights_ = metrics::load_lpips_weights(detail::resolve(base_dir_, cfg.at("lpips_weights").get<std::string>()));
    return c;
  }

  double lpips(const ImageBuffer& x, const ImageBuffer& y) const {
    auto ex = std::make_shared<metrics::PyramidExtractor>();
    auto model = lpips_weights_ ? metrics::LpipsModel{ex, *lpips_weights_} : metrics::LpipsModel::uniform(ex, x.channels());
    return metrics::lpips(x, y, model);
  }

  // Feature vectors are memoized per (images, embedder, payload) description.
  const std::vector<std::vector<double>>& cover_features(const Condition& c, Split s) {
    const std::string key = "cover|" + c.dataset->key + "|" + to_string(s);
    auto it = features_.find(key);
    if (it != features_.end()) return it->second;
    const auto idx = c.dataset->indices(s);
    auto f = parallel_map<std::vector<double>>(idx.size(), [&](std::size_t k) {
      return steganalysis::residual_features(c.dataset->images[idx[k]]).values;
    });
    return features_.emplace(key, std::move(f)).first->second;
  }

  const std::vector<std::vector<double>>& stego_features(const Condition& c, Split s) {
    const Json pj = c.config.contains("payload") ? c.config.at("payload") : Json::object();
    const std::string key = "stego|" + c.dataset->key + "|" + to_string(s) + "|" + stego::to_json(c.stego).dump() +
                            "|" + pj.dump();
    auto it = features_.find(key);
    if (it != features_.end()) return it->second;
    const auto idx = c.dataset->indices(s);
    auto f = parallel_map<std::vector<double>>(idx.size(), [&](std::size_t k) {
      const auto& cover = c.dataset->images[idx[k]];
      const auto p = make_payload(c.payload, s, k, cover, c.stego);
      return steganalysis::residual_features(stego::embed(cover, p.bits, c.stego).stego).values;
    });
    return features_.emplace(key, std::move(f)).first->second;
  }

 private:
  fs::path base_dir_;
  std::map<std::string, std::shared_ptr<const Dataset>> datasets_;
  std::map<std::string, std::vector<std::vector<double>>> features_;
  std::optional<std::vector<std::vector<double>>> lpips_weights_;
};

// ---- capability ------------------------------------------------------------------

inline std::vector<std::string> capability_columns(PayloadKind kind) {
  std::vector<std::string> cols = {"item", "cover_mae", "cover_psnr_db", "cover_ssim", "cover_lpips"};
  if (kind == PayloadKind::Text) {
    cols.insert(cols.end(), {"emr", "cer", "ber"});
  } else if (kind == PayloadKind::Image) {
    cols.insert(cols.end(), {"secret_mae", "secret_psnr_db", "secret_ssim", "secret_lpips", "ber"});
  } else {
    cols.push_back("ber");
  }
  return cols;
}

namespace detail {

inline double ssim_or_nan(const ImageBuffer& a, const ImageBuffer& b) {
  const metrics::SsimParams p;
  if (std::min(a.width(), a.height()) < static_cast<std::size_t>(p.window)) return std::nan("");
  return metrics::ssim(a, b, p);
}

}  // namespace detail

// Embed, pass through `ch`, extract, and score every item of `split`. Cover
// and payload come from `data`; `cfg` is the embedder applied to them.
inline Table capability_table(const Context& ctx, const Condition& data, const stego::StegoConfig& cfg,
                              const channel::ChannelSpec& ch, Split split = Split::Test) {
  const auto idx = data.dataset->indices(split);
  Table t{capability_columns(data.payload.kind), {}};
  auto rows = parallel_map<std::vector<Cell>>(idx.size(), [&](std::size_t k) {
    const auto& cover = data.dataset->images[idx[k]];
    const auto p = make_payload(data.payload, split, k, cover, cfg);
    const auto stego_img = stego::embed(cover, p.bits, cfg).stego;
    const auto received = channel::apply_channel(stego_img, ch);
    const auto got = stego::extract(received, p.bits.size(), cfg);
    const auto fid = metrics::pixel_fidelity(cover, stego_img);
    std::vector<Cell> row = {data.dataset->manifest.paths[idx[k]], fid.mae, fid.psnr_db,
                             detail::ssim_or_nan(cover, stego_img), ctx.lpips(cover, stego_img)};
    if (p.kind == PayloadKind::Text) {
      const auto r = metrics::text_recovery(p.text, payload::bits_to_text(got));
      row.insert(row.end(), {Cell(r.emr_match ? 1.0 : 0.0), Cell(r.cer), Cell(r.ber)});
    } else if (p.kind == PayloadKind::Image) {
      const auto& sec = *p.secret;
      const auto rec = payload::bits_to_image(got, sec.width(), sec.height(), sec.channels());
      const auto sf = metrics::pixel_fidelity(sec, rec);
      row.insert(row.end(), {Cell(sf.mae), Cell(sf.psnr_db), Cell(detail::ssim_or_nan(sec, rec)),
                             Cell(ctx.lpips(sec, rec)), Cell(metrics::bit_error_rate(p.bits, got))});
    } else {
      row.push_back(metrics::bit_error_rate(p.bits, got));
    }
    return row;
  });
  for (auto& r : rows) t.add(std::move(r));
  return t;
}

// Mean of every numeric column, keyed by column name.
inline Json column_means(const Table& t) {
  Json j = Json::object();
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    if (t.rows.empty() || std::holds_alternative<std::string>(t.rows.front()[c])) continue;
    j[t.columns[c]] = number(t.column_mean(t.columns[c]));
  }
  return j;
}

// ---- detection -------------------------------------------------------------------

struct DetectionOutcome {
  steganalysis::DetectorModel model;
  steganalysis::Evaluation eval;
};

inline steganalysis::DetectorModel train_condition_detector(Context& ctx, const Condition& c) {
  auto model = steganalysis::train_on_features(ctx.cover_features(c, Split::Train), ctx.stego_features(c, Split::Train),
                                               c.detector);
  model.train_manifest["condition"] = c.label;
  model.train_manifest["dataset"] = c.dataset->manifest.name;
  model.train_manifest["stego"] = stego::to_json(c.stego);
  return model;
}

inline steganalysis::Evaluation evaluate_condition(Context& ctx, const steganalysis::DetectorModel& model,
                                                   const Condition& test) {
  return steganalysis::evaluate_on_features(model, ctx.cover_features(test, Split::Test),
                                            ctx.stego_features(test, Split::Test));
}

inline Json detection_json(const metrics::DetectionMetrics& m, double threshold) {
  Json j;
  j["accuracy"] = m.accuracy;
  j["precision"] = m.precision;
  j["recall"] = m.recall;
  j["f1"] = m.f1;
  j["auc"] = m.auc ? Json(*m.auc) : Json(nullptr);
  j["threshold"] = threshold;
  j["confusion"] = {{"tp", m.confusion.tp}, {"fp", m.confusion.fp}, {"tn", m.confusion.tn}, {"fn", m.confusion.fn}};
  return j;
}

// ---- reports ---------------------------------------------------------------------

inline Json environment_json() {
  Json j;
  j["sb_threads"] = worker_count();
  j["hardware_concurrency"] = std::thread::hardware_concurrency();
#ifdef __VERSION__
  j["compiler"] = __VERSION__;
#endif
#ifdef NDEBUG
  j["build"] = "release";
#else
  j["build"] = "debug";
#endif
  return j;
}

inline RunReport new_report(const std::string& task, const Json& cfg) {
  RunReport r;
  r.task = task;
  r.config = cfg;
  r.config["task"] = task;
  r.environment = environment_json();
  r.timestamp = utc_timestamp();
  return r;
}

inline void add_dataset_table(RunReport& r, const Dataset& ds, const std::string& name = "manifest") {
  Table t{{"item", "split"}, {}};
  for (std::size_t i = 0; i < ds.manifest.paths.size(); ++i) t.add({ds.manifest.paths[i], to_string(ds.manifest.splits[i])});
  r.tables.emplace_back(name, std::move(t));
}

inline RunReport run_capability(const Json& cfg, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = new_report("capability", cfg);
  const auto c = ctx.resolve(cfg);
  auto t = capability_table(ctx, c, c.stego, c.channel);
  r.aggregates["n_items"] = t.rows.size();
  r.aggregates["payload"] = to_string(c.payload.kind);
  r.aggregates["means"] = column_means(t);
  r.tables.emplace_back("items", std::move(t));
  add_dataset_table(r, *c.dataset);
  r.timings.push_back(detail::summarize("capability", {detail::ms_since(t0)}));
  return r;
}

inline RunReport run_detection(const Json& cfg, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = new_report("detection", cfg);
  const auto c = ctx.resolve(cfg);
  const auto model = train_condition_detector(ctx, c);
  const auto ev = evaluate_condition(ctx, model, c);
  const auto idx = c.dataset->indices(Split::Test);
  Table t{{"item", "label", "score", "predicted"}, {}};
  for (std::size_t i = 0; i < ev.scores.labels.size(); ++i) {
    const std::size_t k = i % idx.size();
    t.add({c.dataset->manifest.paths[idx[k]], static_cast<long long>(ev.scores.labels[i]), ev.scores.scores[i],
           static_cast<long long>(ev.scores.scores[i] >= ev.scores.threshold ? 1 : 0)});
  }
  r.aggregates = detection_json(ev.metrics, model.threshold);
  r.aggregates["n_test"] = ev.scores.labels.size();
  r.aggregates["model_manifest"] = model.train_manifest;
  r.tables.emplace_back("scores", std::move(t));
  add_dataset_table(r, *c.dataset);
  r.timings.push_back(detail::summarize("detection", {detail::ms_since(t0)}));
  return r;
}

// Effective config of one transfer condition: base config minus the
// experiment-level keys, merge-patched with the condition's overrides.
inline Json condition_config(const Json& base, const Json& cond) {
  Json merged = base;
  for (const char* k : {"conditions", "side", "axis", "task"}) merged.erase(k);
  Json patch = cond;
  patch.erase("label");
  merged.merge_patch(patch);
  return merged;
}

inline std::vector<std::pair<std::string, Json>> parse_conditions(const Json& cfg) {
  if (!cfg.contains("conditions") || !cfg.at("conditions").is_array() || cfg.at("conditions").empty())
    fail(Errc::AxisTooSmall, "transfer needs at least one condition");
  std::vector<std::pair<std::string, Json>> out;
  std::size_t i = 0;
  for (const auto& cj : cfg.at("conditions")) {
    if (!cj.is_object()) fail(Errc::InvalidConfig, "each condition must be an object");
    const auto label = detail::get_or<std::string>(cj, "label", "c" + std::to_string(i));
    for (const auto& [l, _] : out)
      if (l == label) fail(Errc::InvalidConfig, "duplicate condition label: " + label);
    out.emplace_back(label, condition_config(cfg, cj));
    ++i;
  }
  return out;
}

// calibration: {"target_ber", "deltas", "repetitions"}; tuned on the val split.
inline stego::CalibrationResult calibrate_condition(const Condition& c, const channel::ChannelSpec& ch, const Json& cal) {
  const auto target = detail::get_or<double>(cal, "target_ber", 0.01);
  const auto deltas = detail::get_or<std::vector<double>>(cal, "deltas", {8.0, 12.0, 16.0, 24.0});
  const auto reps = detail::get_or<std::vector<int>>(cal, "repetitions", {1, 3, 5});
  const auto idx = c.dataset->indices(Split::Val);
  if (idx.empty()) fail(Errc::EmptyCoverSet, "calibration needs validation covers");
  std::vector<ImageBuffer> covers;
  std::vector<BitString> payloads;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    covers.push_back(c.dataset->images[idx[k]]);
    payloads.push_back(make_payload(c.payload, Split::Val, k, covers.back(), c.stego).bits);
  }
  return stego::calibrate_robust(covers, payloads, ch, target, deltas, reps, c.stego);
}

inline Json calibration_json(const stego::CalibrationResult& cr) {
  Json j;
  j["config"] = stego::to_json(cr.config);
  j["best_effort"] = cr.best_effort;
  j["val_mean_ber"] = cr.mean_ber;
  j["val_mean_psnr_db"] = number(cr.mean_psnr_db);
  return j;
}

inline Table calibration_table(const stego::CalibrationResult& cr) {
  Table t{{"delta", "repetition", "feasible", "mean_ber", "mean_psnr_db"}, {}};
  for (const auto& c : cr.candidates)
    t.add({c.delta, static_cast<long long>(c.repetition), static_cast<long long>(c.feasible), c.mean_ber, c.mean_psnr_db});
  return t;
}

// side "defense": rows train a detector per condition, columns test it.
// side "attack": rows supply the embedder config (calibrated on the row's
// validation covers when "calibration" is given), columns the covers,
// payloads and channel it is applied to.
inline RunReport run_transfer(const Json& cfg, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = new_report("transfer", cfg);
  const auto conds_cfg = parse_conditions(cfg);
  const auto side = detail::get_or<std::string>(cfg, "side", "defense");
  std::vector<Condition> conds;
  std::vector<std::string> labels;
  for (const auto& [label, c] : conds_cfg) {
    conds.push_back(ctx.resolve(c, label));
    labels.push_back(label);
  }
  const std::size_t n = conds.size();
  auto square = [&] { return Matrix{labels, labels, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0))}; };

  if (side == "defense") {
    Matrix f1 = square(), auc = square(), acc = square();
    Json manifests = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      const auto model = train_condition_detector(ctx, conds[i]);
      manifests.push_back(model.train_manifest);
      for (std::size_t j = 0; j < n; ++j) {
        const auto ev = evaluate_condition(ctx, model, conds[j]);
        f1.values[i][j] = ev.metrics.f1;
        auc.values[i][j] = ev.metrics.auc.value_or(std::nan(""));
        acc.values[i][j] = ev.metrics.accuracy;
      }
    }
    double diag = 0.0, off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) (i == j ? diag : off) += f1.values[i][j];
    r.aggregates["side"] = side;
    r.aggregates["mean_diagonal_f1"] = diag / static_cast<double>(n);
    r.aggregates["mean_off_diagonal_f1"] = n > 1 ? Json(off / static_cast<double>(n * (n - 1))) : Json(nullptr);
    r.aggregates["models"] = std::move(manifests);
    r.matrices.emplace_back("f1", std::move(f1));
    r.matrices.emplace_back("auc", std::move(auc));
    r.matrices.emplace_back("accuracy", std::move(acc));
  } else if (side == "attack") {
    Matrix psnr = square(), ber = square(), emr = square();
    bool any_text = false;
    Json configs = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
      stego::StegoConfig sc = conds[i].stego;
      if (conds[i].config.contains("calibration")) {
        const auto cr = calibrate_condition(conds[i], conds[i].channel, conds[i].config.at("calibration"));
        sc = cr.config;
        auto cj = calibration_json(cr);
        cj["condition"] = labels[i];
        configs.push_back(std::move(cj));
      } else {
        configs.push_back({{"condition", labels[i]}, {"config", stego::to_json(sc)}});
      }
      for (std::size_t j = 0; j < n; ++j) {
        const auto t = capability_table(ctx, conds[j], sc, conds[j].channel);
        psnr.values[i][j] = t.column_mean("cover_psnr_db");
        ber.values[i][j] = t.column_mean("ber");
        const bool text = conds[j].payload.kind == PayloadKind::Text;
        any_text = any_text || text;
        emr.values[i][j] = text ? t.column_mean("emr") : std::nan("");
      }
    }
    r.aggregates["side"] = side;
    r.aggregates["embedders"] = std::move(configs);
    r.matrices.emplace_back("cover_psnr_db", std::move(psnr));
    r.matrices.emplace_back("ber", std::move(ber));
    if (any_text) r.matrices.emplace_back("emr", std::move(emr));
  } else {
    fail(Errc::InvalidConfig, "transfer side must be \"defense\" or \"attack\"");
  }
  r.aggregates["n_conditions"] = n;
  r.timings.push_back(detail::summarize("transfer", {detail::ms_since(t0)}));
  return r;
}

inline std::vector<std::pair<std::string, channel::ChannelSpec>> parse_channels(const Json& cfg) {
  std::vector<std::pair<std::string, channel::ChannelSpec>> out;
  const Json list = cfg.contains("channels")
                        ? cfg.at("channels")
                        : Json::array({"identity", "sharpen", "resize075", "jpeg75", "jpeg95", "subsample420"});
  if (!list.is_array() || list.empty()) fail(Errc::EmptyGrid, "channels must be a non-empty list");
  for (const auto& cj : list) {
    auto spec = channel::from_json(cj);
    std::string label = spec.name.empty() ? "channel" + std::to_string(out.size()) : spec.name;
    out.emplace_back(std::move(label), std::move(spec));
  }
  return out;
}

inline RunReport run_robustness(const Json& cfg, Context& ctx) {
  const auto t0 = std::chrono::steady_clock::now();
  auto r = new_report("robustness", cfg);
  const auto c = ctx.resolve(cfg);
  const auto channels = parse_channels(cfg);
  auto cols = capability_columns(c.payload.kind);
  cols.front() = "channel";
  cols.insert(cols.begin() + 1, {"method", "delta", "repetition"});
  Table summary{cols, {}};
  Json per_channel = Json::object();
  for (const auto& [label, ch] : channels) {
    stego::StegoConfig sc = c.stego;
    Json info;
    if (cfg.contains("calibration")) {
      const auto cr = calibrate_condition(c, ch, cfg.at("calibration"));
      sc = cr.config;
      info["calibration"] = calibration_json(cr);
      r.tables.emplace_back("calibration_" + label, calibration_table(cr));
    }
    auto t = capability_table(ctx, c, sc, ch);
    std::vector<Cell> row = {label, std::string(stego::to_string(sc.method)), sc.delta,
                             static_cast<long long>(sc.repetition)};
    for (std::size_t k = 1; k < t.columns.size(); ++k) row.push_back(t.column_mean(t.columns[k]));
    summary.add(std::move(row));
    info["means"] = column_means(t);
    info["channel"] = channel::to_json(ch);
    per_channel[label] = std::move(info);
    r.tables.emplace_back("items_" + label, std::move(t));
  }
  r.aggregates["n_items"] = c.dataset->indices(Split::Test).size();
  r.aggregates["payload"] = to_string(c.payload.kind);
  r.aggregates["channels"] = std::move(per_channel);
  r.tables.insert(r.tables.begin(), {"summary", std::move(summary)});
  r.timings.push_back(detail::summarize("robustness", {detail::ms_since(t0)}));
  return r;
}

inline constexpr std::size_t kMinTimedItems = 20;

// Per-phase wall clock for each embedder: embed and extract per image,
// detector training (features plus fit), per-image detector scoring. The
// "total" record spans the timed phases only, not data preparation. Work inside a phase runs
// one item at a time so per-item numbers are not skewed by sharing.
inline RunReport run_efficiency(const Json& cfg, Context& ctx) {
  auto r = new_report("efficiency", cfg);
  std::vector<std::pair<std::string, Json>> variants;
  if (cfg.contains("stegos")) {
    for (const auto& s : cfg.at("stegos")) {
      const auto label = detail::get_or<std::string>(s, "label", detail::get_or<std::string>(s, "method", "stego"));
      Json patch = s;
      patch.erase("label");
      Json c = cfg;
      c.erase("stegos");
      c["stego"] = patch;
      variants.emplace_back(label, std::move(c));
    }
  } else {
    variants.emplace_back("default", cfg);
  }
  Table phases{{"phase", "n"}, {}};
  double total_ms = 0.0;
  for (const auto& [label, vcfg] : variants) {
    const auto c = ctx.resolve(vcfg, label);
    const auto idx = c.dataset->indices(Split::Test);
    if (idx.size() < kMinTimedItems) fail(Errc::InvalidConfig, "efficiency needs at least 20 test items");
    std::vector<Payload> payloads;
    for (std::size_t k = 0; k < idx.size(); ++k)
      payloads.push_back(make_payload(c.payload, Split::Test, k, c.dataset->images[idx[k]], c.stego));

    const auto train_idx = c.dataset->indices(Split::Train);
    std::vector<ImageBuffer> train_covers, train_stegos;
    for (std::size_t k = 0; k < train_idx.size(); ++k) {
      const auto& cover = c.dataset->images[train_idx[k]];
      train_covers.push_back(cover);
      train_stegos.push_back(
          stego::embed(cover, make_payload(c.payload, Split::Train, k, cover, c.stego).bits, c.stego).stego);
    }

    // Everything above is preparation; the timed phases start here.
    const auto timed0 = std::chrono::steady_clock::now();
    std::vector<double> embed_ms, extract_ms, score_ms;
    std::vector<ImageBuffer> stegos;
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto t = std::chrono::steady_clock::now();
      stegos.push_back(stego::embed(c.dataset->images[idx[k]], payloads[k].bits, c.stego).stego);
      embed_ms.push_back(detail::ms_since(t));
    }
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto t = std::chrono::steady_clock::now();
      (void)stego::extract(stegos[k], payloads[k].bits.size(), c.stego);
      extract_ms.push_back(detail::ms_since(t));
    }
    const auto tt = std::chrono::steady_clock::now();
    const auto model = steganalysis::train_detector(train_covers, train_stegos, c.detector);
    const double train_ms = detail::ms_since(tt);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto t = std::chrono::steady_clock::now();
      (void)steganalysis::score_image(model, stegos[k]);
      score_ms.push_back(detail::ms_since(t));
    }
    total_ms += detail::ms_since(timed0);
    for (auto& [phase, samples] : std::vector<std::pair<std::string, std::vector<double>>>{
             {label + "/embed", embed_ms},
             {label + "/extract", extract_ms},
             {label + "/detector_train", {train_ms}},
             {label + "/detector_score", score_ms}}) {
      phases.add({phase, static_cast<long long>(samples.size())});
      r.timings.push_back(detail::summarize(phase, std::move(samples)));
    }
  }
  r.timings.push_back(detail::summarize("total", {total_ms}));
  r.aggregates["n_variants"] = variants.size();
  r.tables.emplace_back("phases", std::move(phases));
  return r;
}

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names = {"capability", "detection", "transfer", "robustness", "efficiency"};
  return names;
}

inline RunReport run_task(const std::string& task, const Json& cfg, Context& ctx) {
  if (task == "capability") return run_capability(cfg, ctx);
  if (task == "detection") return run_detection(cfg, ctx);
  if (task == "transfer") return run_transfer(cfg, ctx);
  if (task == "robustness") return run_robustness(cfg, ctx);
  if (task == "efficiency") return run_efficiency(cfg, ctx);
  fail(Errc::InvalidConfig, "unknown task: " + task);
}

inline RunReport run_task(const Json& cfg, const fs::path& base_dir = {}) {
  Context ctx(base_dir);
  return run_task(detail::require(cfg, "task").get<std::string>(), cfg, ctx);
}

}  // namespace sb::harness
