// sb: command-line front end for the steganography benchmark toolkit.
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sb/harness.hpp"

namespace fs = std::filesystem;
using sb::harness::Json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

Json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) sb::fail(sb::Errc::FileNotFound, "cannot open config: " + path);
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    sb::fail(sb::Errc::InvalidConfig, "malformed JSON in " + path + ": " + e.what());
  }
}

// A config file may hold the section directly or nest it under `key`.
Json section(const Json& cfg, const char* key) { return cfg.is_object() && cfg.contains(key) ? cfg.at(key) : cfg; }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) sb::fail(sb::Errc::FileNotFound, "cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) sb::fail(sb::Errc::IoFailure, "cannot write " + path);
  out << text;
}

std::vector<sb::imagecore::ImageBuffer> read_images(const std::string& dir) {
  std::vector<sb::imagecore::ImageBuffer> out;
  for (const auto& p : sb::harness::list_image_dir(dir)) out.push_back(sb::imagecore::read_image(p));
  return out;
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required) {
  cmd->add_option("--config", c.config, "JSON config file");
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "master seed");
  auto* out = cmd->add_option("--out", c.out, "output path");
  if (out_required) out->required();
}

sb::stego::StegoConfig stego_config(const Common& c) {
  if (c.config.empty()) return sb::stego::from_json(Json{{"method", "lsb_replace"}});
  return sb::stego::from_json(section(load_json(c.config), "stego"));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Steganography benchmark toolkit"};
  app.require_subcommand(1);
  Common common;

  // embed
  auto* embed = app.add_subcommand("embed", "Embed a payload into a cover image");
  add_common(embed, common, true);
  std::string cover_path, text, text_file, secret_path;
  embed->add_option("--cover", cover_path, "cover image")->required();
  auto* g_text = embed->add_option("--text", text, "UTF-8 text payload");
  auto* g_tfile = embed->add_option("--text-file", text_file, "file whose bytes are the payload");
  auto* g_secret = embed->add_option("--secret", secret_path, "secret image payload");
  g_text->excludes(g_tfile)->excludes(g_secret);
  g_tfile->excludes(g_secret);

  // extract
  auto* extract = app.add_subcommand("extract", "Recover a payload from a stego image");
  add_common(extract, common, false);
  std::string stego_path, as = "text";
  std::size_t n_bits = 0, sec_w = 0, sec_h = 0, sec_c = 3;
  extract->add_option("--stego", stego_path, "stego image")->required();
  extract->add_option("--bits", n_bits, "payload length in bits (text/bits)");
  extract->add_option("--as", as, "text | image | bits")->check(CLI::IsMember({"text", "image", "bits"}));
  extract->add_option("--width", sec_w, "secret width (image)");
  extract->add_option("--height", sec_h, "secret height (image)");
  extract->add_option("--channels", sec_c, "secret channels (image)");

  // perturb
  auto* perturb = app.add_subcommand("perturb", "Pass an image through a channel");
  add_common(perturb, common, true);
  std::string in_path, preset;
  perturb->add_option("--in", in_path, "input image")->required();
  perturb->add_option("--preset", preset, "channel preset name");

  // metrics
  auto* metrics = app.add_subcommand("metrics", "Compare images or texts");
  add_common(metrics, common, false);
  std::string ref_path, test_path, ref_text, got_text;
  metrics->add_option("--ref", ref_path, "reference image");
  metrics->add_option("--test", test_path, "test image");
  metrics->add_option("--ref-text", ref_text, "reference text");
  metrics->add_option("--got-text", got_text, "recovered text");

  // detector
  std::string covers_dir, stegos_dir, model_path;
  std::vector<std::string> score_inputs;
  auto* dtrain = app.add_subcommand("detect-train", "Train a steganalysis detector");
  add_common(dtrain, common, true);
  dtrain->add_option("--covers", covers_dir, "directory of cover images")->required();
  dtrain->add_option("--stegos", stegos_dir, "directory of stego images")->required();
  auto* dscore = app.add_subcommand("detect-score", "Score images with a detector");
  add_common(dscore, common, false);
  dscore->add_option("--model", model_path, "detector model JSON")->required();
  dscore->add_option("images", score_inputs, "images to score")->required();
  auto* deval = app.add_subcommand("detect-eval", "Evaluate a detector on labelled sets");
  add_common(deval, common, false);
  deval->add_option("--model", model_path, "detector model JSON")->required();
  deval->add_option("--covers", covers_dir, "directory of cover images")->required();
  deval->add_option("--stegos", stegos_dir, "directory of stego images")->required();

  // run
  auto* run = app.add_subcommand("run", "Run an experiment task and emit a report");
  add_common(run, common, true);
  std::string task;
  run->add_option("task", task, "capability | detection | transfer | robustness | efficiency")
      ->required()
      ->check(CLI::IsMember(sb::harness::task_names()));
  run->get_option("--config")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (embed->parsed()) {
      const auto cfg = stego_config(common);
      const auto cover = sb::imagecore::read_image(cover_path);
      sb::payload::BitString bits;
      if (!secret_path.empty())
        bits = sb::payload::image_to_bits(sb::imagecore::read_image(secret_path));
      else if (!text_file.empty())
        bits = sb::payload::bytes_to_bits(read_file(text_file));
      else
        bits = sb::payload::text_to_bits(text);
      const auto res = sb::stego::embed(cover, bits, cfg);
      sb::imagecore::write_image(res.stego, common.out);
      std::cout << Json{{"embedded_bits", res.embedded_bits}, {"capacity_bits", res.capacity_bits}}.dump() << "\n";
    } else if (extract->parsed()) {
      const auto cfg = stego_config(common);
      const auto img = sb::imagecore::read_image(stego_path);
      if (as == "image") {
        if (sec_w == 0 || sec_h == 0) sb::fail(sb::Errc::InvalidConfig, "--as image needs --width and --height");
        if (common.out.empty()) sb::fail(sb::Errc::InvalidConfig, "--as image needs --out");
        const auto bits = sb::stego::extract(img, sec_w * sec_h * sec_c * 8, cfg);
        sb::imagecore::write_image(sb::payload::bits_to_image(bits, sec_w, sec_h, sec_c), common.out);
      } else {
        if (n_bits == 0) sb::fail(sb::Errc::InvalidConfig, "--bits is required");
        const auto bits = sb::stego::extract(img, n_bits, cfg);
        const std::string text_out = as == "text" ? sb::payload::bits_to_text(bits) : bits.to_string();
        if (common.out.empty())
          std::cout << text_out << "\n";
        else
          write_file(common.out, text_out);
      }
    } else if (perturb->parsed()) {
      sb::channel::ChannelSpec spec;
      if (!preset.empty())
        spec = sb::channel::platform_preset(preset);
      else if (!common.config.empty())
        spec = sb::channel::from_json(section(load_json(common.config), "channel"));
      else
        sb::fail(sb::Errc::InvalidConfig, "perturb needs --preset or --config");
      sb::imagecore::write_image(sb::channel::apply_channel(sb::imagecore::read_image(in_path), spec), common.out);
    } else if (metrics->parsed()) {
      Json out = Json::object();
      if (!ref_path.empty() || !test_path.empty()) {
        if (ref_path.empty() || test_path.empty()) sb::fail(sb::Errc::InvalidConfig, "--ref and --test go together");
        const auto a = sb::imagecore::read_image(ref_path);
        const auto b = sb::imagecore::read_image(test_path);
        const auto fid = sb::metrics::pixel_fidelity(a, b);
        auto ex = std::make_shared<sb::metrics::PyramidExtractor>();
        auto model = sb::metrics::LpipsModel::uniform(ex, a.channels());
        if (!common.config.empty()) {
          const Json cfg = load_json(common.config);
          if (cfg.contains("lpips_weights"))
            model.weights = sb::metrics::load_lpips_weights(
                fs::path(common.config).parent_path() / cfg.at("lpips_weights").get<std::string>());
        }
        out["mae"] = fid.mae;
        out["psnr_db"] = sb::harness::number(fid.psnr_db);
        out["ssim"] = sb::harness::number(sb::harness::detail::ssim_or_nan(a, b));
        out["lpips"] = sb::metrics::lpips(a, b, model);
      }
      if (metrics->count("--ref-text") || metrics->count("--got-text")) {
        const auto r = sb::metrics::text_recovery(ref_text, got_text);
        out["emr"] = r.emr_match ? 1.0 : 0.0;
        out["cer"] = r.cer;
        out["ber"] = r.ber;
      }
      if (out.empty()) sb::fail(sb::Errc::InvalidConfig, "metrics needs --ref/--test or --ref-text/--got-text");
      const std::string s = out.dump(2) + "\n";
      if (common.out.empty())
        std::cout << s;
      else
        write_file(common.out, s);
    } else if (dtrain->parsed()) {
      sb::steganalysis::TrainOptions opt;
      if (!common.config.empty()) {
        const Json d = section(load_json(common.config), "detector");
        opt.n_learners = d.value("n_learners", opt.n_learners);
        opt.subspace_dim = d.value("subspace_dim", opt.subspace_dim);
        opt.holdout_fraction = d.value("holdout_fraction", opt.holdout_fraction);
        opt.seed = d.value("seed", opt.seed);
      }
      if (common.seed_set) opt.seed = common.seed;
      const auto model = sb::steganalysis::train_detector(read_images(covers_dir), read_images(stegos_dir), opt);
      write_file(common.out, sb::steganalysis::to_json(model).dump(2) + "\n");
    } else if (dscore->parsed()) {
      const auto model = sb::steganalysis::model_from_json(load_json(model_path));
      Json out = Json::array();
      for (const auto& p : score_inputs) {
        const double s = sb::steganalysis::score_image(model, sb::imagecore::read_image(p));
        out.push_back({{"image", p}, {"score", s}, {"stego", s >= model.threshold}});
      }
      std::cout << out.dump(2) << "\n";
    } else if (deval->parsed()) {
      const auto model = sb::steganalysis::model_from_json(load_json(model_path));
      const auto ev = sb::steganalysis::evaluate_detector(model, read_images(covers_dir), read_images(stegos_dir));
      std::cout << sb::harness::detection_json(ev.metrics, model.threshold).dump(2) << "\n";
    } else if (run->parsed()) {
      Json cfg = load_json(common.config);
      if (!cfg.is_object()) sb::fail(sb::Errc::InvalidConfig, "config must be a JSON object");
      if (common.seed_set) cfg["seed"] = common.seed;
      if (!cfg.contains("seed")) cfg["seed"] = 1;
      cfg["task"] = task;
      sb::harness::Context ctx(fs::path(common.config).parent_path());
      const auto report = sb::harness::run_task(task, cfg, ctx);
      sb::harness::emit_report(report, common.out);
      std::cerr << "wrote " << (fs::path(common.out) / "report.json").string() << "\n";
    }
  } catch (const sb::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.is_config_error() ? kExitConfig : kExitRuntime;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid config: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
