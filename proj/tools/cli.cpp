#include "cli.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "walnet/config.hpp"
#include "walnet/data.hpp"
#include "walnet/errors.hpp"
#include "walnet/experiment.hpp"
#include "walnet/io.hpp"
#include "walnet/pgm.hpp"
#include "walnet/train.hpp"

namespace walnet::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Common {
  std::string config_path;
  std::string out;
  std::vector<std::string> sets;
  std::optional<std::uint64_t> seed;
  std::optional<int> epochs;
  std::optional<int> seeds;
  std::string data_dir;
  std::string roi_strategy;
  int verbose = 0;
  bool quiet = false;
};

/// Raised for problems with the request itself (exit code 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

void add_common(CLI::App* cmd, Common& c, bool with_training_flags) {
  cmd->add_option("-c,--config", c.config_path, "JSON config file (defaults when omitted)");
  cmd->add_option("-o,--out", c.out, "Output directory");
  cmd->add_option("--set", c.sets, "Override a config key: dotted.key=value (repeatable)");
  cmd->add_option("--seed", c.seed, "Base seed");
  cmd->add_option("--data", c.data_dir, "Dataset directory (instead of in-memory synthetic data)");
  if (with_training_flags) {
    cmd->add_option("--epochs", c.epochs, "Training epochs");
    cmd->add_option("--seeds", c.seeds, "Number of seeds");
    cmd->add_option("--roi-strategy", c.roi_strategy, "ROI strategy for the classification branch");
  }
  cmd->add_flag("-v,--verbose", c.verbose, "More logging (repeatable)");
  cmd->add_flag("-q,--quiet", c.quiet, "Only warnings and errors");
}

void flatten(const json& node, const std::string& prefix, std::vector<std::string>& out) {
  for (const auto& [key, value] : node.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (value.is_object()) flatten(value, path, out);
    else out.push_back(path + " = " + value.dump());
  }
}

void print_schema_help(std::ostream& os) {
  std::vector<std::string> keys;
  flatten(config::ExperimentConfig{}.to_json(), "", keys);
  os << "Config keys (with defaults); set them in the JSON file or with --set key=value:\n";
  for (const auto& k : keys) os << "  " << k << "\n";
}

/// Config file, then --set overrides, then dedicated flags.
config::ExperimentConfig resolve(const Common& c) {
  json doc = json::object();
  if (!c.config_path.empty()) {
    try {
      doc = json::parse(io::read_text(c.config_path));
    } catch (const json::parse_error& e) {
      throw ConfigError("config " + c.config_path + ": " + e.what());
    } catch (const InputError& e) {
      throw ConfigError(e.what());
    }
  }
  for (const auto& s : c.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
    config::apply_override(doc, s.substr(0, eq), s.substr(eq + 1));
  }
  if (c.seed) doc["seed"] = *c.seed;
  if (c.epochs) config::apply_override(doc, "train.epochs", std::to_string(*c.epochs));
  if (c.seeds) config::apply_override(doc, "seeds", std::to_string(*c.seeds));
  if (!c.data_dir.empty()) config::apply_override(doc, "data.dir", json(c.data_dir).dump());
  if (!c.roi_strategy.empty()) {
    config::apply_override(doc, "model.roi_strategy", json(c.roi_strategy).dump());
  }
  return config::from_json(doc);
}

void setup_logging(const Common& c) {
  if (c.quiet) spdlog::set_level(spdlog::level::warn);
  else if (c.verbose > 0) spdlog::set_level(spdlog::level::debug);
  else spdlog::set_level(spdlog::level::info);
  spdlog::set_pattern("[%H:%M:%S] %v");
}

fs::path out_dir(const Common& c, const std::string& fallback) {
  return c.out.empty() ? fs::path(fallback) : fs::path(c.out);
}

void write_resolved(const fs::path& dir, const config::ExperimentConfig& cfg) {
  io::write_text(dir / "config.resolved.json", cfg.to_json().dump(2) + "\n");
}

experiment::Logger logger() {
  return [](const std::string& m) { spdlog::info("{}", m); };
}

int cmd_synth(const config::ExperimentConfig& cfg, const Common& c) {
  const fs::path out = out_dir(c, "data/" + cfg.name);
  const auto ds = data::generate_synthetic(cfg.data.synthetic);
  data::write_dataset(out, ds);
  write_resolved(out, cfg);
  const auto counts = ds.class_counts();
  spdlog::info("wrote {} samples ({} / {} / {}) to {}", ds.samples.size(), counts[0], counts[1],
               counts[2], out.string());
  return 0;
}

int cmd_train(const config::ExperimentConfig& cfg, const Common& c) {
  const fs::path out = out_dir(c, "runs/" + cfg.name + "/seed0");
  write_resolved(out, cfg);
  const auto ds = experiment::obtain_dataset(cfg);
  const auto outcome = experiment::run_seed(cfg, ds, 0, out, logger());
  spdlog::info("test accuracy {:.4f}, checkpoint {} ({})", outcome.test.accuracy,
               (out / "checkpoint.bin").string(), outcome.checkpoint_hash);
  return 0;
}

int cmd_eval(const config::ExperimentConfig& cfg, const Common& c, const std::string& run_dir,
             const std::string& split_name) {
  const fs::path run(run_dir);
  const fs::path sidecar = run / "config.json";
  json side = json::parse(io::read_text(sidecar));
  if (side.value("model", json()) != config::model_to_json(cfg.model)) {
    throw ConfigError("checkpoint " + run.string() +
                      " was trained with a different model config than the one given");
  }
  const auto net = train::load_model(run / "checkpoint.bin", sidecar);
  const fs::path out = out_dir(c, (run / ("eval_" + split_name)).string());
  write_resolved(out, cfg);
  const auto ds = experiment::obtain_dataset(cfg);
  const std::uint64_t split_seed = side.value("split_seed", cfg.seed);
  const auto split = data::split(ds, cfg.data.ratios, split_seed, cfg.data.split_level);
  const std::vector<std::size_t>* part = split_name == "train" ? &split.train
                                         : split_name == "val" ? &split.val
                                                               : &split.test;
  const auto ev = train::evaluate(net, ds, *part);
  train::write_evaluation(out, ev, ds);
  spdlog::info("{} split: accuracy {:.4f}, kappa {:.4f} -> {}", split_name, ev.report.accuracy,
               ev.report.kappa, out.string());
  for (const auto& w : ev.report.warnings) spdlog::warn("{}", w);
  return 0;
}

int cmd_experiment(const config::ExperimentConfig& cfg, const Common& c) {
  const fs::path out = out_dir(c, "runs/" + cfg.name);
  write_resolved(out, cfg);
  const auto ds = experiment::obtain_dataset(cfg);
  const auto res = experiment::run_experiment(cfg, ds, cfg.seeds, out, logger());
  std::cout << experiment::render_table({res});
  return 0;
}

int cmd_variants(const config::ExperimentConfig& cfg, const Common& c, bool ablation) {
  const fs::path out = out_dir(c, "runs/" + cfg.name + (ablation ? "_ablation" : "_roi"));
  write_resolved(out, cfg);
  const auto ds = experiment::obtain_dataset(cfg);
  const auto variants = ablation ? experiment::ablation_variants(cfg) : experiment::roi_variants(cfg);
  const std::string title = ablation ? "Ablation" : "ROI strategy comparison";
  const auto rows = experiment::run_variants(variants, ds, cfg.seeds, out, title, logger());
  std::cout << experiment::render_table(rows);
  return 0;
}

std::vector<std::uint8_t> overlay_boundaries(const imaging::RasterImage& img,
                                             const imaging::BinaryMask& edges) {
  const auto gray = img.luminance();
  std::vector<std::uint8_t> rgb(gray.size() * 3);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    const auto v = static_cast<std::uint8_t>(std::lround(std::clamp(gray[i], 0.0, 1.0) * 255));
    rgb[3 * i] = edges[i] ? 255 : v;
    rgb[3 * i + 1] = edges[i] ? 40 : v;
    rgb[3 * i + 2] = edges[i] ? 40 : v;
  }
  return rgb;
}

int cmd_pgm_preview(const config::ExperimentConfig& cfg, const Common& c, int count,
                    const std::string& run_dir) {
  const fs::path out = out_dir(c, "runs/" + cfg.name + "/pgm_preview");
  write_resolved(out, cfg);
  const auto ds = experiment::obtain_dataset(cfg);
  std::optional<model::WalNet> net;
  if (!run_dir.empty()) net.emplace(train::load_model(fs::path(run_dir) / "checkpoint.bin",
                                                      fs::path(run_dir) / "config.json"));
  else net.emplace(cfg.model, train::Seeds::for_run(cfg.seed, 0).init);
  if (!net->config().use_attention) throw ConfigError("pgm-preview needs a model with attention gates");
  nn::NoGradGuard no_grad;
  const int n = std::min<int>(count, static_cast<int>(ds.samples.size()));
  for (int i = 0; i < n; ++i) {
    const auto& s = ds.samples[i];
    const auto result = net->forward(s.image);
    const auto trace = pgm::generate_pseudo_mask_trace(s.image, result.attention_set(), cfg.pgm);
    const auto edges = imaging::region_boundaries(trace.superpixels);
    io::write_image(out / (s.id + "_image.png"), s.image);
    io::write_rgb(out / (s.id + "_superpixels.png"), s.image.rows(), s.image.cols(),
                  overlay_boundaries(s.image, edges));
    io::write_mask(out / (s.id + "_pseudo_mask.png"), trace.mask.mask);
    io::write_gray(out / (s.id + "_fused.png"), imaging::minmax_normalize(trace.fused));
    if (s.gt_mask) io::write_mask(out / (s.id + "_gt.png"), *s.gt_mask);
  }
  spdlog::info("wrote {} pseudo-mask previews to {}", n, out.string());
  return 0;
}

}  // namespace

int dispatch(int argc, const char* const* argv) {
  CLI::App app{"WAL-Net: weakly supervised auxiliary segmentation for plaque classification", "walnet"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");
  bool schema = false;
  app.add_flag("--schema", schema, "Print every config key with its default and exit");

  Common c;
  std::string run_dir;
  std::string split_name = "test";
  int count = 8;

  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  add_common(synth, c, false);
  auto* trn = app.add_subcommand("train", "Train one seed and evaluate it on the test split");
  add_common(trn, c, true);
  auto* eval = app.add_subcommand("eval", "Evaluate a trained run on a split");
  add_common(eval, c, false);
  eval->add_option("--run", run_dir, "Run directory holding checkpoint.bin and config.json")->required();
  eval->add_option("--split", split_name, "train, val or test")
      ->check(CLI::IsMember({"train", "val", "test"}));
  auto* exper = app.add_subcommand("experiment", "Train and test every seed; mean (std) report");
  add_common(exper, c, true);
  auto* ablate = app.add_subcommand("ablate", "Ablation table: plain classifier, w/o RCM, full model");
  add_common(ablate, c, true);
  auto* roi = app.add_subcommand("roi-compare", "Compare the five ROI strategies");
  add_common(roi, c, true);
  auto* preview = app.add_subcommand("pgm-preview", "Write image / superpixel / pseudo-mask PNGs");
  add_common(preview, c, false);
  preview->add_option("-n,--count", count, "Number of samples")->check(CLI::PositiveNumber);
  preview->add_option("--run", run_dir, "Trained run directory (default: freshly initialised model)");

  // --schema works without a subcommand.
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--schema") {
      print_schema_help(std::cout);
      return 0;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  setup_logging(c);

  config::ExperimentConfig cfg;
  try {
    cfg = resolve(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n\n";
    print_schema_help(std::cerr);
    return 1;
  }

  try {
    if (synth->parsed()) return cmd_synth(cfg, c);
    if (trn->parsed()) return cmd_train(cfg, c);
    if (eval->parsed()) return cmd_eval(cfg, c, run_dir, split_name);
    if (exper->parsed()) return cmd_experiment(cfg, c);
    if (ablate->parsed()) return cmd_variants(cfg, c, true);
    if (roi->parsed()) return cmd_variants(cfg, c, false);
    if (preview->parsed()) return cmd_pgm_preview(cfg, c, count, run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace walnet::cli
