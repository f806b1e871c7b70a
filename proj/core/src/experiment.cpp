#include "walnet/experiment.hpp"

#include <sstream>

#include "walnet/errors.hpp"
#include "walnet/io.hpp"

namespace walnet::experiment {

namespace fs = std::filesystem;

namespace {

void say(const Logger& log, const std::string& msg) {
  if (log) log(msg);
}

std::string fixed(double v, int digits) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

data::Dataset obtain_dataset(const config::ExperimentConfig& cfg) {
  if (!cfg.data.dir.empty()) return data::load_dataset(cfg.data.dir, cfg.model.input_size);
  if (cfg.data.synthetic.size != cfg.model.input_size) {
    throw ConfigError("config key 'data.synthetic.size': must equal model.input_size when generating");
  }
  return data::generate_synthetic(cfg.data.synthetic);
}

SeedOutcome run_seed(const config::ExperimentConfig& cfg, const data::Dataset& ds, int k,
                     const std::optional<fs::path>& dir, const Logger& log) {
  SeedOutcome out;
  out.k = k;
  out.seeds = train::Seeds::for_run(cfg.seed, k);
  const auto split = data::split(ds, cfg.data.ratios, out.seeds.split, cfg.data.split_level);
  model::WalNet net(cfg.model, out.seeds.init);

  train::TrainOptions options;
  options.on_epoch = [&](const train::EpochRecord& e) {
    say(log, cfg.name + " seed" + std::to_string(k) + " epoch " + std::to_string(e.epoch) +
                 ": seg " + fixed(e.train_seg, 4) + " cls " + fixed(e.train_cls, 4) + " val_acc " +
                 fixed(e.val_accuracy, 4) + (e.best ? " *" : ""));
  };
  const auto result = train::fit(net, cfg, ds, split, out.seeds.order, options);
  const auto test = train::evaluate(net, ds, split.test);
  out.test = test.report;
  out.best_epoch = result.best_epoch;
  out.best_val_accuracy = result.best_val_accuracy;
  for (const auto& e : result.epochs) out.epoch_train_loss.push_back(e.train_total);

  if (dir) {
    fs::create_directories(*dir);
    train::write_history(*dir / "history.jsonl", result);
    out.checkpoint_hash = train::save_checkpoint(*dir / "checkpoint.bin", net.parameters());
    auto side = train::checkpoint_sidecar(net, out.seeds.init, out.checkpoint_hash);
    side["split_seed"] = out.seeds.split;
    side["order_seed"] = out.seeds.order;
    side["best_epoch"] = out.best_epoch;
    side["best_val_accuracy"] = out.best_val_accuracy;
    io::write_text(*dir / "config.json", side.dump(2) + "\n");
    train::write_evaluation(*dir, test, ds);
  }
  say(log, cfg.name + " seed" + std::to_string(k) + ": test accuracy " + fixed(out.test.accuracy, 4) +
               " (best epoch " + std::to_string(out.best_epoch) + ")");
  return out;
}

Aggregate aggregate(const std::vector<SeedOutcome>& runs) {
  if (runs.empty()) throw InputError("aggregate: no runs");
  Aggregate agg;
  for (std::size_t m = 0; m < agg.table.size(); ++m) {
    std::vector<double> v;
    for (const auto& r : runs) v.push_back(metrics::table_values(r.test)[m]);
    agg.table[m] = metrics::mean_std(v);
  }
  std::vector<double> auc, dice;
  for (const auto& r : runs) {
    if (r.test.micro_auc) auc.push_back(*r.test.micro_auc);
    if (r.test.dice) dice.push_back(*r.test.dice);
  }
  if (auc.size() == runs.size()) agg.micro_auc = metrics::mean_std(auc);
  if (dice.size() == runs.size()) agg.dice = metrics::mean_std(dice);
  return agg;
}

ExperimentResult run_experiment(const config::ExperimentConfig& cfg, const data::Dataset& ds,
                                int n_seeds, const std::optional<fs::path>& dir, const Logger& log) {
  if (n_seeds < 1) throw ParameterError("run_experiment: n_seeds must be >= 1");
  cfg.validate();
  ExperimentResult res;
  res.label = cfg.name;
  res.architecture_hash = model::WalNet(cfg.model, 0).parameters().architecture_hash();
  for (int k = 0; k < n_seeds; ++k) {
    std::optional<fs::path> seed_dir;
    if (dir) seed_dir = *dir / ("seed" + std::to_string(k));
    res.runs.push_back(run_seed(cfg, ds, k, seed_dir, log));
  }
  res.aggregate = aggregate(res.runs);
  if (dir) io::write_text(*dir / "report.md", render_report(cfg.name, {res}));
  return res;
}

std::vector<Variant> ablation_variants(const config::ExperimentConfig& base) {
  std::vector<Variant> out;
  auto plain = base;
  plain.model.use_attention = false;
  plain.model.use_segmentation = false;
  plain.model.roi.strategy = rcm::RoiStrategy::none;
  out.push_back({"w/o RCM & PGM", "no_rcm_no_pgm", plain});
  auto no_rcm = base;
  no_rcm.model.use_attention = true;
  no_rcm.model.use_segmentation = true;
  no_rcm.model.roi.strategy = rcm::RoiStrategy::none;
  out.push_back({"w/o RCM", "no_rcm", no_rcm});
  auto full = no_rcm;
  full.model.roi.strategy = rcm::RoiStrategy::dilated_crop;
  out.push_back({"WAL-Net", "full", full});
  for (auto& v : out) v.cfg.name = base.name + "_" + v.slug;
  return out;
}

std::vector<Variant> roi_variants(const config::ExperimentConfig& base) {
  std::vector<Variant> out;
  for (auto s : rcm::comparison_strategies()) {
    auto cfg = base;
    cfg.model.use_attention = true;
    cfg.model.use_segmentation = true;
    cfg.model.roi.strategy = s;
    const std::string slug(rcm::to_string(s));
    cfg.name = base.name + "_" + slug;
    out.push_back({std::string(rcm::table_label(s)), slug, cfg});
  }
  return out;
}

std::vector<ExperimentResult> run_variants(const std::vector<Variant>& variants,
                                           const data::Dataset& ds, int n_seeds,
                                           const std::optional<fs::path>& dir,
                                           const std::string& title, const Logger& log) {
  std::vector<ExperimentResult> rows;
  for (const auto& v : variants) {
    std::optional<fs::path> sub;
    if (dir) sub = *dir / v.slug;
    auto res = run_experiment(v.cfg, ds, n_seeds, sub, log);
    res.label = v.label;
    rows.push_back(std::move(res));
  }
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < row.runs.size(); ++k) {
      const auto& a = row.runs[k].seeds;
      const auto& b = rows.front().runs[k].seeds;
      if (a.split != b.split || a.init != b.init || a.order != b.order) {
        throw InternalError("run_variants: seeds differ between variants at seed " + std::to_string(k));
      }
    }
  }
  std::ostringstream seeds;
  for (const auto& r : rows.front().runs) seeds << ' ' << r.seeds.split;
  say(log, title + ": identical split seeds across " + std::to_string(rows.size()) + " variants:" + seeds.str());
  if (dir) io::write_text(*dir / "report.md", render_report(title, rows));
  return rows;
}

std::string render_table(const std::vector<ExperimentResult>& rows) {
  std::ostringstream out;
  out << "| Method | Accuracy | F1-score | Kappa | Precision | Recall |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.label;
    for (const auto& cell : r.aggregate.table) out << " | " << metrics::format_cell(cell);
    out << " |\n";
  }
  return out.str();
}

std::string render_report(const std::string& title, const std::vector<ExperimentResult>& rows) {
  std::ostringstream out;
  out << "# " << title << "\n\n";
  const std::size_t seeds = rows.empty() ? 0 : rows.front().runs.size();
  out << "Mean (population std) over " << seeds << " seed" << (seeds == 1 ? "" : "s")
      << " on the test split.\n\n";
  out << render_table(rows) << "\n";
  out << "| Method | Micro AUC | Dice |\n|---|---|---|\n";
  for (const auto& r : rows) {
    out << "| " << r.label << " | "
        << (r.aggregate.micro_auc ? metrics::format_cell(*r.aggregate.micro_auc) : "n/a") << " | "
        << (r.aggregate.dice ? metrics::format_cell(*r.aggregate.dice) : "n/a") << " |\n";
  }
  out << "\nPer-seed test accuracy:\n\n";
  for (const auto& r : rows) {
    out << "- " << r.label << ":";
    for (const auto& s : r.runs) out << " " << fixed(s.test.accuracy, 4);
    out << "\n";
  }
  return out.str();
}

}  // namespace walnet::experiment
