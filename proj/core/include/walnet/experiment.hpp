#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "walnet/config.hpp"
#include "walnet/data.hpp"
#include "walnet/metrics.hpp"
#include "walnet/train.hpp"

namespace walnet::experiment {

using Logger = std::function<void(const std::string&)>;

struct SeedOutcome {
  int k = 0;
  train::Seeds seeds;
  metrics::MetricsReport test;
  int best_epoch = 0;
  double best_val_accuracy = 0;
  std::vector<double> epoch_train_loss;
  std::string checkpoint_hash;
};

struct Aggregate {
  /// accuracy, f1, kappa, precision, recall.
  std::array<metrics::MeanStd, 5> table{};
  std::optional<metrics::MeanStd> micro_auc;
  std::optional<metrics::MeanStd> dice;
};

struct ExperimentResult {
  std::string label;
  std::vector<SeedOutcome> runs;
  Aggregate aggregate;
  std::uint64_t architecture_hash = 0;
};

/// The configured dataset directory, or the synthetic spec generated in memory.
data::Dataset obtain_dataset(const config::ExperimentConfig& cfg);

/// Split, train, and test one seed. With `dir`, writes history.jsonl,
/// checkpoint.bin, config.json and the evaluation artifacts there.
SeedOutcome run_seed(const config::ExperimentConfig& cfg, const data::Dataset& ds, int k,
                     const std::optional<std::filesystem::path>& dir, const Logger& log = {});

Aggregate aggregate(const std::vector<SeedOutcome>& runs);

/// Seeds 0..n_seeds-1 under `dir`/seed<k>, plus report.md.
ExperimentResult run_experiment(const config::ExperimentConfig& cfg, const data::Dataset& ds,
                                int n_seeds, const std::optional<std::filesystem::path>& dir,
                                const Logger& log = {});

struct Variant {
  std::string label;
  std::string slug;
  config::ExperimentConfig cfg;
};

/// Plain classifier, attention + pseudo-mask segmentation without ROI
/// cropping, and the full model with dilated cropping.
std::vector<Variant> ablation_variants(const config::ExperimentConfig& base);
/// One variant per comparison strategy, in report order.
std::vector<Variant> roi_variants(const config::ExperimentConfig& base);

/// Runs every variant on the same data and seeds; throws InternalError if the
/// seeds used ever differ between variants.
std::vector<ExperimentResult> run_variants(const std::vector<Variant>& variants,
                                           const data::Dataset& ds, int n_seeds,
                                           const std::optional<std::filesystem::path>& dir,
                                           const std::string& title, const Logger& log = {});

/// Markdown table: one row per result, the five metric columns as "mean (std)".
std::string render_table(const std::vector<ExperimentResult>& rows);
std::string render_report(const std::string& title, const std::vector<ExperimentResult>& rows);

}  // namespace walnet::experiment
