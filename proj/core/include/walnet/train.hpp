#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "walnet/config.hpp"
#include "walnet/data.hpp"
#include "walnet/layers.hpp"
#include "walnet/metrics.hpp"
#include "walnet/model.hpp"

namespace walnet::train {

/// Adam with bias correction over every parameter of a store.
class Adam {
 public:
  Adam(nn::ParameterStore& store, double lr, double beta1 = 0.9, double beta2 = 0.999,
       double eps = 1e-8);

  /// Applies one update from the accumulated gradients multiplied by `grad_scale`.
  void step(double grad_scale = 1.0);
  long long steps() const { return t_; }

 private:
  nn::ParameterStore& store_;
  double lr_, beta1_, beta2_, eps_;
  long long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct StepRecord {
  int epoch = 0;
  int step = 0;
  std::string batch_id;
  double seg = 0;
  double cls = 0;
  double total = 0;
};

struct EpochRecord {
  int epoch = 0;
  double train_seg = 0;
  double train_cls = 0;
  double train_total = 0;
  double val_accuracy = 0;
  std::optional<double> val_dice;
  bool best = false;
};

struct TrainResult {
  std::vector<StepRecord> steps;
  std::vector<EpochRecord> epochs;
  int best_epoch = 0;
  double best_val_accuracy = -1;
};

struct Seeds {
  std::uint64_t split = 0;
  std::uint64_t init = 0;
  std::uint64_t order = 0;
  /// Seed k of an experiment: the split uses base + k, init and batch order
  /// derive from it.
  static Seeds for_run(std::uint64_t base, int k);
};

struct TrainOptions {
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Trains `net` on split.train, validating on split.val after every epoch,
/// and leaves the best-validation-accuracy parameters loaded. Throws
/// NumericalError naming the batch when a loss turns non-finite.
TrainResult fit(model::WalNet& net, const config::ExperimentConfig& cfg, const data::Dataset& ds,
                const data::Split& split, std::uint64_t order_seed, const TrainOptions& options = {});

struct Prediction {
  std::size_t index = 0;
  int label = 0;
  int predicted = 0;
  metrics::ProbRow probs{};
  std::optional<imaging::BBox> box;
  bool fallback = false;
  std::optional<double> dice;
};

struct Evaluation {
  metrics::MetricsReport report;
  std::vector<Prediction> predictions;
};

/// Inference over `indices`. Dice compares seg_prob >= roi_threshold with the
/// ground-truth mask when both exist and is averaged over samples.
Evaluation evaluate(const model::WalNet& net, const data::Dataset& ds,
                    std::span<const std::size_t> indices);

/// metrics.json, confusion.csv/.png, roc_<class|micro>.csv/.png, boxes.csv.
void write_evaluation(const std::filesystem::path& dir, const Evaluation& eval,
                      const data::Dataset& ds);

/// Binary file of named float64 arrays. Returns the FNV-1a hash of its bytes
/// as 16 hex digits.
std::string save_checkpoint(const std::filesystem::path& path, const nn::ParameterStore& store);
/// Loads into a store of the same architecture; mismatched names or shapes
/// raise ConfigError.
void load_checkpoint(const std::filesystem::path& path, nn::ParameterStore& store);
std::string file_hash(const std::filesystem::path& path);

/// Checkpoint sidecar: model config, seed, architecture and file hashes.
nlohmann::json checkpoint_sidecar(const model::WalNet& net, std::uint64_t seed,
                                  const std::string& checkpoint_hash);

/// Rebuilds a model from a sidecar and its checkpoint.
model::WalNet load_model(const std::filesystem::path& checkpoint,
                         const std::filesystem::path& sidecar);

/// One JSON object per line: every step, then every epoch summary.
void write_history(const std::filesystem::path& path, const TrainResult& result);

}  // namespace walnet::train
