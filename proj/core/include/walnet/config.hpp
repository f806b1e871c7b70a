#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "walnet/data.hpp"
#include "walnet/model.hpp"
#include "walnet/pgm.hpp"

namespace walnet::config {

inline constexpr int kSchemaVersion = 1;

struct DataConfig {
  /// Dataset directory; empty means generate `synthetic` in memory.
  std::string dir;
  data::SyntheticSpec synthetic;
  data::SplitRatios ratios;
  data::SplitLevel split_level = data::SplitLevel::image;
};

struct TrainConfig {
  int epochs = 30;
  int batch_size = 8;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Stop once validation accuracy has not improved for this many epochs; 0 disables.
  int patience = 0;
};

struct ExperimentConfig {
  std::string name = "walnet";
  std::uint64_t seed = 0;
  int seeds = 5;
  DataConfig data;
  model::ModelConfig model;
  /// Superpixel scale tuned for the 64x64 synthetic images.
  pgm::PgmParams pgm{{50.0, 0.8, 20}, 0.5};
  TrainConfig train;

  /// Throws ConfigError naming the offending key.
  void validate() const;
  /// Fully resolved form, every default spelled out.
  nlohmann::json to_json() const;
};

/// Strict parse: every key must exist in the resolved default schema and
/// carry the right type; missing keys keep their defaults. schema_version,
/// when present, must equal kSchemaVersion.
ExperimentConfig from_json(const nlohmann::json& j);
ExperimentConfig load(const std::string& path);

/// Sets `dotted.key` in a config document. The value text is parsed as JSON
/// and falls back to a plain string. Unknown keys raise ConfigError.
void apply_override(nlohmann::json& doc, const std::string& key, const std::string& value);

nlohmann::json model_to_json(const model::ModelConfig& m);
model::ModelConfig model_from_json(const nlohmann::json& j);

}  // namespace walnet::config
