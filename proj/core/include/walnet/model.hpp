#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "walnet/classes.hpp"
#include "walnet/imaging.hpp"
#include "walnet/layers.hpp"
#include "walnet/pgm.hpp"
#include "walnet/rcm.hpp"
#include "walnet/tensor.hpp"

namespace walnet::model {

inline constexpr std::array<int, 4> kStageStrides{4, 8, 16, 32};

struct ModelConfig {
  int input_size = 64;
  int in_channels = 1;
  std::array<int, 4> widths{32, 64, 128, 256};
  std::array<int, 4> blocks{1, 1, 1, 1};
  int stem_width = 16;
  bool use_split_attention = false;
  /// Attention gates on f1..f3; off for the plain-classifier ablation.
  bool use_attention = true;
  /// Segmentation decoder supervised by pseudo masks.
  bool use_segmentation = true;
  int aspp_width = 64;
  std::vector<int> aspp_rates{1, 6, 12, 18};
  int low_level_width = 48;
  int decoder_width = 64;
  rcm::RoiParams roi;

  /// Paper-scale encoder: 224 input, 50-layer split-attention widths.
  static ModelConfig paper_scale();
  /// 8x8 input, widths [4,8,16,32], one block per stage.
  static ModelConfig tiny();

  /// Throws ConfigError naming the first offending field.
  void validate() const;
};

/// One gated encoder level.
struct GateOutput {
  nn::Tensor attended;
  nn::Tensor alpha;  // [1,H,W] in [0,1]
};

struct EncoderFeatures {
  std::array<nn::Tensor, 4> raw;       // f1..f4, [c_i, ceil(H/s), ceil(W/s)]
  std::array<nn::Tensor, 3> attended;  // gated f1..f3 (raw when attention is off)
  std::array<nn::Tensor, 3> alpha;     // undefined when attention is off
};

struct ModelOutput {
  nn::Tensor seg_prob;      // [1,H,W]; undefined without the segmentation branch
  nn::Tensor class_logits;  // [3]
  EncoderFeatures features;
  std::optional<imaging::BBox> roi_box;
  bool roi_fallback = false;
  int input_rows = 0;
  int input_cols = 0;

  /// Attention maps as plain values for the pseudo-mask generator.
  pgm::AttentionSet attention_set() const;
  imaging::ScalarMap seg_map() const;
  std::vector<double> logits() const;
};

struct ForwardOptions {
  /// Replaces the box the cropping strategies derive from the prediction.
  std::optional<imaging::BBox> forced_box;
};

class WalNet {
 public:
  WalNet(const ModelConfig& config, std::uint64_t seed);
  WalNet(const WalNet&) = delete;
  WalNet& operator=(const WalNet&) = delete;
  WalNet(WalNet&&) noexcept;
  WalNet& operator=(WalNet&&) noexcept;
  ~WalNet();

  const ModelConfig& config() const { return config_; }
  nn::ParameterStore& parameters() { return store_; }
  const nn::ParameterStore& parameters() const { return store_; }

  /// Input tensor [C,H,W] for an image of the configured size.
  nn::Tensor input_tensor(const imaging::RasterImage& img) const;

  GateOutput attention_gate(int level, const nn::Tensor& x, const nn::Tensor& gating) const;
  EncoderFeatures encoder_forward(const nn::Tensor& input) const;
  /// Sigmoid probability map at input resolution.
  nn::Tensor decoder_forward(const EncoderFeatures& features, int rows, int cols) const;
  /// Mean of per-depth affine heads over global-average-pooled features.
  nn::Tensor classification_head(const std::vector<nn::Tensor>& roi_features) const;

  ModelOutput forward(const imaging::RasterImage& img, const ForwardOptions& options = {}) const;

 private:
  struct Impl;
  ModelConfig config_;
  nn::ParameterStore store_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace walnet::model
