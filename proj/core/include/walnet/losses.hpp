#pragma once

#include <span>
#include <string>
#include <vector>

#include "walnet/imaging.hpp"
#include "walnet/tensor.hpp"

namespace walnet::losses {

/// Probabilities are clamped to [eps, 1 - eps] before taking logs.
inline constexpr double kProbEpsilon = 1e-7;

struct LossBundle {
  double seg = 0.0;
  double cls = 0.0;
  double total = 0.0;
};

/// Binary cross-entropy between predictions and pseudo masks, averaged over
/// samples and pixels.
double segmentation_loss(std::span<const imaging::ScalarMap> predictions,
                         std::span<const imaging::BinaryMask> targets);

/// Softmax cross-entropy averaged over samples. Labels index the logits.
double classification_loss(std::span<const std::vector<double>> logits, std::span<const int> labels);

/// seg + cls. Throws NumericalError mentioning `batch_id` when either part is
/// not finite.
LossBundle total_loss(double seg, double cls, const std::string& batch_id = "?");

/// Graph versions for one sample. `seg_prob` is [1,H,W], the target is a
/// constant of the graph.
nn::Tensor segmentation_loss(const nn::Tensor& seg_prob, const imaging::BinaryMask& target);
nn::Tensor classification_loss(const nn::Tensor& logits, int label);

}  // namespace walnet::losses
