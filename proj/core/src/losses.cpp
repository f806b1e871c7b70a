#include "walnet/losses.hpp"

#include <algorithm>
#include <cmath>

#include "walnet/errors.hpp"
#include "walnet/ops.hpp"

namespace walnet::losses {

namespace {

double clamp_prob(double s) { return std::clamp(s, kProbEpsilon, 1.0 - kProbEpsilon); }

double pixel_bce(double s, std::uint8_t d) {
  const double p = clamp_prob(s);
  return d ? -std::log(p) : -std::log(1.0 - p);
}

}  // namespace

double segmentation_loss(std::span<const imaging::ScalarMap> predictions,
                         std::span<const imaging::BinaryMask> targets) {
  if (predictions.size() != targets.size() || predictions.empty()) {
    throw InputError("segmentation_loss: batch sizes differ or are empty");
  }
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t b = 0; b < predictions.size(); ++b) {
    const auto& s = predictions[b];
    const auto& d = targets[b];
    if (!s.same_shape(d)) throw InputError("segmentation_loss: prediction/target shape mismatch");
    for (std::size_t i = 0; i < s.size(); ++i) acc += pixel_bce(s[i], d[i]);
    count += s.size();
  }
  return acc / static_cast<double>(count);
}

double classification_loss(std::span<const std::vector<double>> logits, std::span<const int> labels) {
  if (logits.size() != labels.size() || logits.empty()) {
    throw InputError("classification_loss: batch sizes differ or are empty");
  }
  double acc = 0.0;
  for (std::size_t b = 0; b < logits.size(); ++b) {
    const auto& z = logits[b];
    const int y = labels[b];
    if (y < 0 || y >= static_cast<int>(z.size())) {
      throw InputError("classification_loss: label " + std::to_string(y) + " out of range");
    }
    const double mx = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - mx);
    acc += -(z[y] - mx - std::log(sum));
  }
  return acc / static_cast<double>(logits.size());
}

LossBundle total_loss(double seg, double cls, const std::string& batch_id) {
  if (!std::isfinite(seg) || !std::isfinite(cls)) {
    throw NumericalError("non-finite loss in batch " + batch_id + " (seg=" + std::to_string(seg) +
                         ", cls=" + std::to_string(cls) + ")");
  }
  return LossBundle{seg, cls, seg + cls};
}

nn::Tensor segmentation_loss(const nn::Tensor& seg_prob, const imaging::BinaryMask& target) {
  if (seg_prob.rank() != 3 || seg_prob.dim(0) != 1 || seg_prob.dim(1) != target.rows() ||
      seg_prob.dim(2) != target.cols()) {
    throw InputError("segmentation_loss: prediction " + nn::shape_string(seg_prob.dims()) +
                     " vs target " + std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  }
  const std::size_t n = target.size();
  auto s = seg_prob.values();
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += pixel_bce(s[i], target[i]);
  const double inv_n = 1.0 / static_cast<double>(n);
  std::vector<std::uint8_t> d(target.values().begin(), target.values().end());
  return nn::detail::make_result({1}, {acc * inv_n}, {seg_prob},
                                 [inv_n, d = std::move(d)](nn::Node& self) {
    auto& parent = self.parents[0];
    if (!parent->requires_grad) return;
    auto& g = parent->grad_buffer();
    const double upstream = self.grad[0] * inv_n;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double raw = parent->value[i];
      // Zero gradient where the clamp is active.
      if (raw < kProbEpsilon || raw > 1.0 - kProbEpsilon) continue;
      g[i] += upstream * (d[i] ? -1.0 / raw : 1.0 / (1.0 - raw));
    }
  });
}

nn::Tensor classification_loss(const nn::Tensor& logits, int label) {
  if (label < 0 || label >= static_cast<int>(logits.numel())) {
    throw InputError("classification_loss: label " + std::to_string(label) + " out of range");
  }
  const nn::Tensor logp = nn::log_softmax(logits);
  std::vector<double> pick(logits.numel(), 0.0);
  pick[label] = -1.0;
  return nn::sum(nn::mul(logp, nn::Tensor::from(logits.dims(), std::move(pick))));
}

}  // namespace walnet::losses
