#include "walnet/rcm.hpp"

#include <algorithm>
#include <cmath>

#include "walnet/errors.hpp"
#include "walnet/ops.hpp"

namespace walnet::rcm {

using imaging::BBox;
using imaging::BinaryMask;
using imaging::ScalarMap;

namespace {

struct StrategyName {
  RoiStrategy strategy;
  std::string_view key;
  std::string_view label;
};

constexpr StrategyName kStrategies[] = {
    {RoiStrategy::none, "none", "none"},
    {RoiStrategy::dilated_crop, "dilated_crop", "dilated crop"},
    {RoiStrategy::crop, "crop", "crop"},
    {RoiStrategy::bg_rm, "bg_rm", "bg rm"},
    {RoiStrategy::bg_rm_crop, "bg_rm_crop", "bg rm & crop"},
    {RoiStrategy::rwm, "rwm", "rwm"},
};

int ceil_div(int a, int b) { return (a + b - 1) / b; }

}  // namespace

RoiStrategy parse_roi_strategy(std::string_view name) {
  for (const auto& s : kStrategies) {
    if (s.key == name) return s.strategy;
  }
  std::string allowed;
  for (const auto& s : kStrategies) {
    if (!allowed.empty()) allowed += ", ";
    allowed += s.key;
  }
  throw ConfigError("roi_strategy: unknown value '" + std::string(name) + "' (allowed: " +
                    allowed + ")");
}

std::string_view to_string(RoiStrategy strategy) {
  for (const auto& s : kStrategies) {
    if (s.strategy == strategy) return s.key;
  }
  return "?";
}

std::string_view table_label(RoiStrategy strategy) {
  for (const auto& s : kStrategies) {
    if (s.strategy == strategy) return s.label;
  }
  return "?";
}

const std::vector<RoiStrategy>& comparison_strategies() {
  static const std::vector<RoiStrategy> order{RoiStrategy::rwm, RoiStrategy::bg_rm,
                                              RoiStrategy::bg_rm_crop, RoiStrategy::crop,
                                              RoiStrategy::dilated_crop};
  return order;
}

void RoiParams::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigError("roi_threshold must lie in (0,1)");
  }
  if (!(lambda_frac >= 0.0 && lambda_frac < 0.5)) {
    throw ConfigError("roi_lambda_frac must lie in [0,0.5)");
  }
  for (const auto& [r, c] : output_sizes) {
    if (r < 1 || c < 1) throw ConfigError("roi_output_sizes entries must be positive");
  }
}

std::optional<BBox> mask_to_bbox(const BinaryMask& mask) {
  int r0 = mask.rows(), c0 = mask.cols(), r1 = -1, c1 = -1;
  for (int r = 0; r < mask.rows(); ++r) {
    for (int c = 0; c < mask.cols(); ++c) {
      if (!mask(r, c)) continue;
      r0 = std::min(r0, r);
      c0 = std::min(c0, c);
      r1 = std::max(r1, r);
      c1 = std::max(c1, c);
    }
  }
  if (r1 < 0) return std::nullopt;
  return BBox{r0, c0, r1 + 1, c1 + 1};
}

BBox dilate_and_clamp(const BBox& box, double lambda_frac, int rows, int cols) {
  if (!box.valid_within(rows, cols)) throw InputError("dilate_and_clamp: box outside image");
  if (!(lambda_frac >= 0.0)) throw ParameterError("dilate_and_clamp: lambda_frac must be >= 0");
  const int pad_r = static_cast<int>(std::floor(lambda_frac * rows));
  const int pad_c = static_cast<int>(std::floor(lambda_frac * cols));
  return BBox{std::max(box.row0 - pad_r, 0), std::max(box.col0 - pad_c, 0),
              std::min(box.row1 + pad_r, rows), std::min(box.col1 + pad_c, cols)};
}

BBox scale_box(const BBox& box, int stride, int grid_rows, int grid_cols) {
  BBox out{box.row0 / stride, box.col0 / stride, ceil_div(box.row1, stride),
           ceil_div(box.col1, stride)};
  out.row0 = std::clamp(out.row0, 0, grid_rows - 1);
  out.col0 = std::clamp(out.col0, 0, grid_cols - 1);
  out.row1 = std::clamp(out.row1, out.row0 + 1, grid_rows);
  out.col1 = std::clamp(out.col1, out.col0 + 1, grid_cols);
  return out;
}

std::vector<nn::Tensor> crop_roi_features(const std::vector<DepthFeature>& features,
                                          const BBox& box, const RoiParams& params) {
  if (!params.output_sizes.empty() && params.output_sizes.size() != features.size()) {
    throw ConfigError("roi_output_sizes must list one size per classification depth");
  }
  std::vector<nn::Tensor> out;
  out.reserve(features.size());
  for (std::size_t d = 0; d < features.size(); ++d) {
    const auto& f = features[d];
    const int rows = f.tensor.dim(1);
    const int cols = f.tensor.dim(2);
    const BBox grid_box = scale_box(box, f.stride, rows, cols);
    auto [out_rows, out_cols] =
        params.output_sizes.empty() ? std::pair{rows, cols} : params.output_sizes[d];
    out.push_back(nn::resize(nn::crop(f.tensor, grid_box), out_rows, out_cols));
  }
  return out;
}

ScalarMap reduce_to_grid(const ScalarMap& map, int stride, int grid_rows, int grid_cols,
                         CellReduce mode) {
  ScalarMap out(grid_rows, grid_cols, 0.0);
  for (int i = 0; i < grid_rows; ++i) {
    for (int j = 0; j < grid_cols; ++j) {
      const int r_end = std::min((i + 1) * stride, map.rows());
      const int c_end = std::min((j + 1) * stride, map.cols());
      double acc = 0.0;
      int n = 0;
      for (int r = i * stride; r < r_end; ++r) {
        for (int c = j * stride; c < c_end; ++c) {
          acc = mode == CellReduce::any ? std::max(acc, map(r, c)) : acc + map(r, c);
          ++n;
        }
      }
      out(i, j) = (mode == CellReduce::mean && n > 0) ? acc / n : acc;
    }
  }
  return out;
}

std::pair<BBox, bool> roi_box(const ScalarMap& seg_prob, const RoiParams& params) {
  const int rows = seg_prob.rows();
  const int cols = seg_prob.cols();
  const auto tight = mask_to_bbox(imaging::binarize(seg_prob, params.threshold));
  if (!tight) return {BBox::full(rows, cols), true};
  switch (params.strategy) {
    case RoiStrategy::dilated_crop:
      return {dilate_and_clamp(*tight, params.lambda_frac, rows, cols), false};
    default:
      return {*tight, false};
  }
}

RoiResult apply_roi_strategy(const std::vector<DepthFeature>& features, const ScalarMap& seg_prob,
                             const RoiParams& params, const std::optional<BBox>& forced_box) {
  RoiResult result;
  auto box_for = [&]() {
    if (forced_box) return std::pair{*forced_box, false};
    return roi_box(seg_prob, params);
  };
  auto foreground_maps = [&](CellReduce mode, const ScalarMap& source) {
    std::vector<nn::Tensor> out;
    out.reserve(features.size());
    for (const auto& f : features) {
      const auto grid = reduce_to_grid(source, f.stride, f.tensor.dim(1), f.tensor.dim(2), mode);
      out.push_back(nn::mul_map(f.tensor, nn::from_map(grid)));
    }
    return out;
  };
  auto binary_foreground = [&]() {
    auto mask = imaging::binarize(seg_prob, params.threshold);
    if (!mask_to_bbox(mask)) {
      result.fallback = true;
      mask = BinaryMask(mask.rows(), mask.cols(), 1);
    }
    return imaging::to_scalar(mask);
  };

  switch (params.strategy) {
    case RoiStrategy::none:
      for (const auto& f : features) result.features.push_back(f.tensor);
      break;
    case RoiStrategy::dilated_crop:
    case RoiStrategy::crop: {
      auto [box, fallback] = box_for();
      result.box = box;
      result.fallback = fallback;
      result.features = crop_roi_features(features, box, params);
      break;
    }
    case RoiStrategy::bg_rm:
      result.features = foreground_maps(CellReduce::any, binary_foreground());
      break;
    case RoiStrategy::bg_rm_crop: {
      auto masked = foreground_maps(CellReduce::any, binary_foreground());
      auto [box, fallback] = box_for();
      result.box = box;
      result.fallback = result.fallback || fallback;
      std::vector<DepthFeature> staged;
      for (std::size_t d = 0; d < features.size(); ++d) {
        staged.push_back({masked[d], features[d].stride});
      }
      result.features = crop_roi_features(staged, box, params);
      break;
    }
    case RoiStrategy::rwm:
      result.features = foreground_maps(CellReduce::mean, seg_prob);
      break;
  }
  return result;
}

}  // namespace walnet::rcm
