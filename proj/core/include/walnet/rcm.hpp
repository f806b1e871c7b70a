#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "walnet/imaging.hpp"
#include "walnet/tensor.hpp"

namespace walnet::rcm {

enum class RoiStrategy { none, dilated_crop, crop, bg_rm, bg_rm_crop, rwm };

/// Config spelling: "none", "dilated_crop", "crop", "bg_rm", "bg_rm_crop", "rwm".
RoiStrategy parse_roi_strategy(std::string_view name);
std::string_view to_string(RoiStrategy strategy);
/// Row label used in comparison reports ("dilated crop", "bg rm & crop", ...).
std::string_view table_label(RoiStrategy strategy);

/// The five strategies of the ROI comparison table, in report order.
const std::vector<RoiStrategy>& comparison_strategies();

struct RoiParams {
  double threshold = 0.5;
  double lambda_frac = 1.0 / 7.0;
  RoiStrategy strategy = RoiStrategy::dilated_crop;
  /// Per-depth (rows, cols) after cropping; empty keeps each depth's own size.
  std::vector<std::pair<int, int>> output_sizes;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// A feature map together with its stride relative to the input image.
struct DepthFeature {
  nn::Tensor tensor;
  int stride = 1;
};

/// Tight box over the nonzero pixels; nullopt for an empty mask.
std::optional<imaging::BBox> mask_to_bbox(const imaging::BinaryMask& mask);

/// Pads floor(lambda_frac * rows) / floor(lambda_frac * cols) on each side and
/// clamps to the image.
imaging::BBox dilate_and_clamp(const imaging::BBox& box, double lambda_frac, int rows, int cols);

/// Input-resolution box mapped to a stride-s grid, rounded outward
/// (floor of the start, ceil of the end), clamped, at least 1x1.
imaging::BBox scale_box(const imaging::BBox& box, int stride, int grid_rows, int grid_cols);

/// Crops every depth to its scaled box and resizes back to the configured
/// output size. `features` and the box are at input resolution `rows x cols`.
std::vector<nn::Tensor> crop_roi_features(const std::vector<DepthFeature>& features,
                                          const imaging::BBox& box, const RoiParams& params);

/// Reduces an input-resolution map to a stride-s grid, one value per cell.
/// Cell (i, j) covers input rows [i*s, (i+1)*s) and cols [j*s, (j+1)*s).
enum class CellReduce { mean, any };
imaging::ScalarMap reduce_to_grid(const imaging::ScalarMap& map, int stride, int grid_rows,
                                  int grid_cols, CellReduce mode);

struct RoiResult {
  std::vector<nn::Tensor> features;
  /// Box at input resolution for the cropping strategies.
  std::optional<imaging::BBox> box;
  /// True when the binarised prediction was empty and the full image was used.
  bool fallback = false;
};

/// Applies `params.strategy`. `seg_prob` is a plain value map at input
/// resolution, so nothing computed from it carries gradient. `forced_box`
/// overrides the box derivation for the cropping strategies.
RoiResult apply_roi_strategy(const std::vector<DepthFeature>& features,
                             const imaging::ScalarMap& seg_prob, const RoiParams& params,
                             const std::optional<imaging::BBox>& forced_box = std::nullopt);

/// The box a cropping strategy would use for this prediction, plus whether
/// the empty-foreground fallback fired.
std::pair<imaging::BBox, bool> roi_box(const imaging::ScalarMap& seg_prob, const RoiParams& params);

}  // namespace walnet::rcm
