#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "walnet/errors.hpp"

namespace walnet::imaging {

/// Dense row-major 2-D raster.
template <class T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(static_cast<std::size_t>(rows) * cols, fill) {}
  Grid(int rows, int cols, std::vector<T> data);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  T& operator()(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  const std::vector<T>& storage() const { return data_; }

  template <class U>
  bool same_shape(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }
  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

template <class T>
Grid<T>::Grid(int rows, int cols, std::vector<T> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0 || data_.size() != static_cast<std::size_t>(rows) * cols) {
    throw InputError("Grid: data size does not match rows*cols");
  }
}

/// Real-valued map (attention, fused map B, segmentation probability).
using ScalarMap = Grid<double>;
/// {0,1} mask.
using BinaryMask = Grid<std::uint8_t>;

/// Region labelling, labels exactly {0..region_count-1}.
struct SuperpixelMap {
  Grid<std::int32_t> labels;
  int region_count = 0;
};

/// Planar C x H x W image with values in [0,1].
class RasterImage {
 public:
  RasterImage() = default;
  /// Throws InputError for non-finite or out-of-range values, ParameterError
  /// for non-positive dimensions or a channel count other than 1 or 3.
  RasterImage(int channels, int rows, int cols, std::vector<double> planar);

  static RasterImage from_map(const ScalarMap& gray);

  int channels() const { return channels_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double at(int ch, int r, int c) const {
    return data_[(static_cast<std::size_t>(ch) * rows_ + r) * cols_ + c];
  }
  std::span<const double> plane(int ch) const {
    return std::span<const double>(data_).subspan(
        static_cast<std::size_t>(ch) * rows_ * cols_,
        static_cast<std::size_t>(rows_) * cols_);
  }
  std::span<const double> values() const { return data_; }

  /// Channel-mean intensity as a single map.
  ScalarMap luminance() const;

  friend bool operator==(const RasterImage&, const RasterImage&) = default;

 private:
  int channels_ = 0;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

/// Network inputs must be at least 8x8.
void require_min_side(const RasterImage& img, int min_side = 8);

/// Half-open pixel rectangle [row0,row1) x [col0,col1).
struct BBox {
  int row0 = 0;
  int col0 = 0;
  int row1 = 0;
  int col1 = 0;

  int height() const { return row1 - row0; }
  int width() const { return col1 - col0; }
  bool valid_within(int rows, int cols) const {
    return 0 <= row0 && row0 < row1 && row1 <= rows && 0 <= col0 && col0 < col1 &&
           col1 <= cols;
  }
  bool contains(const BBox& inner) const {
    return row0 <= inner.row0 && col0 <= inner.col0 && inner.row1 <= row1 &&
           inner.col1 <= col1;
  }
  static BBox full(int rows, int cols) { return BBox{0, 0, rows, cols}; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct FelzenszwalbParams {
  double k = 100.0;
  double sigma = 0.8;
  int min_size = 20;
};

/// Graph-based superpixel segmentation (Felzenszwalb-Huttenlocher).
///
/// Edge weights are intensity differences measured on a 0-255 scale: the
/// absolute difference for one channel, Euclidean distance across channels
/// otherwise. The 8-connected grid edges are processed in ascending
/// (weight, row-major source index, direction) order, which fixes the tie
/// break. Labels are numbered by first appearance in raster order.
SuperpixelMap felzenszwalb_segment(const RasterImage& img, const FelzenszwalbParams& params);

/// Per-axis sample table for half-pixel-centre bilinear resampling.
///
/// Output index i samples source coordinate (i + 0.5) * in / out - 0.5,
/// clamped to [0, in - 1]; lo/hi are the bracketing source indices and
/// frac the weight of hi.
struct BilinearAxis {
  std::vector<int> lo;
  std::vector<int> hi;
  std::vector<double> frac;

  static BilinearAxis build(int in_size, int out_size);
};

ScalarMap resize_bilinear(const ScalarMap& map, int out_rows, int out_cols);

/// Resample one plane held in a flat buffer; shared with the autograd op.
void resize_plane(std::span<const double> src, int in_rows, int in_cols,
                  std::span<double> dst, const BilinearAxis& rows_axis,
                  const BilinearAxis& cols_axis);

/// (x - min) / (max - min); a constant map becomes all zeros.
ScalarMap minmax_normalize(const ScalarMap& map);

/// 1 where map >= threshold.
BinaryMask binarize(const ScalarMap& map, double threshold);

ScalarMap to_scalar(const BinaryMask& mask);

/// Block-mean downsample: each output cell averages the source pixels whose
/// centres fall inside it.
ScalarMap area_downsample(const ScalarMap& map, int out_rows, int out_cols);

/// 2|A and B| / (|A| + |B|); two empty masks score 1.
double dice(const BinaryMask& a, const BinaryMask& b);

/// Pixels whose right or lower neighbour carries a different label.
BinaryMask region_boundaries(const SuperpixelMap& map);

}  // namespace walnet::imaging
