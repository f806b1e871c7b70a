#include "walnet/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <tuple>

#include "walnet/errors.hpp"

namespace walnet::imaging {

RasterImage::RasterImage(int channels, int rows, int cols, std::vector<double> planar)
    : channels_(channels), rows_(rows), cols_(cols), data_(std::move(planar)) {
  if (channels != 1 && channels != 3) {
    throw ParameterError("RasterImage: channel count must be 1 or 3, got " +
                         std::to_string(channels));
  }
  if (rows <= 0 || cols <= 0) {
    throw ParameterError("RasterImage: dimensions must be positive");
  }
  if (data_.size() != static_cast<std::size_t>(channels) * rows * cols) {
    throw InputError("RasterImage: buffer size does not match C*H*W");
  }
  for (double v : data_) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InputError("RasterImage: pixel values must be finite and within [0,1]");
    }
  }
}

RasterImage RasterImage::from_map(const ScalarMap& gray) {
  return RasterImage(1, gray.rows(), gray.cols(), gray.storage());
}

ScalarMap RasterImage::luminance() const {
  ScalarMap out(rows_, cols_, 0.0);
  for (int ch = 0; ch < channels_; ++ch) {
    auto p = plane(ch);
    for (std::size_t i = 0; i < p.size(); ++i) out[i] += p[i];
  }
  if (channels_ > 1) {
    for (std::size_t i = 0; i < out.size(); ++i) out[i] /= channels_;
  }
  return out;
}

void require_min_side(const RasterImage& img, int min_side) {
  if (img.rows() < min_side || img.cols() < min_side) {
    throw InputError("image is " + std::to_string(img.rows()) + "x" +
                     std::to_string(img.cols()) + ", expected at least " +
                     std::to_string(min_side) + "x" + std::to_string(min_side));
  }
}

// ---------------------------------------------------------------------------
// Felzenszwalb-Huttenlocher

namespace {

constexpr double kIntensityScale = 255.0;

/// Same kernel construction as the reference implementation:
/// radius ceil(4 sigma) + 1, normalised over the symmetric support.
std::vector<double> gaussian_kernel(double sigma) {
  sigma = std::max(sigma, 0.01);
  const int len = static_cast<int>(std::ceil(sigma * 4.0)) + 1;
  std::vector<double> mask(len);
  for (int i = 0; i < len; ++i) mask[i] = std::exp(-0.5 * (i / sigma) * (i / sigma));
  double sum = 0.0;
  for (int i = 1; i < len; ++i) sum += std::fabs(mask[i]);
  sum = 2.0 * sum + std::fabs(mask[0]);
  for (double& m : mask) m /= sum;
  return mask;
}

std::vector<double> smooth_plane(std::span<const double> src, int rows, int cols,
                                 const std::vector<double>& mask) {
  const int len = static_cast<int>(mask.size());
  std::vector<double> tmp(src.size());
  std::vector<double> out(src.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = mask[0] * src[r * cols + c];
      for (int i = 1; i < len; ++i) {
        const int lo = std::max(c - i, 0);
        const int hi = std::min(c + i, cols - 1);
        acc += mask[i] * (src[r * cols + lo] + src[r * cols + hi]);
      }
      tmp[r * cols + c] = acc;
    }
  }
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      double acc = mask[0] * tmp[r * cols + c];
      for (int i = 1; i < len; ++i) {
        const int lo = std::max(r - i, 0);
        const int hi = std::min(r + i, rows - 1);
        acc += mask[i] * (tmp[lo * cols + c] + tmp[hi * cols + c]);
      }
      out[r * cols + c] = acc;
    }
  }
  return out;
}

struct Edge {
  double weight;
  std::int32_t a;
  std::int32_t b;
  std::int8_t dir;
};

class DisjointSets {
 public:
  explicit DisjointSets(int n) : parent_(n), rank_(n, 0), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  int find(int x) {
    int root = x;
    while (parent_[root] != root) root = parent_[root];
    while (parent_[x] != root) {
      const int next = parent_[x];
      parent_[x] = root;
      x = next;
    }
    return root;
  }

  /// Joins two roots and returns the surviving root.
  int join(int a, int b) {
    if (rank_[a] < rank_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
    if (rank_[a] == rank_[b]) ++rank_[a];
    return a;
  }

  int size(int root) const { return size_[root]; }

 private:
  std::vector<int> parent_;
  std::vector<int> rank_;
  std::vector<int> size_;
};

}  // namespace

SuperpixelMap felzenszwalb_segment(const RasterImage& img, const FelzenszwalbParams& params) {
  if (!(params.k > 0.0) || !std::isfinite(params.k)) {
    throw ParameterError("felzenszwalb_segment: k must be positive");
  }
  if (!(params.sigma >= 0.0) || !std::isfinite(params.sigma)) {
    throw ParameterError("felzenszwalb_segment: sigma must be non-negative");
  }
  if (params.min_size < 1) {
    throw ParameterError("felzenszwalb_segment: min_size must be >= 1");
  }
  const int rows = img.rows();
  const int cols = img.cols();
  if (rows < 2 || cols < 2) {
    throw InputError("felzenszwalb_segment: image must be at least 2x2");
  }

  std::vector<std::vector<double>> planes;
  planes.reserve(img.channels());
  const auto mask = gaussian_kernel(params.sigma);
  for (int ch = 0; ch < img.channels(); ++ch) {
    if (params.sigma > 0.0) {
      planes.push_back(smooth_plane(img.plane(ch), rows, cols, mask));
    } else {
      auto p = img.plane(ch);
      planes.emplace_back(p.begin(), p.end());
    }
  }

  auto diff = [&](int i, int j) {
    if (planes.size() == 1) return std::fabs(planes[0][i] - planes[0][j]) * kIntensityScale;
    double acc = 0.0;
    for (const auto& p : planes) {
      const double d = p[i] - p[j];
      acc += d * d;
    }
    return std::sqrt(acc) * kIntensityScale;
  };

  std::vector<Edge> edges;
  edges.reserve(static_cast<std::size_t>(rows) * cols * 4);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int i = r * cols + c;
      if (c + 1 < cols) edges.push_back({diff(i, i + 1), i, i + 1, 0});
      if (r + 1 < rows) edges.push_back({diff(i, i + cols), i, i + cols, 1});
      if (r + 1 < rows && c + 1 < cols) edges.push_back({diff(i, i + cols + 1), i, i + cols + 1, 2});
      if (r > 0 && c + 1 < cols) edges.push_back({diff(i, i - cols + 1), i, i - cols + 1, 3});
    }
  }
  std::sort(edges.begin(), edges.end(), [](const Edge& x, const Edge& y) {
    return std::tie(x.weight, x.a, x.dir) < std::tie(y.weight, y.a, y.dir);
  });

  const int n = rows * cols;
  DisjointSets sets(n);
  std::vector<double> threshold(n, params.k);
  for (const Edge& e : edges) {
    int a = sets.find(e.a);
    int b = sets.find(e.b);
    if (a == b) continue;
    if (e.weight <= threshold[a] && e.weight <= threshold[b]) {
      const int root = sets.join(a, b);
      threshold[root] = e.weight + params.k / sets.size(root);
    }
  }
  for (const Edge& e : edges) {
    const int a = sets.find(e.a);
    const int b = sets.find(e.b);
    if (a != b && (sets.size(a) < params.min_size || sets.size(b) < params.min_size)) {
      sets.join(a, b);
    }
  }

  SuperpixelMap out;
  out.labels = Grid<std::int32_t>(rows, cols, -1);
  std::vector<std::int32_t> root_label(n, -1);
  std::int32_t next = 0;
  for (int i = 0; i < n; ++i) {
    const int root = sets.find(i);
    if (root_label[root] < 0) root_label[root] = next++;
    out.labels[i] = root_label[root];
  }
  out.region_count = next;
  return out;
}

// ---------------------------------------------------------------------------
// Resampling and point operations

BilinearAxis BilinearAxis::build(int in_size, int out_size) {
  BilinearAxis axis;
  axis.lo.resize(out_size);
  axis.hi.resize(out_size);
  axis.frac.resize(out_size);
  const double scale = static_cast<double>(in_size) / out_size;
  for (int i = 0; i < out_size; ++i) {
    double src = (i + 0.5) * scale - 0.5;
    src = std::clamp(src, 0.0, static_cast<double>(in_size - 1));
    const int lo = static_cast<int>(std::floor(src));
    const int hi = std::min(lo + 1, in_size - 1);
    axis.lo[i] = lo;
    axis.hi[i] = hi;
    axis.frac[i] = src - lo;
  }
  return axis;
}

void resize_plane(std::span<const double> src, int in_rows, int in_cols, std::span<double> dst,
                  const BilinearAxis& rows_axis, const BilinearAxis& cols_axis) {
  const int out_rows = static_cast<int>(rows_axis.lo.size());
  const int out_cols = static_cast<int>(cols_axis.lo.size());
  (void)in_rows;
  for (int r = 0; r < out_rows; ++r) {
    const double* top = src.data() + static_cast<std::size_t>(rows_axis.lo[r]) * in_cols;
    const double* bot = src.data() + static_cast<std::size_t>(rows_axis.hi[r]) * in_cols;
    const double wy = rows_axis.frac[r];
    double* out = dst.data() + static_cast<std::size_t>(r) * out_cols;
    for (int c = 0; c < out_cols; ++c) {
      const int x0 = cols_axis.lo[c];
      const int x1 = cols_axis.hi[c];
      const double wx = cols_axis.frac[c];
      const double t = top[x0] + wx * (top[x1] - top[x0]);
      const double b = bot[x0] + wx * (bot[x1] - bot[x0]);
      out[c] = t + wy * (b - t);
    }
  }
}

ScalarMap resize_bilinear(const ScalarMap& map, int out_rows, int out_cols) {
  if (out_rows < 1 || out_cols < 1) {
    throw ParameterError("resize_bilinear: target size must be positive");
  }
  if (map.empty()) throw InputError("resize_bilinear: empty map");
  if (out_rows == map.rows() && out_cols == map.cols()) return map;
  ScalarMap out(out_rows, out_cols);
  resize_plane(map.values(), map.rows(), map.cols(), out.values(),
               BilinearAxis::build(map.rows(), out_rows), BilinearAxis::build(map.cols(), out_cols));
  return out;
}

ScalarMap minmax_normalize(const ScalarMap& map) {
  if (map.empty()) throw InputError("minmax_normalize: empty map");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (double v : map.values()) {
    if (!std::isfinite(v)) throw InputError("minmax_normalize: non-finite value");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ScalarMap out(map.rows(), map.cols(), 0.0);
  if (hi == lo) return out;
  const double range = hi - lo;
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = (map[i] - lo) / range;
  return out;
}

BinaryMask binarize(const ScalarMap& map, double threshold) {
  if (std::isnan(threshold)) throw ParameterError("binarize: threshold is NaN");
  BinaryMask out(map.rows(), map.cols(), 0);
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = map[i] >= threshold ? 1 : 0;
  return out;
}

ScalarMap to_scalar(const BinaryMask& mask) {
  ScalarMap out(mask.rows(), mask.cols());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? 1.0 : 0.0;
  return out;
}

ScalarMap area_downsample(const ScalarMap& map, int out_rows, int out_cols) {
  if (out_rows < 1 || out_cols < 1) {
    throw ParameterError("area_downsample: target size must be positive");
  }
  ScalarMap sum(out_rows, out_cols, 0.0);
  Grid<int> count(out_rows, out_cols, 0);
  for (int r = 0; r < map.rows(); ++r) {
    const int orow = std::min(static_cast<int>((r + 0.5) * out_rows / map.rows()), out_rows - 1);
    for (int c = 0; c < map.cols(); ++c) {
      const int ocol = std::min(static_cast<int>((c + 0.5) * out_cols / map.cols()), out_cols - 1);
      sum(orow, ocol) += map(r, c);
      count(orow, ocol) += 1;
    }
  }
  for (std::size_t i = 0; i < sum.size(); ++i) {
    if (count[i] > 0) {
      sum[i] /= count[i];
    } else {
      // Upsampling case: no source centre landed here, fall back to bilinear.
      return resize_bilinear(map, out_rows, out_cols);
    }
  }
  return sum;
}

double dice(const BinaryMask& a, const BinaryMask& b) {
  if (!a.same_shape(b)) throw InputError("dice: mask shapes differ");
  std::size_t inter = 0;
  std::size_t total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a[i] && b[i]) ? 1 : 0;
    total += (a[i] ? 1 : 0) + (b[i] ? 1 : 0);
  }
  if (total == 0) return 1.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(total);
}

BinaryMask region_boundaries(const SuperpixelMap& map) {
  const auto& l = map.labels;
  BinaryMask out(l.rows(), l.cols(), 0);
  for (int r = 0; r < l.rows(); ++r) {
    for (int c = 0; c < l.cols(); ++c) {
      const bool right = c + 1 < l.cols() && l(r, c) != l(r, c + 1);
      const bool down = r + 1 < l.rows() && l(r, c) != l(r + 1, c);
      out(r, c) = (right || down) ? 1 : 0;
    }
  }
  return out;
}

}  // namespace walnet::imaging
