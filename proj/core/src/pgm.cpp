#include "walnet/pgm.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "walnet/errors.hpp"

namespace walnet::pgm {

using imaging::ScalarMap;
using imaging::SuperpixelMap;

namespace {

/// Runs one pipeline stage, prefixing its name onto any library error.
template <class Fn>
auto stage(const char* name, Fn&& fn) -> decltype(fn()) {
  const std::string prefix = std::string("pgm stage '") + name + "': ";
  try {
    return fn();
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const InputError& e) {
    throw InputError(prefix + e.what());
  } catch (const ConfigError& e) {
    throw ConfigError(prefix + e.what());
  }
}

void check_attention_map(const ScalarMap& m, const char* name) {
  if (m.empty()) throw InputError(std::string("attention map ") + name + " is missing");
  for (double v : m.values()) {
    if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
      throw InputError(std::string("attention map ") + name + " has values outside [0,1]");
    }
  }
}

}  // namespace

void PgmParams::validate() const {
  if (!(superpixel.k > 0.0)) throw ConfigError("pgm.k must be positive");
  if (!(superpixel.sigma >= 0.0)) throw ConfigError("pgm.sigma must be non-negative");
  if (superpixel.min_size < 1) throw ConfigError("pgm.min_size must be >= 1");
  if (!(threshold > 0.0 && threshold < 1.0)) throw ConfigError("pgm.threshold must lie in (0,1)");
}

ScalarMap fuse_attention(const AttentionSet& att) {
  if (att.source_rows < 1 || att.source_cols < 1) {
    throw InputError("fuse_attention: source resolution not set");
  }
  check_attention_map(att.a1, "a1");
  check_attention_map(att.a2, "a2");
  check_attention_map(att.a3, "a3");
  const int rows = att.source_rows;
  const int cols = att.source_cols;
  ScalarMap fused = imaging::resize_bilinear(att.a1, rows, cols);
  for (const ScalarMap* m : {&att.a2, &att.a3}) {
    const ScalarMap up = imaging::resize_bilinear(*m, rows, cols);
    for (std::size_t i = 0; i < fused.size(); ++i) fused[i] *= up[i];
  }
  return fused;
}

ScalarMap superpixel_region_average(const ScalarMap& fused, const SuperpixelMap& regions) {
  if (!fused.same_shape(regions.labels)) {
    throw InputError("superpixel_region_average: map is " + std::to_string(fused.rows()) + "x" +
                     std::to_string(fused.cols()) + ", superpixels are " +
                     std::to_string(regions.labels.rows()) + "x" +
                     std::to_string(regions.labels.cols()));
  }
  std::vector<double> sums(regions.region_count, 0.0);
  std::vector<std::size_t> counts(regions.region_count, 0);
  for (std::size_t i = 0; i < fused.size(); ++i) {
    const int label = regions.labels[i];
    if (label < 0 || label >= regions.region_count) {
      throw InputError("superpixel_region_average: label out of range");
    }
    sums[label] += fused[i];
    ++counts[label];
  }
  for (int j = 0; j < regions.region_count; ++j) {
    if (counts[j] > 0) sums[j] /= static_cast<double>(counts[j]);
  }
  ScalarMap out(fused.rows(), fused.cols());
  for (std::size_t i = 0; i < fused.size(); ++i) out[i] = sums[regions.labels[i]];
  return out;
}

namespace {

PgmTrace run_pipeline(SuperpixelMap superpixels, const AttentionSet& att, const PgmParams& params) {
  PgmTrace trace;
  trace.superpixels = std::move(superpixels);
  trace.fused = stage("fuse_attention", [&] { return fuse_attention(att); });
  trace.averaged = stage("superpixel_region_average", [&] {
    return superpixel_region_average(trace.fused, trace.superpixels);
  });
  trace.normalized = stage("minmax_normalize", [&] { return imaging::minmax_normalize(trace.averaged); });
  trace.mask.mask = stage("binarize", [&] { return imaging::binarize(trace.normalized, params.threshold); });
  return trace;
}

}  // namespace

PgmTrace generate_pseudo_mask_trace(const imaging::RasterImage& img, const AttentionSet& att,
                                    const PgmParams& params) {
  if (img.rows() != att.source_rows || img.cols() != att.source_cols) {
    throw InputError("generate_pseudo_mask: image and attention set disagree on resolution");
  }
  auto superpixels = stage("felzenszwalb_segment",
                           [&] { return imaging::felzenszwalb_segment(img, params.superpixel); });
  return run_pipeline(std::move(superpixels), att, params);
}

PseudoMask generate_pseudo_mask(const imaging::RasterImage& img, const AttentionSet& att,
                                const PgmParams& params) {
  return generate_pseudo_mask_trace(img, att, params).mask;
}

PseudoMask generate_pseudo_mask(const SuperpixelMap& superpixels, const AttentionSet& att,
                                const PgmParams& params) {
  return run_pipeline(superpixels, att, params).mask;
}

}  // namespace walnet::pgm
