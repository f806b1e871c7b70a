#pragma once

#include <string>

#include "walnet/imaging.hpp"

namespace walnet::pgm {

/// Attention maps of the three gated encoder levels at their native grids.
struct AttentionSet {
  imaging::ScalarMap a1;
  imaging::ScalarMap a2;
  imaging::ScalarMap a3;
  int source_rows = 0;
  int source_cols = 0;
};

struct PgmParams {
  imaging::FelzenszwalbParams superpixel;
  /// Applied after min-max normalisation of the region-averaged map.
  double threshold = 0.5;

  void validate() const;
};

/// Binary supervision target. Plain data: it never carries gradient.
struct PseudoMask {
  imaging::BinaryMask mask;
  std::string provenance;
};

/// Upsamples each map to the source resolution and multiplies them.
imaging::ScalarMap fuse_attention(const AttentionSet& att);

/// Replaces every pixel by the mean of `fused` over its superpixel.
imaging::ScalarMap superpixel_region_average(const imaging::ScalarMap& fused,
                                             const imaging::SuperpixelMap& regions);

/// Every intermediate of one pseudo-mask computation.
struct PgmTrace {
  imaging::SuperpixelMap superpixels;
  imaging::ScalarMap fused;
  imaging::ScalarMap averaged;
  imaging::ScalarMap normalized;
  PseudoMask mask;
};

/// Full pipeline: superpixels of `img`, fused attention, region average,
/// min-max normalisation, binarisation.
PgmTrace generate_pseudo_mask_trace(const imaging::RasterImage& img, const AttentionSet& att,
                                    const PgmParams& params);

PseudoMask generate_pseudo_mask(const imaging::RasterImage& img, const AttentionSet& att,
                                const PgmParams& params);

/// Same pipeline with precomputed superpixels; the superpixel map depends on
/// the image alone, so training caches it per sample.
PseudoMask generate_pseudo_mask(const imaging::SuperpixelMap& superpixels,
                                const AttentionSet& att, const PgmParams& params);

}  // namespace walnet::pgm
