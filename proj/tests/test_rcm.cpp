#include <gtest/gtest.h>

#include "oracles.hpp"
#include "walnet/ops.hpp"
#include "walnet/rcm.hpp"

using namespace walnet;
using namespace walnet::imaging;
using namespace walnet::rcm;

namespace {

BBox random_box(Rng& rng, int rows, int cols) {
  const int r0 = static_cast<int>(rng.below(rows));
  const int c0 = static_cast<int>(rng.below(cols));
  const int r1 = r0 + 1 + static_cast<int>(rng.below(rows - r0));
  const int c1 = c0 + 1 + static_cast<int>(rng.below(cols - c0));
  return {r0, c0, r1, c1};
}

nn::Tensor ramp(int ch, int rows, int cols) {
  std::vector<double> v(static_cast<std::size_t>(ch) * rows * cols);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<double>(i);
  return nn::Tensor::from({ch, rows, cols}, v, true);
}

}  // namespace

TEST(Rcm, PaperPadOn224) {
  const auto box = dilate_and_clamp(BBox{100, 100, 120, 120}, 1.0 / 7.0, 224, 224);
  EXPECT_EQ(box.row0, 100 - 32);
  EXPECT_EQ(box.col1, 120 + 32);
}

TEST(Rcm, DilateAndClampMatchesArithmetic) {
  Rng rng(41);
  for (int t = 0; t < 200; ++t) {
    const int rows = 8 + static_cast<int>(rng.below(220));
    const int cols = 8 + static_cast<int>(rng.below(220));
    const auto box = random_box(rng, rows, cols);
    const double lambda = rng.uniform(0.0, 0.3);
    const int pr = static_cast<int>(lambda * rows), pc = static_cast<int>(lambda * cols);
    const BBox want{std::max(0, box.row0 - pr), std::max(0, box.col0 - pc), std::min(rows, box.row1 + pr),
                    std::min(cols, box.col1 + pc)};
    const auto got = dilate_and_clamp(box, lambda, rows, cols);
    ASSERT_EQ(got, want) << t;
    ASSERT_TRUE(got.contains(box));
    ASSERT_TRUE(got.valid_within(rows, cols));
  }
}

TEST(Rcm, ScaleBoxMatchesArithmetic) {
  Rng rng(42);
  for (int t = 0; t < 200; ++t) {
    const int stride = 1 << (2 + rng.below(4));
    const int rows = stride * (1 + static_cast<int>(rng.below(8)));
    const int cols = stride * (1 + static_cast<int>(rng.below(8)));
    const auto box = random_box(rng, rows, cols);
    const int gr = rows / stride, gc = cols / stride;
    const auto got = scale_box(box, stride, gr, gc);
    // Outward rounding: every covered input pixel lands in a covered cell.
    const int r0 = static_cast<int>(std::floor(box.row0 / double(stride)));
    const int r1 = static_cast<int>(std::ceil(box.row1 / double(stride)));
    const int c0 = static_cast<int>(std::floor(box.col0 / double(stride)));
    const int c1 = static_cast<int>(std::ceil(box.col1 / double(stride)));
    ASSERT_EQ(got, (BBox{r0, c0, r1, c1})) << t;
  }
}

TEST(Rcm, ScaleBoxIsAtLeastOneCell) {
  const auto b = scale_box(BBox{15, 15, 16, 16}, 32, 2, 2);
  EXPECT_EQ(b, (BBox{0, 0, 1, 1}));
}

TEST(Rcm, EmptyMaskFallsBackToFullImage) {
  RoiParams p;
  const auto [box, fallback] = roi_box(ScalarMap(64, 64, 0.1), p);
  EXPECT_TRUE(fallback);
  EXPECT_EQ(box, BBox::full(64, 64));
}

TEST(Rcm, TightAndDilatedBoxes) {
  ScalarMap seg(64, 64, 0.0);
  for (int r = 20; r < 30; ++r)
    for (int c = 10; c < 25; ++c) seg(r, c) = 0.9;
  RoiParams p;
  p.strategy = RoiStrategy::crop;
  EXPECT_EQ(roi_box(seg, p).first, (BBox{20, 10, 30, 25}));
  p.strategy = RoiStrategy::dilated_crop;
  EXPECT_EQ(roi_box(seg, p).first, (BBox{11, 1, 39, 34}));
}

TEST(Rcm, CropCutsScaledBoxAndResizes) {
  const auto f = ramp(2, 4, 4);
  const std::vector<DepthFeature> depths{{f, 16}};
  RoiParams p;
  const auto out = crop_roi_features(depths, BBox{16, 0, 48, 32}, p);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].dims(), f.dims());
  p.output_sizes = {{2, 2}};
  const auto exact = crop_roi_features(depths, BBox{16, 0, 48, 32}, p);
  // Rows 1..2, cols 0..1 of each channel.
  EXPECT_EQ(std::vector<double>(exact[0].values().begin(), exact[0].values().begin() + 4),
            (std::vector<double>{4, 5, 8, 9}));
}

TEST(Rcm, ReduceToGridModes) {
  ScalarMap m(4, 4, 0.0);
  m(0, 0) = 1.0;
  m(3, 3) = 0.4;
  const auto any = reduce_to_grid(m, 2, 2, 2, CellReduce::any);
  const auto mean = reduce_to_grid(m, 2, 2, 2, CellReduce::mean);
  EXPECT_DOUBLE_EQ(any(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(any(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(mean(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(mean(1, 1), 0.1);
}

TEST(Rcm, StrategiesKeepDepthCountAndCarryNoGradientFromSeg) {
  ScalarMap seg(64, 64, 0.0);
  for (int r = 20; r < 40; ++r)
    for (int c = 20; c < 40; ++c) seg(r, c) = 0.8;
  const auto f1 = ramp(2, 16, 16);
  const auto f4 = ramp(3, 2, 2);
  const std::vector<DepthFeature> depths{{f1, 4}, {f4, 32}};
  for (auto s : {RoiStrategy::none, RoiStrategy::dilated_crop, RoiStrategy::crop, RoiStrategy::bg_rm,
                 RoiStrategy::bg_rm_crop, RoiStrategy::rwm}) {
    RoiParams p;
    p.strategy = s;
    const auto res = apply_roi_strategy(depths, seg, p);
    ASSERT_EQ(res.features.size(), 2u);
    EXPECT_EQ(res.features[0].dims(), f1.dims()) << to_string(s);
    EXPECT_TRUE(res.features[0].depends_on(f1));
    EXPECT_FALSE(res.fallback);
    EXPECT_EQ(res.box.has_value(), s == RoiStrategy::dilated_crop || s == RoiStrategy::crop ||
                                       s == RoiStrategy::bg_rm_crop);
  }
}

TEST(Rcm, BgRmZeroesBackgroundCells) {
  ScalarMap seg(16, 16, 0.0);
  seg(0, 0) = 0.9;
  const auto f = ramp(1, 4, 4);
  RoiParams p;
  p.strategy = RoiStrategy::bg_rm;
  const auto res = apply_roi_strategy({{f, 4}}, seg, p);
  const auto v = res.features[0].values();
  EXPECT_DOUBLE_EQ(v[0], 0.0);  // ramp starts at 0 anyway
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_DOUBLE_EQ(v[i], 0.0);
  seg(5, 5) = 0.9;
  const auto res2 = apply_roi_strategy({{f, 4}}, seg, p);
  EXPECT_DOUBLE_EQ(res2.features[0].values()[5], 5.0);
}

TEST(Rcm, ParseAndValidate) {
  EXPECT_EQ(parse_roi_strategy("bg_rm_crop"), RoiStrategy::bg_rm_crop);
  EXPECT_THROW(parse_roi_strategy("nope"), ConfigError);
  EXPECT_EQ(comparison_strategies().size(), 5u);
  RoiParams p;
  p.lambda_frac = 0.6;
  EXPECT_THROW(p.validate(), ConfigError);
  p.lambda_frac = 0.1;
  p.threshold = 1.0;
  EXPECT_THROW(p.validate(), ConfigError);
}
