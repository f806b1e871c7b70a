#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "walnet/classes.hpp"
#include "walnet/imaging.hpp"

namespace walnet::data {

/// Decoded pixels before preprocessing: planar, in the file's integer range.
struct RawImage {
  int channels = 1;
  int rows = 0;
  int cols = 0;
  std::vector<double> planar;
  double max_value = 255.0;
};

struct SampleRecord {
  std::string id;
  /// Path of the source image relative to the dataset root.
  std::string image_file;
  int label = 0;
  /// Grouping key for patient-level splits; empty means one group per image.
  std::string patient;
  std::optional<imaging::BBox> roi;
  imaging::RasterImage image;
  std::optional<imaging::BinaryMask> gt_mask;
};

struct Dataset {
  std::vector<SampleRecord> samples;
  /// Free-form provenance (synthetic spec, seed) written to manifest.json.
  nlohmann::json manifest = nlohmann::json::object();

  std::array<int, kNumClasses> class_counts() const;
};

struct TextureParams {
  double background_lo = 0.40;
  double background_hi = 0.60;
  double speckle_std = 0.06;
  double wall_lo = 0.7;
  double wall_hi = 0.9;
  double hyper_mean = 0.8;
  double hypo_mean = 0.25;
  double lesion_jitter = 0.04;
  /// Ellipse radii as fractions of the image side.
  double ry_lo = 0.12;
  double ry_hi = 0.22;
  double rx_lo = 0.15;
  double rx_hi = 0.25;
  /// Small bright or dark specks scattered outside the lesion, independent of
  /// the class; radii as fractions of the side.
  int clutter_min = 6;
  int clutter_max = 10;
  double clutter_radius_lo = 0.03;
  double clutter_radius_hi = 0.06;
};

struct SyntheticSpec {
  std::array<int, kNumClasses> counts{237, 476, 287};
  int size = 64;
  TextureParams texture;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Lesion geometry of one synthetic sample, exposed for oracle tests.
struct EllipseParams {
  double cy = 0;
  double cx = 0;
  double ry = 0;
  double rx = 0;
  double angle = 0;
};

/// Ultrasound-like images: speckled background band, bright wall strips at
/// top and bottom, one elliptical lesion whose intensity encodes the class.
/// Sample i depends only on (seed, i), so generation runs in parallel across
/// `workers` threads (0 reads WALNET_NUM_WORKERS, defaulting to the core count).
Dataset generate_synthetic(const SyntheticSpec& spec, int workers = 0);

/// One synthetic sample; also returns its lesion geometry.
SampleRecord synthesize_sample(const SyntheticSpec& spec, std::size_t index, int label,
                               EllipseParams* geometry = nullptr);

/// Inclusive pixel-area range of a lesion mask given the radius ranges.
std::pair<double, double> lesion_area_bounds(const SyntheticSpec& spec);

/// Worker count from WALNET_NUM_WORKERS, else hardware concurrency (>= 1).
int default_workers();

/// Crop `box` (full image when absent), bilinear-resize to size x size and
/// scale by 1 / max_value into [0,1]. Throws InputError for a box outside the
/// image.
imaging::RasterImage preprocess(const RawImage& raw, const std::optional<imaging::BBox>& box,
                                int size);

/// Crop and resize a ground-truth mask consistently with preprocess.
imaging::BinaryMask preprocess_mask(const imaging::BinaryMask& mask,
                                    const std::optional<imaging::BBox>& box, int size);

enum class SplitLevel { image, patient };
SplitLevel parse_split_level(const std::string& name);
const char* to_string(SplitLevel level);

struct SplitRatios {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

/// Stratified train/val/test partition of sample indices.
///
/// Global sizes are val = floor(N r_val), test = floor(N r_test), the rest
/// train. Each class gets within one sample of its proportional share in
/// every part while row and column totals are preserved. Throws ParameterError
/// for ratios not summing to 1 and InputError for a class with fewer than 3
/// samples. Patient-level splitting keeps every patient in one part and
/// stratifies groups by their first sample's label.
Split split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed,
            SplitLevel level = SplitLevel::image);

/// Per-class counts for each part: out[part][class], parts ordered train,
/// val, test.
std::array<std::array<int, kNumClasses>, 3> allocate_stratified(
    const std::array<int, kNumClasses>& class_counts, const SplitRatios& ratios);

/// Writes images/, masks/ (when present), labels.csv and manifest.json.
void write_dataset(const std::filesystem::path& dir, const Dataset& dataset);

/// Loads a dataset directory and preprocesses every image to `input_size`.
Dataset load_dataset(const std::filesystem::path& dir, int input_size);

}  // namespace walnet::data
