#include "walnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>

#include "walnet/errors.hpp"
#include "walnet/io.hpp"
#include "walnet/rng.hpp"

namespace walnet::data {

namespace fs = std::filesystem;
using imaging::BBox;
using imaging::BinaryMask;
using imaging::RasterImage;
using imaging::ScalarMap;

std::array<int, kNumClasses> Dataset::class_counts() const {
  std::array<int, kNumClasses> counts{};
  for (const auto& s : samples) ++counts.at(s.label);
  return counts;
}

nlohmann::json SyntheticSpec::to_json() const {
  const auto& t = texture;
  return {{"counts", counts},
          {"size", size},
          {"seed", seed},
          {"texture",
           {{"background_lo", t.background_lo},
            {"background_hi", t.background_hi},
            {"speckle_std", t.speckle_std},
            {"wall_lo", t.wall_lo},
            {"wall_hi", t.wall_hi},
            {"hyper_mean", t.hyper_mean},
            {"hypo_mean", t.hypo_mean},
            {"lesion_jitter", t.lesion_jitter},
            {"ry_lo", t.ry_lo},
            {"ry_hi", t.ry_hi},
            {"rx_lo", t.rx_lo},
            {"rx_hi", t.rx_hi},
            {"clutter_min", t.clutter_min},
            {"clutter_max", t.clutter_max},
            {"clutter_radius_lo", t.clutter_radius_lo},
            {"clutter_radius_hi", t.clutter_radius_hi}}}};
}

void SyntheticSpec::validate() const {
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[c] < 1) throw ConfigError("synthetic.counts[" + std::to_string(c) + "] must be >= 1");
  }
  if (size < 32) throw ConfigError("synthetic.size must be >= 32");
  const auto& t = texture;
  auto unit = [](double v, const char* key) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string("synthetic.texture.") + key + " must lie in [0,1]");
  };
  unit(t.background_lo, "background_lo");
  unit(t.background_hi, "background_hi");
  unit(t.wall_lo, "wall_lo");
  unit(t.wall_hi, "wall_hi");
  unit(t.hyper_mean, "hyper_mean");
  unit(t.hypo_mean, "hypo_mean");
  if (t.background_lo > t.background_hi) throw ConfigError("synthetic.texture.background_lo exceeds background_hi");
  if (t.wall_lo > t.wall_hi) throw ConfigError("synthetic.texture.wall_lo exceeds wall_hi");
  if (!(t.speckle_std >= 0.0)) throw ConfigError("synthetic.texture.speckle_std must be >= 0");
  if (!(t.lesion_jitter >= 0.0)) throw ConfigError("synthetic.texture.lesion_jitter must be >= 0");
  if (!(0.0 < t.ry_lo && t.ry_lo <= t.ry_hi && t.ry_hi <= 0.25)) {
    throw ConfigError("synthetic.texture.ry_lo/ry_hi must satisfy 0 < ry_lo <= ry_hi <= 0.25");
  }
  if (!(0.0 < t.rx_lo && t.rx_lo <= t.rx_hi && t.rx_hi <= 0.25)) {
    throw ConfigError("synthetic.texture.rx_lo/rx_hi must satisfy 0 < rx_lo <= rx_hi <= 0.25");
  }
  if (!(0 <= t.clutter_min && t.clutter_min <= t.clutter_max)) {
    throw ConfigError("synthetic.texture.clutter_min/clutter_max must satisfy 0 <= min <= max");
  }
  if (!(0.0 < t.clutter_radius_lo && t.clutter_radius_lo <= t.clutter_radius_hi && t.clutter_radius_hi <= 0.25)) {
    throw ConfigError("synthetic.texture.clutter_radius_lo/hi must satisfy 0 < lo <= hi <= 0.25");
  }
}

int default_workers() {
  if (const char* env = std::getenv("WALNET_NUM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<int>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

namespace {

double quantize(double v) { return std::round(std::clamp(v, 0.0, 1.0) * 255.0) / 255.0; }

// Centre ranges keep the largest allowed ellipse (radius 0.25 of the side)
// clear of the wall strips and inside the frame.
constexpr double kCyLo = 0.38, kCyHi = 0.62;
constexpr double kCxLo = 0.30, kCxHi = 0.70;
constexpr double kWallLo = 0.04, kWallHi = 0.10;

}  // namespace

SampleRecord synthesize_sample(const SyntheticSpec& spec, std::size_t index, int label,
                               EllipseParams* geometry) {
  Rng rng(Rng::derive(spec.seed, index));
  const auto& t = spec.texture;
  const int n = spec.size;

  const double background = rng.uniform(t.background_lo, t.background_hi);
  const int top = static_cast<int>(std::lround(rng.uniform(kWallLo, kWallHi) * n));
  const int bottom = static_cast<int>(std::lround(rng.uniform(kWallLo, kWallHi) * n));
  const double top_wall = rng.uniform(t.wall_lo, t.wall_hi);
  const double bottom_wall = rng.uniform(t.wall_lo, t.wall_hi);

  EllipseParams e;
  e.cy = rng.uniform(kCyLo, kCyHi) * n;
  e.cx = rng.uniform(kCxLo, kCxHi) * n;
  e.ry = rng.uniform(t.ry_lo, t.ry_hi) * n;
  e.rx = rng.uniform(t.rx_lo, t.rx_hi) * n;
  e.angle = rng.uniform(0.0, std::numbers::pi);
  const double split_angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double bright = t.hyper_mean + rng.uniform(-t.lesion_jitter, t.lesion_jitter);
  const double dark = t.hypo_mean + rng.uniform(-t.lesion_jitter, t.lesion_jitter);

  const double ca = std::cos(e.angle), sa = std::sin(e.angle);
  const double cs = std::cos(split_angle), ss = std::sin(split_angle);
  std::vector<double> base(static_cast<std::size_t>(n) * n);
  BinaryMask mask(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double v = background;
      if (r < top) v = top_wall;
      if (r >= n - bottom) v = bottom_wall;
      const double dy = r + 0.5 - e.cy;
      const double dx = c + 0.5 - e.cx;
      const double u = (dy * ca + dx * sa) / e.ry;
      const double w = (-dy * sa + dx * ca) / e.rx;
      if (u * u + w * w <= 1.0) {
        mask(r, c) = 1;
        if (label == 0) v = bright;
        else if (label == 1) v = dark;
        else v = (dy * cs + dx * ss) >= 0.0 ? bright : dark;
      }
      base[static_cast<std::size_t>(r) * n + c] = v;
    }
  }

  // Clutter stays a couple of pixels clear of the lesion so the mask is exact.
  const int specks = t.clutter_max > 0
                         ? t.clutter_min + static_cast<int>(rng.below(t.clutter_max - t.clutter_min + 1))
                         : 0;
  const double clear = 1.0 + 2.0 / std::min(e.ry, e.rx);
  for (int k = 0; k < specks; ++k) {
    const double py = rng.uniform(top, n - bottom);
    const double px = rng.uniform(0.0, n);
    const double pr = rng.uniform(t.clutter_radius_lo, t.clutter_radius_hi) * n;
    const bool light = rng.uniform(0.0, 1.0) < 0.5;
    const double level = (light ? t.hyper_mean : t.hypo_mean) + rng.uniform(-t.lesion_jitter, t.lesion_jitter);
    const int r0 = std::max(top, static_cast<int>(std::floor(py - pr)));
    const int r1 = std::min(n - bottom - 1, static_cast<int>(std::ceil(py + pr)));
    const int c0 = std::max(0, static_cast<int>(std::floor(px - pr)));
    const int c1 = std::min(n - 1, static_cast<int>(std::ceil(px + pr)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const double qy = r + 0.5 - py, qx = c + 0.5 - px;
        if (qy * qy + qx * qx > pr * pr) continue;
        const double dy = r + 0.5 - e.cy;
        const double dx = c + 0.5 - e.cx;
        const double u = (dy * ca + dx * sa) / e.ry;
        const double w = (-dy * sa + dx * ca) / e.rx;
        if (u * u + w * w <= clear * clear) continue;
        base[static_cast<std::size_t>(r) * n + c] = level;
      }
    }
  }

  // Speckle: white noise smoothed by a 3x3 box, rescaled to the target std.
  std::vector<double> noise(base.size());
  for (auto& z : noise) z = rng.normal();
  std::vector<double> pixels(base.size());
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      double acc = 0.0;
      int cnt = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || rr >= n || cc < 0 || cc >= n) continue;
          acc += noise[static_cast<std::size_t>(rr) * n + cc];
          ++cnt;
        }
      }
      const std::size_t i = static_cast<std::size_t>(r) * n + c;
      pixels[i] = quantize(base[i] + t.speckle_std * acc / std::sqrt(static_cast<double>(cnt)));
    }
  }

  char id[32];
  std::snprintf(id, sizeof id, "syn_%05zu", index);
  SampleRecord rec;
  rec.id = id;
  rec.image_file = std::string("images/") + id + ".png";
  rec.label = label;
  rec.image = RasterImage(1, n, n, std::move(pixels));
  rec.gt_mask = std::move(mask);
  if (geometry) *geometry = e;
  return rec;
}

std::pair<double, double> lesion_area_bounds(const SyntheticSpec& spec) {
  const double n = spec.size;
  const auto& t = spec.texture;
  const double lo = std::numbers::pi * (t.ry_lo * n - 1.0) * (t.rx_lo * n - 1.0);
  const double hi = std::numbers::pi * (t.ry_hi * n + 1.0) * (t.rx_hi * n + 1.0);
  return {std::max(lo, 0.0), hi};
}

Dataset generate_synthetic(const SyntheticSpec& spec, int workers) {
  spec.validate();
  std::vector<int> labels;
  for (int c = 0; c < kNumClasses; ++c) labels.insert(labels.end(), spec.counts[c], c);
  Rng order(Rng::derive(spec.seed, 0xC1A55ULL));
  order.shuffle(labels.begin(), labels.end());

  Dataset ds;
  ds.samples.resize(labels.size());
  const int threads = std::max(1, std::min<int>(workers > 0 ? workers : default_workers(),
                                                static_cast<int>(labels.size())));
  auto work = [&](int t) {
    for (std::size_t i = t; i < labels.size(); i += threads) {
      ds.samples[i] = synthesize_sample(spec, i, labels[i]);
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work, t);
  }
  ds.manifest = {{"schema_version", 1}, {"kind", "synthetic"}, {"synthetic", spec.to_json()}};
  return ds;
}

namespace {

void check_box(const std::optional<BBox>& box, int rows, int cols) {
  if (box && !box->valid_within(rows, cols)) {
    throw InputError("roi box [" + std::to_string(box->row0) + "," + std::to_string(box->col0) +
                     "," + std::to_string(box->row1) + "," + std::to_string(box->col1) +
                     ") lies outside the " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " image");
  }
}

}  // namespace

RasterImage preprocess(const RawImage& raw, const std::optional<BBox>& box, int size) {
  if (size < 8) throw ParameterError("preprocess: output size must be >= 8");
  if (raw.rows < 1 || raw.cols < 1 ||
      raw.planar.size() != static_cast<std::size_t>(raw.channels) * raw.rows * raw.cols) {
    throw InputError("preprocess: malformed raw image");
  }
  if (!(raw.max_value > 0.0)) throw InputError("preprocess: max_value must be positive");
  check_box(box, raw.rows, raw.cols);
  const BBox b = box.value_or(BBox::full(raw.rows, raw.cols));
  const int h = b.height(), w = b.width();
  const auto rows_axis = imaging::BilinearAxis::build(h, size);
  const auto cols_axis = imaging::BilinearAxis::build(w, size);
  const std::size_t out_plane = static_cast<std::size_t>(size) * size;
  std::vector<double> crop(static_cast<std::size_t>(h) * w);
  std::vector<double> out(raw.channels * out_plane);
  for (int ch = 0; ch < raw.channels; ++ch) {
    const double* src = raw.planar.data() + static_cast<std::size_t>(ch) * raw.rows * raw.cols;
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        crop[static_cast<std::size_t>(r) * w + c] =
            src[static_cast<std::size_t>(b.row0 + r) * raw.cols + b.col0 + c] / raw.max_value;
      }
    }
    std::span<double> dst(out.data() + ch * out_plane, out_plane);
    imaging::resize_plane(crop, h, w, dst, rows_axis, cols_axis);
  }
  for (double& v : out) v = std::clamp(v, 0.0, 1.0);
  return RasterImage(raw.channels, size, size, std::move(out));
}

BinaryMask preprocess_mask(const BinaryMask& mask, const std::optional<BBox>& box, int size) {
  check_box(box, mask.rows(), mask.cols());
  const BBox b = box.value_or(BBox::full(mask.rows(), mask.cols()));
  ScalarMap crop(b.height(), b.width());
  for (int r = 0; r < b.height(); ++r) {
    for (int c = 0; c < b.width(); ++c) crop(r, c) = mask(b.row0 + r, b.col0 + c);
  }
  return imaging::binarize(imaging::resize_bilinear(crop, size, size), 0.5);
}

SplitLevel parse_split_level(const std::string& name) {
  if (name == "image") return SplitLevel::image;
  if (name == "patient") return SplitLevel::patient;
  throw ConfigError("split_level: unknown value '" + name + "' (allowed: image, patient)");
}

const char* to_string(SplitLevel level) { return level == SplitLevel::image ? "image" : "patient"; }

std::array<std::array<int, kNumClasses>, 3> allocate_stratified(
    const std::array<int, kNumClasses>& class_counts, const SplitRatios& ratios) {
  const std::array<double, 3> r{ratios.train, ratios.val, ratios.test};
  for (double v : r) {
    if (!(v >= 0.0)) throw ParameterError("split ratios must be non-negative");
  }
  if (std::abs(r[0] + r[1] + r[2] - 1.0) > 1e-9) throw ParameterError("split ratios must sum to 1");
  int total = 0;
  for (int n : class_counts) total += n;
  std::array<int, 3> targets{};
  targets[1] = static_cast<int>(std::floor(total * r[1] + 1e-9));
  targets[2] = static_cast<int>(std::floor(total * r[2] + 1e-9));
  targets[0] = total - targets[1] - targets[2];

  // Integer matrix with the class totals as rows and the part sizes as
  // columns, closest to the proportional shares: floors plus a small
  // increment per cell, searched exhaustively (3^9 candidates).
  std::array<std::array<double, kNumClasses>, 3> ideal{};
  std::array<std::array<int, kNumClasses>, 3> base{};
  for (int p = 0; p < 3; ++p) {
    for (int c = 0; c < kNumClasses; ++c) {
      ideal[p][c] = class_counts[c] * r[p];
      base[p][c] = static_cast<int>(std::floor(ideal[p][c] + 1e-9));
    }
  }
  constexpr int kCells = 3 * kNumClasses;
  std::array<std::array<int, kNumClasses>, 3> best{};
  double best_max = std::numeric_limits<double>::infinity();
  double best_sum = best_max;
  std::array<int, kCells> inc{};
  int combos = 1;
  for (int i = 0; i < kCells; ++i) combos *= 3;
  for (int code = 0; code < combos; ++code) {
    int x = code;
    for (int i = 0; i < kCells; ++i) {
      inc[i] = x % 3;
      x /= 3;
    }
    std::array<std::array<int, kNumClasses>, 3> cand{};
    bool ok = true;
    for (int p = 0; p < 3 && ok; ++p) {
      int col = 0;
      for (int c = 0; c < kNumClasses; ++c) {
        cand[p][c] = base[p][c] + inc[p * kNumClasses + c];
        col += cand[p][c];
      }
      ok = col == targets[p];
    }
    for (int c = 0; c < kNumClasses && ok; ++c) {
      ok = cand[0][c] + cand[1][c] + cand[2][c] == class_counts[c];
    }
    if (!ok) continue;
    double mx = 0.0, sum = 0.0;
    for (int p = 0; p < 3; ++p) {
      for (int c = 0; c < kNumClasses; ++c) {
        const double d = std::abs(cand[p][c] - ideal[p][c]);
        mx = std::max(mx, d);
        sum += d;
      }
    }
    if (mx < best_max - 1e-12 || (mx < best_max + 1e-12 && sum < best_sum - 1e-12)) {
      best = cand;
      best_max = mx;
      best_sum = sum;
    }
  }
  if (!std::isfinite(best_max)) throw InternalError("allocate_stratified: no feasible allocation");
  return best;
}

Split split(const Dataset& dataset, const SplitRatios& ratios, std::uint64_t seed, SplitLevel level) {
  // Units are single images or patient groups; each unit carries one label.
  std::vector<std::vector<std::size_t>> units;
  std::vector<int> unit_label;
  if (level == SplitLevel::image) {
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      units.push_back({i});
      unit_label.push_back(dataset.samples[i].label);
    }
  } else {
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
      const auto& s = dataset.samples[i];
      const std::string key = s.patient.empty() ? "#" + std::to_string(i) : s.patient;
      auto [it, fresh] = index.emplace(key, units.size());
      if (fresh) {
        units.emplace_back();
        unit_label.push_back(s.label);
      }
      units[it->second].push_back(i);
    }
  }

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t u = 0; u < units.size(); ++u) by_class.at(unit_label[u]).push_back(u);
  std::array<int, kNumClasses> counts{};
  for (int c = 0; c < kNumClasses; ++c) {
    counts[c] = static_cast<int>(by_class[c].size());
    if (counts[c] < 3) {
      throw InputError(std::string("split: class '") + kClassNames[c] + "' has " +
                       std::to_string(counts[c]) + " " +
                       (level == SplitLevel::image ? "samples" : "patients") + ", need >= 3");
    }
  }
  const auto alloc = allocate_stratified(counts, ratios);

  Rng rng(seed);
  Split out;
  std::array<std::vector<std::size_t>*, 3> parts{&out.train, &out.val, &out.test};
  for (int c = 0; c < kNumClasses; ++c) {
    auto& members = by_class[c];
    rng.shuffle(members.begin(), members.end());
    // Val first, then test, remainder train.
    std::size_t pos = 0;
    for (int p : {1, 2, 0}) {
      for (int k = 0; k < alloc[p][c]; ++k, ++pos) {
        for (std::size_t i : units[members[pos]]) parts[p]->push_back(i);
      }
    }
  }
  for (auto* p : parts) std::sort(p->begin(), p->end());
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(cur);
  return fields;
}

int parse_int(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const int v = std::stoi(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw InputError(where + ": '" + s + "' is not an integer");
}

}  // namespace

void write_dataset(const fs::path& dir, const Dataset& dataset) {
  fs::create_directories(dir / "images");
  std::ostringstream csv;
  csv << "filename,label,patient,roi_row0,roi_col0,roi_row1,roi_col1\n";
  bool any_mask = false;
  for (const auto& s : dataset.samples) {
    const std::string file = s.id + ".png";
    io::write_image(dir / "images" / file, s.image);
    if (s.gt_mask) {
      io::write_mask(dir / "masks" / file, *s.gt_mask);
      any_mask = true;
    }
    csv << file << ',' << kClassNames.at(s.label) << ',' << s.patient;
    if (s.roi) {
      csv << ',' << s.roi->row0 << ',' << s.roi->col0 << ',' << s.roi->row1 << ',' << s.roi->col1;
    } else {
      csv << ",,,,";
    }
    csv << '\n';
  }
  io::write_text(dir / "labels.csv", csv.str());
  nlohmann::json manifest = dataset.manifest;
  manifest["count"] = dataset.samples.size();
  manifest["class_counts"] = dataset.class_counts();
  manifest["has_masks"] = any_mask;
  io::write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

Dataset load_dataset(const fs::path& dir, int input_size) {
  const fs::path labels = dir / "labels.csv";
  std::ifstream in(labels);
  if (!in) throw InputError("dataset: cannot open " + labels.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("dataset: " + labels.string() + " is empty");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  if (!col.count("filename") || !col.count("label")) {
    throw InputError("dataset: labels.csv needs 'filename' and 'label' columns");
  }
  const bool has_roi = col.count("roi_row0") && col.count("roi_col0") && col.count("roi_row1") &&
                       col.count("roi_col1");

  Dataset ds;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const auto f = split_csv_line(line);
    const std::string where = labels.string() + ":" + std::to_string(line_no);
    if (f.size() != header.size()) throw InputError(where + ": expected " + std::to_string(header.size()) + " fields");
    SampleRecord rec;
    const std::string file = f[col["filename"]];
    rec.id = fs::path(file).stem().string();
    rec.image_file = "images/" + file;
    try {
      rec.label = parse_label(f[col["label"]]);
    } catch (const InputError& e) {
      throw InputError(where + ": " + e.what());
    }
    if (col.count("patient")) rec.patient = f[col["patient"]];
    if (has_roi && !f[col["roi_row0"]].empty()) {
      rec.roi = BBox{parse_int(f[col["roi_row0"]], where), parse_int(f[col["roi_col0"]], where),
                     parse_int(f[col["roi_row1"]], where), parse_int(f[col["roi_col1"]], where)};
    }
    const RawImage raw = io::read_image(dir / rec.image_file);
    rec.image = preprocess(raw, rec.roi, input_size);
    const fs::path mask_path = dir / "masks" / file;
    if (fs::exists(mask_path)) {
      const BinaryMask mask = io::read_mask(mask_path);
      if (mask.rows() != raw.rows || mask.cols() != raw.cols) {
        throw InputError(where + ": mask dimensions differ from the image");
      }
      rec.gt_mask = preprocess_mask(mask, rec.roi, input_size);
    }
    ds.samples.push_back(std::move(rec));
  }
  if (ds.samples.empty()) throw InputError("dataset: no samples in " + labels.string());
  const fs::path manifest = dir / "manifest.json";
  if (fs::exists(manifest)) ds.manifest = nlohmann::json::parse(io::read_text(manifest));
  return ds;
}

}  // namespace walnet::data
