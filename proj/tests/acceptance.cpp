// Acceptance run: one PASS/FAIL line per criterion.
//
//   walnet_acceptance [--only 1,5,8] [--known-red 8] [--work DIR]
//
// Exit status is 0 when every selected criterion passes, ignoring those
// listed in --known-red (which still print their real verdict).

#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <regex>
#include <set>
#include <sstream>
#include <string>

#include "gradcheck.hpp"
#include "oracles.hpp"
#include "walnet/config.hpp"
#include "walnet/experiment.hpp"
#include "walnet/io.hpp"
#include "walnet/losses.hpp"
#include "walnet/metrics.hpp"
#include "walnet/pgm.hpp"
#include "walnet/rcm.hpp"
#include "walnet/train.hpp"

using namespace walnet;
using namespace walnet::imaging;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail += (detail.empty() ? "" : "; ") + ("failed: " + what);
    }
  }
  void note(const std::string& what) { detail += (detail.empty() ? "" : "; ") + what; }
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

pgm::AttentionSet oracle_attention(const BinaryMask& gt) {
  const auto m = to_scalar(gt);
  pgm::AttentionSet a;
  a.a1 = area_downsample(m, gt.rows() / 4, gt.cols() / 4);
  a.a2 = area_downsample(m, gt.rows() / 8, gt.cols() / 8);
  a.a3 = area_downsample(m, gt.rows() / 16, gt.cols() / 16);
  a.source_rows = gt.rows();
  a.source_cols = gt.cols();
  return a;
}

bool subset(const BinaryMask& a, const BinaryMask& b) {
  for (std::size_t q = 0; q < a.size(); ++q) {
    if (a[q] && !b[q]) return false;
  }
  return true;
}

const pgm::PgmParams kPgm = config::ExperimentConfig{}.pgm;

// 1: region average against a brute-force per-region mean.
Verdict region_average_oracle() {
  Verdict v;
  Rng rng(101);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const auto img = RasterImage::from_map(oracle::random_map(rng, 32, 32));
    const FelzenszwalbParams p{rng.uniform(5, 300), rng.uniform(0, 1), 1 + static_cast<int>(rng.below(20))};
    const auto sp = felzenszwalb_segment(img, p);
    const auto b = oracle::random_map(rng, 32, 32);
    const auto got = pgm::superpixel_region_average(b, sp);
    const auto want = oracle::region_average(b, sp);
    for (std::size_t q = 0; q < got.size(); ++q) worst = std::max(worst, std::abs(got[q] - want[q]));
  }
  v.check(worst <= 1e-6, "max deviation " + fmt("%.3g", worst));
  v.note("100 pairs, max deviation " + fmt("%.3g", worst));
  return v;
}

// 2: superpixel partition properties.
Verdict superpixel_properties() {
  Verdict v;
  Rng rng(102);
  for (int t = 0; t < 20; ++t) {
    const auto img = RasterImage::from_map(oracle::random_map(rng, 32, 32));
    const FelzenszwalbParams p{rng.uniform(10, 200), 0.8, 1 + static_cast<int>(rng.below(15))};
    const auto sp = felzenszwalb_segment(img, p);
    std::set<int> labels(sp.labels.values().begin(), sp.labels.values().end());
    const bool dense = static_cast<int>(labels.size()) == sp.region_count && *labels.begin() == 0 &&
                       *labels.rbegin() == sp.region_count - 1;
    v.check(dense && sp.labels.rows() == 32 && sp.labels.cols() == 32, "labels are not a dense partition");
    bool connected = true;
    for (auto [label, count] : oracle::components_per_label(sp)) connected = connected && count == 1;
    v.check(connected, "a region is disconnected");
    v.check(felzenszwalb_segment(img, p).labels == sp.labels, "segmentation is not deterministic");
  }
  v.check(felzenszwalb_segment(RasterImage::from_map(ScalarMap(24, 24, 0.37)), {100, 0.8, 20}).region_count == 1,
          "uniform image is not one region");
  ScalarMap halves(16, 16, 0.1);
  for (int r = 0; r < 16; ++r)
    for (int c = 8; c < 16; ++c) halves(r, c) = 0.9;
  v.check(felzenszwalb_segment(RasterImage::from_map(halves), {1, 0, 1}).region_count == 2,
          "two-half image is not exactly two regions");
  return v;
}

// 3: pseudo-mask invariants and oracle attention.
Verdict pgm_invariants() {
  Verdict v;
  Rng rng(103);
  for (int t = 0; t < 20; ++t) {
    const auto img = RasterImage::from_map(oracle::random_map(rng, 64, 64));
    pgm::AttentionSet a;
    a.a1 = oracle::random_map(rng, 16, 16, 0.01, 1);
    a.a2 = oracle::random_map(rng, 8, 8, 0.01, 1);
    a.a3 = oracle::random_map(rng, 4, 4, 0.01, 1);
    a.source_rows = a.source_cols = 64;
    const auto trace = pgm::generate_pseudo_mask_trace(img, a, kPgm);
    bool binary = true;
    for (auto m : trace.mask.mask.values()) binary = binary && (m == 0 || m == 1);
    v.check(binary, "mask is not binary");
    SuperpixelMap as_regions{Grid<std::int32_t>(64, 64), 2};
    for (std::size_t q = 0; q < trace.mask.mask.size(); ++q) as_regions.labels[q] = trace.mask.mask[q];
    v.check(subset(region_boundaries(as_regions), region_boundaries(trace.superpixels)),
            "mask boundary leaves superpixel boundaries");
    auto scaled = a;
    const double s = rng.uniform(0.05, 1.0);
    for (auto* m : {&scaled.a1, &scaled.a2, &scaled.a3})
      for (auto& x : m->values()) x *= s;
    v.check(pgm::generate_pseudo_mask(trace.superpixels, scaled, kPgm).mask == trace.mask.mask,
            "mask changes under positive scaling");
  }
  // One lesion blob per synthetic image, 60 per class.
  data::SyntheticSpec spec;
  std::array<double, 3> per_class{};
  const int per_label = 60;
  for (int label = 0; label < 3; ++label) {
    for (int i = 0; i < per_label; ++i) {
      const auto sample = data::synthesize_sample(spec, i, label);
      per_class[label] += oracle::dice(
          pgm::generate_pseudo_mask(sample.image, oracle_attention(*sample.gt_mask), kPgm).mask, *sample.gt_mask);
    }
    per_class[label] /= per_label;
  }
  const double mean = (per_class[0] + per_class[1] + per_class[2]) / 3;
  v.check(mean >= 0.9, "oracle-attention Dice " + fmt("%.3f", mean));
  v.note("oracle-attention Dice " + fmt("%.3f", mean) + " over 180 samples (hyper " + fmt("%.3f", per_class[0]) +
         ", hypo " + fmt("%.3f", per_class[1]) + ", mixed " + fmt("%.3f", per_class[2]) + ")");
  return v;
}

// 4: loss closed forms and batch oracles.
Verdict loss_closed_forms() {
  Verdict v;
  std::vector<ScalarMap> half{ScalarMap(9, 11, 0.5)};
  BinaryMask d(9, 11);
  for (std::size_t q = 0; q < d.size(); q += 2) d[q] = 1;
  const double ln2 = losses::segmentation_loss(half, std::vector<BinaryMask>{d});
  v.check(std::abs(ln2 - std::log(2.0)) <= 1e-6, "s=0.5 gives " + fmt("%.9f", ln2));
  const std::vector<std::vector<double>> flat{{1.5, 1.5, 1.5}, {-3, -3, -3}};
  const double ln3 = losses::classification_loss(flat, std::vector<int>{0, 2});
  v.check(std::abs(ln3 - std::log(3.0)) <= 1e-6, "uniform logits give " + fmt("%.9f", ln3));

  Rng rng(104);
  double worst = 0;
  for (int t = 0; t < 20; ++t) {
    std::vector<ScalarMap> s;
    std::vector<BinaryMask> m;
    double want = 0;
    long count = 0;
    for (int b = 0; b < 4; ++b) {
      s.push_back(oracle::random_map(rng, 8, 8, 0.0, 1.0));
      BinaryMask t2(8, 8);
      for (std::size_t q = 0; q < t2.size(); ++q) t2[q] = rng.uniform() < 0.4;
      for (std::size_t q = 0; q < t2.size(); ++q, ++count) want += oracle::bce(s.back()[q], t2[q]);
      m.push_back(t2);
    }
    worst = std::max(worst, std::abs(losses::segmentation_loss(s, m) - want / count));
    std::vector<std::vector<double>> z;
    std::vector<int> y;
    double ce = 0;
    for (int b = 0; b < 5; ++b) {
      z.push_back({rng.uniform(-6, 6), rng.uniform(-6, 6), rng.uniform(-6, 6)});
      y.push_back(static_cast<int>(rng.below(3)));
      ce += oracle::cross_entropy(z.back(), y.back());
    }
    worst = std::max(worst, std::abs(losses::classification_loss(z, y) - ce / 5));
  }
  v.check(worst <= 1e-9, "batch oracle deviation " + fmt("%.3g", worst));
  v.note("batch oracle deviation " + fmt("%.3g", worst));
  return v;
}

bool all_zero(const model::WalNet& net, const std::string& prefix) {
  for (const auto& p : net.parameters().params()) {
    if (p.name.rfind(prefix, 0) != 0) continue;
    for (double g : p.tensor.grad())
      if (g != 0.0) return false;
  }
  return true;
}

// 5: finite-difference gradient check and blocked gradient paths.
Verdict gradient_check() {
  Verdict v;
  model::WalNet net(model::ModelConfig::tiny(), 105);
  const auto rep = gradcheck::run(net, 200, 106);
  v.check(rep.pass_fraction() >= 0.95, "only " + std::to_string(rep.passed) + "/200 within 1e-3");
  v.note(std::to_string(rep.passed) + "/200 parameters within 1e-3");

  Rng rng(107);
  const auto img = gradcheck::random_image(rng, 8);
  const auto out = net.forward(img);
  net.parameters().zero_grad();
  losses::classification_loss(out.class_logits, 1).backward();
  v.check(all_zero(net, "decoder."), "classification loss reaches the decoder through the ROI box");
  v.check(!out.class_logits.depends_on(out.seg_prob), "logits depend on seg_prob");

  const auto out2 = net.forward(img);
  const auto target = pgm::generate_pseudo_mask(img, out2.attention_set(), kPgm);
  net.parameters().zero_grad();
  losses::segmentation_loss(out2.seg_prob, target.mask).backward();
  v.check(all_zero(net, "gate"), "segmentation loss reaches the gates through the pseudo mask");
  net.parameters().zero_grad();
  return v;
}

// 6: ROI geometry.
Verdict rcm_geometry() {
  Verdict v;
  const auto padded = rcm::dilate_and_clamp(BBox{90, 90, 130, 130}, 1.0 / 7.0, 224, 224);
  v.check(padded == (BBox{58, 58, 162, 162}), "lambda=1/7 on 224 does not pad by 32");
  Rng rng(108);
  int bad_dilate = 0, bad_scale = 0;
  for (int t = 0; t < 200; ++t) {
    const int rows = 16 + static_cast<int>(rng.below(240));
    const int cols = 16 + static_cast<int>(rng.below(240));
    const int r0 = static_cast<int>(rng.below(rows)), c0 = static_cast<int>(rng.below(cols));
    const BBox box{r0, c0, r0 + 1 + static_cast<int>(rng.below(rows - r0)),
                   c0 + 1 + static_cast<int>(rng.below(cols - c0))};
    const double lambda = rng.uniform(0, 0.4);
    const int pr = static_cast<int>(lambda * rows), pc = static_cast<int>(lambda * cols);
    const BBox want{std::max(0, box.row0 - pr), std::max(0, box.col0 - pc), std::min(rows, box.row1 + pr),
                    std::min(cols, box.col1 + pc)};
    if (!(rcm::dilate_and_clamp(box, lambda, rows, cols) == want)) ++bad_dilate;

    const int stride = 4 << rng.below(4);
    const int gr = (rows + stride - 1) / stride, gc = (cols + stride - 1) / stride;
    const BBox cells{box.row0 / stride, box.col0 / stride, std::min(gr, (box.row1 + stride - 1) / stride),
                     std::min(gc, (box.col1 + stride - 1) / stride)};
    if (!(rcm::scale_box(box, stride, gr, gc) == cells)) ++bad_scale;
  }
  v.check(bad_dilate == 0, std::to_string(bad_dilate) + " dilate/clamp mismatches");
  v.check(bad_scale == 0, std::to_string(bad_scale) + " stride-scaling mismatches");
  const auto [box, fallback] = rcm::roi_box(ScalarMap(64, 64, 0.0), rcm::RoiParams{});
  v.check(fallback && box == BBox::full(64, 64), "empty mask does not fall back to the full image");
  return v;
}

// 7: metrics.
Verdict metrics_checks() {
  Verdict v;
  auto from = [](std::array<std::array<long long, 3>, 3> m) {
    metrics::ConfusionMatrix cm;
    cm.counts = m;
    return metrics::compute_metrics(cm);
  };
  const auto perfect = from({{{7, 0, 0}, {0, 9, 0}, {0, 0, 4}}});
  v.check(perfect.accuracy == 1.0 && std::abs(perfect.kappa - 1.0) < 1e-12, "perfect matrix");
  const auto chance = from({{{2, 2, 2}, {2, 2, 2}, {2, 2, 2}}});
  v.check(std::abs(chance.kappa) < 1e-12, "chance matrix kappa " + fmt("%.3g", chance.kappa));
  const std::array<std::array<long long, 3>, 3> hand{{{5, 1, 0}, {1, 6, 1}, {0, 2, 4}}};
  const auto r = from(hand);
  const auto o = oracle::classic(hand);
  const double dev = std::max({std::abs(r.accuracy - o.accuracy), std::abs(r.kappa - o.kappa),
                               std::abs(r.macro_precision - o.precision), std::abs(r.macro_recall - o.recall),
                               std::abs(r.macro_f1 - o.f1)});
  v.check(dev <= 1e-9, "hand matrix deviation " + fmt("%.3g", dev));
  Rng rng(109);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    std::vector<double> s(60), g(60);
    std::vector<std::uint8_t> pos(60);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = rng.uniform(-2, 2);
      g[i] = std::atan(3 * s[i]) + 10;
      pos[i] = rng.uniform() < 0.5;
    }
    pos[0] = 1;
    pos[1] = 0;
    worst = std::max(worst, std::abs(metrics::auc(metrics::roc_curve(s, pos)) - metrics::auc(metrics::roc_curve(g, pos))));
  }
  v.check(worst < 1e-12, "AUC changes under a monotone transform by " + fmt("%.3g", worst));
  return v;
}

// 8: end-to-end synthetic experiment.
Verdict end_to_end(const fs::path& work) {
  Verdict v;
  config::ExperimentConfig cfg;
  cfg.name = "acceptance_e2e";
  const auto ds = experiment::obtain_dataset(cfg);
  const auto c = ds.class_counts();
  const auto out = experiment::run_seed(cfg, ds, 0, work / "e2e", [](const std::string& line) {
    std::printf("    %s\n", line.c_str());
    std::fflush(stdout);
  });
  const double acc = out.test.accuracy;
  const double dice = out.test.dice.value_or(0.0);
  v.note("dataset " + std::to_string(c[0]) + "/" + std::to_string(c[1]) + "/" + std::to_string(c[2]) +
         ", best epoch " + std::to_string(out.best_epoch) + ", test accuracy " + fmt("%.4f", acc) +
         ", Dice " + fmt("%.4f", dice));
  v.check(acc >= 0.85, "test accuracy " + fmt("%.4f", acc) + " < 0.85");
  v.check(out.test.dice.has_value() && dice >= 0.5, "segmentation Dice " + fmt("%.4f", dice) + " < 0.5");
  return v;
}

config::ExperimentConfig harness_config() {
  config::ExperimentConfig cfg;
  cfg.name = "harness";
  cfg.data.synthetic.counts = {24, 48, 30};
  cfg.train.epochs = 3;
  return cfg;
}

int table_rows(const std::string& table, Verdict& v) {
  const std::regex cell(R"(\d\.\d{4} \(\d\.\d{3}\))");
  std::istringstream in(table);
  std::string line;
  int rows = 0, n = 0;
  while (std::getline(in, line)) {
    if (++n <= 2 || line.empty()) continue;  // header and separator
    ++rows;
    const auto cells = std::distance(std::sregex_iterator(line.begin(), line.end(), cell), std::sregex_iterator());
    v.check(cells == 5, "row has " + std::to_string(cells) + " mean (std) cells: " + line);
  }
  return rows;
}

// 9: ablation and ROI-comparison harnesses at reduced scale.
Verdict harnesses() {
  Verdict v;
  const auto cfg = harness_config();
  const auto ds = experiment::obtain_dataset(cfg);
  const int seeds = 5;
  const auto ab = experiment::run_variants(experiment::ablation_variants(cfg), ds, seeds, std::nullopt, "ablation");
  const auto roi = experiment::run_variants(experiment::roi_variants(cfg), ds, seeds, std::nullopt, "roi");
  const auto ab_table = experiment::render_table(ab);
  const auto roi_table = experiment::render_table(roi);
  std::printf("%s\n%s\n", ab_table.c_str(), roi_table.c_str());
  v.check(table_rows(ab_table, v) == 3, "ablation table does not have 3 rows");
  v.check(table_rows(roi_table, v) == 5, "ROI table does not have 5 rows");

  const auto ab2 = experiment::run_variants(experiment::ablation_variants(cfg), ds, seeds, std::nullopt, "ablation");
  const auto roi2 = experiment::run_variants(experiment::roi_variants(cfg), ds, seeds, std::nullopt, "roi");
  v.check(experiment::render_table(ab2) == ab_table, "ablation rerun differs");
  v.check(experiment::render_table(roi2) == roi_table, "ROI rerun differs");
  bool exact = true;
  for (std::size_t i = 0; i < ab.size(); ++i)
    for (std::size_t m = 0; m < 5; ++m)
      exact = exact && ab[i].aggregate.table[m].mean == ab2[i].aggregate.table[m].mean &&
              ab[i].aggregate.table[m].std == ab2[i].aggregate.table[m].std;
  v.check(exact, "ablation rerun differs below display precision");

  const double base = ab[0].aggregate.table[0].mean, no_rcm = ab[1].aggregate.table[0].mean,
               full = ab[2].aggregate.table[0].mean;
  v.note("informational accuracy deltas over " + std::to_string(seeds) + " seeds: full - w/o RCM " +
         fmt("%+.4f", full - no_rcm) + ", w/o RCM - baseline " + fmt("%+.4f", no_rcm - base));
  return v;
}

// 10: determinism of checkpoint and metrics.
Verdict determinism(const fs::path& work) {
  Verdict v;
  auto cfg = harness_config();
  cfg.train.epochs = 2;
  const auto resolved = config::from_json(nlohmann::json::parse(cfg.to_json().dump()));
  const auto ds = experiment::obtain_dataset(resolved);
  const auto a = experiment::run_seed(resolved, ds, 0, work / "det_a");
  const auto b = experiment::run_seed(config::from_json(resolved.to_json()), experiment::obtain_dataset(resolved),
                                      0, work / "det_b");
  v.check(a.checkpoint_hash == b.checkpoint_hash, "checkpoint hashes " + a.checkpoint_hash + " vs " + b.checkpoint_hash);
  v.check(train::file_hash(work / "det_a" / "checkpoint.bin") == train::file_hash(work / "det_b" / "checkpoint.bin"),
          "checkpoint files differ");
  v.check(io::read_text(work / "det_a" / "metrics.json") == io::read_text(work / "det_b" / "metrics.json"),
          "metrics.json differs");
  v.note("checkpoint " + a.checkpoint_hash);
  return v;
}

struct Criterion {
  int id;
  std::string name;
  double limit_s;  // 0 = no runtime bound
  std::function<Verdict()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only, known_red;
  std::string work = (fs::temp_directory_path() / "walnet_acceptance").string();
  app.add_option("--only", only, "Run only these criteria")->delimiter(',');
  app.add_option("--known-red", known_red, "Criteria whose failure does not fail the run")->delimiter(',');
  app.add_option("--work", work, "Scratch directory for run artifacts");
  CLI11_PARSE(app, argc, argv);
  fs::remove_all(work);
  fs::create_directories(work);

  const std::vector<Criterion> criteria{
      {1, "region average oracle", 5, region_average_oracle},
      {2, "superpixel properties", 10, superpixel_properties},
      {3, "pseudo-mask invariants", 30, pgm_invariants},
      {4, "loss closed forms", 0, loss_closed_forms},
      {5, "gradient check", 120, gradient_check},
      {6, "ROI geometry", 5, rcm_geometry},
      {7, "metrics", 0, metrics_checks},
      {8, "end-to-end synthetic experiment", 1200, [&] { return end_to_end(work); }},
      {9, "ablation and ROI harnesses", 0, harnesses},
      {10, "determinism", 0, [&] { return determinism(work); }},
  };
  const std::set<int> selected(only.begin(), only.end());
  const std::set<int> red(known_red.begin(), known_red.end());

  int failures = 0;
  for (const auto& c : criteria) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.check(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.limit_s > 0) v.check(secs < c.limit_s, "runtime over " + fmt("%.0f", c.limit_s) + " s");
    const bool tolerated = !v.pass && red.count(c.id);
    if (!v.pass && !tolerated) ++failures;
    std::printf("criterion %d (%s): %s [%.1f s]%s %s\n", c.id, c.name.c_str(), v.pass ? "PASS" : "FAIL", secs,
                tolerated ? " (known red)" : "", v.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
