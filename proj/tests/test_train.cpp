#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <regex>

#include "walnet/experiment.hpp"
#include "walnet/io.hpp"
#include "walnet/train.hpp"

using namespace walnet;
namespace fs = std::filesystem;

namespace {

config::ExperimentConfig small_config() {
  config::ExperimentConfig cfg;
  cfg.name = "small";
  cfg.data.synthetic.counts = {10, 10, 10};
  cfg.train.epochs = 2;
  cfg.train.batch_size = 4;
  cfg.train.learning_rate = 1e-3;
  return cfg;
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("walnet_train_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Adam, FirstStepMatchesClosedForm) {
  nn::ParameterStore store;
  Rng rng(1);
  auto p = store.add("p", {3}, nn::Init::zeros, 1, rng);
  const std::vector<double> grad{0.5, -2.0, 1e-3};
  nn::sum(nn::mul(p, nn::Tensor::from({3}, grad))).backward();
  train::Adam adam(store, 0.1, 0.9, 0.999, 1e-8);
  adam.step();
  // Bias-corrected moments equal g and g^2 after one step.
  for (int i = 0; i < 3; ++i) {
    EXPECT_NEAR(p.values()[i], -0.1 * grad[i] / (std::abs(grad[i]) + 1e-8), 1e-12);
  }
}

TEST(Adam, TwoStepsMatchRecurrence) {
  nn::ParameterStore store;
  Rng rng(2);
  auto p = store.add("p", {1}, nn::Init::zeros, 1, rng);
  train::Adam adam(store, 0.01, 0.8, 0.9, 1e-8);
  double m = 0, v = 0, x = 0;
  const double g[2] = {1.5, -0.25};
  for (int t = 1; t <= 2; ++t) {
    store.zero_grad();
    nn::sum(nn::scale(p, g[t - 1])).backward();
    adam.step(0.5);
    const double gs = 0.5 * g[t - 1];
    m = 0.8 * m + 0.2 * gs;
    v = 0.9 * v + 0.1 * gs * gs;
    x -= 0.01 * (m / (1 - std::pow(0.8, t))) / (std::sqrt(v / (1 - std::pow(0.9, t))) + 1e-8);
    EXPECT_NEAR(p.values()[0], x, 1e-15);
  }
  EXPECT_EQ(adam.steps(), 2);
}

TEST(Fit, SmokeRunRecordsHistory) {
  const auto cfg = small_config();
  const auto ds = experiment::obtain_dataset(cfg);
  const auto split = data::split(ds, cfg.data.ratios, 0);
  model::WalNet net(cfg.model, 3);
  int calls = 0;
  train::TrainOptions opt;
  opt.on_epoch = [&](const train::EpochRecord&) { ++calls; };
  const auto res = train::fit(net, cfg, ds, split, 4, opt);
  EXPECT_EQ(calls, 2);
  ASSERT_EQ(res.epochs.size(), 2u);
  EXPECT_EQ(res.steps.size(), 2u * ((split.train.size() + 3) / 4));
  for (const auto& s : res.steps) {
    EXPECT_TRUE(std::isfinite(s.total));
    EXPECT_GT(s.seg, 0.0);
    EXPECT_NEAR(s.total, s.seg + s.cls, 1e-12);
  }
  EXPECT_GE(res.best_epoch, 1);
  EXPECT_TRUE(res.epochs[res.best_epoch - 1].best);
  ASSERT_TRUE(res.epochs[0].val_dice.has_value());

  const auto dir = temp_dir("history");
  train::write_history(dir / "history.jsonl", res);
  std::ifstream in(dir / "history.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("type"));
    ++lines;
  }
  EXPECT_EQ(lines, static_cast<int>(res.steps.size() + res.epochs.size()));
  fs::remove_all(dir);
}

TEST(Fit, PlainClassifierHasNoSegLoss) {
  auto cfg = small_config();
  cfg.train.epochs = 1;
  cfg.model.use_attention = false;
  cfg.model.use_segmentation = false;
  cfg.model.roi.strategy = rcm::RoiStrategy::none;
  const auto ds = experiment::obtain_dataset(cfg);
  const auto split = data::split(ds, cfg.data.ratios, 0);
  model::WalNet net(cfg.model, 3);
  const auto res = train::fit(net, cfg, ds, split, 4);
  for (const auto& s : res.steps) EXPECT_DOUBLE_EQ(s.seg, 0.0);
  EXPECT_FALSE(train::evaluate(net, ds, split.test).report.dice.has_value());
}

TEST(Checkpoint, RoundTripAndMismatch) {
  model::WalNet a(model::ModelConfig::tiny(), 5);
  const auto dir = temp_dir("ckpt");
  fs::create_directories(dir);
  const auto hash = train::save_checkpoint(dir / "c.bin", a.parameters());
  EXPECT_EQ(hash.size(), 16u);
  EXPECT_EQ(hash, train::file_hash(dir / "c.bin"));
  model::WalNet b(model::ModelConfig::tiny(), 6);
  train::load_checkpoint(dir / "c.bin", b.parameters());
  for (std::size_t k = 0; k < a.parameters().params().size(); ++k) {
    const auto& x = a.parameters().params()[k].tensor;
    const auto& y = b.parameters().params()[k].tensor;
    EXPECT_TRUE(std::equal(x.values().begin(), x.values().end(), y.values().begin()));
  }
  auto other = model::ModelConfig::tiny();
  other.widths[3] = 16;
  model::WalNet c(other, 0);
  EXPECT_THROW(train::load_checkpoint(dir / "c.bin", c.parameters()), ConfigError);

  io::write_text(dir / "side.json", train::checkpoint_sidecar(a, 5, hash).dump());
  const auto loaded = train::load_model(dir / "c.bin", dir / "side.json");
  EXPECT_EQ(loaded.parameters().architecture_hash(), a.parameters().architecture_hash());
  io::write_text(dir / "trunc.bin", io::read_text(dir / "c.bin").substr(0, 40));
  EXPECT_THROW(train::load_checkpoint(dir / "trunc.bin", b.parameters()), InputError);
  fs::remove_all(dir);
}

TEST(Experiment, RunSeedIsReproducible) {
  auto cfg = small_config();
  cfg.train.epochs = 1;
  const auto ds = experiment::obtain_dataset(cfg);
  const auto d1 = temp_dir("rep1"), d2 = temp_dir("rep2");
  const auto a = experiment::run_seed(cfg, ds, 0, d1);
  const auto b = experiment::run_seed(cfg, ds, 0, d2);
  EXPECT_EQ(a.checkpoint_hash, b.checkpoint_hash);
  EXPECT_EQ(io::read_text(d1 / "metrics.json"), io::read_text(d2 / "metrics.json"));
  for (const char* f : {"history.jsonl", "config.json", "confusion.csv", "boxes.csv", "roc_micro.csv"}) {
    EXPECT_TRUE(fs::exists(d1 / f)) << f;
  }
  const auto loaded = train::load_model(d1 / "checkpoint.bin", d1 / "config.json");
  const auto split = data::split(ds, cfg.data.ratios, a.seeds.split);
  EXPECT_DOUBLE_EQ(train::evaluate(loaded, ds, split.test).report.accuracy, a.test.accuracy);
  fs::remove_all(d1);
  fs::remove_all(d2);
}

TEST(Experiment, SeedsDeriveFromBase) {
  const auto s = train::Seeds::for_run(10, 3);
  EXPECT_EQ(s.split, 13u);
  EXPECT_NE(s.init, s.order);
  EXPECT_EQ(train::Seeds::for_run(10, 3).init, s.init);
}

TEST(Experiment, VariantsAndTable) {
  const auto base = small_config();
  const auto ab = experiment::ablation_variants(base);
  ASSERT_EQ(ab.size(), 3u);
  EXPECT_FALSE(ab[0].cfg.model.use_segmentation);
  EXPECT_EQ(ab[1].cfg.model.roi.strategy, rcm::RoiStrategy::none);
  EXPECT_EQ(ab[2].cfg.model.roi.strategy, rcm::RoiStrategy::dilated_crop);
  EXPECT_EQ(experiment::roi_variants(base).size(), 5u);

  std::vector<experiment::ExperimentResult> rows(2);
  rows[0].label = "A";
  rows[1].label = "B";
  for (auto& r : rows) {
    experiment::SeedOutcome o;
    o.test.accuracy = 0.9;
    r.runs = {o, o};
    r.aggregate = experiment::aggregate(r.runs);
  }
  const auto table = experiment::render_table(rows);
  const std::regex cell(R"(\d\.\d{4} \(\d\.\d{3}\))");
  std::istringstream in(table);
  std::string line;
  int body = 0;
  while (std::getline(in, line)) {
    if (line.rfind("| A", 0) == 0 || line.rfind("| B", 0) == 0) {
      ++body;
      EXPECT_EQ(std::distance(std::sregex_iterator(line.begin(), line.end(), cell), std::sregex_iterator()), 5)
          << line;
    }
  }
  EXPECT_EQ(body, 2);
  EXPECT_NE(table.find("0.9000 (0.000)"), std::string::npos);
}
