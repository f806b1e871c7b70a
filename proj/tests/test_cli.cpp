#include <gtest/gtest.h>

#include <filesystem>

#include "cli.hpp"
#include "walnet/config.hpp"
#include "walnet/io.hpp"

namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "walnet");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return walnet::cli::dispatch(static_cast<int>(argv.size()), argv.data());
}

fs::path temp_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("walnet_cli_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Cli, HelpListsEverySubcommand) {
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({"--help"}), 0);
  const auto text = testing::internal::GetCapturedStdout();
  for (const char* cmd : {"synth", "train", "eval", "experiment", "ablate", "roi-compare", "pgm-preview"}) {
    EXPECT_NE(text.find(cmd), std::string::npos) << cmd;
  }
}

TEST(Cli, SchemaListsKeys) {
  testing::internal::CaptureStdout();
  EXPECT_EQ(run({"--schema"}), 0);
  const auto text = testing::internal::GetCapturedStdout();
  EXPECT_NE(text.find("train.epochs"), std::string::npos);
  EXPECT_NE(text.find("model.roi_strategy"), std::string::npos);
}

TEST(Cli, UsageErrorsExitOne) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({}), 1);
  EXPECT_EQ(run({"frobnicate"}), 1);
  EXPECT_EQ(run({"eval"}), 1);  // --run is required
  testing::internal::GetCapturedStderr();
}

TEST(Cli, UnknownConfigKeyExitsOneAndNamesIt) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"synth", "-q", "--set", "train.epohcs=3", "-o", temp_dir("bad").string()}), 1);
  const auto err = testing::internal::GetCapturedStderr();
  EXPECT_NE(err.find("train.epohcs"), std::string::npos);
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"train", "-q", "--roi-strategy", "zoom", "-o", temp_dir("bad").string()}), 1);
  EXPECT_NE(testing::internal::GetCapturedStderr().find("zoom"), std::string::npos);
}

TEST(Cli, RuntimeFailureExitsTwo) {
  testing::internal::CaptureStderr();
  EXPECT_EQ(run({"eval", "-q", "--run", temp_dir("absent").string(), "-o", temp_dir("evalout").string()}), 2);
  testing::internal::GetCapturedStderr();
  fs::remove_all(temp_dir("evalout"));
}

TEST(Cli, SynthWritesDatasetAndResolvedConfig) {
  const auto out = temp_dir("synth");
  EXPECT_EQ(run({"synth", "-q", "--set", "data.synthetic.counts=[3,3,3]", "--seed", "7", "-o", out.string()}), 0);
  EXPECT_TRUE(fs::exists(out / "labels.csv"));
  ASSERT_TRUE(fs::exists(out / "config.resolved.json"));
  const auto cfg = walnet::config::load((out / "config.resolved.json").string());
  EXPECT_EQ(cfg.seed, 7u);
  EXPECT_EQ(cfg.data.synthetic.counts, (std::array<int, 3>{3, 3, 3}));
  fs::remove_all(out);
}

TEST(Cli, FlagsOverrideSetWhichOverridesFile) {
  const auto dir = temp_dir("prec");
  fs::create_directories(dir);
  walnet::io::write_text(dir / "c.json", R"({"train": {"epochs": 4, "batch_size": 2}, "seeds": 2})");
  const auto out = dir / "out";
  EXPECT_EQ(run({"synth", "-q", "-c", (dir / "c.json").string(), "--set", "train.epochs=6", "--set",
                 "data.synthetic.counts=[3,3,3]", "-o", out.string()}),
            0);
  const auto cfg = walnet::config::load((out / "config.resolved.json").string());
  EXPECT_EQ(cfg.train.epochs, 6);
  EXPECT_EQ(cfg.train.batch_size, 2);
  EXPECT_EQ(cfg.seeds, 2);
  fs::remove_all(dir);
}
