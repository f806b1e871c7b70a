#include <gtest/gtest.h>

#include "oracles.hpp"
#include "walnet/metrics.hpp"

using namespace walnet;
using namespace walnet::metrics;

namespace {

ConfusionMatrix matrix(std::array<std::array<long long, 3>, 3> m) {
  ConfusionMatrix cm;
  cm.counts = m;
  return cm;
}

}  // namespace

TEST(Metrics, HandMatrixMatchesFormulas) {
  const std::array<std::array<long long, 3>, 3> m{{{5, 1, 0}, {1, 6, 1}, {0, 2, 4}}};
  const auto r = compute_metrics(matrix(m));
  const auto o = oracle::classic(m);
  EXPECT_NEAR(r.accuracy, o.accuracy, 1e-9);
  EXPECT_NEAR(r.kappa, o.kappa, 1e-9);
  EXPECT_NEAR(r.macro_precision, o.precision, 1e-9);
  EXPECT_NEAR(r.macro_recall, o.recall, 1e-9);
  EXPECT_NEAR(r.macro_f1, o.f1, 1e-9);
  EXPECT_NEAR(r.accuracy, 15.0 / 20.0, 1e-12);
}

TEST(Metrics, PerfectAndChance) {
  const auto perfect = compute_metrics(matrix({{{4, 0, 0}, {0, 5, 0}, {0, 0, 6}}}));
  EXPECT_DOUBLE_EQ(perfect.accuracy, 1.0);
  EXPECT_NEAR(perfect.kappa, 1.0, 1e-12);
  // Rows proportional to columns: observed agreement equals chance.
  const auto chance = compute_metrics(matrix({{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}}}));
  EXPECT_NEAR(chance.kappa, 0.0, 1e-12);
  const auto chance2 = compute_metrics(matrix({{{2, 4, 2}, {1, 2, 1}, {3, 6, 3}}}));
  EXPECT_NEAR(chance2.kappa, 0.0, 1e-12);
}

TEST(Metrics, UndefinedClassesCountAsZeroWithWarning) {
  const auto r = compute_metrics(matrix({{{3, 0, 0}, {2, 0, 0}, {1, 0, 0}}}));
  EXPECT_FALSE(r.warnings.empty());
  EXPECT_NEAR(r.macro_precision, (0.5 + 0 + 0) / 3, 1e-12);
}

TEST(Metrics, DegenerateKappaIsZeroWithWarning) {
  const auto r = compute_metrics(matrix({{{5, 0, 0}, {0, 0, 0}, {0, 0, 0}}}));
  EXPECT_DOUBLE_EQ(r.kappa, 0.0);
  EXPECT_FALSE(r.warnings.empty());
}

TEST(Metrics, EmptyMatrixThrows) { EXPECT_THROW(compute_metrics(ConfusionMatrix{}), InputError); }

TEST(Auc, MatchesMannWhitneyWithTies) {
  Rng rng(51);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(40);
    std::vector<std::uint8_t> pos(40);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = std::round(rng.uniform() * 8) / 8;  // plenty of ties
      pos[i] = i % 3 == 0 || rng.uniform() < 0.3;
    }
    EXPECT_NEAR(auc(roc_curve(s, pos)), oracle::mann_whitney_auc(s, pos), 1e-12);
  }
}

TEST(Auc, InvariantUnderMonotoneTransform) {
  Rng rng(52);
  for (int t = 0; t < 30; ++t) {
    std::vector<double> s(50), g(50);
    std::vector<std::uint8_t> pos(50);
    for (std::size_t i = 0; i < s.size(); ++i) {
      s[i] = rng.uniform(-3, 3);
      g[i] = std::exp(2 * s[i]) + 5;
      pos[i] = rng.uniform() < 0.4 || i == 0;
    }
    pos[1] = 0;
    EXPECT_NEAR(auc(roc_curve(s, pos)), auc(roc_curve(g, pos)), 1e-12);
  }
}

TEST(Roc, StartsAndEndsAtCorners) {
  std::vector<double> s{0.9, 0.1, 0.5, 0.5};
  std::vector<std::uint8_t> pos{1, 0, 1, 0};
  const auto c = roc_curve(s, pos);
  EXPECT_DOUBLE_EQ(c.front().fpr, 0.0);
  EXPECT_DOUBLE_EQ(c.front().tpr, 0.0);
  EXPECT_DOUBLE_EQ(c.back().fpr, 1.0);
  EXPECT_DOUBLE_EQ(c.back().tpr, 1.0);
  EXPECT_EQ(c.size(), 4u);  // the origin plus one point per distinct score
  EXPECT_NEAR(auc(c), 0.875, 1e-12);
}

TEST(Metrics, AucsFromScores) {
  std::vector<ProbRow> p{{0.8, 0.1, 0.1}, {0.2, 0.7, 0.1}, {0.1, 0.2, 0.7}, {0.6, 0.3, 0.1}};
  std::vector<int> y{0, 1, 2, 1};
  std::vector<int> pred{0, 1, 2, 0};
  const auto r = compute_metrics(ConfusionMatrix::from_predictions(y, pred), p, y);
  ASSERT_TRUE(r.micro_auc.has_value());
  ASSERT_TRUE(r.class_auc[2].has_value());
  EXPECT_DOUBLE_EQ(*r.class_auc[2], 1.0);
  std::vector<double> flat;
  std::vector<std::uint8_t> is;
  for (std::size_t i = 0; i < p.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      flat.push_back(p[i][k]);
      is.push_back(y[i] == k);
    }
  EXPECT_NEAR(*r.micro_auc, oracle::mann_whitney_auc(flat, is), 1e-12);
  const auto j = r.to_json();
  EXPECT_TRUE(j.contains("kappa"));
  EXPECT_TRUE(j.contains("confusion"));
}

TEST(Metrics, MeanStdAndCells) {
  std::vector<double> v{0.86, 0.88, 0.84};
  const auto ms = mean_std(v);
  EXPECT_NEAR(ms.mean, 0.86, 1e-12);
  EXPECT_NEAR(ms.std, std::sqrt((0.0004 + 0.0004) / 3), 1e-12);
  EXPECT_EQ(format_cell({0.86444, 0.0114}), "0.8644 (0.011)");
  MetricsReport r;
  r.accuracy = 1;
  r.macro_f1 = 2;
  r.kappa = 3;
  r.macro_precision = 4;
  r.macro_recall = 5;
  EXPECT_EQ(table_values(r), (std::array<double, 5>{1, 2, 3, 4, 5}));
}
