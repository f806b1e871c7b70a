#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "walnet/classes.hpp"

namespace walnet::metrics {

/// counts[true][predicted].
struct ConfusionMatrix {
  std::array<std::array<long long, kNumClasses>, kNumClasses> counts{};

  void add(int truth, int predicted);
  long long total() const;
  long long trace() const;
  static ConfusionMatrix from_predictions(std::span<const int> truth, std::span<const int> predicted);
};

using ProbRow = std::array<double, kNumClasses>;

struct RocPoint {
  double fpr = 0;
  double tpr = 0;
  double threshold = 0;
};

/// ROC curve with one threshold per distinct score, descending. Tied scores
/// move together, so the curve is a rank statistic. Starts at (0,0) with
/// threshold +inf and ends at (1,1).
std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive);

/// Trapezoidal area under `curve`.
double auc(std::span<const RocPoint> curve);

struct MetricsReport {
  ConfusionMatrix confusion;
  double accuracy = 0;
  double macro_f1 = 0;
  double kappa = 0;
  double macro_precision = 0;
  double macro_recall = 0;
  /// Per-class one-vs-rest and micro AUC; absent without scores or when a
  /// class has no positives or no negatives.
  std::array<std::optional<double>, kNumClasses> class_auc{};
  std::optional<double> micro_auc;
  std::optional<double> dice;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

/// Accuracy, macro precision/recall/F1 and Cohen's kappa from the confusion
/// matrix; AUCs from the per-sample class probabilities when given.
/// Undefined per-class precision, recall or F1 count as 0 and add a warning;
/// kappa is 0 with a warning when chance agreement is 1. Throws InputError for
/// an empty matrix or when scores and labels disagree in length.
MetricsReport compute_metrics(const ConfusionMatrix& confusion, std::span<const ProbRow> scores = {},
                              std::span<const int> labels = {});

/// The five table columns in display order.
inline constexpr std::array<const char*, 5> kTableMetrics{"accuracy", "f1", "kappa", "precision",
                                                          "recall"};
std::array<double, 5> table_values(const MetricsReport& report);

struct MeanStd {
  double mean = 0;
  double std = 0;
};

/// Population mean and standard deviation.
MeanStd mean_std(std::span<const double> values);

/// "0.8644 (0.011)": mean to 4 decimals, std to 3.
std::string format_cell(const MeanStd& v);

}  // namespace walnet::metrics
