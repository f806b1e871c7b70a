#include "walnet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "walnet/errors.hpp"

namespace walnet::metrics {

void ConfusionMatrix::add(int truth, int predicted) {
  if (truth < 0 || truth >= kNumClasses || predicted < 0 || predicted >= kNumClasses) {
    throw InputError("confusion: class index out of range");
  }
  ++counts[truth][predicted];
}

long long ConfusionMatrix::total() const {
  long long t = 0;
  for (const auto& row : counts) t += std::accumulate(row.begin(), row.end(), 0LL);
  return t;
}

long long ConfusionMatrix::trace() const {
  long long t = 0;
  for (int i = 0; i < kNumClasses; ++i) t += counts[i][i];
  return t;
}

ConfusionMatrix ConfusionMatrix::from_predictions(std::span<const int> truth,
                                                  std::span<const int> predicted) {
  if (truth.size() != predicted.size()) throw InputError("confusion: length mismatch");
  ConfusionMatrix m;
  for (std::size_t i = 0; i < truth.size(); ++i) m.add(truth[i], predicted[i]);
  return m;
}

std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                std::span<const std::uint8_t> positive) {
  if (scores.size() != positive.size()) throw InputError("roc_curve: length mismatch");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double pos = 0, neg = 0;
  for (auto p : positive) (p ? pos : neg) += 1;
  std::vector<RocPoint> curve{{0.0, 0.0, std::numeric_limits<double>::infinity()}};
  double tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    curve.push_back({neg > 0 ? fp / neg : 0.0, pos > 0 ? tp / pos : 0.0, s});
  }
  return curve;
}

double auc(std::span<const RocPoint> curve) {
  double area = 0;
  for (std::size_t i = 1; i < curve.size(); ++i) {
    area += (curve[i].fpr - curve[i - 1].fpr) * (curve[i].tpr + curve[i - 1].tpr) * 0.5;
  }
  return area;
}

nlohmann::json MetricsReport::to_json() const {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); };
  nlohmann::json per_class = nlohmann::json::object();
  for (int c = 0; c < kNumClasses; ++c) per_class[kClassNames[c]] = opt(class_auc[c]);
  nlohmann::json cm = nlohmann::json::array();
  for (const auto& row : confusion.counts) cm.push_back(row);
  return {{"accuracy", accuracy},
          {"f1", macro_f1},
          {"kappa", kappa},
          {"precision", macro_precision},
          {"recall", macro_recall},
          {"auc", {{"per_class", per_class}, {"micro", opt(micro_auc)}}},
          {"dice", opt(dice)},
          {"confusion", cm},
          {"class_order", kClassNames},
          {"warnings", warnings}};
}

MetricsReport compute_metrics(const ConfusionMatrix& confusion, std::span<const ProbRow> scores,
                              std::span<const int> labels) {
  const double n = static_cast<double>(confusion.total());
  if (n <= 0) throw InputError("compute_metrics: empty confusion matrix");
  for (const auto& row : confusion.counts) {
    for (long long v : row) {
      if (v < 0) throw InputError("compute_metrics: negative confusion entry");
    }
  }
  MetricsReport r;
  r.confusion = confusion;
  const auto& m = confusion.counts;
  std::array<double, kNumClasses> row_sum{}, col_sum{};
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = 0; j < kNumClasses; ++j) {
      row_sum[i] += static_cast<double>(m[i][j]);
      col_sum[j] += static_cast<double>(m[i][j]);
    }
  }
  r.accuracy = static_cast<double>(confusion.trace()) / n;

  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (int c = 0; c < kNumClasses; ++c) {
    const double tp = static_cast<double>(m[c][c]);
    double precision = 0, recall = 0;
    if (col_sum[c] > 0) {
      precision = tp / col_sum[c];
    } else {
      r.warnings.push_back(std::string("precision undefined for class '") + kClassNames[c] +
                           "' (never predicted); counted as 0");
    }
    if (row_sum[c] > 0) {
      recall = tp / row_sum[c];
    } else {
      r.warnings.push_back(std::string("recall undefined for class '") + kClassNames[c] +
                           "' (absent from truth); counted as 0");
    }
    p_sum += precision;
    r_sum += recall;
    if (precision + recall > 0) f_sum += 2 * precision * recall / (precision + recall);
  }
  r.macro_precision = p_sum / kNumClasses;
  r.macro_recall = r_sum / kNumClasses;
  r.macro_f1 = f_sum / kNumClasses;

  double pe = 0;
  for (int c = 0; c < kNumClasses; ++c) pe += row_sum[c] * col_sum[c];
  pe /= n * n;
  if (1.0 - pe > 1e-15) {
    r.kappa = (r.accuracy - pe) / (1.0 - pe);
  } else {
    r.kappa = 0;
    r.warnings.push_back("kappa undefined (chance agreement is 1); reported as 0");
  }

  if (!scores.empty() || !labels.empty()) {
    if (scores.size() != labels.size()) throw InputError("compute_metrics: scores and labels differ in length");
    std::vector<double> flat_scores;
    std::vector<std::uint8_t> flat_pos;
    for (int c = 0; c < kNumClasses; ++c) {
      std::vector<double> s(scores.size());
      std::vector<std::uint8_t> pos(scores.size());
      bool any_pos = false, any_neg = false;
      for (std::size_t i = 0; i < scores.size(); ++i) {
        s[i] = scores[i][c];
        pos[i] = labels[i] == c;
        (pos[i] ? any_pos : any_neg) = true;
        flat_scores.push_back(s[i]);
        flat_pos.push_back(pos[i]);
      }
      if (any_pos && any_neg) {
        r.class_auc[c] = auc(roc_curve(s, pos));
      } else {
        r.warnings.push_back(std::string("AUC undefined for class '") + kClassNames[c] + "'");
      }
    }
    r.micro_auc = auc(roc_curve(flat_scores, flat_pos));
  }
  return r;
}

std::array<double, 5> table_values(const MetricsReport& r) {
  return {r.accuracy, r.macro_f1, r.kappa, r.macro_precision, r.macro_recall};
}

MeanStd mean_std(std::span<const double> values) {
  if (values.empty()) throw InputError("mean_std: no values");
  MeanStd out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

std::string format_cell(const MeanStd& v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f (%.3f)", v.mean, v.std);
  return buf;
}

}  // namespace walnet::metrics
