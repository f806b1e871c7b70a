#include "walnet/plots.hpp"

#include <algorithm>
#include <cstdio>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "walnet/errors.hpp"

namespace walnet::plots {

namespace {

const cv::Scalar kBlack(0, 0, 0);
const cv::Scalar kGrey(170, 170, 170);
constexpr int kFont = cv::FONT_HERSHEY_SIMPLEX;

void save(const std::filesystem::path& path, const cv::Mat& img) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), img)) throw InputError("cannot write " + path.string());
}

void centered_text(cv::Mat& img, const std::string& text, cv::Point center, double scale,
                   const cv::Scalar& color) {
  int baseline = 0;
  const cv::Size size = cv::getTextSize(text, kFont, scale, 1, &baseline);
  cv::putText(img, text, {center.x - size.width / 2, center.y + size.height / 2}, kFont, scale,
              color, 1, cv::LINE_AA);
}

}  // namespace

void confusion_png(const std::filesystem::path& path, const metrics::ConfusionMatrix& cm) {
  constexpr int cell = 110, left = 130, top = 60;
  cv::Mat img(top + cell * kNumClasses + 60, left + cell * kNumClasses + 20, CV_8UC3,
              cv::Scalar(255, 255, 255));
  long long peak = 1;
  for (const auto& row : cm.counts) {
    for (long long v : row) peak = std::max(peak, v);
  }
  for (int i = 0; i < kNumClasses; ++i) {
    for (int j = 0; j < kNumClasses; ++j) {
      const double t = static_cast<double>(cm.counts[i][j]) / static_cast<double>(peak);
      // White to dark blue (BGR).
      const cv::Scalar fill(255 - 80 * t, 255 - 200 * t, 255 - 220 * t);
      const cv::Rect r(left + j * cell, top + i * cell, cell, cell);
      cv::rectangle(img, r, fill, cv::FILLED);
      cv::rectangle(img, r, kGrey, 1);
      centered_text(img, std::to_string(cm.counts[i][j]), {r.x + cell / 2, r.y + cell / 2}, 0.8,
                    t > 0.55 ? cv::Scalar(255, 255, 255) : kBlack);
    }
    centered_text(img, kClassNames[i], {left / 2, top + i * cell + cell / 2}, 0.45, kBlack);
    centered_text(img, kClassNames[i], {left + i * cell + cell / 2, top + cell * kNumClasses + 18},
                  0.45, kBlack);
  }
  centered_text(img, "predicted", {left + cell * kNumClasses / 2, top + cell * kNumClasses + 42},
                0.5, kBlack);
  centered_text(img, "true \\ predicted", {img.cols / 2, 25}, 0.55, kBlack);
  save(path, img);
}

void roc_png(const std::filesystem::path& path, std::span<const metrics::RocPoint> curve,
             const std::string& title, double auc) {
  constexpr int size = 360, margin = 50;
  cv::Mat img(size + 2 * margin, size + 2 * margin, CV_8UC3, cv::Scalar(255, 255, 255));
  auto to_px = [&](double fpr, double tpr) {
    return cv::Point(margin + static_cast<int>(fpr * size),
                     margin + size - static_cast<int>(tpr * size));
  };
  for (int k = 0; k <= 4; ++k) {
    const double v = k / 4.0;
    cv::line(img, to_px(v, 0), to_px(v, 1), cv::Scalar(235, 235, 235), 1);
    cv::line(img, to_px(0, v), to_px(1, v), cv::Scalar(235, 235, 235), 1);
    char label[8];
    std::snprintf(label, sizeof label, "%.2f", v);
    centered_text(img, label, to_px(v, 0) + cv::Point(0, 14), 0.35, kBlack);
    centered_text(img, label, to_px(0, v) - cv::Point(22, 0), 0.35, kBlack);
  }
  cv::rectangle(img, to_px(0, 1), to_px(1, 0), kBlack, 1);
  cv::line(img, to_px(0, 0), to_px(1, 1), kGrey, 1, cv::LINE_AA);
  for (std::size_t i = 1; i < curve.size(); ++i) {
    cv::line(img, to_px(curve[i - 1].fpr, curve[i - 1].tpr), to_px(curve[i].fpr, curve[i].tpr),
             cv::Scalar(180, 90, 20), 2, cv::LINE_AA);
  }
  char heading[128];
  std::snprintf(heading, sizeof heading, "%s  (AUC %.4f)", title.c_str(), auc);
  centered_text(img, heading, {img.cols / 2, 22}, 0.5, kBlack);
  centered_text(img, "false positive rate", {img.cols / 2, img.rows - 12}, 0.45, kBlack);
  save(path, img);
}

}  // namespace walnet::plots
