#pragma once

#include <filesystem>
#include <span>
#include <string>

#include "walnet/metrics.hpp"

namespace walnet::plots {

/// Heat-map of the confusion matrix with counts and class names.
void confusion_png(const std::filesystem::path& path, const metrics::ConfusionMatrix& cm);

/// ROC curve with the chance diagonal and the AUC in the title.
void roc_png(const std::filesystem::path& path, std::span<const metrics::RocPoint> curve,
             const std::string& title, double auc);

}  // namespace walnet::plots
