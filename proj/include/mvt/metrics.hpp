#pragma once

#include <optional>
#include <utility>
#include <vector>

namespace mvt {

/// Counts with malignant as the positive class (tm = true malignant).
struct ConfusionMatrix {
  long tm = 0, fp = 0, tn = 0, fn = 0;
  long total() const { return tm + fp + tn + fn; }
};

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels);

/// Zero-denominator metrics are reported as absent, not 0.
struct DerivedMetrics {
  std::optional<double> accuracy, precision, recall, specificity, f1;
};

DerivedMetrics derived_metrics(const ConfusionMatrix& cm);

/// Mean and standard deviation of per-fold accuracies (in percent).
/// `sample_std` selects the (n-1) denominator, which reproduces reported
/// cross-validation tables; false gives the population (n) variant.
std::pair<double, double> mean_acc_std(const std::vector<double>& fold_accuracies,
                                       bool sample_std = true);

/// Mann-Whitney estimate: the fraction of (positive, negative) pairs where
/// the positive outscores the negative, ties counted half. Equals the area
/// under the empirical ROC curve. Throws if either class is absent.
double empirical_auc(const std::vector<double>& scores, const std::vector<int>& labels);

}  // namespace mvt
