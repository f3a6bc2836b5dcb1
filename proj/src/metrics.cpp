#include "mvt/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace mvt {

ConfusionMatrix confusion(const std::vector<int>& predictions, const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw std::invalid_argument("confusion: " + std::to_string(predictions.size()) +
                                " predictions vs " + std::to_string(labels.size()) + " labels");
  if (predictions.empty()) throw std::invalid_argument("confusion: empty input");
  ConfusionMatrix cm;
  for (size_t i = 0; i < predictions.size(); ++i) {
    if (labels[i] == 1)
      predictions[i] == 1 ? ++cm.tm : ++cm.fn;
    else
      predictions[i] == 1 ? ++cm.fp : ++cm.tn;
  }
  return cm;
}

DerivedMetrics derived_metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw std::invalid_argument("derived_metrics: empty confusion matrix");
  auto ratio = [](long num, long den) -> std::optional<double> {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
  };
  DerivedMetrics m;
  m.accuracy = ratio(cm.tm + cm.tn, cm.total());
  m.precision = ratio(cm.tm, cm.tm + cm.fp);
  m.recall = ratio(cm.tm, cm.tm + cm.fn);
  m.specificity = ratio(cm.tn, cm.tn + cm.fp);
  if (m.precision && m.recall && (*m.precision + *m.recall) > 0.0)
    m.f1 = 2.0 * *m.precision * *m.recall / (*m.precision + *m.recall);
  return m;
}

std::pair<double, double> mean_acc_std(const std::vector<double>& fold_accuracies,
                                       bool sample_std) {
  size_t n = fold_accuracies.size();
  if (n < 2) throw std::invalid_argument("mean_acc_std: need at least 2 folds");
  double mean = std::accumulate(fold_accuracies.begin(), fold_accuracies.end(), 0.0) /
                static_cast<double>(n);
  double ss = 0.0;
  for (double a : fold_accuracies) ss += (a - mean) * (a - mean);
  double denom = sample_std ? static_cast<double>(n - 1) : static_cast<double>(n);
  return {mean, std::sqrt(ss / denom)};
}

double empirical_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("empirical_auc: " + std::to_string(scores.size()) +
                                " scores vs " + std::to_string(labels.size()) + " labels");
  size_t n = scores.size();
  long n_pos = std::count(labels.begin(), labels.end(), 1);
  long n_neg = static_cast<long>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw std::invalid_argument("empirical_auc: both classes must be present");

  // Rank-sum form of the Mann-Whitney statistic; tie groups get their
  // average rank, which matches the half-credit pair convention exactly.
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  std::vector<double> rank(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (size_t k = i; k <= j; ++k) rank[order[k]] = avg_rank;
    i = j + 1;
  }
  double pos_rank_sum = 0.0;
  for (size_t k = 0; k < n; ++k)
    if (labels[k] == 1) pos_rank_sum += rank[k];
  double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

}  // namespace mvt
