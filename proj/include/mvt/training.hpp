#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvt/dataset.hpp"
#include "mvt/metrics.hpp"
#include "mvt/model.hpp"

namespace mvt {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  double learning_rate = 5e-4;
  double weight_decay = 0.05;
  std::string optimizer = "adamw";     // AdamW (beta1 0.9, beta2 0.999, eps 1e-8)
  std::string lr_schedule = "cosine";  // or "constant"
  uint64_t seed = 0;
  int folds = 5;
  bool verbose = false;  // per-epoch mean-loss lines on stderr

  void validate() const;
};

/// -log softmax(logits)[label], numerically stable; logits has 2 elements.
Tensor cross_entropy(const Tensor& logits, int label);

/// Partitions indices into k folds, deterministically for a given seed, with
/// per-fold class counts differing by at most one within each class.
std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels, int k,
                                               uint64_t seed);
std::vector<std::vector<int>> stratified_folds(const std::vector<CaseRecord>& cases, int k,
                                               uint64_t seed);

using EpochCallback = std::function<void(int epoch, double mean_loss, ParamStore& params)>;

/// Mini-batch AdamW training over seeded shuffled epochs. Returns the
/// final-epoch parameters; epochs == 0 returns the bare initialization.
/// Throws (naming epoch and batch) if the loss goes non-finite.
ParamStore train_model(const std::vector<CaseRecord>& cases, const ModelConfig& cfg,
                       const TrainConfig& tcfg, const EpochCallback& cb = {});

struct CasePrediction {
  std::string case_id;
  double score = 0.0;  // malignancy probability, softmax(logits)[1]
  int pred = 0;        // 1 iff score > 0.5 (ties toward benign)
  int label = 0;
};

std::vector<CasePrediction> evaluate_cases(const std::vector<CaseRecord>& cases,
                                           const ParamStore& params, const ModelConfig& cfg);

struct FoldReport {
  int fold_index = 0;
  std::vector<CasePrediction> cases;
  ConfusionMatrix cm;
  DerivedMetrics metrics;
  double auc = 0.0;
};

struct CvSummary {
  std::vector<double> fold_acc_percent;
  double acc_mean = 0.0, acc_std_sample = 0.0, acc_std_population = 0.0;
  std::vector<double> fold_auc;
  double auc_mean = 0.0, auc_std_sample = 0.0, auc_std_population = 0.0;
};

CvSummary summarize_folds(const std::vector<FoldReport>& folds);

struct CvResult {
  std::vector<FoldReport> folds;
  CvSummary summary;
  std::vector<ParamStore> fold_params;  // filled only when requested
};

/// Trains k models, each on k-1 folds, evaluating on the held-out fold. Fold
/// trainings are independent (per-fold derived seeds), so `jobs` > 1 runs
/// them in worker threads with results identical to serial execution.
CvResult run_cross_validation(const std::vector<CaseRecord>& cases, const ModelConfig& cfg,
                              const TrainConfig& tcfg, int jobs = 1, bool keep_params = false);

struct SweepRow {
  int local_blocks = 0;
  int global_blocks = 0;
  CvSummary summary;
  size_t params = 0;
};

/// Runs cross-validation once per (local, global) split with identical data
/// and seeds. All splits must share the same total block count, so every row
/// has the same capacity.
std::vector<SweepRow> block_split_sweep(const std::vector<CaseRecord>& cases,
                                        const ModelConfig& base_cfg,
                                        const std::vector<std::pair<int, int>>& splits,
                                        const TrainConfig& tcfg, int jobs = 1);

}  // namespace mvt
