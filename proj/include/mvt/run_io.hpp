#pragma once

#include <filesystem>
#include <string>

#include "mvt/training.hpp"

namespace mvt {

/// Writers for the run directory layout: fold<i>.json per fold, summary.json
/// for the cross-validation aggregate, sweep.csv for block-split sweeps, and
/// predictions.csv / metrics.json for standalone evaluation.
void write_fold_report(const FoldReport& report, const std::filesystem::path& path);
void write_summary(const CvSummary& summary, const ModelConfig& cfg, const TrainConfig& tcfg,
                   const std::filesystem::path& path);
void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path);
void write_predictions_csv(const std::vector<CasePrediction>& preds,
                           const std::filesystem::path& path);
void write_eval_metrics(const std::vector<CasePrediction>& preds,
                        const std::filesystem::path& path);

/// Renders summary.json or sweep.csv as an aligned text table.
std::string render_summary_table(const std::filesystem::path& summary_json);
std::string render_sweep_table(const std::filesystem::path& sweep_csv);

}  // namespace mvt
