#include "mvt/run_io.hpp"

#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <sstream>

#include "mvt/config_json.hpp"

namespace mvt {

namespace {

using nlohmann::json;

json opt_to_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json metrics_to_json(const DerivedMetrics& m) {
  return json{{"accuracy", opt_to_json(m.accuracy)},   {"precision", opt_to_json(m.precision)},
              {"recall", opt_to_json(m.recall)},       {"specificity", opt_to_json(m.specificity)},
              {"f1", opt_to_json(m.f1)}};
}

json cm_to_json(const ConfusionMatrix& cm) {
  return json{{"tm", cm.tm}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

void dump(const json& j, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string format_fixed(double v, int digits) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(digits) << v;
  return ss.str();
}

}  // namespace

void write_fold_report(const FoldReport& report, const std::filesystem::path& path) {
  json cases = json::array();
  for (const auto& c : report.cases)
    cases.push_back({{"case_id", c.case_id}, {"score", c.score}, {"pred", c.pred}, {"label", c.label}});
  dump(json{{"fold", report.fold_index},
            {"cases", std::move(cases)},
            {"confusion", cm_to_json(report.cm)},
            {"metrics", metrics_to_json(report.metrics)},
            {"auc", report.auc}},
       path);
}

void write_summary(const CvSummary& summary, const ModelConfig& cfg, const TrainConfig& tcfg,
                   const std::filesystem::path& path) {
  dump(json{{"folds", summary.fold_acc_percent.size()},
            {"accuracy_percent",
             {{"per_fold", summary.fold_acc_percent},
              {"mean", summary.acc_mean},
              {"std_sample", summary.acc_std_sample},
              {"std_population", summary.acc_std_population}}},
            {"auc",
             {{"per_fold", summary.fold_auc},
              {"mean", summary.auc_mean},
              {"std_sample", summary.auc_std_sample},
              {"std_population", summary.auc_std_population}}},
            {"model", model_config_to_json(cfg)},
            {"train",
             {{"epochs", tcfg.epochs},
              {"batch_size", tcfg.batch_size},
              {"learning_rate", tcfg.learning_rate},
              {"weight_decay", tcfg.weight_decay},
              {"optimizer", tcfg.optimizer},
              {"lr_schedule", tcfg.lr_schedule},
              {"seed", tcfg.seed},
              {"folds", tcfg.folds}}}},
       path);
}

void write_sweep_csv(const std::vector<SweepRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "local_blocks,global_blocks";
  size_t folds = rows.empty() ? 0 : rows[0].summary.fold_acc_percent.size();
  for (size_t i = 1; i <= folds; ++i) out << ",acc_fold" << i;
  out << ",acc_mean,acc_std,auc_mean,auc_std,params\n";
  for (const auto& row : rows) {
    out << row.local_blocks << "," << row.global_blocks;
    for (double acc : row.summary.fold_acc_percent) out << "," << format_fixed(acc, 4);
    out << "," << format_fixed(row.summary.acc_mean, 4) << ","
        << format_fixed(row.summary.acc_std_sample, 4) << ","
        << format_fixed(row.summary.auc_mean, 6) << ","
        << format_fixed(row.summary.auc_std_sample, 6) << "," << row.params << "\n";
  }
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_predictions_csv(const std::vector<CasePrediction>& preds,
                           const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "case_id,score,pred,label\n";
  for (const auto& p : preds)
    out << p.case_id << "," << format_fixed(p.score, 9) << "," << p.pred << "," << p.label << "\n";
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

void write_eval_metrics(const std::vector<CasePrediction>& preds,
                        const std::filesystem::path& path) {
  std::vector<int> p, l;
  std::vector<double> s;
  for (const auto& c : preds) {
    p.push_back(c.pred);
    l.push_back(c.label);
    s.push_back(c.score);
  }
  ConfusionMatrix cm = confusion(p, l);
  json j{{"confusion", cm_to_json(cm)}, {"metrics", metrics_to_json(derived_metrics(cm))}};
  bool both_classes = (cm.tm + cm.fn) > 0 && (cm.tn + cm.fp) > 0;
  j["auc"] = both_classes ? json(empirical_auc(s, l)) : json(nullptr);
  dump(j, path);
}

std::string render_summary_table(const std::filesystem::path& summary_json) {
  std::ifstream in(summary_json);
  if (!in) throw std::runtime_error("cannot open " + summary_json.string());
  json j = json::parse(in);

  std::ostringstream out;
  const auto& acc = j.at("accuracy_percent");
  const auto& auc = j.at("auc");
  size_t folds = acc.at("per_fold").size();
  out << std::left << std::setw(10) << "fold" << std::right << std::setw(10) << "ACC (%)"
      << std::setw(12) << "AUC" << "\n";
  for (size_t i = 0; i < folds; ++i)
    out << std::left << std::setw(10) << (std::to_string(i + 1)) << std::right << std::setw(10)
        << format_fixed(acc.at("per_fold").at(i).get<double>(), 1) << std::setw(12)
        << format_fixed(auc.at("per_fold").at(i).get<double>(), 3) << "\n";
  out << std::left << std::setw(10) << "mean+/-std" << std::right << std::setw(10)
      << (format_fixed(acc.at("mean").get<double>(), 1) + "+/-" +
          format_fixed(acc.at("std_sample").get<double>(), 1))
      << std::setw(12)
      << (format_fixed(auc.at("mean").get<double>(), 3) + "+/-" +
          format_fixed(auc.at("std_sample").get<double>(), 3))
      << "\n";
  return out.str();
}

std::string render_sweep_table(const std::filesystem::path& sweep_csv) {
  std::ifstream in(sweep_csv);
  if (!in) throw std::runtime_error("cannot open " + sweep_csv.string());
  std::vector<std::vector<std::string>> table;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) row.push_back(cell);
    table.push_back(std::move(row));
  }
  if (table.empty()) throw std::runtime_error("empty sweep file " + sweep_csv.string());
  std::vector<size_t> widths(table[0].size(), 0);
  for (const auto& row : table)
    for (size_t c = 0; c < row.size() && c < widths.size(); ++c)
      widths[c] = std::max(widths[c], row[c].size());
  std::ostringstream out;
  for (const auto& row : table) {
    for (size_t c = 0; c < row.size(); ++c)
      out << std::left << std::setw(static_cast<int>(widths[c]) + 2) << row[c];
    out << "\n";
  }
  return out.str();
}

}  // namespace mvt
