#include "mvt/training.hpp"

#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "mvt/rng.hpp"

namespace mvt {

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("train config: " + msg); };
  if (epochs < 0) fail("epochs must be nonnegative");
  if (batch_size < 1) fail("batch_size must be at least 1");
  if (folds < 2) fail("folds must be at least 2");
  if (learning_rate <= 0.0) fail("learning_rate must be positive");
  if (weight_decay < 0.0) fail("weight_decay must be nonnegative");
  if (optimizer != "adamw") fail("unknown optimizer '" + optimizer + "'");
  if (lr_schedule != "cosine" && lr_schedule != "constant")
    fail("unknown lr_schedule '" + lr_schedule + "'");
}

Tensor cross_entropy(const Tensor& logits, int label) {
  if (logits.numel() != 2)
    throw std::invalid_argument("cross_entropy: expected 2 logits, got " +
                                shape_str(logits.shape()));
  if (label != 0 && label != 1)
    throw std::invalid_argument("cross_entropy: label must be 0 or 1, got " +
                                std::to_string(label));
  return sub(logsumexp_all(logits), pick(logits, static_cast<size_t>(label)));
}

std::vector<std::vector<int>> stratified_folds(const std::vector<int>& labels, int k,
                                               uint64_t seed) {
  if (k < 1) throw std::invalid_argument("stratified_folds: k must be positive");
  if (static_cast<size_t>(k) > labels.size())
    throw std::invalid_argument("stratified_folds: k=" + std::to_string(k) + " exceeds " +
                                std::to_string(labels.size()) + " cases");
  std::vector<int> pos, neg;
  for (size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(static_cast<int>(i));
  if (pos.empty() || neg.empty())
    throw std::invalid_argument("stratified_folds: both classes must be nonempty");

  Rng rng(substream_seed(seed, "folds"));
  rng.shuffle(pos);
  rng.shuffle(neg);
  std::vector<std::vector<int>> folds(k);
  for (size_t i = 0; i < pos.size(); ++i) folds[i % k].push_back(pos[i]);
  for (size_t i = 0; i < neg.size(); ++i) folds[i % k].push_back(neg[i]);
  return folds;
}

std::vector<std::vector<int>> stratified_folds(const std::vector<CaseRecord>& cases, int k,
                                               uint64_t seed) {
  std::vector<int> labels;
  labels.reserve(cases.size());
  for (const auto& c : cases) labels.push_back(c.label);
  return stratified_folds(labels, k, seed);
}

namespace {

double malignancy_score(const Tensor& logits) {
  // softmax(logits)[1] via the stable sigmoid form
  double d = logits.data()[0] - logits.data()[1];
  return 1.0 / (1.0 + std::exp(d));
}

// Decoupled weight decay applied to matrices and embeddings only; biases,
// layer-norm parameters, and the class token are rank-1 and skip decay.
class AdamW {
 public:
  AdamW(const TrainConfig& tcfg, std::vector<std::pair<std::string, Tensor>> params)
      : lr_base_(tcfg.learning_rate), weight_decay_(tcfg.weight_decay), params_(std::move(params)) {
    m_.resize(params_.size());
    v_.resize(params_.size());
    for (size_t i = 0; i < params_.size(); ++i) {
      m_[i].assign(params_[i].second.numel(), 0.0);
      v_[i].assign(params_[i].second.numel(), 0.0);
    }
  }

  void step(double lr) {
    ++t_;
    double bc1 = 1.0 - std::pow(kBeta1, t_);
    double bc2 = 1.0 - std::pow(kBeta2, t_);
    for (size_t i = 0; i < params_.size(); ++i) {
      Tensor& p = params_[i].second;
      bool decay = p.ndim() >= 2;
      auto data = p.data();
      std::span<const double> grad;
      if (p.has_grad()) grad = p.grad();
      for (size_t j = 0; j < data.size(); ++j) {
        double g = grad.empty() ? 0.0 : grad[j];
        m_[i][j] = kBeta1 * m_[i][j] + (1.0 - kBeta1) * g;
        v_[i][j] = kBeta2 * v_[i][j] + (1.0 - kBeta2) * g * g;
        double update = (m_[i][j] / bc1) / (std::sqrt(v_[i][j] / bc2) + kEps);
        double before = data[j];
        data[j] = before - lr * update - (decay ? lr * weight_decay_ * before : 0.0);
      }
    }
  }

  void zero_grads() {
    for (auto& [name, p] : params_) p.zero_grad();
  }

  double base_lr() const { return lr_base_; }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  double lr_base_;
  double weight_decay_;
  long t_ = 0;
  std::vector<std::pair<std::string, Tensor>> params_;
  std::vector<std::vector<double>> m_, v_;
};

// Runs fn(0..n-1) on up to `jobs` worker threads; task state must be disjoint.
void parallel_tasks(int n, int jobs, const std::function<void(int)>& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  for (int w = 0; w < jobs; ++w) threads.emplace_back(worker);
  for (auto& th : threads) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace

ParamStore train_model(const std::vector<CaseRecord>& cases, const ModelConfig& cfg,
                       const TrainConfig& tcfg, const EpochCallback& cb) {
  cfg.validate();
  tcfg.validate();
  if (cases.empty()) throw std::invalid_argument("train_model: empty training set");

  ParamStore params = init_params(cfg, tcfg.seed);
  if (tcfg.epochs == 0) return params;

  size_t n = cases.size();
  std::vector<std::vector<Tensor>> views(n);
  std::vector<int> labels(n);
  for (size_t i = 0; i < n; ++i) {
    views[i].reserve(4);
    for (const ImageU16& img : cases[i].views) views[i].push_back(preprocess_view(img, cfg));
    labels[i] = cases[i].label;
  }

  AdamW optimizer(tcfg, params.named_params());
  Rng shuffle_rng(substream_seed(tcfg.seed, "shuffle"));
  long steps_per_epoch = static_cast<long>((n + tcfg.batch_size - 1) / tcfg.batch_size);
  long total_steps = steps_per_epoch * tcfg.epochs;
  long step = 0;

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    for (size_t start = 0; start < n; start += tcfg.batch_size) {
      size_t batch_n = std::min(static_cast<size_t>(tcfg.batch_size), n - start);
      optimizer.zero_grads();
      for (size_t b = 0; b < batch_n; ++b) {
        int idx = order[start + b];
        Tensor loss = cross_entropy(forward_views(views[idx], params, cfg), labels[idx]);
        double value = loss.item();
        if (!std::isfinite(value))
          throw std::runtime_error("training diverged: non-finite loss at epoch " +
                                   std::to_string(epoch) + ", batch " +
                                   std::to_string(start / tcfg.batch_size));
        backward(scale(loss, 1.0 / static_cast<double>(batch_n)));
        epoch_loss += value;
      }
      double lr = optimizer.base_lr();
      if (tcfg.lr_schedule == "cosine")
        lr *= 0.5 * (1.0 + std::cos(M_PI * static_cast<double>(step) /
                                    static_cast<double>(total_steps)));
      optimizer.step(lr);
      ++step;
    }
    double mean_loss = epoch_loss / static_cast<double>(n);
    if (tcfg.verbose)
      std::clog << "epoch " << epoch + 1 << "/" << tcfg.epochs << " mean loss " << mean_loss
                << "\n";
    if (cb) cb(epoch, mean_loss, params);
  }
  return params;
}

std::vector<CasePrediction> evaluate_cases(const std::vector<CaseRecord>& cases,
                                           const ParamStore& params, const ModelConfig& cfg) {
  std::vector<CasePrediction> out;
  out.reserve(cases.size());
  for (const CaseRecord& rec : cases) {
    Tensor logits = classify_case(rec, params, cfg);
    double score = malignancy_score(logits);
    out.push_back({rec.case_id, score, score > 0.5 ? 1 : 0, rec.label});
  }
  return out;
}

namespace {

FoldReport make_fold_report(int fold_index, std::vector<CasePrediction> preds) {
  FoldReport report;
  report.fold_index = fold_index;
  std::vector<int> p, l;
  std::vector<double> s;
  for (const auto& c : preds) {
    p.push_back(c.pred);
    l.push_back(c.label);
    s.push_back(c.score);
  }
  report.cases = std::move(preds);
  report.cm = confusion(p, l);
  report.metrics = derived_metrics(report.cm);
  report.auc = empirical_auc(s, l);
  return report;
}

}  // namespace

CvSummary summarize_folds(const std::vector<FoldReport>& folds) {
  CvSummary s;
  for (const auto& f : folds) {
    s.fold_acc_percent.push_back(100.0 * f.metrics.accuracy.value());
    s.fold_auc.push_back(f.auc);
  }
  std::tie(s.acc_mean, s.acc_std_sample) = mean_acc_std(s.fold_acc_percent, true);
  s.acc_std_population = mean_acc_std(s.fold_acc_percent, false).second;
  std::tie(s.auc_mean, s.auc_std_sample) = mean_acc_std(s.fold_auc, true);
  s.auc_std_population = mean_acc_std(s.fold_auc, false).second;
  return s;
}

CvResult run_cross_validation(const std::vector<CaseRecord>& cases, const ModelConfig& cfg,
                              const TrainConfig& tcfg, int jobs, bool keep_params) {
  cfg.validate();
  tcfg.validate();
  auto folds = stratified_folds(cases, tcfg.folds, tcfg.seed);

  CvResult result;
  result.folds.resize(folds.size());
  if (keep_params) result.fold_params.resize(folds.size());

  parallel_tasks(static_cast<int>(folds.size()), jobs, [&](int i) {
    std::vector<bool> in_test(cases.size(), false);
    for (int idx : folds[i]) in_test[idx] = true;
    std::vector<CaseRecord> train_cases, test_cases;
    for (size_t c = 0; c < cases.size(); ++c)
      (in_test[c] ? test_cases : train_cases).push_back(cases[c]);

    TrainConfig fold_cfg = tcfg;
    fold_cfg.seed = substream_seed(tcfg.seed, "fold", static_cast<uint64_t>(i));
    ParamStore params = train_model(train_cases, cfg, fold_cfg);
    result.folds[i] = make_fold_report(i, evaluate_cases(test_cases, params, cfg));
    if (keep_params) result.fold_params[i] = std::move(params);
  });

  result.summary = summarize_folds(result.folds);
  return result;
}

std::vector<SweepRow> block_split_sweep(const std::vector<CaseRecord>& cases,
                                        const ModelConfig& base_cfg,
                                        const std::vector<std::pair<int, int>>& splits,
                                        const TrainConfig& tcfg, int jobs) {
  if (splits.empty()) throw std::invalid_argument("sweep: no splits given");
  int total = splits[0].first + splits[0].second;
  for (const auto& [l, g] : splits)
    if (l + g != total)
      throw std::invalid_argument("sweep: split " + std::to_string(l) + ":" + std::to_string(g) +
                                  " has total " + std::to_string(l + g) + ", expected " +
                                  std::to_string(total) + " (capacity must stay constant)");
  std::vector<SweepRow> rows;
  for (const auto& [l, g] : splits) {
    ModelConfig cfg = base_cfg;
    cfg.local_blocks = l;
    cfg.global_blocks = g;
    CvResult cv = run_cross_validation(cases, cfg, tcfg, jobs);
    rows.push_back({l, g, cv.summary, param_count(cfg)});
  }
  return rows;
}

}  // namespace mvt
