// Command-line front end: dataset synthesis, cross-validation training,
// block-split sweeps, checkpoint evaluation, gradient checking, and report
// rendering. Exit codes: 0 success, 1 runtime/verification failure,
// 2 usage/config error.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>

#include "mvt/checkpoint.hpp"
#include "mvt/config_json.hpp"
#include "mvt/dataset.hpp"
#include "mvt/gradcheck.hpp"
#include "mvt/run_io.hpp"
#include "mvt/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct ModelFlags {
  std::optional<std::string> arch;
  std::optional<int> image_size, patch_size, channels, d_embed, heads;
  std::optional<int> local_blocks, global_blocks, mlp_ratio;
  std::optional<std::string> readout;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--arch", arch, "architecture preset: tiny, small, or toy");
    cmd.add_option("--image-size", image_size, "square input size after preprocessing");
    cmd.add_option("--patch-size", patch_size, "patch side in pixels");
    cmd.add_option("--channels", channels, "input channels");
    cmd.add_option("--d-embed", d_embed, "embedding width");
    cmd.add_option("--heads", heads, "attention heads");
    cmd.add_option("--local-blocks", local_blocks, "per-view transformer blocks");
    cmd.add_option("--global-blocks", global_blocks, "cross-view transformer blocks");
    cmd.add_option("--mlp-ratio", mlp_ratio, "MLP hidden width as a multiple of d_embed");
    cmd.add_option("--readout", readout, "class-token readout: first or mean");
  }

  mvt::ModelConfig resolve(const json& file_cfg) const {
    std::string arch_name = "toy";
    if (file_cfg.contains("arch")) arch_name = file_cfg.at("arch").get<std::string>();
    if (arch) arch_name = *arch;
    mvt::ModelConfig cfg = mvt::ModelConfig::preset(arch_name);

    auto pick_int = [&](const char* key, const std::optional<int>& flag, int& field) {
      if (file_cfg.contains(key)) field = file_cfg.at(key).get<int>();
      if (flag) field = *flag;
    };
    pick_int("image_size", image_size, cfg.image_size);
    pick_int("patch_size", patch_size, cfg.patch_size);
    pick_int("channels", channels, cfg.channels);
    pick_int("d_embed", d_embed, cfg.d_embed);
    pick_int("heads", heads, cfg.heads);
    pick_int("local_blocks", local_blocks, cfg.local_blocks);
    pick_int("global_blocks", global_blocks, cfg.global_blocks);
    pick_int("mlp_ratio", mlp_ratio, cfg.mlp_ratio);
    std::string readout_name;
    if (file_cfg.contains("readout")) readout_name = file_cfg.at("readout").get<std::string>();
    if (readout) readout_name = *readout;
    if (!readout_name.empty()) cfg.readout = mvt::readout_from_string(readout_name);
    cfg.validate();
    return cfg;
  }
};

struct TrainFlags {
  std::optional<int> epochs, batch_size, folds;
  std::optional<double> learning_rate, weight_decay;
  std::optional<std::string> lr_schedule, optimizer;
  std::optional<uint64_t> seed;
  bool verbose = false;

  void add_options(CLI::App& cmd) {
    cmd.add_option("--epochs", epochs, "training epochs");
    cmd.add_option("--batch-size", batch_size, "mini-batch size");
    cmd.add_option("--folds", folds, "cross-validation folds");
    cmd.add_option("--learning-rate", learning_rate, "base AdamW learning rate");
    cmd.add_option("--weight-decay", weight_decay, "decoupled weight decay");
    cmd.add_option("--lr-schedule", lr_schedule, "cosine or constant");
    cmd.add_option("--optimizer", optimizer, "optimizer (adamw)");
    cmd.add_option("--seed", seed, "master seed for init, shuffling, and folds");
    cmd.add_flag("--verbose", verbose, "log per-epoch mean training loss");
  }

  mvt::TrainConfig resolve(const json& file_cfg) const {
    mvt::TrainConfig cfg;
    auto pick = [&](const char* key, const auto& flag, auto& field) {
      using Field = std::decay_t<decltype(field)>;
      if (file_cfg.contains(key)) field = file_cfg.at(key).get<Field>();
      if (flag) field = *flag;
    };
    pick("epochs", epochs, cfg.epochs);
    pick("batch_size", batch_size, cfg.batch_size);
    pick("folds", folds, cfg.folds);
    pick("learning_rate", learning_rate, cfg.learning_rate);
    pick("weight_decay", weight_decay, cfg.weight_decay);
    pick("lr_schedule", lr_schedule, cfg.lr_schedule);
    pick("optimizer", optimizer, cfg.optimizer);
    pick("seed", seed, cfg.seed);
    cfg.verbose = verbose;
    cfg.validate();
    return cfg;
  }
};

json load_config_file(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc)
      path = argv[i + 1];
    else if (arg.rfind("--config=", 0) == 0)
      path = arg.substr(9);
  }
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file " + path);
  return json::parse(in);
}

std::vector<std::pair<int, int>> parse_splits(const std::string& spec) {
  std::vector<std::pair<int, int>> splits;
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto colon = item.find(':');
    if (colon == std::string::npos)
      throw std::invalid_argument("bad split '" + item + "', expected LOCAL:GLOBAL");
    splits.emplace_back(std::stoi(item.substr(0, colon)), std::stoi(item.substr(colon + 1)));
  }
  if (splits.empty()) throw std::invalid_argument("no splits given");
  return splits;
}

void write_cv_outputs(const mvt::CvResult& cv, const mvt::ModelConfig& cfg,
                      const mvt::TrainConfig& tcfg, const fs::path& out_dir,
                      bool save_checkpoints) {
  fs::create_directories(out_dir);
  for (const auto& fold : cv.folds)
    mvt::write_fold_report(fold, out_dir / ("fold" + std::to_string(fold.fold_index) + ".json"));
  mvt::write_summary(cv.summary, cfg, tcfg, out_dir / "summary.json");
  if (save_checkpoints)
    for (size_t i = 0; i < cv.fold_params.size(); ++i) {
      mvt::ParamStore params = cv.fold_params[i];
      mvt::save_checkpoint(params, cfg, out_dir / ("fold" + std::to_string(i) + ".ckpt"));
    }
}

int cmd_synth(const mvt::SynthConfig& scfg, const fs::path& out_dir) {
  scfg.validate();
  auto cases = mvt::generate_dataset(scfg);
  mvt::write_dataset(cases, out_dir);
  long malignant = 0;
  for (const auto& c : cases) malignant += c.label;
  std::cout << "wrote " << cases.size() << " cases (" << malignant << " malignant, "
            << cases.size() - malignant << " benign) to " << out_dir.string() << "\n";
  return 0;
}

int cmd_train(const mvt::ModelConfig& cfg, const mvt::TrainConfig& tcfg, const fs::path& data_dir,
              const fs::path& out_dir, int jobs, bool no_cv, bool save_checkpoints) {
  auto cases = mvt::load_dataset(data_dir);
  if (no_cv) {
    mvt::ParamStore params = mvt::train_model(cases, cfg, tcfg);
    fs::create_directories(out_dir);
    mvt::save_checkpoint(params, cfg, out_dir / "model.ckpt");
    auto preds = mvt::evaluate_cases(cases, params, cfg);
    mvt::write_predictions_csv(preds, out_dir / "predictions.csv");
    mvt::write_eval_metrics(preds, out_dir / "metrics.json");
    long correct = 0;
    for (const auto& p : preds) correct += p.pred == p.label;
    std::cout << "trained on " << cases.size() << " cases; training accuracy "
              << static_cast<double>(correct) / cases.size() << "; checkpoint at "
              << (out_dir / "model.ckpt").string() << "\n";
    return 0;
  }
  mvt::CvResult cv = mvt::run_cross_validation(cases, cfg, tcfg, jobs, save_checkpoints);
  write_cv_outputs(cv, cfg, tcfg, out_dir, save_checkpoints);
  std::cout << mvt::render_summary_table(out_dir / "summary.json");
  return 0;
}

int cmd_sweep(const mvt::ModelConfig& base_cfg, const mvt::TrainConfig& tcfg,
              const std::vector<std::pair<int, int>>& splits, const fs::path& data_dir,
              const fs::path& out_dir, int jobs) {
  int total = splits[0].first + splits[0].second;
  for (const auto& [l, g] : splits)
    if (l + g != total)
      throw std::invalid_argument("sweep: split " + std::to_string(l) + ":" + std::to_string(g) +
                                  " breaks the constant total of " + std::to_string(total));
  auto cases = mvt::load_dataset(data_dir);
  fs::create_directories(out_dir);
  std::vector<mvt::SweepRow> rows;
  for (const auto& [l, g] : splits) {
    mvt::ModelConfig cfg = base_cfg;
    cfg.local_blocks = l;
    cfg.global_blocks = g;
    cfg.validate();
    mvt::CvResult cv = mvt::run_cross_validation(cases, cfg, tcfg, jobs);
    fs::path split_dir = out_dir / ("L" + std::to_string(l) + "G" + std::to_string(g));
    write_cv_outputs(cv, cfg, tcfg, split_dir, false);
    rows.push_back({l, g, cv.summary, mvt::param_count(cfg)});
  }
  mvt::write_sweep_csv(rows, out_dir / "sweep.csv");
  std::cout << mvt::render_sweep_table(out_dir / "sweep.csv");
  return 0;
}

int cmd_eval(const fs::path& checkpoint, const fs::path& data_dir, const fs::path& out_dir,
             const ModelFlags& flags) {
  auto [params, cfg] = mvt::load_checkpoint(checkpoint);
  // Explicit model flags must agree with the checkpoint's embedded config.
  auto check = [&](const char* name, const std::optional<int>& flag, int actual) {
    if (flag && *flag != actual)
      throw std::runtime_error(std::string("checkpoint/config mismatch: ") + name + " is " +
                               std::to_string(actual) + " in checkpoint, " + std::to_string(*flag) +
                               " requested");
  };
  check("image_size", flags.image_size, cfg.image_size);
  check("patch_size", flags.patch_size, cfg.patch_size);
  check("channels", flags.channels, cfg.channels);
  check("d_embed", flags.d_embed, cfg.d_embed);
  check("heads", flags.heads, cfg.heads);
  check("local_blocks", flags.local_blocks, cfg.local_blocks);
  check("global_blocks", flags.global_blocks, cfg.global_blocks);
  if (flags.arch && *flags.arch != cfg.arch)
    throw std::runtime_error("checkpoint/config mismatch: arch is " + cfg.arch +
                             " in checkpoint, " + *flags.arch + " requested");
  if (flags.readout) cfg.readout = mvt::readout_from_string(*flags.readout);

  auto cases = mvt::load_dataset(data_dir);
  auto preds = mvt::evaluate_cases(cases, params, cfg);
  fs::create_directories(out_dir);
  mvt::write_predictions_csv(preds, out_dir / "predictions.csv");
  mvt::write_eval_metrics(preds, out_dir / "metrics.json");
  std::ifstream metrics(out_dir / "metrics.json");
  std::cout << metrics.rdbuf();
  return 0;
}

int cmd_gradcheck(int local_blocks, int global_blocks, double eps, size_t max_samples,
                  uint64_t seed, double tol, const std::string& corrupt_param) {
  auto inst = mvt::make_gradcheck_instance(local_blocks, global_blocks, seed);
  mvt::GradCheckOptions opts;
  opts.eps = eps;
  opts.max_samples = max_samples;
  opts.seed = seed;
  opts.corrupt_param = corrupt_param;
  auto result = mvt::grad_check([&] { return inst.loss(); }, inst.params, opts);
  std::cout << "max relative error " << result.max_rel_err << " at " << result.worst_param << " ("
            << result.samples << " elements checked, eps " << eps << ")\n";
  if (!(result.max_rel_err < tol)) {
    std::cerr << "gradient check FAILED: " << result.worst_param << " exceeds tolerance " << tol
              << "\n";
    return kExitRuntime;
  }
  return 0;
}

int cmd_report(const fs::path& target) {
  fs::path path = target;
  if (fs::is_directory(path)) {
    if (fs::exists(path / "sweep.csv"))
      path /= "sweep.csv";
    else if (fs::exists(path / "summary.json"))
      path /= "summary.json";
    else
      throw std::runtime_error("no sweep.csv or summary.json in " + path.string());
  }
  if (path.extension() == ".csv")
    std::cout << mvt::render_sweep_table(path);
  else
    std::cout << mvt::render_summary_table(path);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multi-view transformer trainer and evaluation toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  app.add_option("--config", config_path, "JSON config file; flags override file values");

  json file_cfg;
  try {
    file_cfg = load_config_file(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  // synth
  auto* synth = app.add_subcommand("synth", "generate a synthetic four-view PGM dataset");
  mvt::SynthConfig scfg;
  if (!file_cfg.empty()) {
    scfg.image_size = file_cfg.value("image_size", scfg.image_size);
    scfg.cases = file_cfg.value("cases", scfg.cases);
    scfg.malignant_fraction = file_cfg.value("malignant_fraction", scfg.malignant_fraction);
    scfg.blob_intensity = file_cfg.value("blob_intensity", scfg.blob_intensity);
    scfg.distractor_rate = file_cfg.value("distractor_rate", scfg.distractor_rate);
    scfg.noise_scale = file_cfg.value("noise_scale", scfg.noise_scale);
    scfg.seed = file_cfg.value("seed", scfg.seed);
  }
  std::string synth_out;
  synth->add_option("--cases", scfg.cases, "number of cases");
  synth->add_option("--malignant-fraction", scfg.malignant_fraction, "fraction labeled malignant");
  synth->add_option("--blob-intensity", scfg.blob_intensity, "lesion contrast (0 disables)");
  synth->add_option("--distractor-rate", scfg.distractor_rate, "per-view benign decoy rate");
  synth->add_option("--noise-scale", scfg.noise_scale, "pixel noise sigma");
  synth->add_option("--image-size", scfg.image_size, "native synthetic image side");
  synth->add_option("--seed", scfg.seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory")->required();

  // train
  auto* train = app.add_subcommand("train", "stratified cross-validation training");
  ModelFlags train_model_flags;
  TrainFlags train_flags;
  train_model_flags.add_options(*train);
  train_flags.add_options(*train);
  std::string train_data, train_out;
  int train_jobs = 1;
  bool no_cv = false, no_checkpoints = false;
  train->add_option("--data", train_data, "dataset directory")->required();
  train->add_option("--out", train_out, "run output directory")->required();
  train->add_option("--jobs", train_jobs, "parallel fold workers");
  train->add_flag("--no-cv", no_cv, "train one model on the full dataset and save model.ckpt");
  train->add_flag("--no-checkpoints", no_checkpoints, "skip per-fold checkpoint files");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "block-split sweep at constant capacity");
  ModelFlags sweep_model_flags;
  TrainFlags sweep_flags;
  sweep_model_flags.add_options(*sweep);
  sweep_flags.add_options(*sweep);
  std::string sweep_data, sweep_out, splits_arg;
  int sweep_jobs = 1;
  sweep->add_option("--splits", splits_arg, "comma-separated LOCAL:GLOBAL pairs, e.g. 0:6,2:4,6:0")
      ->required();
  sweep->add_option("--data", sweep_data, "dataset directory")->required();
  sweep->add_option("--out", sweep_out, "sweep output directory")->required();
  sweep->add_option("--jobs", sweep_jobs, "parallel fold workers");

  // eval
  auto* eval = app.add_subcommand("eval", "score a dataset with a saved checkpoint");
  ModelFlags eval_model_flags;
  eval_model_flags.add_options(*eval);
  std::string eval_ckpt, eval_data, eval_out;
  eval->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--out", eval_out, "output directory")->required();

  // gradcheck
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference check of the backward pass");
  int gc_local = 1, gc_global = 1;
  double gc_eps = 1e-5, gc_tol = 1e-4;
  size_t gc_samples = 800;
  uint64_t gc_seed = 0;
  std::string gc_corrupt;
  gradcheck->add_option("--local-blocks", gc_local, "local blocks in the toy instance");
  gradcheck->add_option("--global-blocks", gc_global, "global blocks in the toy instance");
  gradcheck->add_option("--eps", gc_eps, "central-difference step");
  gradcheck->add_option("--max-samples", gc_samples, "parameter elements to check");
  gradcheck->add_option("--seed", gc_seed, "instance and subsample seed");
  gradcheck->add_option("--tol", gc_tol, "pass threshold on max relative error");
  gradcheck->add_option("--corrupt-param", gc_corrupt, "perturb this tensor's analytic gradient")
      ->group("");  // test hook, hidden from help

  // report
  auto* report = app.add_subcommand("report", "render summary.json or sweep.csv as a table");
  std::string report_target;
  report->add_option("target", report_target, "run directory or file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(scfg, synth_out);
    if (train->parsed())
      return cmd_train(train_model_flags.resolve(file_cfg), train_flags.resolve(file_cfg),
                       train_data, train_out, train_jobs, no_cv, !no_checkpoints);
    if (sweep->parsed())
      return cmd_sweep(sweep_model_flags.resolve(file_cfg), sweep_flags.resolve(file_cfg),
                       parse_splits(splits_arg), sweep_data, sweep_out, sweep_jobs);
    if (eval->parsed()) return cmd_eval(eval_ckpt, eval_data, eval_out, eval_model_flags);
    if (gradcheck->parsed())
      return cmd_gradcheck(gc_local, gc_global, gc_eps, gc_samples, gc_seed, gc_tol, gc_corrupt);
    if (report->parsed()) return cmd_report(report_target);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
