#include "mvt/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvt/dataset.hpp"
#include "mvt/rng.hpp"
#include "mvt/training.hpp"

namespace mvt {

namespace {

double eval_scalar(const std::function<Tensor()>& f, const std::string& context) {
  Tensor out = f();
  if (out.numel() != 1)
    throw std::invalid_argument("grad_check: f must return a single-element tensor, got " +
                                shape_str(out.shape()));
  double v = out.item();
  if (!std::isfinite(v))
    throw std::runtime_error("grad_check: non-finite value while perturbing " +
                             (context.empty() ? std::string("(baseline)") : context));
  return v;
}

}  // namespace

GradCheckResult grad_check_tensors(const std::function<Tensor()>& f,
                                   const std::vector<std::pair<std::string, Tensor>>& params,
                                   const GradCheckOptions& opts) {
  if (!(opts.eps > 0.0) || opts.eps > 1e-3)
    throw std::invalid_argument("grad_check: eps must be in (0, 1e-3]");
  if (opts.max_samples == 0) throw std::invalid_argument("grad_check: max_samples must be positive");

  // One backward pass gives every analytic derivative at once.
  for (const auto& [name, t] : params) const_cast<Tensor&>(t).zero_grad();
  Tensor loss = f();
  eval_scalar([&] { return loss; }, "");
  backward(loss);

  std::vector<std::vector<double>> analytic(params.size());
  size_t total = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    const Tensor& t = params[i].second;
    analytic[i].assign(t.numel(), 0.0);
    if (t.has_grad()) {
      auto g = t.grad();
      std::copy(g.begin(), g.end(), analytic[i].begin());
    }
    if (params[i].first == opts.corrupt_param)
      for (auto& v : analytic[i]) v += 0.5;  // test hook, see GradCheckOptions
    total += t.numel();
  }

  // Element selection: everything when it fits, otherwise a seeded subsample
  // spread across tensors (at least one element each).
  std::vector<std::vector<size_t>> chosen(params.size());
  if (total <= opts.max_samples) {
    for (size_t i = 0; i < params.size(); ++i) {
      chosen[i].resize(params[i].second.numel());
      for (size_t j = 0; j < chosen[i].size(); ++j) chosen[i][j] = j;
    }
  } else {
    Rng rng(substream_seed(opts.seed, "gradcheck"));
    for (size_t i = 0; i < params.size(); ++i) {
      size_t numel = params[i].second.numel();
      size_t want = std::max<size_t>(1, opts.max_samples * numel / total);
      want = std::min(want, numel);
      // sample without replacement via partial Fisher-Yates
      std::vector<size_t> idx(numel);
      for (size_t j = 0; j < numel; ++j) idx[j] = j;
      for (size_t j = 0; j < want; ++j)
        std::swap(idx[j], idx[j + rng.next_u64() % (numel - j)]);
      idx.resize(want);
      std::sort(idx.begin(), idx.end());
      chosen[i] = std::move(idx);
    }
  }

  GradCheckResult result;
  for (size_t i = 0; i < params.size(); ++i) {
    const std::string& name = params[i].first;
    Tensor t = params[i].second;
    auto data = t.data();
    for (size_t j : chosen[i]) {
      double saved = data[j];
      data[j] = saved + opts.eps;
      double plus = eval_scalar(f, name);
      data[j] = saved - opts.eps;
      double minus = eval_scalar(f, name);
      data[j] = saved;
      double numeric = (plus - minus) / (2.0 * opts.eps);
      double a = analytic[i][j];
      double rel = std::fabs(a - numeric) / std::max({std::fabs(a), std::fabs(numeric), 1e-12});
      ++result.samples;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = name + "[" + std::to_string(j) + "]";
      }
    }
  }
  return result;
}

GradCheckResult grad_check(const std::function<Tensor()>& f, ParamStore& params,
                           const GradCheckOptions& opts) {
  return grad_check_tensors(f, params.named_params(), opts);
}

Tensor GradCheckInstance::loss() {
  return cross_entropy(forward_views(views, params, cfg), label);
}

GradCheckInstance make_gradcheck_instance(int local_blocks, int global_blocks, uint64_t seed) {
  GradCheckInstance inst;
  inst.cfg = ModelConfig::preset("toy");
  inst.cfg.local_blocks = local_blocks;
  inst.cfg.global_blocks = global_blocks;
  inst.cfg.validate();

  SynthConfig scfg;
  scfg.cases = 1;
  scfg.seed = substream_seed(seed, "gradcheck-data");
  scfg.noise_scale = 0.15;  // high-frequency content keeps every patch distinct
  CaseRecord rec = generate_dataset(scfg)[0];
  inst.label = rec.label;
  for (const ImageU16& img : rec.views)
    inst.views.push_back(scale(preprocess_view(img, inst.cfg), 1.0 / 255.0));

  inst.params = init_params(inst.cfg, seed);
  Rng rng(substream_seed(seed, "gradcheck-perturb"));
  inst.params.for_each_param([&](const std::string& name, Tensor& t) {
    double sigma = 0.0;
    if (name.find(".attn.") != std::string::npos)
      sigma = 0.10;
    else if (name == "embed.pos")
      sigma = 0.08;
    if (sigma > 0.0)
      for (auto& v : t.data()) v += rng.truncated_normal(sigma);
  });
  return inst;
}

}  // namespace mvt
