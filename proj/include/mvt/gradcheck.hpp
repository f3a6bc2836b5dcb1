#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mvt/model.hpp"
#include "mvt/tensor.hpp"

namespace mvt {

struct GradCheckOptions {
  double eps = 1e-5;        // central-difference step; must be in (0, 1e-3]
  size_t max_samples = 800; // elements checked; all of them if the total fits
  uint64_t seed = 0;        // for the element subsample
  std::string corrupt_param;  // test hook: perturb this tensor's analytic grad
};

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;
  size_t samples = 0;
};

/// Compares backward-mode gradients of f() against central finite differences
/// over the given leaf tensors. f must rebuild its graph from the tensors'
/// current values on every call. Relative error uses the denominator
/// max(|analytic|, |numeric|, 1e-12); above max_samples total elements a
/// seeded random subsample (at least one per tensor) is checked instead of
/// every element. Throws, naming the parameter being perturbed, if f goes
/// non-finite.
GradCheckResult grad_check_tensors(const std::function<Tensor()>& f,
                                   const std::vector<std::pair<std::string, Tensor>>& params,
                                   const GradCheckOptions& opts = {});

/// Same check over every trainable tensor of a model.
GradCheckResult grad_check(const std::function<Tensor()>& f, ParamStore& params,
                           const GradCheckOptions& opts = {});

/// A seeded toy-architecture instance conditioned for finite-difference
/// checking: unit-scale synthetic views and mildly perturbed attention
/// weights and position table, so attention is informative and no gradient
/// path sits near the difference-quotient noise floor.
struct GradCheckInstance {
  ModelConfig cfg;
  ParamStore params;
  std::vector<Tensor> views;
  int label = 0;

  Tensor loss();  // cross-entropy of the model on the instance views
};

GradCheckInstance make_gradcheck_instance(int local_blocks, int global_blocks, uint64_t seed);

}  // namespace mvt
