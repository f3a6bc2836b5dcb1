#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mvt/config.hpp"
#include "mvt/dataset.hpp"
#include "mvt/transformer.hpp"

namespace mvt {

/// All trainable tensors of one multi-view model. The embedding is a single
/// shared instance regardless of view count; local and global blocks have
/// identical shapes, so moving blocks between the two stages never changes
/// the parameter count.
struct ParamStore {
  EmbeddingParams embed;
  std::vector<BlockParams> local_blocks;
  std::vector<BlockParams> global_blocks;
  Tensor final_ln_gamma, final_ln_beta;
  Tensor head_w;  // d_embed x 2
  Tensor head_b;  // {2}

  /// Visits every parameter in the fixed serialization order.
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  std::vector<std::pair<std::string, Tensor>> named_params();
  size_t total_params();
};

/// Shapes (name, extents) a store for `cfg` contains, in serialization order.
std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg);

/// Trainable scalar count; independent of how blocks split between stages.
size_t param_count(const ModelConfig& cfg);

/// Truncated-normal(0.02) weights and embeddings, zero biases and class
/// token, unit layer-norm gains. Deterministic for a given seed.
ParamStore init_params(const ModelConfig& cfg, uint64_t seed);

/// Embeds each of the four preprocessed views ({C,H,W} tensors, fixed order
/// LCC, RCC, LMLO, RMLO) and runs them through the same local blocks.
/// Throws unless exactly four views are given.
std::vector<Tensor> forward_local(const std::vector<Tensor>& views, const ParamStore& params,
                                  const ModelConfig& cfg);

/// Row-wise concatenation; class tokens land at rows 0, N+1, 2N+2, 3N+3.
Tensor concat_views(const std::vector<Tensor>& seqs);

/// Sequential global blocks over the concatenated sequence. No positional
/// term is added at this stage.
Tensor forward_global(const Tensor& g0, const ParamStore& params);

/// Full forward pass from preprocessed views to 2 logits {benign, malignant}.
Tensor forward_views(const std::vector<Tensor>& views, const ParamStore& params,
                     const ModelConfig& cfg);

/// Preprocesses the case's raw views to cfg.image_size and classifies them.
Tensor classify_case(const CaseRecord& rec, const ParamStore& params, const ModelConfig& cfg);

}  // namespace mvt
