#pragma once

#include <array>

#include "mvt/tensor.hpp"

namespace mvt {

inline constexpr double kLayerNormEps = 1e-6;

/// Packed multi-head attention weights: one d_embed x d_embed matrix per
/// projection, sliced into `heads` column groups of width d_k = d_embed/heads.
/// Equivalent to per-head projection matrices, simpler to checkpoint.
/// Projections carry no bias terms.
struct AttentionParams {
  Tensor w_q, w_k, w_v, w_o;
  int heads = 1;

  int d_embed() const { return w_q.cols(); }
  int d_k() const { return d_embed() / heads; }
  void validate() const;
};

/// One pre-norm block: attention and MLP sub-layers, each preceded by layer
/// norm and wrapped in a residual connection.
struct BlockParams {
  AttentionParams attn;
  Tensor ln1_gamma, ln1_beta;
  Tensor mlp_w1, mlp_b1, mlp_w2, mlp_b2;
  Tensor ln2_gamma, ln2_beta;
};

/// Patch projection, class token, and learned 1-D position table. One shared
/// instance serves all four views.
struct EmbeddingParams {
  Tensor proj;  // (P*P*C) x d_embed
  Tensor cls;   // {d_embed}
  Tensor pos;   // (N+1) x d_embed; row 0 is the class-token position
};

/// Q = z W_q, K = z W_k, V = z W_v (packed across heads).
std::array<Tensor, 3> qkv_project(const Tensor& z, const AttentionParams& p);

/// softmax(Q K^T / sqrt(d_k)); each row is a distribution over key positions.
Tensor attention_weights(const Tensor& q, const Tensor& k);

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Per-head attention on column slices, concatenated and projected by w_o.
Tensor multi_head_attention(const Tensor& z, const AttentionParams& p);

/// z~ = MSA(LN(z)) + z;  out = MLP(LN(z~)) + z~, MLP = W1 -> GELU -> W2 with biases.
Tensor transformer_block(const Tensor& z, const BlockParams& p);

/// Flattens non-overlapping P x P patches of a {C,H,W} image in row-major
/// patch order (features channel-major within a patch) and projects each by
/// `embed.proj`. The image must not be part of a gradient graph.
Tensor patch_embed(const Tensor& image, const EmbeddingParams& embed, int patch_size);

/// Prepends the class token and adds the position table:
/// row 0 = cls + pos[0], row i = patches[i-1] + pos[i].
Tensor build_sequence(const Tensor& patches, const EmbeddingParams& embed);

}  // namespace mvt
