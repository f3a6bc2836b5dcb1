#include "mvt/transformer.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace mvt {

void AttentionParams::validate() const {
  if (heads <= 0) throw std::invalid_argument("attention: head count must be positive");
  int d = w_q.cols();
  for (const Tensor* w : {&w_q, &w_k, &w_v, &w_o})
    if (w->ndim() != 2 || w->rows() != d || w->cols() != d)
      throw std::invalid_argument("attention: projection matrices must all be " +
                                  std::to_string(d) + "x" + std::to_string(d));
  if (d % heads != 0)
    throw std::invalid_argument("attention: d_embed " + std::to_string(d) +
                                " not divisible by heads " + std::to_string(heads));
}

std::array<Tensor, 3> qkv_project(const Tensor& z, const AttentionParams& p) {
  if (z.cols() != p.w_q.rows())
    throw std::invalid_argument("qkv_project: sequence width " + shape_str(z.shape()) +
                                " does not match projection " + shape_str(p.w_q.shape()));
  return {matmul(z, p.w_q), matmul(z, p.w_k), matmul(z, p.w_v)};
}

Tensor attention_weights(const Tensor& q, const Tensor& k) {
  if (q.cols() != k.cols())
    throw std::invalid_argument("attention: query/key width mismatch: " + shape_str(q.shape()) +
                                " vs " + shape_str(k.shape()));
  int d_k = q.cols();
  if (d_k == 0) throw std::invalid_argument("attention: d_k must be positive");
  Tensor scores = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_k)));
  return softmax_rows(scores);
}

Tensor scaled_dot_product_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
  if (k.rows() != v.rows())
    throw std::invalid_argument("attention: key/value token counts differ: " +
                                shape_str(k.shape()) + " vs " + shape_str(v.shape()));
  return matmul(attention_weights(q, k), v);
}

Tensor multi_head_attention(const Tensor& z, const AttentionParams& p) {
  p.validate();
  auto [q, k, v] = qkv_project(z, p);
  int d_k = p.d_k();
  std::vector<Tensor> heads;
  heads.reserve(p.heads);
  for (int h = 0; h < p.heads; ++h) {
    int c0 = h * d_k, c1 = (h + 1) * d_k;
    heads.push_back(scaled_dot_product_attention(slice_cols(q, c0, c1), slice_cols(k, c0, c1),
                                                 slice_cols(v, c0, c1)));
  }
  return matmul(concat_cols(heads), p.w_o);
}

Tensor transformer_block(const Tensor& z, const BlockParams& p) {
  Tensor attended = add(multi_head_attention(layer_norm_rows(z, p.ln1_gamma, p.ln1_beta, kLayerNormEps), p.attn), z);
  Tensor h = layer_norm_rows(attended, p.ln2_gamma, p.ln2_beta, kLayerNormEps);
  h = gelu(add_bias_rows(matmul(h, p.mlp_w1), p.mlp_b1));
  h = add_bias_rows(matmul(h, p.mlp_w2), p.mlp_b2);
  return add(h, attended);
}

Tensor patch_embed(const Tensor& image, const EmbeddingParams& embed, int patch_size) {
  if (image.ndim() != 3)
    throw std::invalid_argument("patch_embed: expected {C,H,W} image, got " +
                                shape_str(image.shape()));
  if (image.requires_grad())
    throw std::invalid_argument("patch_embed: differentiating through pixels is unsupported");
  int channels = image.shape()[0], height = image.shape()[1], width = image.shape()[2];
  int p = patch_size;
  if (p <= 0 || height % p != 0 || width % p != 0)
    throw std::invalid_argument("patch_embed: image " + std::to_string(height) + "x" +
                                std::to_string(width) + " not divisible by patch size " +
                                std::to_string(p));
  int grid_h = height / p, grid_w = width / p;
  int n_patches = grid_h * grid_w;
  int feat = channels * p * p;
  if (embed.proj.rows() != feat)
    throw std::invalid_argument("patch_embed: projection expects " +
                                std::to_string(embed.proj.rows()) + " features per patch, image yields " +
                                std::to_string(feat));

  Tensor patches = Tensor::zeros({n_patches, feat});
  auto dst = patches.data();
  auto src = image.data();
  for (int gy = 0; gy < grid_h; ++gy)
    for (int gx = 0; gx < grid_w; ++gx) {
      size_t row = static_cast<size_t>(gy) * grid_w + gx;
      for (int c = 0; c < channels; ++c)
        for (int py = 0; py < p; ++py)
          for (int px = 0; px < p; ++px)
            dst[row * feat + (static_cast<size_t>(c) * p + py) * p + px] =
                src[(static_cast<size_t>(c) * height + gy * p + py) * width + gx * p + px];
    }
  return matmul(patches, embed.proj);
}

Tensor build_sequence(const Tensor& patches, const EmbeddingParams& embed) {
  int n = patches.rows(), d = patches.cols();
  if (embed.pos.rows() != n + 1)
    throw std::invalid_argument("build_sequence: position table has " +
                                std::to_string(embed.pos.rows()) + " rows, sequence needs " +
                                std::to_string(n + 1));
  if (embed.pos.cols() != d || embed.cls.shape() != Shape{d})
    throw std::invalid_argument("build_sequence: embedding width mismatch for " +
                                shape_str(patches.shape()));
  std::array<Tensor, 2> parts = {reshape(embed.cls, {1, d}), patches};
  return add(concat_rows(parts), embed.pos);
}

}  // namespace mvt
