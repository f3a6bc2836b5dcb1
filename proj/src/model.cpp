#include "mvt/model.hpp"

#include <stdexcept>

#include "mvt/rng.hpp"

namespace mvt {

namespace {

void block_shapes(const std::string& prefix, int d, int d_mlp,
                  std::vector<std::pair<std::string, Shape>>& out) {
  out.emplace_back(prefix + ".attn.wq", Shape{d, d});
  out.emplace_back(prefix + ".attn.wk", Shape{d, d});
  out.emplace_back(prefix + ".attn.wv", Shape{d, d});
  out.emplace_back(prefix + ".attn.wo", Shape{d, d});
  out.emplace_back(prefix + ".ln1.gamma", Shape{d});
  out.emplace_back(prefix + ".ln1.beta", Shape{d});
  out.emplace_back(prefix + ".mlp.w1", Shape{d, d_mlp});
  out.emplace_back(prefix + ".mlp.b1", Shape{d_mlp});
  out.emplace_back(prefix + ".mlp.w2", Shape{d_mlp, d});
  out.emplace_back(prefix + ".mlp.b2", Shape{d});
  out.emplace_back(prefix + ".ln2.gamma", Shape{d});
  out.emplace_back(prefix + ".ln2.beta", Shape{d});
}

void for_each_block_param(const std::string& prefix, BlockParams& b,
                          const std::function<void(const std::string&, Tensor&)>& fn) {
  fn(prefix + ".attn.wq", b.attn.w_q);
  fn(prefix + ".attn.wk", b.attn.w_k);
  fn(prefix + ".attn.wv", b.attn.w_v);
  fn(prefix + ".attn.wo", b.attn.w_o);
  fn(prefix + ".ln1.gamma", b.ln1_gamma);
  fn(prefix + ".ln1.beta", b.ln1_beta);
  fn(prefix + ".mlp.w1", b.mlp_w1);
  fn(prefix + ".mlp.b1", b.mlp_b1);
  fn(prefix + ".mlp.w2", b.mlp_w2);
  fn(prefix + ".mlp.b2", b.mlp_b2);
  fn(prefix + ".ln2.gamma", b.ln2_gamma);
  fn(prefix + ".ln2.beta", b.ln2_beta);
}

}  // namespace

void ParamStore::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  fn("embed.proj", embed.proj);
  fn("embed.cls", embed.cls);
  fn("embed.pos", embed.pos);
  for (size_t i = 0; i < local_blocks.size(); ++i)
    for_each_block_param("local" + std::to_string(i), local_blocks[i], fn);
  for (size_t i = 0; i < global_blocks.size(); ++i)
    for_each_block_param("global" + std::to_string(i), global_blocks[i], fn);
  fn("final_ln.gamma", final_ln_gamma);
  fn("final_ln.beta", final_ln_beta);
  fn("head.w", head_w);
  fn("head.b", head_b);
}

std::vector<std::pair<std::string, Tensor>> ParamStore::named_params() {
  std::vector<std::pair<std::string, Tensor>> out;
  for_each_param([&](const std::string& name, Tensor& t) { out.emplace_back(name, t); });
  return out;
}

size_t ParamStore::total_params() {
  size_t n = 0;
  for_each_param([&](const std::string&, Tensor& t) { n += t.numel(); });
  return n;
}

std::vector<std::pair<std::string, Shape>> param_shapes(const ModelConfig& cfg) {
  cfg.validate();
  int d = cfg.d_embed, d_mlp = cfg.d_mlp();
  int feat = cfg.patch_size * cfg.patch_size * cfg.channels;
  std::vector<std::pair<std::string, Shape>> out;
  out.emplace_back("embed.proj", Shape{feat, d});
  out.emplace_back("embed.cls", Shape{d});
  out.emplace_back("embed.pos", Shape{cfg.seq_len(), d});
  for (int i = 0; i < cfg.local_blocks; ++i) block_shapes("local" + std::to_string(i), d, d_mlp, out);
  for (int i = 0; i < cfg.global_blocks; ++i)
    block_shapes("global" + std::to_string(i), d, d_mlp, out);
  out.emplace_back("final_ln.gamma", Shape{d});
  out.emplace_back("final_ln.beta", Shape{d});
  out.emplace_back("head.w", Shape{d, 2});
  out.emplace_back("head.b", Shape{2});
  return out;
}

size_t param_count(const ModelConfig& cfg) {
  size_t n = 0;
  for (const auto& [name, shape] : param_shapes(cfg)) n += shape_numel(shape);
  return n;
}

ParamStore init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  ParamStore store;
  store.local_blocks.resize(cfg.local_blocks);
  store.global_blocks.resize(cfg.global_blocks);
  for (auto& b : store.local_blocks) b.attn.heads = cfg.heads;
  for (auto& b : store.global_blocks) b.attn.heads = cfg.heads;

  Rng rng(substream_seed(seed, "init"));
  auto shapes = param_shapes(cfg);
  size_t idx = 0;
  store.for_each_param([&](const std::string& name, Tensor& t) {
    const auto& [expected_name, shape] = shapes[idx++];
    if (name != expected_name) throw std::logic_error("param order mismatch at " + name);
    bool is_gain = name.ends_with("gamma");
    bool is_weight = shape.size() >= 2;
    t = Tensor::zeros(shape, true);
    if (is_gain) {
      for (auto& v : t.data()) v = 1.0;
    } else if (is_weight) {
      for (auto& v : t.data()) v = rng.truncated_normal(0.02);
    }
    // biases, layer-norm shifts, and the class token stay zero
  });
  return store;
}

std::vector<Tensor> forward_local(const std::vector<Tensor>& views, const ParamStore& params,
                                  const ModelConfig& cfg) {
  if (views.size() != 4)
    throw std::invalid_argument("forward_local: expected 4 views, got " +
                                std::to_string(views.size()));
  std::vector<Tensor> seqs;
  seqs.reserve(4);
  for (const Tensor& view : views) {
    Tensor z = build_sequence(patch_embed(view, params.embed, cfg.patch_size), params.embed);
    for (const BlockParams& block : params.local_blocks) z = transformer_block(z, block);
    seqs.push_back(z);
  }
  return seqs;
}

Tensor concat_views(const std::vector<Tensor>& seqs) {
  if (seqs.size() != 4)
    throw std::invalid_argument("concat_views: expected 4 sequences, got " +
                                std::to_string(seqs.size()));
  for (const Tensor& s : seqs)
    if (s.shape() != seqs[0].shape())
      throw std::invalid_argument("concat_views: shape mismatch: " + shape_str(seqs[0].shape()) +
                                  " vs " + shape_str(s.shape()));
  return concat_rows(seqs);
}

Tensor forward_global(const Tensor& g0, const ParamStore& params) {
  Tensor g = g0;
  for (const BlockParams& block : params.global_blocks) g = transformer_block(g, block);
  return g;
}

Tensor forward_views(const std::vector<Tensor>& views, const ParamStore& params,
                     const ModelConfig& cfg) {
  Tensor g = forward_global(concat_views(forward_local(views, params, cfg)), params);
  g = layer_norm_rows(g, params.final_ln_gamma, params.final_ln_beta, kLayerNormEps);
  int n1 = cfg.seq_len();
  Tensor token;
  if (cfg.readout == Readout::kFirstClassToken) {
    token = slice_rows(g, 0, 1);
  } else {
    token = mean_rows(select_rows(g, {0, n1, 2 * n1, 3 * n1}));
  }
  Tensor logits = add_bias_rows(matmul(token, params.head_w), params.head_b);
  return reshape(logits, {2});
}

Tensor classify_case(const CaseRecord& rec, const ParamStore& params, const ModelConfig& cfg) {
  std::vector<Tensor> views;
  views.reserve(4);
  for (const ImageU16& img : rec.views) views.push_back(preprocess_view(img, cfg));
  return forward_views(views, params, cfg);
}

}  // namespace mvt
