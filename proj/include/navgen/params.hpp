#pragma once

#include "navgen/common.hpp"

#include <cstddef>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace navgen {

struct ModelConfig {
  int vocab_size = 0;  // 0 means "use the standard vocabulary"
  int d_model = 64;
  int n_layers = 4;
  int n_heads = 4;
  int ff_mult = 4;
  int max_len = 512;
  bool tie_embeddings = true;
  bool shared_id_embeddings = true;  // ID markers reuse the word-embedding rows
  int fuse_layers = 2;
  int fuse_heads = 4;
  int d_feat = 32;
  int angle_freqs = 4;
  double init_std = 0.02;

  int resolved_vocab_size() const;
  int angle_dim() const { return 4 * angle_freqs; }
  void validate() const;
};

struct Linear {
  Matrix weight;  // in x out
  Matrix bias;    // 1 x out
};

struct LayerNorm {
  Matrix gain;   // 1 x d
  Matrix shift;  // 1 x d
};

// Pre-norm transformer block: x + Attn(LN(x)), then + FFN(LN(.)).
struct TransformerBlock {
  LayerNorm norm1;
  Linear qkv;
  Linear proj;
  LayerNorm norm2;
  Linear up;
  Linear down;
};

struct SceneEncoderParams {
  Linear feature;   // d_feat -> d_model
  Matrix angle;     // angle_dim x d_model
  Matrix position;  // 3 x d_model
  std::vector<TransformerBlock> fusion;
  Linear object;    // d_feat -> d_model
  Matrix stop;      // 1 x d_model
  Matrix not_exist; // 1 x d_model
};

struct DecoderParams {
  Matrix token_embedding;     // V x d
  Matrix id_embedding;        // (max_marker+1) x d, empty when shared
  Matrix position_embedding;  // max_len x d
  std::vector<TransformerBlock> blocks;
  LayerNorm final_norm;
  Matrix output;  // d x V, empty when tied
};

struct ModelParams {
  ModelConfig config;
  SceneEncoderParams encoder;
  DecoderParams decoder;

  static ModelParams init(const ModelConfig& config, Rng& rng);
  ModelParams zeros_like() const;
  std::size_t parameter_count() const;
};

namespace detail {

template <class P, class F>
void visit_block(P& b, const std::string& prefix, F& fn) {
  fn(prefix + ".norm1.gain", b.norm1.gain);
  fn(prefix + ".norm1.shift", b.norm1.shift);
  fn(prefix + ".qkv.weight", b.qkv.weight);
  fn(prefix + ".qkv.bias", b.qkv.bias);
  fn(prefix + ".proj.weight", b.proj.weight);
  fn(prefix + ".proj.bias", b.proj.bias);
  fn(prefix + ".norm2.gain", b.norm2.gain);
  fn(prefix + ".norm2.shift", b.norm2.shift);
  fn(prefix + ".up.weight", b.up.weight);
  fn(prefix + ".up.bias", b.up.bias);
  fn(prefix + ".down.weight", b.down.weight);
  fn(prefix + ".down.bias", b.down.bias);
}

}  // namespace detail

// Visits every non-empty tensor in a fixed order with a stable name.
// Works for const and mutable ModelParams.
template <class P, class F>
void for_each_tensor(P& params, F&& fn) {
  auto visit = [&](const std::string& name, auto& m) {
    if (m.size() > 0) fn(name, m);
  };
  auto& e = params.encoder;
  visit("encoder.feature.weight", e.feature.weight);
  visit("encoder.feature.bias", e.feature.bias);
  visit("encoder.angle", e.angle);
  visit("encoder.position", e.position);
  for (std::size_t i = 0; i < e.fusion.size(); ++i) detail::visit_block(e.fusion[i], "encoder.fusion." + std::to_string(i), visit);
  visit("encoder.object.weight", e.object.weight);
  visit("encoder.object.bias", e.object.bias);
  visit("encoder.stop", e.stop);
  visit("encoder.not_exist", e.not_exist);
  auto& d = params.decoder;
  visit("decoder.token_embedding", d.token_embedding);
  visit("decoder.id_embedding", d.id_embedding);
  visit("decoder.position_embedding", d.position_embedding);
  for (std::size_t i = 0; i < d.blocks.size(); ++i) detail::visit_block(d.blocks[i], "decoder.block." + std::to_string(i), visit);
  visit("decoder.final_norm.gain", d.final_norm.gain);
  visit("decoder.final_norm.shift", d.final_norm.shift);
  visit("decoder.output", d.output);
}

// Flat (name, tensor pointer) list in visiting order.
template <class P>
auto tensor_list(P& params) {
  using Ptr = std::conditional_t<std::is_const_v<P>, const Matrix*, Matrix*>;
  std::vector<std::pair<std::string, Ptr>> out;
  for_each_tensor(params, [&](const std::string& name, auto& m) { out.emplace_back(name, &m); });
  return out;
}

}  // namespace navgen
