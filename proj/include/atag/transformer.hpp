#pragma once

#include <random>
#include <string>
#include <vector>

#include "atag/model_config.hpp"
#include "atag/params.hpp"

// Global branch: front block, multi-head self-attention, FFN and the
// snippet actionness predictor. Features are time-major T x C_g.
namespace atag {

struct FrontBlockParams {
  // Gated linear unit: (x Wa + ba) * sigmoid(x Wb + bb), both C_g -> C_g.
  Tensor glu_wa, glu_ba, glu_wb, glu_bb;
  Tensor ln1_gamma, ln1_beta;
  // 1x1 conv branch, summed with a parallel 3x1 average pool.
  Tensor point_w, point_b;
  Tensor ln2_gamma, ln2_beta;
  // Depthwise (kernel k, groups C_g) then pointwise conv.
  Tensor depth_w, depth_b, sep_w, sep_b;
  Tensor ln3_gamma, ln3_beta;
};

struct AttentionParams {
  std::size_t heads = 1;
  // C_g x C_g projections, x W + b. Keys carry no bias: it would add a
  // per-query constant to the logits, which the softmax ignores.
  Tensor wq, bq, wk, wv, bv, wo, bo;
  Tensor ln_gamma, ln_beta;
};

struct FfnParams {
  std::size_t expansion = 4;
  Tensor w1, b1;  // C_g -> expansion * C_g
  Tensor ln1_gamma, ln1_beta;
  Tensor w2, b2;  // expansion * C_g -> C_g
  Tensor ln2_gamma, ln2_beta;
};

struct ActionnessHeadParams {
  Tensor conv1_w, conv1_b;  // [hidden x C/4 x 3], groups 4
  Tensor conv2_w, conv2_b;  // [1 x hidden x 1]
};

struct TransformerLayerParams {
  AttentionParams attention;
  FfnParams ffn;
};

struct TransformerParams {
  FrontBlockParams front;
  std::vector<TransformerLayerParams> layers;
  ActionnessHeadParams actionness;
};

FrontBlockParams init_front_block(ParameterSet& ps, const std::string& prefix, std::size_t width,
                                  std::size_t kernel, std::mt19937_64& rng);
AttentionParams init_attention(ParameterSet& ps, const std::string& prefix, std::size_t width,
                               std::size_t heads, std::mt19937_64& rng);
FfnParams init_ffn(ParameterSet& ps, const std::string& prefix, std::size_t width,
                   std::size_t expansion, std::mt19937_64& rng);
ActionnessHeadParams init_actionness_head(ParameterSet& ps, const std::string& prefix,
                                          std::size_t width, std::size_t hidden, std::mt19937_64& rng);
// Parameter names: <prefix>front.*, <prefix>layerN.attn.*, <prefix>layerN.ffn.*, <prefix>actionness.*
// Without the transformer only the actionness head is created.
TransformerParams init_transformer(ParameterSet& ps, const std::string& prefix,
                                   const ModelConfig& cfg, std::mt19937_64& rng);

/// Three residual parts, each layer_norm(part(x) + x): GLU; parallel 1x1 conv
/// plus 3x1 average pool (summed); depthwise-separable large-kernel conv.
Tensor front_block_forward(const Tensor& x, const FrontBlockParams& p);

/// Alternating sin/cos encoding, row pos: [sin(pos/10000^(2i/w)), cos(...)].
Tensor sine_pos_encoding(std::size_t length, std::size_t width);

struct AttentionResult {
  Tensor output;                // layer_norm(x + projected heads)
  Tensor heads_concat;          // concatenated A_h V_h before the output projection
  Tensor sublayer;              // heads_concat Wo + bo, before the residual
  std::vector<Tensor> maps;     // one T x T row-stochastic map per head
};

/// Per head softmax(Q K^T / sqrt(d)) V. The positional encoding, when given,
/// is added to the query/key input only.
AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& p,
                                     const Tensor& pos_encoding, const ForwardContext& ctx = {});

/// Two linear layers, each followed by a residual connection and layer norm.
/// The expansion layer's residual tiles x across the hidden width; the
/// contraction layer's residual averages the hidden width back down.
Tensor ffn_forward(const Tensor& x, const FfnParams& p, const ForwardContext& ctx = {});

/// conv(k3, groups 4) -> ReLU -> conv(k1) -> sigmoid; returns p^a of shape [T].
Tensor actionness_head(const Tensor& features, const ActionnessHeadParams& p);

struct BranchOutput {
  Tensor global_features;  // T x C_g
  Tensor actionness;       // [T]
  std::vector<Tensor> attention_maps;
};

BranchOutput transformer_branch_forward(const Tensor& global_input, const TransformerParams& p,
                                        const ModelConfig& cfg, const ForwardContext& ctx = {});

}  // namespace atag
