#include "atag/transformer.hpp"

#include <cmath>

#include "atag/errors.hpp"
#include "atag/ops.hpp"

namespace atag {
namespace {

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  return add_bias_lastdim(matmul(x, w), b);
}

// [C x eC] with ones at (c, k*C + c): x * R repeats x e times along channels.
Tensor tile_matrix(std::size_t c, std::size_t e, double value) {
  std::vector<double> r(c * c * e, 0.0);
  for (std::size_t k = 0; k < e; ++k)
    for (std::size_t i = 0; i < c; ++i) r[i * c * e + k * c + i] = value;
  return Tensor::from({c, c * e}, std::move(r));
}

}  // namespace

FrontBlockParams init_front_block(ParameterSet& ps, const std::string& prefix, std::size_t width,
                                  std::size_t kernel, std::mt19937_64& rng) {
  FrontBlockParams p;
  const double lin = glorot_bound(width, width);
  p.glu_wa = ps.add_uniform(prefix + "glu_wa", {width, width}, lin, rng);
  p.glu_ba = ps.add_constant(prefix + "glu_ba", {width}, 0.0);
  p.glu_wb = ps.add_uniform(prefix + "glu_wb", {width, width}, lin, rng);
  p.glu_bb = ps.add_constant(prefix + "glu_bb", {width}, 0.0);
  p.ln1_gamma = ps.add_constant(prefix + "ln1_gamma", {width}, 1.0);
  p.ln1_beta = ps.add_constant(prefix + "ln1_beta", {width}, 0.0);
  p.point_w = ps.add_uniform(prefix + "point_w", {width, width, 1}, lin, rng);
  p.point_b = ps.add_constant(prefix + "point_b", {width}, 0.0);
  p.ln2_gamma = ps.add_constant(prefix + "ln2_gamma", {width}, 1.0);
  p.ln2_beta = ps.add_constant(prefix + "ln2_beta", {width}, 0.0);
  p.depth_w = ps.add_uniform(prefix + "depth_w", {width, 1, kernel}, glorot_bound(kernel, kernel), rng);
  p.depth_b = ps.add_constant(prefix + "depth_b", {width}, 0.0);
  p.sep_w = ps.add_uniform(prefix + "sep_w", {width, width, 1}, lin, rng);
  p.sep_b = ps.add_constant(prefix + "sep_b", {width}, 0.0);
  p.ln3_gamma = ps.add_constant(prefix + "ln3_gamma", {width}, 1.0);
  p.ln3_beta = ps.add_constant(prefix + "ln3_beta", {width}, 0.0);
  return p;
}

AttentionParams init_attention(ParameterSet& ps, const std::string& prefix, std::size_t width,
                               std::size_t heads, std::mt19937_64& rng) {
  AttentionParams p;
  p.heads = heads;
  const double b = glorot_bound(width, width);
  p.wq = ps.add_uniform(prefix + "wq", {width, width}, b, rng);
  p.bq = ps.add_constant(prefix + "bq", {width}, 0.0);
  p.wk = ps.add_uniform(prefix + "wk", {width, width}, b, rng);
  p.wv = ps.add_uniform(prefix + "wv", {width, width}, b, rng);
  p.bv = ps.add_constant(prefix + "bv", {width}, 0.0);
  p.wo = ps.add_uniform(prefix + "wo", {width, width}, b, rng);
  p.bo = ps.add_constant(prefix + "bo", {width}, 0.0);
  p.ln_gamma = ps.add_constant(prefix + "ln_gamma", {width}, 1.0);
  p.ln_beta = ps.add_constant(prefix + "ln_beta", {width}, 0.0);
  return p;
}

FfnParams init_ffn(ParameterSet& ps, const std::string& prefix, std::size_t width,
                   std::size_t expansion, std::mt19937_64& rng) {
  FfnParams p;
  p.expansion = expansion;
  const std::size_t hidden = width * expansion;
  p.w1 = ps.add_uniform(prefix + "w1", {width, hidden}, glorot_bound(width, hidden), rng);
  p.b1 = ps.add_constant(prefix + "b1", {hidden}, 0.0);
  p.ln1_gamma = ps.add_constant(prefix + "ln1_gamma", {hidden}, 1.0);
  p.ln1_beta = ps.add_constant(prefix + "ln1_beta", {hidden}, 0.0);
  p.w2 = ps.add_uniform(prefix + "w2", {hidden, width}, glorot_bound(hidden, width), rng);
  p.b2 = ps.add_constant(prefix + "b2", {width}, 0.0);
  p.ln2_gamma = ps.add_constant(prefix + "ln2_gamma", {width}, 1.0);
  p.ln2_beta = ps.add_constant(prefix + "ln2_beta", {width}, 0.0);
  return p;
}

ActionnessHeadParams init_actionness_head(ParameterSet& ps, const std::string& prefix,
                                          std::size_t width, std::size_t hidden,
                                          std::mt19937_64& rng) {
  if (width % 4 != 0 || hidden % 4 != 0) {
    throw ConfigError("actionness head: widths must be divisible by 4 (grouped conv), got " +
                      std::to_string(width) + " -> " + std::to_string(hidden));
  }
  ActionnessHeadParams p;
  const std::size_t in_per_group = width / 4;
  p.conv1_w = ps.add_uniform(prefix + "conv1_w", {hidden, in_per_group, 3},
                             glorot_bound(in_per_group * 3, hidden / 4 * 3), rng);
  p.conv1_b = ps.add_constant(prefix + "conv1_b", {hidden}, 0.0);
  p.conv2_w = ps.add_uniform(prefix + "conv2_w", {1, hidden, 1}, glorot_bound(hidden, 1), rng);
  p.conv2_b = ps.add_constant(prefix + "conv2_b", {1}, 0.0);
  return p;
}

TransformerParams init_transformer(ParameterSet& ps, const std::string& prefix,
                                   const ModelConfig& cfg, std::mt19937_64& rng) {
  const std::size_t width = cfg.global_channels();
  TransformerParams p;
  if (cfg.use_transformer && cfg.use_front_block) {
    p.front = init_front_block(ps, prefix + "front.", width, cfg.front_kernel, rng);
  }
  for (std::size_t l = 0; cfg.use_transformer && l < cfg.transformer_layers; ++l) {
    const std::string lp = prefix + "layer" + std::to_string(l) + ".";
    p.layers.push_back({init_attention(ps, lp + "attn.", width, cfg.heads, rng),
                        init_ffn(ps, lp + "ffn.", width, cfg.ffn_expansion, rng)});
  }
  p.actionness = init_actionness_head(ps, prefix + "actionness.", width, cfg.head_hidden, rng);
  return p;
}

Tensor front_block_forward(const Tensor& x, const FrontBlockParams& p) {
  if (x.rank() != 2) throw DimensionError("front block expects T x C, got " + shape_to_string(x.shape()));
  const std::size_t width = x.dim(1);

  const Tensor gated = mul(linear(x, p.glu_wa, p.glu_ba), sigmoid(linear(x, p.glu_wb, p.glu_bb)));
  const Tensor h1 = layer_norm(add(gated, x), p.ln1_gamma, p.ln1_beta);

  const Tensor h1_cm = transpose(h1);
  const Tensor pointwise = conv1d(h1_cm, p.point_w, p.point_b);
  const Tensor pooled = avg_pool1d(h1_cm, 3);
  const Tensor h2 = layer_norm(add(transpose(add(pointwise, pooled)), h1), p.ln2_gamma, p.ln2_beta);

  const Tensor depthwise = conv1d(transpose(h2), p.depth_w, p.depth_b, width);
  const Tensor separable = transpose(conv1d(depthwise, p.sep_w, p.sep_b));
  return layer_norm(add(separable, h2), p.ln3_gamma, p.ln3_beta);
}

Tensor sine_pos_encoding(std::size_t length, std::size_t width) {
  if (width % 2 != 0) {
    throw ConfigError("sine_pos_encoding: width must be even, got " + std::to_string(width));
  }
  std::vector<double> enc(length * width);
  for (std::size_t pos = 0; pos < length; ++pos) {
    for (std::size_t i = 0; i < width / 2; ++i) {
      const double freq = std::pow(10000.0, 2.0 * static_cast<double>(i) / static_cast<double>(width));
      const double angle = static_cast<double>(pos) / freq;
      enc[pos * width + 2 * i] = std::sin(angle);
      enc[pos * width + 2 * i + 1] = std::cos(angle);
    }
  }
  return Tensor::from({length, width}, std::move(enc));
}

AttentionResult multi_head_attention(const Tensor& x, const AttentionParams& p,
                                     const Tensor& pos_encoding, const ForwardContext& ctx) {
  const std::size_t width = x.dim(1);
  if (p.heads == 0 || width % p.heads != 0) {
    throw ConfigError("attention: " + std::to_string(p.heads) + " heads do not divide width " +
                      std::to_string(width));
  }
  const std::size_t d = width / p.heads;
  const Tensor qk_input = pos_encoding.defined() ? add(x, pos_encoding) : x;
  const Tensor q = linear(qk_input, p.wq, p.bq);
  const Tensor k = matmul(qk_input, p.wk);
  const Tensor v = linear(x, p.wv, p.bv);

  AttentionResult r;
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor concat;
  for (std::size_t h = 0; h < p.heads; ++h) {
    const Tensor qh = slice_lastdim(q, h * d, d);
    const Tensor kh = slice_lastdim(k, h * d, d);
    const Tensor vh = slice_lastdim(v, h * d, d);
    const Tensor attn = softmax_lastdim(scale(matmul(qh, transpose(kh)), inv_sqrt_d));
    r.maps.push_back(attn);
    const double rate = ctx.active_dropout();
    const Tensor weights = rate > 0.0 ? dropout(attn, rate, *ctx.rng) : attn;
    const Tensor head = matmul(weights, vh);
    concat = concat.defined() ? concat_lastdim(concat, head) : head;
  }
  r.heads_concat = concat;
  r.sublayer = linear(concat, p.wo, p.bo);
  r.output = layer_norm(add(x, r.sublayer), p.ln_gamma, p.ln_beta);
  return r;
}

Tensor ffn_forward(const Tensor& x, const FfnParams& p, const ForwardContext& ctx) {
  const std::size_t width = x.dim(1);
  const std::size_t e = p.expansion;
  const double rate = ctx.active_dropout();
  auto drop = [&](const Tensor& t) { return rate > 0.0 ? dropout(t, rate, *ctx.rng) : t; };

  const Tensor hidden = drop(relu(linear(x, p.w1, p.b1)));
  const Tensor tiled = e == 1 ? x : matmul(x, tile_matrix(width, e, 1.0));
  const Tensor h1 = layer_norm(add(hidden, tiled), p.ln1_gamma, p.ln1_beta);

  const Tensor projected = drop(linear(h1, p.w2, p.b2));
  const Tensor folded = e == 1 ? h1 : matmul(h1, transpose(tile_matrix(width, e, 1.0 / static_cast<double>(e))));
  return layer_norm(add(projected, folded), p.ln2_gamma, p.ln2_beta);
}

Tensor actionness_head(const Tensor& features, const ActionnessHeadParams& p) {
  const std::size_t t_len = features.dim(0);
  if (features.dim(1) % 4 != 0) {
    throw ConfigError("actionness head: width " + std::to_string(features.dim(1)) +
                      " is not divisible by 4");
  }
  const Tensor hidden = relu(conv1d(transpose(features), p.conv1_w, p.conv1_b, 4));
  const Tensor logits = conv1d(hidden, p.conv2_w, p.conv2_b);
  return reshape(sigmoid(logits), {t_len});
}

BranchOutput transformer_branch_forward(const Tensor& global_input, const TransformerParams& p,
                                        const ModelConfig& cfg, const ForwardContext& ctx) {
  BranchOutput out;
  if (!cfg.use_transformer) {
    out.global_features = global_input;
    out.actionness = actionness_head(global_input, p.actionness);
    return out;
  }
  Tensor x = cfg.use_front_block ? front_block_forward(global_input, p.front) : global_input;
  const Tensor pos = cfg.use_positional_encoding ? sine_pos_encoding(x.dim(0), x.dim(1)) : Tensor{};
  for (const auto& layer : p.layers) {
    AttentionResult attn = multi_head_attention(x, layer.attention, pos, ctx);
    for (auto& m : attn.maps) out.attention_maps.push_back(std::move(m));
    x = ffn_forward(attn.output, layer.ffn, ctx);
  }
  out.global_features = x;
  out.actionness = actionness_head(x, p.actionness);
  return out;
}

}  // namespace atag
