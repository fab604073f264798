#include "atag/model.hpp"

#include "atag/errors.hpp"
#include "atag/features.hpp"

namespace atag {

AtagModel::AtagModel(const ModelConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(seed);
  const std::size_t cg = cfg_.global_channels();
  const std::size_t cl = cfg_.local_channels();
  transformer_ = init_transformer(params_, "global.", cfg_, rng);
  local_ = init_gcn(params_, "local.", cfg_.length, cl, cl, cfg_.delta, cfg_.local_variant, rng);

  std::vector<std::size_t> parts;
  switch (cfg_.fusion) {
    case FusionMode::concat: parts = {cg + cl}; break;
    case FusionMode::sum: parts = {cg}; break;
    case FusionMode::late: parts = {cg, cl}; break;
  }
  boundary_ = init_boundary_head(params_, "boundary.", parts, cfg_.head_hidden, rng);
  completeness_ = init_completeness_head(params_, "completeness.", parts, cfg_.num_samples,
                                         cfg_.bm_hidden_3d, cfg_.bm_hidden_2d, rng);
  sampler_ = build_sampling_matrix(cfg_.length, cfg_.max_duration, cfg_.num_samples);
  valid_ = valid_mask_tensor(cfg_.max_duration, cfg_.length);
}

ModelOutput AtagModel::forward(const Tensor& features, const ForwardContext& ctx) const {
  if (features.rank() != 2 || features.dim(0) != cfg_.length || features.dim(1) != cfg_.channels) {
    throw ConfigError("model expects " + std::to_string(cfg_.length) + " x " + std::to_string(cfg_.channels) +
                      " features, got " + shape_to_string(features.shape()));
  }
  ModelOutput out;
  const auto [fg, fl] = split_channels(features);
  BranchOutput global = transformer_branch_forward(fg, transformer_, cfg_, ctx);
  LocalOutput local = local_variant_forward(fl, local_);
  out.global_features = global.global_features;
  out.local_features = local.features;
  out.attention_maps = std::move(global.attention_maps);
  out.adjacency = local.adjacency;
  out.content_adjacency = local.content;

  BoundaryScores boundary;
  CompletenessMaps completeness;
  const std::size_t d = cfg_.max_duration, n = cfg_.num_samples;
  if (cfg_.fusion == FusionMode::late) {
    boundary = boundary_head({out.global_features, out.local_features}, boundary_);
    completeness = completeness_head({bm_sample(out.global_features, sampler_, d, n),
                                      bm_sample(out.local_features, sampler_, d, n)},
                                     completeness_, valid_);
  } else {
    out.fused = fuse_global_local(out.global_features, out.local_features, cfg_.fusion);
    boundary = boundary_head(out.fused, boundary_);
    completeness = completeness_head(bm_sample(out.fused, sampler_, d, n), completeness_, valid_);
  }
  ScoreMaps& m = out.maps;
  m.start = boundary.start;
  m.end = boundary.end;
  m.actionness = global.actionness;
  m.cc_map = completeness.cc;
  m.cr_map = completeness.cr;
  m.valid = valid_mask(d, cfg_.length);
  m.length = cfg_.length;
  m.max_duration = d;
  return out;
}

LossBreakdown model_loss(const ModelOutput& out, const LabelSet& labels, const LossWeights& w) {
  const ScoreMaps& m = out.maps;
  LossComponents c;
  c.completeness = completeness_loss(m.cc_map, m.cr_map, labels.completeness, m.valid, w.regression,
                                     w.positive_threshold)
                       .total;
  c.actionness = actionness_loss(m.actionness, labels.action);
  c.start = weighted_bl_loss(m.start, labels.start);
  c.end = weighted_bl_loss(m.end, labels.end);
  return total_loss(c, w);
}

}  // namespace atag
