#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <vector>

#include "atag/gcn.hpp"
#include "atag/heads.hpp"
#include "atag/labels.hpp"
#include "atag/losses.hpp"
#include "atag/transformer.hpp"

namespace atag {

struct ModelOutput {
  ScoreMaps maps;
  Tensor global_features;
  Tensor local_features;
  Tensor fused;  // undefined under late fusion
  std::vector<Tensor> attention_maps;
  Tensor adjacency;         // effective local aggregation matrix, if any
  Tensor content_adjacency; // A_d, adaptive variant only
};

/// Both branches, fusion and the output heads over a fixed sequence length.
class AtagModel {
 public:
  /// Parameters are drawn from a generator seeded with `seed`.
  AtagModel(const ModelConfig& cfg, std::uint64_t seed);

  AtagModel(const AtagModel&) = delete;
  AtagModel& operator=(const AtagModel&) = delete;

  /// features: T x C. Throws ConfigError if T or C differ from the config.
  ModelOutput forward(const Tensor& features, const ForwardContext& ctx = {}) const;

  const ModelConfig& config() const { return cfg_; }
  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }

  const TransformerParams& transformer() const { return transformer_; }
  const GcnParams& local() const { return local_; }
  const BoundaryHeadParams& boundary() const { return boundary_; }
  const CompletenessHeadParams& completeness() const { return completeness_; }

 private:
  ModelConfig cfg_;
  ParameterSet params_;
  TransformerParams transformer_;
  GcnParams local_;
  BoundaryHeadParams boundary_;
  CompletenessHeadParams completeness_;
  std::shared_ptr<const SparseMatrix> sampler_;
  Tensor valid_;
};

/// Multi-task objective for one window.
LossBreakdown model_loss(const ModelOutput& out, const LabelSet& labels, const LossWeights& w);

}  // namespace atag
