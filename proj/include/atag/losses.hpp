#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "atag/tensor.hpp"

namespace atag {

struct LossWeights {
  double regression = 10.0;  // weight of the completeness regression term
  double actionness = 1.0;
  double start = 1.0;
  double end = 1.0;
  double positive_threshold = 0.9;  // completeness targets above this are positives
};

inline constexpr double kProbabilityEpsilon = 1e-7;

/// -(1/N) sum(a+ g log p + a- (1-g) log(1-p)) over the N kept entries, with
/// a+ = N / sum g and a- = N / sum(1-g). p is clamped to [1e-7, 1 - 1e-7].
/// An empty class gets weight 0 and a warning is recorded.
Tensor weighted_bl_loss(const Tensor& p, const std::vector<double>& g,
                        const std::vector<std::uint8_t>* keep = nullptr);

Tensor actionness_loss(const Tensor& p, const std::vector<double>& g);

struct CompletenessLoss {
  Tensor classification;
  Tensor regression;
  Tensor total;  // classification + weight * regression
};

/// Classification on targets binarized at positive_threshold plus mean
/// squared error of the regression map, both over valid cells only.
/// Throws ConfigError when no cell is valid.
CompletenessLoss completeness_loss(const Tensor& cc, const Tensor& cr, const std::vector<double>& target,
                                   const std::vector<std::uint8_t>& valid, double regression_weight = 10.0,
                                   double positive_threshold = 0.9);

struct LossComponents {
  Tensor completeness;
  Tensor actionness;
  Tensor start;
  Tensor end;
};

struct LossBreakdown {
  Tensor total;
  double completeness = 0.0;
  double actionness = 0.0;
  double start = 0.0;
  double end = 0.0;
  double value = 0.0;
};

/// completeness + w.actionness * actionness + w.start * start + w.end * end.
/// Zero-weight terms are reported but kept out of the graph. Throws
/// NumericError naming the first non-finite component.
LossBreakdown total_loss(const LossComponents& c, const LossWeights& w);

}  // namespace atag
