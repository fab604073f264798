#pragma once

#include <cstdint>
#include <vector>

#include "atag/params.hpp"

namespace atag {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Step decay: lr * decay_factor^(epoch / decay_period).
  double decay_factor = 0.1;
  int decay_period = 10;
};

// First/second moment buffers in ParameterSet order.
struct OptimState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;
  AdamConfig config;
};

class Adam {
 public:
  Adam(ParameterSet& params, AdamConfig config);

  double learning_rate(int epoch) const;

  /// One bias-corrected Adam update from the gradients currently stored on
  /// the parameters. A non-finite gradient aborts the step before any
  /// parameter changes and throws NumericError naming the parameter.
  void step(int epoch);

  const OptimState& state() const { return state_; }
  // Replaces the moment buffers; shapes must match the parameter set.
  void restore(OptimState state);

 private:
  ParameterSet* params_;
  OptimState state_;
};

}  // namespace atag
