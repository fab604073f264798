#pragma once

#include <functional>
#include <string>
#include <vector>

#include "atag/params.hpp"

namespace atag {

struct GradCheckOptions {
  double step = 1e-5;       // central-difference half width h
  double tolerance = 1e-4;  // max accepted relative error
  // Relative error is |a - n| / max(|a|, |n|, denominator_floor).
  double denominator_floor = 1e-6;
  // 0 checks every element; otherwise an evenly strided subset per tensor.
  std::size_t max_elements_per_tensor = 0;
  // Elements that miss the tolerance at `step` are retried at these smaller
  // steps (a ReLU kink inside [p - h, p + h] spoils one central difference,
  // a wrong gradient spoils all of them). Empty disables retries.
  std::vector<double> fallback_steps;
};

struct GradCheckTensorSummary {
  std::string name;
  std::size_t checked = 0;
  double max_rel_error = 0.0;
  std::size_t worst_index = 0;
};

struct GradCheckReport {
  bool passed = true;
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t refined = 0;  // number of retries with a fallback step
  std::vector<GradCheckTensorSummary> tensors;
};

/// Compares reverse-mode gradients of `loss_fn` with central finite
/// differences (L(p+h) - L(p-h)) / 2h for every parameter in `params` that
/// requires a gradient. `loss_fn` must rebuild the graph from the current
/// parameter values on each call. Requires f64 precision.
GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::vector<ParameterSet::Entry> params,
                           const GradCheckOptions& options = {});

}  // namespace atag
