#include "atag/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "atag/errors.hpp"

namespace atag {

GradCheckReport grad_check(const std::function<Tensor()>& loss_fn,
                           std::vector<ParameterSet::Entry> params,
                           const GradCheckOptions& options) {
  if (current_precision() != Precision::f64) {
    throw ConfigError("grad_check requires f64 precision");
  }
  std::erase_if(params, [](const ParameterSet::Entry& e) { return !e.tensor.requires_grad(); });

  for (auto& e : params) e.tensor.zero_grad();
  Tensor loss = loss_fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& e : params) {
    if (e.tensor.has_grad()) {
      analytic.emplace_back(e.tensor.grad().begin(), e.tensor.grad().end());
    } else {
      analytic.emplace_back(e.tensor.numel(), 0.0);
    }
  }

  GradCheckReport report;
  const double h = options.step;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto values = params[p].tensor.mutable_data();
    GradCheckTensorSummary summary;
    summary.name = params[p].name;
    std::size_t stride = 1;
    if (options.max_elements_per_tensor > 0 && values.size() > options.max_elements_per_tensor) {
      stride = (values.size() + options.max_elements_per_tensor - 1) / options.max_elements_per_tensor;
    }
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double saved = values[i];
      const double a = analytic[p][i];
      auto central = [&](double step) {
        values[i] = saved + step;
        const double up = loss_fn().item();
        values[i] = saved - step;
        const double down = loss_fn().item();
        values[i] = saved;
        return (up - down) / (2.0 * step);
      };
      auto rel_error = [&](double numeric) {
        const double denom = std::max({std::fabs(a), std::fabs(numeric), options.denominator_floor});
        return std::fabs(a - numeric) / denom;
      };
      double numeric = central(h);
      double rel = rel_error(numeric);
      for (double step : options.fallback_steps) {
        if (rel <= options.tolerance) break;
        const double n2 = central(step);
        const double r2 = rel_error(n2);
        ++report.refined;
        if (r2 < rel) {
          numeric = n2;
          rel = r2;
        }
      }
      ++summary.checked;
      if (rel > summary.max_rel_error || !std::isfinite(rel)) {
        summary.max_rel_error = rel;
        summary.worst_index = i;
      }
      if (rel > report.max_rel_error || !std::isfinite(rel)) {
        report.max_rel_error = rel;
        report.worst_param = params[p].name;
        report.worst_index = i;
        report.worst_analytic = a;
        report.worst_numeric = numeric;
      }
    }
    report.tensors.push_back(summary);
  }
  report.passed = std::isfinite(report.max_rel_error) && report.max_rel_error <= options.tolerance;
  return report;
}

}  // namespace atag
