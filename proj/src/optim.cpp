#include "atag/optim.hpp"

#include <cmath>

#include "atag/errors.hpp"

namespace atag {

Adam::Adam(ParameterSet& params, AdamConfig config) : params_(&params) {
  state_.config = config;
  for (const auto& e : params.entries()) {
    state_.first_moment.emplace_back(e.tensor.numel(), 0.0);
    state_.second_moment.emplace_back(e.tensor.numel(), 0.0);
  }
}

double Adam::learning_rate(int epoch) const {
  const auto& c = state_.config;
  if (c.decay_period <= 0) return c.lr;
  return c.lr * std::pow(c.decay_factor, epoch / c.decay_period);
}

void Adam::step(int epoch) {
  auto& entries = params_->entries();
  for (const auto& e : entries) {
    if (!e.tensor.has_grad()) continue;
    for (double g : e.tensor.grad()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in parameter " + e.name);
    }
  }

  const auto& c = state_.config;
  ++state_.step;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  const double lr = learning_rate(epoch);
  for (std::size_t p = 0; p < entries.size(); ++p) {
    Tensor& param = entries[p].tensor;
    if (!param.has_grad()) continue;
    auto values = param.mutable_data();
    const auto grad = param.grad();
    auto& m = state_.first_moment[p];
    auto& v = state_.second_moment[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
      v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
      const double mhat = m[i] / bc1;
      const double vhat = v[i] / bc2;
      values[i] = round_to_precision(values[i] - lr * mhat / (std::sqrt(vhat) + c.eps));
    }
  }
}

void Adam::restore(OptimState state) {
  const auto& entries = params_->entries();
  if (state.first_moment.size() != entries.size() || state.second_moment.size() != entries.size()) {
    throw DimensionError("optimizer state does not match parameter count");
  }
  for (std::size_t p = 0; p < entries.size(); ++p) {
    if (state.first_moment[p].size() != entries[p].tensor.numel() ||
        state.second_moment[p].size() != entries[p].tensor.numel()) {
      throw DimensionError("optimizer moments do not match parameter " + entries[p].name);
    }
  }
  state_ = std::move(state);
}

}  // namespace atag
