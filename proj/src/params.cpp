#include "atag/params.hpp"

#include <cmath>

#include "atag/errors.hpp"

namespace atag {

Tensor ParameterSet::add_uniform(const std::string& name, const Shape& shape, double bound,
                                 std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> values(shape_numel(shape));
  for (auto& v : values) v = dist(rng);
  return add(name, Tensor::from(shape, std::move(values), true));
}

Tensor ParameterSet::add_constant(const std::string& name, const Shape& shape, double value) {
  return add(name, Tensor::full(shape, value, true));
}

Tensor ParameterSet::add(const std::string& name, Tensor tensor) {
  if (contains(name)) throw ConfigError("duplicate parameter name: " + name);
  tensor.set_requires_grad(true);
  tensor.set_name(name);
  entries_.push_back({name, tensor});
  return tensor;
}

std::size_t ParameterSet::total_elements() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.tensor.numel();
  return n;
}

const Tensor& ParameterSet::get(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ConfigError("unknown parameter: " + name);
}

Tensor& ParameterSet::get(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.tensor;
  throw ConfigError("unknown parameter: " + name);
}

bool ParameterSet::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

void ParameterSet::zero_grad() {
  for (auto& e : entries_) e.tensor.zero_grad();
}

double glorot_bound(std::size_t fan_in, std::size_t fan_out) {
  return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
}

}  // namespace atag
