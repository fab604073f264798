#pragma once

#include <random>
#include <string>
#include <vector>

#include "atag/tensor.hpp"

namespace atag {

/// Ordered registry of named trainable tensors. Registration order is the
/// canonical order used by the optimizer, checkpoints, and gradient checks.
class ParameterSet {
 public:
  struct Entry {
    std::string name;
    Tensor tensor;
  };

  // Uniform in [-bound, bound].
  Tensor add_uniform(const std::string& name, const Shape& shape, double bound, std::mt19937_64& rng);
  Tensor add_constant(const std::string& name, const Shape& shape, double value);
  Tensor add(const std::string& name, Tensor tensor);

  const std::vector<Entry>& entries() const { return entries_; }
  std::vector<Entry>& entries() { return entries_; }
  std::size_t size() const { return entries_.size(); }
  std::size_t total_elements() const;

  // Throws ConfigError when absent.
  const Tensor& get(const std::string& name) const;
  Tensor& get(const std::string& name);
  bool contains(const std::string& name) const;

  void zero_grad();

 private:
  std::vector<Entry> entries_;
};

// Xavier/Glorot-style bound for a layer with the given fan-in and fan-out.
double glorot_bound(std::size_t fan_in, std::size_t fan_out);

}  // namespace atag
