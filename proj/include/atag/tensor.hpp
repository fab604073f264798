#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace atag {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

// Storage precision for forward values. Arithmetic is always carried out in
// double; in f32 mode every stored value is rounded to the nearest float so
// the numbers a run produces are exactly those of 32-bit storage.
enum class Precision { f64, f32 };

Precision current_precision();
double round_to_precision(double v);

// Sets the thread's precision for the lifetime of the scope.
class PrecisionScope {
 public:
  explicit PrecisionScope(Precision p);
  ~PrecisionScope();
  PrecisionScope(const PrecisionScope&) = delete;
  PrecisionScope& operator=(const PrecisionScope&) = delete;

 private:
  Precision saved_;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the dynamic autograd graph. `backward` reads this node's
// grad and accumulates into the parents' grads.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward;
  std::string name;

  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from(const Shape& shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value);

  bool defined() const { return static_cast<bool>(node_); }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Direct write access; only meaningful for leaf tensors (parameters, inputs).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t i, std::size_t j) const;

  bool requires_grad() const;
  void set_requires_grad(bool flag);
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Reverse-mode sweep from this scalar tensor.
  void backward() const;

  // Same values, cut from the graph.
  Tensor detach() const;

  const std::string& name() const;
  void set_name(std::string name);

  const NodePtr& node() const { return node_; }

 private:
  NodePtr node_;
};

/// Builds an op result. `requires_grad` is inherited from the inputs; the
/// backward closure is kept only when some input needs a gradient. Values are
/// rounded to the current precision.
Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   std::function<void(Node&)> backward);

}  // namespace atag
