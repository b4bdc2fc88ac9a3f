#pragma once
// Dense tensors with reverse-mode automatic differentiation.
//
// A Tensor is a cheap handle to a graph Node. Ops record their parents and a
// backward closure when gradient recording is enabled and at least one input
// requires a gradient; Tensor::backward() then walks the graph once in
// reverse topological order.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace ptaco {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Run-level numeric precision. kHigh keeps full double precision; kStandard
// rounds every op result and parameter update to single precision.
enum class Precision { kStandard, kHigh };

Precision precision();
void set_precision(Precision p);

class PrecisionGuard {
 public:
  explicit PrecisionGuard(Precision p) : saved_(precision()) { set_precision(p); }
  ~PrecisionGuard() { set_precision(saved_); }
  PrecisionGuard(const PrecisionGuard&) = delete;
  PrecisionGuard& operator=(const PrecisionGuard&) = delete;

 private:
  Precision saved_;
};

// Applies the active precision to a buffer in place.
void apply_precision(std::span<double> values);

// Gradient recording switch, used for inference and optimizer updates.
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool saved_;
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first needed
  bool requires_grad = false;
  std::string op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const Node&)> backward_fn;

  bool is_leaf() const { return !backward_fn; }
  std::vector<double>& ensure_grad();
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor from_vector(const Shape& shape, std::vector<double> values,
                            bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  // Negative axes count from the end.
  std::size_t dim(int axis) const;
  std::size_t numel() const { return node_->value.size(); }

  std::span<const double> values() const { return node_->value; }
  // Direct write access; only valid on leaves (parameters, constants).
  std::span<double> mutable_values();
  double item() const;
  double at(std::initializer_list<std::size_t> index) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool flag);
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->ensure_grad(); }
  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires a
  // gradient. This tensor must hold a single element.
  void backward() const;

  // Same values, no graph history.
  Tensor detach() const;

  const std::string& op() const { return node_->op; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

// Builds an op result. `backward` is attached only when recording is enabled
// and some parent requires a gradient. Values are rounded to the active
// precision.
Tensor make_result(Shape shape, std::vector<double> values, std::string op,
                   std::vector<Tensor> parents,
                   std::function<void(const Node&)> backward);

// Test hook: multiplies the incoming gradient of every node whose op name
// equals `op` by `scale` during backward. An empty op disables the fault.
void set_backward_fault(const std::string& op, double scale);
void clear_backward_fault();

}  // namespace ptaco
