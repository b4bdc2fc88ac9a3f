#include "ptaco/tensor.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "ptaco/error.hpp"
#include "ptaco/kinks.hpp"
#include "ptaco/opcount.hpp"

namespace ptaco {

namespace {

Precision g_precision = Precision::kHigh;
bool g_grad_enabled = true;

struct BackwardFault {
  std::string op;
  double scale = 1.0;
};
BackwardFault g_fault;

std::uint64_t g_macs = 0;

bool g_kink_recording = false;
double g_kink_min = std::numeric_limits<double>::infinity();

}  // namespace

namespace opcount {
std::uint64_t macs() { return g_macs; }
void reset() { g_macs = 0; }
void add(std::uint64_t n) { g_macs += n; }
}  // namespace opcount

namespace kinks {
void start() {
  g_kink_recording = true;
  g_kink_min = std::numeric_limits<double>::infinity();
}
double stop() {
  g_kink_recording = false;
  return g_kink_min;
}
void observe(double x) {
  if (x != 0.0) g_kink_min = std::min(g_kink_min, std::abs(x));
}
bool recording() { return g_kink_recording; }
}  // namespace kinks

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Precision precision() { return g_precision; }
void set_precision(Precision p) { g_precision = p; }

void apply_precision(std::span<double> values) {
  if (g_precision != Precision::kStandard) return;
  for (double& v : values) v = static_cast<double>(static_cast<float>(v));
}

bool grad_enabled() { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : saved_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = saved_; }

void set_backward_fault(const std::string& op, double scale) { g_fault = {op, scale}; }
void clear_backward_fault() { g_fault = {}; }

std::vector<double>& Node::ensure_grad() {
  if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  return grad;
}

Tensor Tensor::zeros(const Shape& shape, bool requires_grad) {
  return full(shape, 0.0, requires_grad);
}

Tensor Tensor::full(const Shape& shape, double value, bool requires_grad) {
  return from_vector(shape, std::vector<double>(shape_numel(shape), value), requires_grad);
}

Tensor Tensor::from_vector(const Shape& shape, std::vector<double> values, bool requires_grad) {
  for (std::size_t extent : shape) {
    if (extent == 0) throw ShapeError("tensor extents must be positive, got " + shape_str(shape));
  }
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("shape " + shape_str(shape) + " holds " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  auto node = std::make_shared<Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return from_vector({1}, {value}, requires_grad);
}

std::size_t Tensor::dim(int axis) const {
  const int r = static_cast<int>(rank());
  const int a = axis < 0 ? axis + r : axis;
  if (a < 0 || a >= r) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for shape " +
                     shape_str(shape()));
  }
  return node_->shape[static_cast<std::size_t>(a)];
}

std::span<double> Tensor::mutable_values() {
  if (!node_->is_leaf()) throw Error("mutable_values() on a non-leaf tensor");
  return node_->value;
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item() needs one element, shape is " + shape_str(shape()));
  return node_->value[0];
}

double Tensor::at(std::initializer_list<std::size_t> index) const {
  if (index.size() != rank()) throw ShapeError("index rank does not match " + shape_str(shape()));
  std::size_t flat = 0;
  std::size_t axis = 0;
  for (std::size_t i : index) {
    if (i >= node_->shape[axis]) throw ShapeError("index out of range for " + shape_str(shape()));
    flat = flat * node_->shape[axis] + i;
    ++axis;
  }
  return node_->value[flat];
}

void Tensor::set_requires_grad(bool flag) {
  if (!node_->is_leaf()) throw Error("requires_grad can only be set on leaves");
  node_->requires_grad = flag;
}

void Tensor::zero_grad() {
  if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->value = node_->value;
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (numel() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " + shape_str(shape()));
  }
  if (!node_->requires_grad) return;

  // Iterative post-order DFS; each node enters `order` exactly once.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  // Interior gradients are per-sweep; leaves accumulate across calls.
  for (Node* node : order) {
    if (!node->is_leaf()) node->grad.assign(node->value.size(), 0.0);
  }
  node_->ensure_grad()[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->is_leaf()) continue;
    if (!g_fault.op.empty() && node->op == g_fault.op) {
      for (double& g : node->grad) g *= g_fault.scale;
    }
    node->backward_fn(*node);
  }
}

Tensor make_result(Shape shape, std::vector<double> values, std::string op,
                   std::vector<Tensor> parents, std::function<void(const Node&)> backward) {
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->op = std::move(op);
  apply_precision(node->value);
  bool needs_grad = false;
  if (g_grad_enabled) {
    for (const Tensor& p : parents) needs_grad = needs_grad || p.requires_grad();
  }
  if (needs_grad && backward) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

}  // namespace ptaco
