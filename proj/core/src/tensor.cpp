#include "dcat/tensor.hpp"

#include <algorithm>
#include <unordered_set>
#include <utility>

namespace dcat {

namespace {

thread_local int no_grad_depth = 0;

detail::Node& checked(const detail::NodePtr& node) {
  if (!node) throw std::logic_error("use of an undefined Tensor");
  return *node;
}

}  // namespace

std::string to_string(const Shape& shape) {
  return "[" + std::to_string(shape.rows) + "x" + std::to_string(shape.cols) + "]";
}

namespace detail {

void Node::accumulate(std::span<const double> g) {
  auto buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
  return grad;
}

}  // namespace detail

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (shape.rows == 0 || shape.cols == 0) {
    throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (values.size() != shape.size()) {
    throw ShapeError("tensor of shape " + to_string(shape) + " given " +
                     std::to_string(values.size()) + " values");
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = shape;
  node_->value = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return filled(shape, 0.0, requires_grad);
}

Tensor Tensor::filled(Shape shape, double value, bool requires_grad) {
  return Tensor(shape, std::vector<double>(shape.size(), value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor({1, 1}, {value}, requires_grad);
}

Tensor Tensor::identity(std::size_t n) {
  std::vector<double> v(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) v[i * n + i] = 1.0;
  return Tensor({n, n}, std::move(v));
}

Tensor Tensor::uniform(Shape shape, double lo, double hi, Rng& rng, bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(shape.size());
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), requires_grad);
}

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::span<const double> Tensor::values() const { return checked(node_).value; }

std::span<double> Tensor::mutable_values() { return checked(node_).value; }

double Tensor::at(std::size_t r, std::size_t c) const {
  const auto& n = checked(node_);
  if (r >= n.shape.rows || c >= n.shape.cols) {
    throw std::out_of_range("index (" + std::to_string(r) + "," + std::to_string(c) +
                            ") outside " + to_string(n.shape));
  }
  return n.value[r * n.shape.cols + c];
}

double Tensor::item() const {
  const auto& n = checked(node_);
  if (n.shape.size() != 1) throw ShapeError("item() on non-scalar " + to_string(n.shape));
  return n.value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  checked(node_).requires_grad = on;
  if (!on) node_->grad.clear();
  return *this;
}

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

void Tensor::clear_grad() { checked(node_).grad.clear(); }

bool Tensor::is_leaf() const { return checked(node_).is_leaf(); }

const char* Tensor::op_name() const { return checked(node_).op; }

void Tensor::backward() const { dcat::backward(*this); }

Tensor Tensor::detach() const {
  const auto& n = checked(node_);
  return Tensor(n.shape, n.value, false);
}

bool grad_enabled() { return no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++no_grad_depth; }
NoGradGuard::~NoGradGuard() { --no_grad_depth; }

Tensor make_result(Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                   detail::BackwardFn backward, const char* op) {
  auto node = std::make_shared<detail::Node>();
  node->shape = shape;
  node->value = std::move(values);
  node->op = op;
  const bool track =
      grad_enabled() && std::any_of(inputs.begin(), inputs.end(),
                                    [](const Tensor& t) { return t.requires_grad(); });
  if (track) {
    node->requires_grad = true;
    node->backward = std::move(backward);
    node->inputs.reserve(inputs.size());
    for (auto& t : inputs) node->inputs.push_back(t.node());
  }
  return Tensor(std::move(node));
}

Tape record_tape(const Tensor& root) {
  Tape tape;
  std::unordered_set<const detail::Node*> seen;
  // Iterative post-order DFS; a node is emitted after all of its inputs.
  std::vector<std::pair<detail::NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      const auto& child = node->inputs[next++];
      if (child->requires_grad && seen.insert(child.get()).second) {
        stack.emplace_back(child, 0);
      }
      continue;
    }
    tape.nodes.push_back(node);
    stack.pop_back();
  }
  return tape;
}

void backward(const Tensor& root) {
  if (root.size() != 1) {
    throw ShapeError("backward requires a scalar root, got " + to_string(root.shape()));
  }
  if (!root.requires_grad()) return;
  Tape tape = record_tape(root);
  for (const auto& node : tape.nodes) {
    if (!node->is_leaf()) node->grad.clear();
  }
  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = tape.nodes.rbegin(); it != tape.nodes.rend(); ++it) {
    auto& node = **it;
    if (node.is_leaf() || node.grad.empty()) continue;
    node.backward(node);
    node.grad.clear();
    node.grad.shrink_to_fit();
  }
}

}  // namespace dcat
