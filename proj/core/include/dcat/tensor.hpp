#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcat {

/// Raised when operand shapes are incompatible. The message names both shapes.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a NaN or infinity shows up where finite values are required.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The single random engine type used everywhere a run draws numbers.
using Rng = std::mt19937_64;

/// Row-major 2-D extent. Scalars are 1x1.
struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;

  [[nodiscard]] std::size_t size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;

// Receives the finished output node and pushes out.grad into the inputs.
using BackwardFn = std::function<void(const Node& out)>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until something is accumulated
  bool requires_grad = false;
  std::vector<NodePtr> inputs;
  BackwardFn backward;
  const char* op = "leaf";

  [[nodiscard]] bool is_leaf() const { return !backward; }
  // Adds g into this node's gradient, allocating zeros on first use.
  void accumulate(std::span<const double> g);
  std::span<double> grad_buffer();
};

}  // namespace detail

/// Shape-tagged f64 matrix participating in a reverse-mode gradient graph.
///
/// A Tensor is a cheap handle: copies share the underlying node. Operations
/// record their inputs only when an input requires grad and grad mode is on,
/// so inference under NoGradGuard builds no graph at all.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);
  explicit Tensor(detail::NodePtr node) : node_(std::move(node)) {}

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor filled(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor identity(std::size_t n);
  static Tensor uniform(Shape shape, double lo, double hi, Rng& rng,
                        bool requires_grad = false);

  [[nodiscard]] bool defined() const { return node_ != nullptr; }
  [[nodiscard]] const Shape& shape() const;
  [[nodiscard]] std::size_t rows() const { return shape().rows; }
  [[nodiscard]] std::size_t cols() const { return shape().cols; }
  [[nodiscard]] std::size_t size() const { return shape().size(); }

  [[nodiscard]] std::span<const double> values() const;
  // Direct write access, meant for optimizer updates and perturbation harnesses.
  [[nodiscard]] std::span<double> mutable_values();
  [[nodiscard]] double at(std::size_t r, std::size_t c) const;
  [[nodiscard]] double item() const;

  [[nodiscard]] bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  [[nodiscard]] bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  [[nodiscard]] std::span<const double> grad() const;
  void clear_grad();

  [[nodiscard]] bool is_leaf() const;
  [[nodiscard]] const char* op_name() const;

  /// Runs reverse accumulation from this scalar.
  void backward() const;

  /// New leaf holding a copy of the values, disconnected from any graph.
  [[nodiscard]] Tensor detach() const;

  [[nodiscard]] const detail::NodePtr& node() const { return node_; }

 private:
  detail::NodePtr node_;
};

[[nodiscard]] bool grad_enabled();

/// Disables graph recording on this thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

/// Builds the output of a differentiable operation. The backward function is
/// retained only if some input requires grad and grad mode is enabled.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::vector<Tensor> inputs, detail::BackwardFn backward,
                   const char* op);

/// Topologically ordered record of the graph reachable from a root:
/// every node appears after all nodes producing its inputs.
struct Tape {
  std::vector<detail::NodePtr> nodes;
};

Tape record_tape(const Tensor& root);

/// Reverse-mode accumulation. Leaf gradients accumulate across calls;
/// intermediate gradients are released once propagated.
void backward(const Tensor& root);

}  // namespace dcat
