#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Graph is a define-by-run tape: every operation appends one node holding
// its forward value and a closure that pushes the incoming gradient to its
// parents. Parents always precede children, so backward() is a single reverse
// sweep over the tape. Tensors are lightweight handles into a Graph and are
// only valid while that Graph is alive.
//
// Shapes have rank 0 (scalar), 1 ([n], stored as 1 x n) or 2 ([m, n]).
// There is no implicit broadcasting: binary elementwise ops require equal
// shapes, and row-vector bias addition is the explicit add_row().

#include <cstddef>
#include <deque>
#include <functional>
#include <initializer_list>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "symot/dense.hpp"

namespace symot {

using Shape = std::vector<Index>;

// Trainable array that outlives any single Graph. Gradients from every
// backward pass that reaches it accumulate into `grad`.
struct Parameter {
  Matrix value;
  Matrix grad;

  Parameter() = default;
  explicit Parameter(Matrix v) : value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Graph;

class Tensor {
 public:
  Tensor() = default;

  const Matrix& value() const;
  const Shape& shape() const;
  Index rank() const { return static_cast<Index>(shape().size()); }
  Index numel() const { return value().size(); }
  bool requires_grad() const;

  // Gradient of the last backward() root with respect to this tensor. For
  // leaves this is the accumulated gradient; for a bound Parameter it is the
  // Parameter's own buffer.
  const Matrix& grad() const;

  // Value of a single-element tensor.
  double item() const;

  Graph& graph() const { return *graph_; }
  std::size_t id() const { return id_; }

 private:
  friend class Graph;
  Tensor(Graph* graph, std::size_t id) : graph_(graph), id_(id) {}

  Graph* graph_ = nullptr;
  std::size_t id_ = 0;
};

class Graph {
 public:
  // Receives dL/d(output) and the output value; must call accumulate() for
  // each parent that contributes.
  using BackwardFn = std::function<void(Graph&, const Matrix& grad, const Matrix& value)>;

  Graph() = default;
  Graph(const Graph&) = delete;
  Graph& operator=(const Graph&) = delete;

  // Leaf without gradient.
  Tensor constant(Matrix value, Shape shape = {});
  // Leaf whose gradient accumulates inside the graph (see Tensor::grad()).
  Tensor variable(Matrix value, Shape shape = {});
  // Leaf bound to an external Parameter; backward adds into p.grad. The value
  // is read in place, so `p` must not change while the graph is in use.
  Tensor parameter(Parameter& p);

  // Appends an interior node. Throws NumericError if `value` is not finite.
  Tensor record(std::string_view op, Matrix value, Shape shape, std::initializer_list<Tensor> parents,
                BackwardFn backward);

  // Adds `g` to the gradient of `t` (no-op if `t` does not require grad).
  void accumulate(const Tensor& t, Matrix g);

  // Propagates d(root)/d(node) to every node. `root` must hold one element.
  // Leaf gradients accumulate across calls; interior gradients are reset.
  void backward(const Tensor& root);

  // Clears accumulated gradients of variable() leaves.
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }
  std::span<const std::size_t> parents(const Tensor& t) const;

 private:
  friend class Tensor;

  enum class Kind { constant, variable, parameter, interior };

  struct Node {
    Kind kind = Kind::constant;
    Matrix value;
    Shape shape;
    bool requires_grad = false;
    Matrix grad;
    Parameter* param = nullptr;
    std::vector<std::size_t> parents;
    BackwardFn backward;
  };

  Tensor append(Node node);
  const Node& node(const Tensor& t) const;

  std::deque<Node> nodes_;
};

// --- differentiable operations -------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
// x W^T + b for x [n x in], W [out x in], b [1 x out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Tensor operator+(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a, const Tensor& b);
Tensor operator-(const Tensor& a);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
inline Tensor operator*(double c, const Tensor& a) { return scale(a, c); }
inline Tensor operator*(const Tensor& a, double c) { return scale(a, c); }

Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor relu(const Tensor& a);

// Reductions. Without an axis the result is a scalar.
Tensor sum(const Tensor& a, std::optional<int> axis = std::nullopt);
Tensor mean(const Tensor& a, std::optional<int> axis = std::nullopt);

Tensor add_row(const Tensor& a, const Tensor& bias);
Tensor gather_cols(const Tensor& a, std::span<const std::size_t> columns);
Tensor concat_cols(const Tensor& a, const Tensor& b);

// [m x d] x [n x d] -> [m x n] squared Euclidean distances.
Tensor pairwise_sqdist(const Tensor& a, const Tensor& b);

}  // namespace symot
