#include "symot/tensor.hpp"

#include <cmath>
#include <string>

#include "symot/errors.hpp"

namespace symot {
namespace {

Shape matrix_shape(const Matrix& m) { return {m.rows(), m.cols()}; }

std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

void require_same_graph(const Tensor& a, const Tensor& b) {
  if (&a.graph() != &b.graph()) throw DomainError("tensors belong to different graphs");
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  require_same_graph(a, b);
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
}

void require_rank2(std::string_view op, const Tensor& a) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a rank-2 tensor, got " + shape_string(a.shape()));
}

}  // namespace

// --- Tensor ----------------------------------------------------------------

const Matrix& Tensor::value() const {
  const auto& n = graph_->node(*this);
  return n.kind == Graph::Kind::parameter ? n.param->value : n.value;
}
const Shape& Tensor::shape() const { return graph_->node(*this).shape; }
bool Tensor::requires_grad() const { return graph_->node(*this).requires_grad; }

const Matrix& Tensor::grad() const {
  const auto& n = graph_->node(*this);
  if (n.kind == Graph::Kind::parameter) return n.param->grad;
  return n.grad;
}

double Tensor::item() const {
  const Matrix& v = value();
  if (v.size() != 1) throw DimensionError("item(): tensor has " + std::to_string(v.size()) + " elements");
  return v(0, 0);
}

// --- Graph -----------------------------------------------------------------

Tensor Graph::append(Node node) {
  nodes_.push_back(std::move(node));
  return Tensor(this, nodes_.size() - 1);
}

const Graph::Node& Graph::node(const Tensor& t) const {
  if (t.graph_ != this || t.id_ >= nodes_.size()) throw DomainError("tensor does not belong to this graph");
  return nodes_[t.id_];
}

Tensor Graph::constant(Matrix value, Shape shape) {
  if (shape.empty()) shape = matrix_shape(value);
  Node n;
  n.kind = Kind::constant;
  n.value = std::move(value);
  n.shape = std::move(shape);
  return append(std::move(n));
}

Tensor Graph::variable(Matrix value, Shape shape) {
  if (shape.empty()) shape = matrix_shape(value);
  Node n;
  n.kind = Kind::variable;
  n.grad = Matrix::Zero(value.rows(), value.cols());
  n.value = std::move(value);
  n.shape = std::move(shape);
  n.requires_grad = true;
  return append(std::move(n));
}

Tensor Graph::parameter(Parameter& p) {
  if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
  Node n;
  n.kind = Kind::parameter;
  n.shape = matrix_shape(p.value);
  n.param = &p;
  n.requires_grad = true;
  return append(std::move(n));
}

Tensor Graph::record(std::string_view op, Matrix value, Shape shape, std::initializer_list<Tensor> parents,
                     BackwardFn backward) {
  // A finite sum means every entry is finite; only on failure pay for the exact test.
  if (!std::isfinite(value.sum()) && !value.allFinite()) throw NumericError(std::string(op) + ": non-finite result");
  Node n;
  n.kind = Kind::interior;
  n.value = std::move(value);
  n.shape = std::move(shape);
  for (const Tensor& p : parents) {
    const Node& pn = node(p);
    n.parents.push_back(p.id_);
    n.requires_grad = n.requires_grad || pn.requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return append(std::move(n));
}

void Graph::accumulate(const Tensor& t, Matrix g) {
  if (t.graph_ != this) throw DomainError("accumulate(): tensor from another graph");
  Node& n = nodes_[t.id_];
  if (!n.requires_grad) return;
  const Matrix& v = n.kind == Kind::parameter ? n.param->value : n.value;
  if (g.rows() != v.rows() || g.cols() != v.cols()) {
    throw DimensionError("accumulate(): gradient shape does not match the tensor value");
  }
  if (n.kind == Kind::parameter) {
    n.param->grad += g;
    return;
  }
  if (n.grad.size() == 0) {
    n.grad = std::move(g);
  } else {
    n.grad += g;
  }
}

void Graph::backward(const Tensor& root) {
  const Node& r = node(root);
  if (r.value.size() != 1) {
    throw DimensionError("backward(): root must be a scalar, got shape " + shape_string(r.shape));
  }
  for (Node& n : nodes_) {
    if (n.kind == Kind::interior) n.grad.resize(0, 0);
  }
  if (!r.requires_grad) return;
  accumulate(root, Matrix::Ones(1, 1));
  for (std::size_t i = root.id_ + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.kind != Kind::interior || n.grad.size() == 0 || !n.backward) continue;
    n.backward(*this, n.grad, n.value);
  }
}

void Graph::zero_grad() {
  for (Node& n : nodes_) {
    if (n.kind == Kind::variable) n.grad.setZero();
  }
}

std::span<const std::size_t> Graph::parents(const Tensor& t) const { return node(t).parents; }

// --- operations ------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_same_graph(a, b);
  require_rank2("matmul", a);
  require_rank2("matmul", b);
  if (a.shape()[1] != b.shape()[0]) {
    throw DimensionError("matmul: inner dimensions differ " + shape_string(a.shape()) + " x " +
                         shape_string(b.shape()));
  }
  Matrix out = a.value() * b.value();
  Shape s{out.rows(), out.cols()};
  return a.graph().record("matmul", std::move(out), std::move(s), {a, b},
                          [a, b](Graph& g, const Matrix& grad, const Matrix&) {
                            if (a.requires_grad()) g.accumulate(a, grad * b.value().transpose());
                            if (b.requires_grad()) g.accumulate(b, a.value().transpose() * grad);
                          });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  require_same_graph(x, weight);
  require_same_graph(x, bias);
  require_rank2("linear", x);
  require_rank2("linear", weight);
  const Matrix& w = weight.value();
  const Matrix& b = bias.value();
  if (x.shape()[1] != w.cols()) {
    throw DimensionError("linear: input " + shape_string(x.shape()) + " does not fit weight " +
                         shape_string(weight.shape()));
  }
  if (b.rows() != 1 || b.cols() != w.rows()) {
    throw DimensionError("linear: bias " + shape_string(bias.shape()) + " does not fit weight " +
                         shape_string(weight.shape()));
  }
  Matrix out = symot::linear(x.value(), w, b);
  Shape s{out.rows(), out.cols()};
  return x.graph().record("linear", std::move(out), std::move(s), {x, weight, bias},
                          [x, weight, bias](Graph& g, const Matrix& grad, const Matrix&) {
                            if (x.requires_grad()) g.accumulate(x, grad * weight.value());
                            if (weight.requires_grad()) g.accumulate(weight, grad.transpose() * x.value());
                            if (bias.requires_grad()) g.accumulate(bias, grad.colwise().sum());
                          });
}

Tensor transpose(const Tensor& a) {
  require_rank2("transpose", a);
  Matrix out = a.value().transpose();
  Shape s{out.rows(), out.cols()};
  return a.graph().record("transpose", std::move(out), std::move(s), {a},
                          [a](Graph& g, const Matrix& grad, const Matrix&) { g.accumulate(a, grad.transpose()); });
}

Tensor operator+(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  return a.graph().record("add", a.value() + b.value(), a.shape(), {a, b},
                          [a, b](Graph& g, const Matrix& grad, const Matrix&) {
                            g.accumulate(a, grad);
                            g.accumulate(b, grad);
                          });
}

Tensor operator-(const Tensor& a, const Tensor& b) {
  require_same_shape("sub", a, b);
  return a.graph().record("sub", a.value() - b.value(), a.shape(), {a, b},
                          [a, b](Graph& g, const Matrix& grad, const Matrix&) {
                            g.accumulate(a, grad);
                            g.accumulate(b, -grad);
                          });
}

Tensor operator-(const Tensor& a) {
  return a.graph().record("neg", -a.value(), a.shape(), {a},
                          [a](Graph& g, const Matrix& grad, const Matrix&) { g.accumulate(a, -grad); });
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  return a.graph().record("mul", a.value().cwiseProduct(b.value()), a.shape(), {a, b},
                          [a, b](Graph& g, const Matrix& grad, const Matrix&) {
                            if (a.requires_grad()) g.accumulate(a, grad.cwiseProduct(b.value()));
                            if (b.requires_grad()) g.accumulate(b, grad.cwiseProduct(a.value()));
                          });
}

Tensor scale(const Tensor& a, double c) {
  return a.graph().record("scale", a.value() * c, a.shape(), {a},
                          [a, c](Graph& g, const Matrix& grad, const Matrix&) { g.accumulate(a, grad * c); });
}

Tensor tanh(const Tensor& a) {
  return a.graph().record("tanh", symot::tanh(a.value()), a.shape(), {a},
                          [a](Graph& g, const Matrix& grad, const Matrix& y) {
                            g.accumulate(a, (grad.array() * (1.0 - y.array().square())).matrix());
                          });
}

Tensor exp(const Tensor& a) {
  return a.graph().record("exp", symot::exp(a.value()), a.shape(), {a},
                          [a](Graph& g, const Matrix& grad, const Matrix& y) { g.accumulate(a, grad.cwiseProduct(y)); });
}

Tensor relu(const Tensor& a) {
  return a.graph().record("relu", symot::relu(a.value()), a.shape(), {a},
                          [a](Graph& g, const Matrix& grad, const Matrix&) {
                            g.accumulate(a, (a.value().array() > 0.0).select(grad, 0.0).matrix());
                          });
}

namespace {

// Shared by sum and mean; `divide` selects the mean's 1/n fan-out.
Tensor reduce(std::string_view op, const Tensor& a, std::optional<int> axis, bool divide) {
  const Shape& s = a.shape();
  const Matrix& v = a.value();
  Graph& graph = a.graph();

  if (!axis) {
    if (v.size() == 0) throw DomainError(std::string(op) + ": reduction over an empty tensor");
    const double n = static_cast<double>(v.size());
    Matrix out(1, 1);
    out(0, 0) = divide ? v.sum() / n : v.sum();
    return graph.record(op, std::move(out), Shape{}, {a}, [a, n, divide](Graph& g, const Matrix& grad, const Matrix&) {
      const double fan = divide ? grad(0, 0) / n : grad(0, 0);
      g.accumulate(a, Matrix::Constant(a.value().rows(), a.value().cols(), fan));
    });
  }

  const int ax = *axis;
  if (ax < 0 || ax >= static_cast<int>(s.size())) {
    throw DomainError(std::string(op) + ": invalid axis " + std::to_string(ax) + " for shape " + shape_string(s));
  }
  if (s[static_cast<std::size_t>(ax)] == 0) throw DomainError(std::string(op) + ": reduction over an empty axis");

  if (s.size() == 1) return reduce(op, a, std::nullopt, divide);

  // Rank 2: axis 0 collapses rows (-> [cols]), axis 1 collapses columns (-> [rows]).
  const double n = static_cast<double>(s[static_cast<std::size_t>(ax)]);
  const double f = divide ? 1.0 / n : 1.0;
  Matrix out = ax == 0 ? Matrix(v.colwise().sum() * f) : Matrix(v.rowwise().sum().transpose() * f);
  Shape out_shape{out.cols()};
  return graph.record(op, std::move(out), std::move(out_shape), {a}, [a, ax, f](Graph& g, const Matrix& grad, const Matrix&) {
    const Index rows = a.value().rows();
    const Index cols = a.value().cols();
    Matrix da(rows, cols);
    if (ax == 0) {
      da = grad.row(0).replicate(rows, 1) * f;
    } else {
      da = grad.row(0).transpose().replicate(1, cols) * f;
    }
    g.accumulate(a, da);
  });
}

}  // namespace

Tensor sum(const Tensor& a, std::optional<int> axis) { return reduce("sum", a, axis, false); }
Tensor mean(const Tensor& a, std::optional<int> axis) { return reduce("mean", a, axis, true); }

Tensor add_row(const Tensor& a, const Tensor& bias) {
  require_same_graph(a, bias);
  require_rank2("add_row", a);
  const Matrix& b = bias.value();
  if (b.rows() != 1 || b.cols() != a.value().cols()) {
    throw DimensionError("add_row: bias " + shape_string(bias.shape()) + " does not fit " + shape_string(a.shape()));
  }
  return a.graph().record("add_row", symot::add_row(a.value(), b), a.shape(), {a, bias},
                          [a, bias](Graph& g, const Matrix& grad, const Matrix&) {
                            g.accumulate(a, grad);
                            if (bias.requires_grad()) g.accumulate(bias, grad.colwise().sum());
                          });
}

Tensor gather_cols(const Tensor& a, std::span<const std::size_t> columns) {
  require_rank2("gather_cols", a);
  const Index cols = a.value().cols();
  for (std::size_t c : columns) {
    if (static_cast<Index>(c) >= cols) throw DimensionError("gather_cols: column index out of range");
  }
  std::vector<std::size_t> idx(columns.begin(), columns.end());
  Matrix out = symot::gather_cols(a.value(), idx);
  Shape s{out.rows(), out.cols()};
  return a.graph().record("gather_cols", std::move(out), std::move(s), {a},
                          [a, idx = std::move(idx)](Graph& g, const Matrix& grad, const Matrix&) {
                            Matrix da = Matrix::Zero(a.value().rows(), a.value().cols());
                            for (std::size_t k = 0; k < idx.size(); ++k) {
                              da.col(static_cast<Index>(idx[k])) += grad.col(static_cast<Index>(k));
                            }
                            g.accumulate(a, da);
                          });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  require_same_graph(a, b);
  require_rank2("concat_cols", a);
  require_rank2("concat_cols", b);
  if (a.value().rows() != b.value().rows()) throw DimensionError("concat_cols: row counts differ");
  Matrix out = symot::concat_cols(a.value(), b.value());
  Shape s{out.rows(), out.cols()};
  const Index split = a.value().cols();
  return a.graph().record("concat_cols", std::move(out), std::move(s), {a, b},
                          [a, b, split](Graph& g, const Matrix& grad, const Matrix&) {
                            if (a.requires_grad()) g.accumulate(a, grad.leftCols(split));
                            if (b.requires_grad()) g.accumulate(b, grad.rightCols(grad.cols() - split));
                          });
}

Tensor pairwise_sqdist(const Tensor& a, const Tensor& b) {
  require_same_graph(a, b);
  require_rank2("pairwise_sqdist", a);
  require_rank2("pairwise_sqdist", b);
  if (a.shape()[1] != b.shape()[1]) {
    throw DimensionError("pairwise_sqdist: feature dimensions differ " + shape_string(a.shape()) + " vs " +
                         shape_string(b.shape()));
  }
  Matrix out = symot::pairwise_sqdist(a.value(), b.value());
  Shape s{out.rows(), out.cols()};
  return a.graph().record("pairwise_sqdist", std::move(out), std::move(s), {a, b},
                          [a, b](Graph& g, const Matrix& grad, const Matrix&) {
                            // d/da_i = 2 sum_j G_ij (a_i - b_j); d/db_j = 2 sum_i G_ij (b_j - a_i)
                            const Matrix& av = a.value();
                            const Matrix& bv = b.value();
                            if (a.requires_grad()) {
                              Matrix da = grad.rowwise().sum().asDiagonal() * av - grad * bv;
                              g.accumulate(a, 2.0 * da);
                            }
                            if (b.requires_grad()) {
                              Matrix db = grad.colwise().sum().transpose().asDiagonal() * bv - grad.transpose() * av;
                              g.accumulate(b, 2.0 * db);
                            }
                          });
}

}  // namespace symot
