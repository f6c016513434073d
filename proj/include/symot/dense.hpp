#pragma once

// Dense, graph-free building blocks. Every function here has a Tensor
// counterpart in tensor.hpp with the same name, so model code can be written
// once and evaluated either with or without gradient recording.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <vector>

namespace symot {

template <class Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;
using Index = Eigen::Index;

template <class A, class B>
MatrixX<typename A::Scalar> matmul(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a * b;
}

template <class A>
MatrixX<typename A::Scalar> transpose(const Eigen::MatrixBase<A>& a) {
  return a.transpose();
}

// x W^T + b with W [out x in] and b [1 x out].
template <class X, class W, class B>
MatrixX<typename X::Scalar> linear(const Eigen::MatrixBase<X>& x, const Eigen::MatrixBase<W>& weight,
                                   const Eigen::MatrixBase<B>& bias) {
  MatrixX<typename X::Scalar> out(x.rows(), weight.rows());
  out.rowwise() = bias.row(0);
  out.noalias() += x * weight.transpose();
  return out;
}

template <class A, class B>
MatrixX<typename A::Scalar> hadamard(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  return a.cwiseProduct(b);
}

template <class A>
MatrixX<typename A::Scalar> scale(const Eigen::MatrixBase<A>& a, typename A::Scalar c) {
  return a * c;
}

template <class A>
MatrixX<typename A::Scalar> tanh(const Eigen::MatrixBase<A>& a) {
  return a.array().tanh().matrix();
}

template <class A>
MatrixX<typename A::Scalar> exp(const Eigen::MatrixBase<A>& a) {
  return a.array().exp().matrix();
}

template <class A>
MatrixX<typename A::Scalar> relu(const Eigen::MatrixBase<A>& a) {
  return a.cwiseMax(typename A::Scalar(0));
}

// Adds the row vector `bias` (1 x k) to every row of `a` (n x k).
template <class A, class B>
MatrixX<typename A::Scalar> add_row(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& bias) {
  MatrixX<typename A::Scalar> out = a;
  out.rowwise() += bias.row(0);
  return out;
}

// out(:, k) = a(:, columns[k]).
template <class A>
MatrixX<typename A::Scalar> gather_cols(const Eigen::MatrixBase<A>& a, std::span<const std::size_t> columns) {
  MatrixX<typename A::Scalar> out(a.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    out.col(static_cast<Index>(k)) = a.col(static_cast<Index>(columns[k]));
  }
  return out;
}

template <class A, class B>
MatrixX<typename A::Scalar> concat_cols(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  MatrixX<typename A::Scalar> out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

// Entry (i, j) = |a_i - b_j|^2 via the expansion |a|^2 + |b|^2 - 2 a.b,
// clamped at zero against cancellation.
template <class A, class B>
MatrixX<typename A::Scalar> pairwise_sqdist(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  using Scalar = typename A::Scalar;
  // eval() is free for plain matrices and keeps expression inputs out of the product kernel.
  const auto& ae = a.eval();
  const auto& be = b.eval();
  const VectorX<Scalar> a_norm = ae.rowwise().squaredNorm();
  const VectorX<Scalar> b_norm = be.rowwise().squaredNorm();
  MatrixX<Scalar> d = Scalar(-2) * (ae * be.transpose());
  d.colwise() += a_norm;
  d.rowwise() += b_norm.transpose();
  return d.cwiseMax(Scalar(0));
}

}  // namespace symot
