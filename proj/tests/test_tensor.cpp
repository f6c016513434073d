#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "symot/errors.hpp"
#include "symot/tensor.hpp"

using namespace symot;
using symot::testing::random_matrix;

namespace {

Matrix mat(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Index>(rows.size()), static_cast<Index>(rows.begin()->size()));
  Index i = 0;
  for (const auto& r : rows) {
    Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

// Central-difference gradient of a scalar function of one matrix.
Matrix numeric_grad(const std::function<double(const Matrix&)>& f, Matrix x, double h = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + h;
    const double up = f(x);
    x.data()[i] = saved - h;
    const double down = f(x);
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * h);
  }
  return g;
}

double max_rel(const Matrix& a, const Matrix& b) {
  return ((a - b).array().abs() / a.array().abs().max(b.array().abs()).max(1e-12)).maxCoeff();
}

}  // namespace

TEST(Matmul, IdentityTimesMatrix) {
  Graph g;
  const Tensor y = matmul(g.constant(mat({{1, 0}, {0, 1}})), g.constant(mat({{3, 4}, {5, 6}})));
  EXPECT_EQ(y.value(), mat({{3, 4}, {5, 6}}));
}

TEST(Matmul, RowTimesColumn) {
  Graph g;
  const Tensor y = matmul(g.constant(mat({{1, 2}})), g.constant(mat({{3}, {4}})));
  EXPECT_EQ(y.shape(), (Shape{1, 1}));
  EXPECT_DOUBLE_EQ(y.item(), 11.0);
}

TEST(Matmul, InnerDimensionMismatchThrows) {
  Graph g;
  EXPECT_THROW(matmul(g.constant(Matrix::Ones(2, 3)), g.constant(Matrix::Ones(2, 3))), DimensionError);
}

TEST(Matmul, GradientOfSumIsOnesTimesBTranspose) {
  Rng rng(1);
  const Matrix a = random_matrix(rng, 3, 4);
  const Matrix b = random_matrix(rng, 4, 2);
  Graph g;
  const Tensor ta = g.variable(a);
  g.backward(sum(matmul(ta, g.constant(b))));
  const Matrix expected = Matrix::Ones(3, 2) * b.transpose();
  EXPECT_LT(max_rel(ta.grad(), expected), 1e-12);
  const Matrix fd = numeric_grad([&](const Matrix& m) { return (m * b).sum(); }, a);
  EXPECT_LT(max_rel(ta.grad(), fd), 1e-6);
}

TEST(Elementwise, TanhAndExpAtZero) {
  Graph g;
  const Tensor z = g.constant(Matrix::Zero(1, 1));
  EXPECT_EQ(tanh(z).item(), 0.0);
  EXPECT_EQ(exp(z).item(), 1.0);
}

TEST(Elementwise, XTimesExpXAtOne) {
  Graph g;
  const Tensor x = g.variable(Matrix::Ones(1, 1));
  g.backward(hadamard(x, exp(x)));
  EXPECT_NEAR(x.grad()(0, 0), 2.0 * std::exp(1.0), 1e-12);
  EXPECT_NEAR(x.grad()(0, 0), 5.43656, 1e-5);
  const Matrix fd = numeric_grad([](const Matrix& m) { return m(0, 0) * std::exp(m(0, 0)); }, Matrix::Ones(1, 1));
  EXPECT_LT(max_rel(x.grad(), fd), 1e-6);
}

TEST(Elementwise, ShapeMismatchThrows) {
  Graph g;
  EXPECT_THROW(g.constant(Matrix::Ones(2, 2)) + g.constant(Matrix::Ones(2, 3)), DimensionError);
  EXPECT_THROW(hadamard(g.constant(Matrix::Ones(1, 2)), g.constant(Matrix::Ones(2, 1))), DimensionError);
}

TEST(Elementwise, NonFiniteResultThrows) {
  Graph g;
  EXPECT_THROW(exp(g.constant(Matrix::Constant(1, 1, 1000.0))), NumericError);
}

TEST(Elementwise, GradientsMatchFiniteDifferences) {
  Rng rng(2);
  const Matrix a = random_matrix(rng, 3, 3);
  const Matrix b = random_matrix(rng, 3, 3);
  auto f = [&](const Matrix& m) {
    double s = 0;
    for (Index i = 0; i < m.size(); ++i) {
      const double u = std::tanh(m.data()[i]) * b.data()[i] - m.data()[i];
      s += std::max(u, 0.0) + 0.5 * std::exp(-m.data()[i]);
    }
    return s;
  };
  Graph g;
  const Tensor x = g.variable(a);
  const Tensor u = hadamard(tanh(x), g.constant(b)) - x;
  g.backward(sum(relu(u) + scale(exp(-x), 0.5)));
  EXPECT_LT(max_rel(x.grad(), numeric_grad(f, a)), 1e-6);
}

TEST(Reduce, MeanOfThree) {
  Graph g;
  EXPECT_DOUBLE_EQ(mean(g.constant(mat({{2, 4, 6}}), Shape{3})).item(), 4.0);
}

TEST(Reduce, MeanGradientIsUniform) {
  Graph g;
  const Tensor x = g.variable(mat({{1, 2, 3, 4, 5}}), Shape{5});
  g.backward(mean(x));
  for (Index i = 0; i < 5; ++i) EXPECT_DOUBLE_EQ(x.grad()(0, i), 0.2);
}

TEST(Reduce, AxisReductions) {
  Graph g;
  const Tensor x = g.variable(mat({{1, 2, 3}, {4, 5, 6}}));
  const Tensor rows = sum(x, 1);
  const Tensor cols = mean(x, 0);
  EXPECT_EQ(rows.shape(), (Shape{2}));
  EXPECT_EQ(rows.value(), mat({{6, 15}}));
  EXPECT_EQ(cols.value(), mat({{2.5, 3.5, 4.5}}));
  g.backward(sum(hadamard(rows, rows)));
  // d/dx_ij of sum_i (sum_j x_ij)^2 = 2 * rowsum_i
  EXPECT_EQ(x.grad(), mat({{12, 12, 12}, {30, 30, 30}}));
}

TEST(Reduce, EmptyAndInvalidAxesThrow) {
  Graph g;
  const Tensor empty = g.constant(Matrix(0, 3), Shape{0, 3});
  EXPECT_THROW(sum(empty, 0), DomainError);
  EXPECT_THROW(sum(empty), DomainError);
  EXPECT_THROW(sum(g.constant(Matrix::Ones(2, 2)), 2), DomainError);
  EXPECT_THROW(mean(g.constant(Matrix::Ones(2, 2)), -1), DomainError);
}

TEST(PairwiseSqdist, ZeroAndThreeFourFive) {
  Graph g;
  EXPECT_EQ(pairwise_sqdist(g.constant(mat({{0, 0}})), g.constant(mat({{0, 0}}))).item(), 0.0);
  EXPECT_DOUBLE_EQ(pairwise_sqdist(g.constant(mat({{0, 0}})), g.constant(mat({{3, 4}}))).item(), 25.0);
}

TEST(PairwiseSqdist, MatchesDoubleLoop) {
  Rng rng(3);
  const Matrix a = random_matrix(rng, 4, 2, -3, 3);
  const Matrix b = random_matrix(rng, 3, 2, -3, 3);
  Graph g;
  const Matrix d = pairwise_sqdist(g.constant(a), g.constant(b)).value();
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 3; ++j) {
      double ref = 0;
      for (Index c = 0; c < 2; ++c) ref += (a(i, c) - b(j, c)) * (a(i, c) - b(j, c));
      EXPECT_NEAR(d(i, j), ref, 1e-12);
    }
  }
}

TEST(PairwiseSqdist, GradientMatchesFiniteDifferences) {
  Rng rng(4);
  const Matrix a = random_matrix(rng, 4, 2, -2, 2);
  const Matrix b = random_matrix(rng, 3, 2, -2, 2);
  const Matrix w = random_matrix(rng, 4, 3);
  Graph g;
  const Tensor ta = g.variable(a);
  const Tensor tb = g.variable(b);
  g.backward(sum(hadamard(pairwise_sqdist(ta, tb), g.constant(w))));
  auto f = [&](const Matrix& am, const Matrix& bm) {
    double s = 0;
    for (Index i = 0; i < 4; ++i)
      for (Index j = 0; j < 3; ++j) s += w(i, j) * (am.row(i) - bm.row(j)).squaredNorm();
    return s;
  };
  EXPECT_LT(max_rel(ta.grad(), numeric_grad([&](const Matrix& m) { return f(m, b); }, a)), 1e-6);
  EXPECT_LT(max_rel(tb.grad(), numeric_grad([&](const Matrix& m) { return f(a, m); }, b)), 1e-6);
}

TEST(Linear, MatchesComposedOps) {
  Rng rng(5);
  const Matrix x = random_matrix(rng, 5, 3);
  Parameter w(random_matrix(rng, 4, 3));
  Parameter b(random_matrix(rng, 1, 4));
  Graph g;
  const Tensor tx = g.variable(x);
  const Tensor y = linear(tx, g.parameter(w), g.parameter(b));
  const Matrix ref = add_row(matmul(x, transpose(w.value)), b.value);
  EXPECT_LT((y.value() - ref).cwiseAbs().maxCoeff(), 1e-14);

  const Matrix c = random_matrix(rng, 5, 4);
  g.backward(sum(hadamard(y, g.constant(c))));
  EXPECT_LT(max_rel(tx.grad(), c * w.value), 1e-12);
  EXPECT_LT(max_rel(w.grad, c.transpose() * x), 1e-12);
  EXPECT_LT(max_rel(b.grad, c.colwise().sum()), 1e-12);
}

TEST(Backward, SumOfVector) {
  Graph g;
  const Tensor x = g.variable(mat({{1, 2, 3}}), Shape{3});
  g.backward(sum(x));
  EXPECT_EQ(x.grad(), mat({{1, 1, 1}}));
}

TEST(Backward, SumOfSquares) {
  Graph g;
  const Tensor x = g.variable(mat({{1, 2}}), Shape{2});
  g.backward(sum(hadamard(x, x)));
  EXPECT_EQ(x.grad(), mat({{2, 4}}));
}

TEST(Backward, SharedSubexpressionAccumulates) {
  // y = u + u with u = x * x: dy/dx = 4x.
  Graph g;
  const Tensor x = g.variable(mat({{3}}));
  const Tensor u = hadamard(x, x);
  g.backward(u + u);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 12.0);
}

TEST(Backward, LeafGradientsAccumulateAcrossCalls) {
  Graph g;
  const Tensor x = g.variable(mat({{2}}));
  const Tensor y = scale(x, 3.0);
  g.backward(y);
  g.backward(y);
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 6.0);
  g.zero_grad();
  EXPECT_DOUBLE_EQ(x.grad()(0, 0), 0.0);
}

TEST(Backward, ParameterGradientsLandInParameter) {
  Parameter p(mat({{1, 2}}));
  Graph g;
  g.backward(sum(hadamard(g.parameter(p), g.parameter(p))));
  EXPECT_EQ(p.grad, mat({{2, 4}}));
}

TEST(Backward, NonScalarRootThrows) {
  Graph g;
  const Tensor x = g.variable(Matrix::Ones(2, 2));
  EXPECT_THROW(g.backward(scale(x, 2.0)), DimensionError);
}

TEST(Backward, ConstantsReceiveNoGradient) {
  Graph g;
  const Tensor c = g.constant(mat({{1, 2}}));
  const Tensor x = g.variable(mat({{3, 4}}));
  g.backward(sum(hadamard(c, x)));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_EQ(x.grad(), mat({{1, 2}}));
}

TEST(Graph, TensorsFromAnotherGraphAreRejected) {
  Graph g1, g2;
  const Tensor a = g1.constant(Matrix::Ones(1, 1));
  const Tensor b = g2.constant(Matrix::Ones(1, 1));
  EXPECT_THROW(a + b, DomainError);
}

TEST(GatherConcat, RoundTripGradient) {
  Graph g;
  const Tensor x = g.variable(mat({{1, 2, 3}}));
  const std::vector<std::size_t> cols{2, 0};
  const Tensor y = concat_cols(gather_cols(x, cols), gather_cols(x, std::vector<std::size_t>{0}));
  EXPECT_EQ(y.value(), mat({{3, 1, 1}}));
  g.backward(sum(hadamard(y, g.constant(mat({{10, 20, 30}})))));
  EXPECT_EQ(x.grad(), mat({{50, 0, 10}}));
}
