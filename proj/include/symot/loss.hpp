#pragma once

#include <utility>

#include "symot/dense.hpp"
#include "symot/errors.hpp"
#include "symot/flow.hpp"
#include "symot/kernels.hpp"
#include "symot/tensor.hpp"

namespace symot {

// Components of one evaluation of the training objective. MMD entries are
// full squared estimates; `objective` is what the optimizer minimizes, which
// omits the two kernel means that do not depend on the flow parameters.
struct LossBreakdown {
  double mmd_fwd = 0.0;  // MMD^2(T(x), z)
  double mmd_bwd = 0.0;  // MMD^2(x, T^-1(z)); 0 when the loss is one-directional
  double ot_fwd = 0.0;   // mean |x - T(x)|^2
  double ot_bwd = 0.0;   // mean |T^-1(z) - z|^2; 0 when one-directional
  double beta = 0.0;
  double total = 0.0;      // mmd_fwd + mmd_bwd + beta * (ot_fwd + ot_bwd)
  double objective = 0.0;  // total minus the parameter-independent kernel means
};

// Mean squared Euclidean distance between paired rows.
template <class A, class B>
typename A::Scalar ot_cost(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw DimensionError("ot_cost: shapes differ");
  if (a.rows() == 0) throw DomainError("ot_cost: empty input");
  return (a - b).rowwise().squaredNorm().mean();
}

Tensor ot_cost(const Tensor& a, const Tensor& b);

// Symmetric OT-regularized MMD loss for one batch pair:
//   MMD^2(T(x), z) + MMD^2(x, T^-1(z)) + beta * (OT(x, T(x)) + OT(T^-1(z), z))
// With symmetric = false only the forward terms are kept. The returned tensor
// is the optimizer objective; its gradient equals that of `total`.
std::pair<Tensor, LossBreakdown> symot_loss(Graph& graph, FlowModel& model, const KernelBank& bank, const Matrix& x_batch,
                                            const Matrix& z_batch, double beta, bool symmetric);

// MMD(T(x), z) + MMD(x, T^-1(z)) as distances (square roots).
double d_mmd(const FlowModel& model, const KernelBank& bank, const Matrix& x, const Matrix& z);

}  // namespace symot
