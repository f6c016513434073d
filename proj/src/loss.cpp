#include "symot/loss.hpp"

#include <cmath>

namespace symot {

Tensor ot_cost(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) throw DimensionError("ot_cost: shapes differ");
  if (a.rank() != 2 || a.shape()[0] == 0) throw DomainError("ot_cost: expected a nonempty [n x d] array");
  const Tensor diff = a - b;
  return mean(sum(hadamard(diff, diff), 1));
}

std::pair<Tensor, LossBreakdown> symot_loss(Graph& graph, FlowModel& model, const KernelBank& bank, const Matrix& x_batch,
                                            const Matrix& z_batch, double beta, bool symmetric) {
  if (x_batch.rows() != z_batch.rows()) throw DimensionError("symot_loss: batch sizes differ");
  if (x_batch.rows() == 0) throw DomainError("symot_loss: empty batch");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw DomainError("symot_loss: beta must be finite and nonnegative");

  const Tensor x = graph.constant(x_batch);
  const Tensor z = graph.constant(z_batch);
  const double const_xx = gram(bank, x_batch, x_batch).mean();
  const double const_zz = gram(bank, z_batch, z_batch).mean();

  LossBreakdown out;
  out.beta = beta;

  // Forward direction: T(x) against z. mean k(z, z') is constant in theta.
  const Tensor tx = forward(model, x);
  const Tensor mmd_fwd_var = mean(gram(bank, tx, tx)) - 2.0 * mean(gram(bank, tx, z));
  const Tensor ot_fwd = ot_cost(x, tx);
  Tensor objective = mmd_fwd_var + beta * ot_fwd;
  out.mmd_fwd = mmd_fwd_var.item() + const_zz;
  out.ot_fwd = ot_fwd.item();

  if (symmetric) {
    // Backward direction: x against T^-1(z). mean k(x, x') is constant in theta.
    const Tensor tz = inverse(model, z);
    const Tensor mmd_bwd_var = mean(gram(bank, tz, tz)) - 2.0 * mean(gram(bank, x, tz));
    const Tensor ot_bwd = ot_cost(tz, z);
    objective = objective + mmd_bwd_var + beta * ot_bwd;
    out.mmd_bwd = mmd_bwd_var.item() + const_xx;
    out.ot_bwd = ot_bwd.item();
  }

  out.objective = objective.item();
  out.total = out.mmd_fwd + out.mmd_bwd + beta * (out.ot_fwd + out.ot_bwd);
  if (!std::isfinite(out.total)) throw NumericError("symot_loss: non-finite loss");
  return {objective, out};
}

double d_mmd(const FlowModel& model, const KernelBank& bank, const Matrix& x, const Matrix& z) {
  return mmd_distance(bank, forward(model, x), z) + mmd_distance(bank, x, inverse(model, z));
}

}  // namespace symot
