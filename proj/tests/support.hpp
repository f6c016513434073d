#pragma once

// Independent reference computations for the tests. Everything here is
// written with plain loops over scalars so it shares no code path with the
// vectorized library routines it checks.

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "symot/flow.hpp"
#include "symot/kernels.hpp"
#include "symot/random.hpp"

namespace symot::testing {

inline Matrix random_matrix(Rng& rng, Index rows, Index cols, double lo = -1.0, double hi = 1.0) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline double naive_kernel(const KernelBank& bank, const Matrix& a, Index i, const Matrix& b, Index j) {
  double d2 = 0.0;
  for (Index c = 0; c < a.cols(); ++c) {
    const double diff = a(i, c) - b(j, c);
    d2 += diff * diff;
  }
  double k = 0.0;
  for (std::size_t l = 0; l < bank.size(); ++l) k += bank.weights()[l] * std::exp(-d2 / (2.0 * bank.bandwidths()[l]));
  return k;
}

inline double naive_mmd2(const KernelBank& bank, const Matrix& x, const Matrix& z) {
  double xx = 0.0, zz = 0.0, xz = 0.0;
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < x.rows(); ++j) xx += naive_kernel(bank, x, i, x, j);
  for (Index i = 0; i < z.rows(); ++i)
    for (Index j = 0; j < z.rows(); ++j) zz += naive_kernel(bank, z, i, z, j);
  for (Index i = 0; i < x.rows(); ++i)
    for (Index j = 0; j < z.rows(); ++j) xz += naive_kernel(bank, x, i, z, j);
  const double n = static_cast<double>(x.rows());
  const double m = static_cast<double>(z.rows());
  return xx / (n * n) + zz / (m * m) - 2.0 * xz / (n * m);
}

inline double naive_ot(const Matrix& a, const Matrix& b) {
  double total = 0.0;
  for (Index i = 0; i < a.rows(); ++i)
    for (Index c = 0; c < a.cols(); ++c) total += (a(i, c) - b(i, c)) * (a(i, c) - b(i, c));
  return total / static_cast<double>(a.rows());
}

// Fills every parameter with N(0, scale^2) so no gradient path is dead.
inline void randomize(FlowModel& model, std::uint64_t seed, double scale) {
  Rng rng(seed);
  for (Parameter* p : model.parameters())
    for (Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = scale * rng.normal();
}

struct GradientCheck {
  double max_rel = 0.0;        // over entries with |analytic| >= small
  double max_abs_small = 0.0;  // over entries with |analytic| < small
  double max_abs = 0.0;
  std::size_t checked = 0;

  bool within(double rel_tol, double abs_tol) const { return max_rel < rel_tol && max_abs_small < abs_tol; }
};

// Central differences of `f` against the gradients stored in each
// parameter's grad buffer. Entries whose analytic gradient is below `small`
// are judged by absolute error, the rest by error / max(|analytic|, |numeric|).
inline GradientCheck check_gradients(std::span<Parameter* const> params, const std::function<double()>& f, double h,
                                     double small = 1e-3) {
  GradientCheck out;
  for (Parameter* p : params) {
    for (Index i = 0; i < p->value.size(); ++i) {
      double& v = p->value.data()[i];
      const double saved = v;
      v = saved + h;
      const double up = f();
      v = saved - h;
      const double down = f();
      v = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad.data()[i];
      const double err = std::abs(numeric - analytic);
      out.max_abs = std::max(out.max_abs, err);
      if (std::abs(analytic) < small) {
        out.max_abs_small = std::max(out.max_abs_small, err);
      } else {
        out.max_rel = std::max(out.max_rel, err / std::max(std::abs(numeric), std::abs(analytic)));
      }
      ++out.checked;
    }
  }
  return out;
}

}  // namespace symot::testing
