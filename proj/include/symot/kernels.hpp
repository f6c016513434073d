#pragma once

// Gaussian multi-kernel MMD estimators.
//
// Every estimator exists twice: a template over Eigen dense expressions for
// evaluation, and a Tensor overload that records onto a Graph for training.

#include <cmath>
#include <cstdint>
#include <vector>

#include "symot/dense.hpp"
#include "symot/errors.hpp"
#include "symot/tensor.hpp"

namespace symot {

// Convex combination of Gaussian kernels k(a, b) = sum_l w_l exp(-|a-b|^2 / (2 sigma2_l)).
class KernelBank {
 public:
  KernelBank(std::vector<double> bandwidths, std::vector<double> weights);

  // Equal weights over `bandwidths`.
  explicit KernelBank(std::vector<double> bandwidths);

  const std::vector<double>& bandwidths() const { return bandwidths_; }
  const std::vector<double>& weights() const { return weights_; }
  std::size_t size() const { return bandwidths_.size(); }

 private:
  std::vector<double> bandwidths_;
  std::vector<double> weights_;
};

// Multipliers applied to the median heuristic by default_bank().
inline const std::vector<double> kDefaultKernelScales{0.25, 0.5, 1.0, 2.0, 4.0};

// Bank with sigma2 = median * scale for each scale, equal weights.
KernelBank default_bank(double median, const std::vector<double>& scales = kDefaultKernelScales);

// Median of pairwise squared distances between distinct points of the pooled
// set {a, b}. Pools larger than kMedianPoolLimit are subsampled with `seed`.
// Returns 1.0 when the median is not positive.
inline constexpr Index kMedianPoolLimit = 2000;
double median_heuristic(const Matrix& a, const Matrix& b, std::uint64_t seed = 0);

// Gaussian mixture applied entrywise to a squared-distance matrix.
template <class D>
MatrixX<typename D::Scalar> gaussian_mix(const KernelBank& bank, const Eigen::MatrixBase<D>& sqdist) {
  using Scalar = typename D::Scalar;
  MatrixX<Scalar> k = MatrixX<Scalar>::Zero(sqdist.rows(), sqdist.cols());
  for (std::size_t l = 0; l < bank.size(); ++l) {
    const Scalar c = Scalar(-0.5 / bank.bandwidths()[l]);
    k.array() += Scalar(bank.weights()[l]) * (sqdist.array() * c).exp();
  }
  return k;
}

template <class A, class B>
MatrixX<typename A::Scalar> gram(const KernelBank& bank, const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  if (a.cols() != b.cols()) throw DimensionError("gram: feature dimensions differ");
  return gaussian_mix(bank, pairwise_sqdist(a, b));
}

// Biased (V-statistic) squared MMD with full double sums.
template <class A, class B>
typename A::Scalar mmd2_biased(const KernelBank& bank, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z) {
  if (x.rows() == 0 || z.rows() == 0) throw DomainError("mmd2_biased: empty sample set");
  if (x.cols() != z.cols()) throw DimensionError("mmd2_biased: feature dimensions differ");
  return gram(bank, x, x).mean() + gram(bank, z, z).mean() - 2 * gram(bank, x, z).mean();
}

// Equal-size form: (1/N^2) sum_n sum_n' [k(x_n,x_n') + k(z_n,z_n') - 2 k(x_n,z_n')].
template <class A, class B>
typename A::Scalar mmd2_paper_form(const KernelBank& bank, const Eigen::MatrixBase<A>& x,
                                   const Eigen::MatrixBase<B>& z) {
  if (x.rows() == 0 || z.rows() == 0) throw DomainError("mmd2_paper_form: empty sample set");
  if (x.rows() != z.rows()) throw DimensionError("mmd2_paper_form: sample sets must have equal size");
  if (x.cols() != z.cols()) throw DimensionError("mmd2_paper_form: feature dimensions differ");
  const auto n = static_cast<typename A::Scalar>(x.rows());
  const auto total = (gram(bank, x, x) + gram(bank, z, z) - 2 * gram(bank, x, z)).sum();
  return total / (n * n);
}

// sqrt(max(mmd2_biased, 0)).
template <class A, class B>
typename A::Scalar mmd_distance(const KernelBank& bank, const Eigen::MatrixBase<A>& x, const Eigen::MatrixBase<B>& z) {
  using std::sqrt;
  const auto m2 = mmd2_biased(bank, x, z);
  return sqrt(m2 > 0 ? m2 : typename A::Scalar(0));
}

// --- recorded versions -----------------------------------------------------

Tensor gram(const KernelBank& bank, const Tensor& a, const Tensor& b);
Tensor mmd2_biased(const KernelBank& bank, const Tensor& x, const Tensor& z);
Tensor mmd2_paper_form(const KernelBank& bank, const Tensor& x, const Tensor& z);

}  // namespace symot
