#include "symot/kernels.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "symot/random.hpp"

namespace symot {

KernelBank::KernelBank(std::vector<double> bandwidths, std::vector<double> weights)
    : bandwidths_(std::move(bandwidths)), weights_(std::move(weights)) {
  if (bandwidths_.empty()) throw DomainError("KernelBank: at least one kernel is required");
  if (bandwidths_.size() != weights_.size()) throw DimensionError("KernelBank: bandwidth/weight count mismatch");
  for (double s : bandwidths_) {
    if (!(s > 0.0) || !std::isfinite(s)) throw DomainError("KernelBank: bandwidth must be positive, got " + std::to_string(s));
  }
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw DomainError("KernelBank: weights must be nonnegative");
  }
  const double total = std::accumulate(weights_.begin(), weights_.end(), 0.0);
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("KernelBank: weights must sum to 1");
}

KernelBank::KernelBank(std::vector<double> bandwidths)
    : KernelBank(bandwidths, std::vector<double>(bandwidths.size(), bandwidths.empty() ? 0.0 : 1.0 / bandwidths.size())) {}

KernelBank default_bank(double median, const std::vector<double>& scales) {
  std::vector<double> bw;
  bw.reserve(scales.size());
  for (double s : scales) bw.push_back(median * s);
  return KernelBank(std::move(bw));
}

double median_heuristic(const Matrix& a, const Matrix& b, std::uint64_t seed) {
  if (a.rows() + b.rows() < 2) throw DomainError("median_heuristic: need at least two pooled points");
  if (a.rows() > 0 && b.rows() > 0 && a.cols() != b.cols()) throw DimensionError("median_heuristic: feature dimensions differ");

  Matrix pooled(a.rows() + b.rows(), a.rows() > 0 ? a.cols() : b.cols());
  if (a.rows() > 0) pooled.topRows(a.rows()) = a;
  if (b.rows() > 0) pooled.bottomRows(b.rows()) = b;

  if (pooled.rows() > kMedianPoolLimit) {
    Rng rng(seed);
    std::vector<std::size_t> order = rng.permutation(static_cast<std::size_t>(pooled.rows()));
    order.resize(static_cast<std::size_t>(kMedianPoolLimit));
    std::sort(order.begin(), order.end());
    Matrix sub(kMedianPoolLimit, pooled.cols());
    for (std::size_t k = 0; k < order.size(); ++k) sub.row(static_cast<Index>(k)) = pooled.row(static_cast<Index>(order[k]));
    pooled = std::move(sub);
  }

  const Matrix d = pairwise_sqdist(pooled, pooled);
  const Index n = pooled.rows();
  std::vector<double> upper;
  upper.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
  for (Index i = 0; i < n; ++i) {
    for (Index j = i + 1; j < n; ++j) upper.push_back(d(i, j));
  }
  const std::size_t mid = upper.size() / 2;
  std::nth_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid), upper.end());
  double median = upper[mid];
  if (upper.size() % 2 == 0) {
    const double lower = *std::max_element(upper.begin(), upper.begin() + static_cast<std::ptrdiff_t>(mid));
    median = 0.5 * (median + lower);
  }
  return median > 0.0 ? median : 1.0;
}

Tensor gram(const KernelBank& bank, const Tensor& a, const Tensor& b) {
  const Tensor d = pairwise_sqdist(a, b);
  Matrix k = gaussian_mix(bank, d.value());
  Shape s = d.shape();
  return d.graph().record("gram", std::move(k), std::move(s), {d}, [d, bank](Graph& g, const Matrix& grad, const Matrix&) {
    // dk/dD = sum_l w_l * (-1 / (2 sigma2_l)) * exp(-D / (2 sigma2_l))
    Matrix dk = Matrix::Zero(grad.rows(), grad.cols());
    for (std::size_t l = 0; l < bank.size(); ++l) {
      const double c = -0.5 / bank.bandwidths()[l];
      dk.array() += bank.weights()[l] * c * (d.value().array() * c).exp();
    }
    g.accumulate(d, grad.cwiseProduct(dk));
  });
}

Tensor mmd2_biased(const KernelBank& bank, const Tensor& x, const Tensor& z) {
  if (x.rank() != 2 || z.rank() != 2) throw DimensionError("mmd2_biased: expected rank-2 sample sets");
  if (x.shape()[0] == 0 || z.shape()[0] == 0) throw DomainError("mmd2_biased: empty sample set");
  return mean(gram(bank, x, x)) + mean(gram(bank, z, z)) - 2.0 * mean(gram(bank, x, z));
}

Tensor mmd2_paper_form(const KernelBank& bank, const Tensor& x, const Tensor& z) {
  if (x.rank() != 2 || z.rank() != 2) throw DimensionError("mmd2_paper_form: expected rank-2 sample sets");
  if (x.shape()[0] == 0 || z.shape()[0] == 0) throw DomainError("mmd2_paper_form: empty sample set");
  if (x.shape()[0] != z.shape()[0]) throw DimensionError("mmd2_paper_form: sample sets must have equal size");
  const double n = static_cast<double>(x.shape()[0]);
  return scale(sum(gram(bank, x, x) + gram(bank, z, z) - 2.0 * gram(bank, x, z)), 1.0 / (n * n));
}

}  // namespace symot
