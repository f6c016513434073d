#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "symot/flow.hpp"
#include "symot/kernels.hpp"
#include "symot/train.hpp"

namespace symot {

// Transport cost and MMD distance in both flow directions on held-out samples.
struct MetricsReport {
  double ot_fwd = 0.0;   // mean |x - T(x)|^2
  double ot_bwd = 0.0;   // mean |T^-1(z) - z|^2
  double mmd_fwd = 0.0;  // MMD(T(x), z)
  double mmd_bwd = 0.0;  // MMD(x, T^-1(z))
  Index n_test = 0;
  std::string config_hash;

  // |ot_fwd - ot_bwd| / max(ot_fwd, ot_bwd, 1e-9)
  double direction_asymmetry() const;
};

MetricsReport evaluate(const FlowModel& model, const KernelBank& bank, const Matrix& x_test, const Matrix& z_test);

// Rows "src0,src1,dst0,dst1,direction": (x, T(x), fwd) then (T^-1(z), z, bwd).
std::string format_correspondence_csv(const FlowModel& model, const Matrix& x, const Matrix& z);
void export_correspondence(const FlowModel& model, const Matrix& x, const Matrix& z, const std::filesystem::path& path);

struct CorrespondenceRow {
  double src0, src1, dst0, dst1;
  std::string direction;
};
std::vector<CorrespondenceRow> parse_correspondence_csv(std::string_view text);

// Self-contained scatter plot: sources in blue, mapped points in orange,
// green segments joining each pair. Draws at most `max_links` forward pairs.
std::string format_scatter_svg(const FlowModel& model, const Matrix& x, const Matrix& z, std::size_t max_links = 400);
void write_scatter_svg(const FlowModel& model, const Matrix& x, const Matrix& z, const std::filesystem::path& path);

// Metrics CSV: "dataset,method,beta,ot_fwd,ot_bwd,mmd_fwd,mmd_bwd,seed".
struct MetricsRow {
  std::string dataset;
  std::string method;
  double beta = 0.0;
  MetricsReport report;
  std::uint64_t seed = 0;
};
std::string format_metrics_csv(const std::vector<MetricsRow>& rows);

struct SweepData {
  Matrix x_train;
  Matrix z_train;
  Matrix x_test;
  Matrix z_test;
};

struct SweepRow {
  double beta = 0.0;
  MetricsReport report;
  std::string error;  // empty on success

  bool ok() const { return error.empty(); }
};

// Trains one model per beta with everything else taken from `base`. Results
// are returned in input order; a failing beta records its error and the
// remaining points still run. `threads` > 1 runs points concurrently.
std::vector<SweepRow> sweep_beta(const TrainConfig& base, const std::vector<double>& betas, const SweepData& data,
                                 std::size_t threads = 1);

// Sweep table CSV: "beta,ot,mmd" using the forward-direction metrics.
std::string format_sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace symot
