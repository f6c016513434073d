#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "symot/flow.hpp"
#include "symot/kernels.hpp"
#include "symot/loss.hpp"

namespace symot {

struct TrainConfig {
  double beta = 3e-2;
  bool symmetric = true;
  std::size_t epochs = 500;
  Index batch_size = 200;
  double lr = 1e-3;
  double weight_decay = 1e-5;
  std::uint64_t seed = 0;
  std::size_t blocks = 8;
  Index subnet_width = 128;
  std::size_t hidden_layers = 2;
  double gamma = 2.0;
  std::vector<double> kernel_scales = kDefaultKernelScales;
  std::optional<double> grad_clip;

  FlowShape flow_shape(Index dim) const { return {dim, blocks, subnet_width, hidden_layers, gamma}; }

  // Throws ConfigError when the config cannot train on sets of these sizes.
  void validate(Index n_x, Index n_z) const;
};

struct AdamWOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

struct OptimizerState {
  std::vector<Matrix> first_moment;
  std::vector<Matrix> second_moment;
  std::uint64_t step = 0;
};

// One AdamW update with decoupled weight decay, reading gradients from each
// Parameter's grad buffer:
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
//   theta <- theta - lr (m_hat / (sqrt(v_hat) + eps) + weight_decay theta)
// A non-finite gradient rejects the whole step (NumericError, nothing changed).
void adamw_step(std::span<Parameter* const> params, OptimizerState& state, const AdamWOptions& options);

// Rescales all gradients so their joint L2 norm is at most max_norm.
// Returns the norm before clipping.
double clip_grad_norm(std::span<Parameter* const> params, double max_norm);

struct TrainResult {
  FlowModel model;
  KernelBank bank;
  std::vector<LossBreakdown> trace;  // per-epoch batch averages
};

using EpochCallback = std::function<void(std::size_t epoch, const FlowModel&, const LossBreakdown&)>;

// Kernel bandwidths for a run: median heuristic on the full training pools,
// times config.kernel_scales, frozen for the run.
KernelBank training_bank(const Matrix& x_data, const Matrix& z_data, const TrainConfig& config);

// Deterministic mini-batch training. Each epoch shuffles both sets
// independently, truncates to the shorter one and visits full batch pairs.
// A non-finite loss aborts with a NumericError naming the step.
TrainResult train(const Matrix& x_data, const Matrix& z_data, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace symot
