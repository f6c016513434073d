#include "symot/train.hpp"

#include <cmath>
#include <string>

#include "symot/errors.hpp"
#include "symot/random.hpp"

namespace symot {

void TrainConfig::validate(Index n_x, Index n_z) const {
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be finite and nonnegative");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be nonnegative");
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("train.beta must be finite and nonnegative");
  if (batch_size < 1) throw ConfigError("train.batch_size must be positive");
  if (batch_size > std::min(n_x, n_z)) {
    throw ConfigError("train.batch_size " + std::to_string(batch_size) + " exceeds the smaller dataset (" +
                      std::to_string(std::min(n_x, n_z)) + " points)");
  }
  if (blocks < 1) throw ConfigError("train.blocks must be at least 1");
  if (subnet_width < 1) throw ConfigError("train.subnet_width must be positive");
  if (!(gamma > 0.0)) throw ConfigError("train.gamma must be positive");
  if (kernel_scales.empty()) throw ConfigError("train.kernel_scales must not be empty");
  if (grad_clip && !(*grad_clip > 0.0)) throw ConfigError("train.grad_clip must be positive");
}

void adamw_step(std::span<Parameter* const> params, OptimizerState& state, const AdamWOptions& options) {
  if (state.first_moment.empty()) {
    for (const Parameter* p : params) {
      state.first_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      state.second_moment.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw DimensionError("adamw_step: optimizer state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Parameter& p = *params[i];
    if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols() ||
        state.first_moment[i].rows() != p.value.rows() || state.first_moment[i].cols() != p.value.cols()) {
      throw DimensionError("adamw_step: shape mismatch for parameter " + std::to_string(i));
    }
    if (!p.grad.allFinite()) throw NumericError("adamw_step: non-finite gradient, step rejected");
  }

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(options.beta1, t);
  const double bc2 = 1.0 - std::pow(options.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.first_moment[i];
    Matrix& v = state.second_moment[i];
    m = options.beta1 * m + (1.0 - options.beta1) * p.grad;
    v = options.beta2 * v + (1.0 - options.beta2) * p.grad.cwiseAbs2();
    const auto m_hat = m.array() / bc1;
    const auto v_hat = v.array() / bc2;
    p.value.array() -= options.lr * (m_hat / (v_hat.sqrt() + options.eps) + options.weight_decay * p.value.array());
  }
}

double clip_grad_norm(std::span<Parameter* const> params, double max_norm) {
  double sq = 0.0;
  for (const Parameter* p : params) sq += p->grad.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm) {
    const double f = max_norm / norm;
    for (Parameter* p : params) p->grad *= f;
  }
  return norm;
}

KernelBank training_bank(const Matrix& x_data, const Matrix& z_data, const TrainConfig& config) {
  return default_bank(median_heuristic(x_data, z_data, derive_seed(config.seed, "bandwidth")), config.kernel_scales);
}

namespace {

Matrix gather_rows(const Matrix& data, std::span<const std::size_t> order, std::size_t begin, Index count) {
  Matrix out(count, data.cols());
  for (Index r = 0; r < count; ++r) out.row(r) = data.row(static_cast<Index>(order[begin + static_cast<std::size_t>(r)]));
  return out;
}

void add_scaled(LossBreakdown& acc, const LossBreakdown& b, double f) {
  acc.mmd_fwd += f * b.mmd_fwd;
  acc.mmd_bwd += f * b.mmd_bwd;
  acc.ot_fwd += f * b.ot_fwd;
  acc.ot_bwd += f * b.ot_bwd;
  acc.total += f * b.total;
  acc.objective += f * b.objective;
}

}  // namespace

TrainResult train(const Matrix& x_data, const Matrix& z_data, const TrainConfig& config, const EpochCallback& on_epoch) {
  if (x_data.rows() == 0 || z_data.rows() == 0) throw DomainError("train: datasets must be nonempty");
  if (x_data.cols() != z_data.cols()) throw DimensionError("train: datasets have different dimensions");
  config.validate(x_data.rows(), z_data.rows());

  TrainResult result{init_model(config.flow_shape(x_data.cols()), derive_seed(config.seed, "init")),
                     training_bank(x_data, z_data, config),
                     {}};
  FlowModel& model = result.model;
  const std::vector<Parameter*> params = model.parameters();
  OptimizerState state;
  const AdamWOptions options{config.lr, 0.9, 0.999, 1e-8, config.weight_decay};

  Rng shuffle(derive_seed(config.seed, "shuffle"));
  const Index pairs = std::min(x_data.rows(), z_data.rows());
  const Index batches = pairs / config.batch_size;
  std::uint64_t step = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto x_order = shuffle.permutation(static_cast<std::size_t>(x_data.rows()));
    const auto z_order = shuffle.permutation(static_cast<std::size_t>(z_data.rows()));
    LossBreakdown epoch_avg;
    epoch_avg.beta = config.beta;
    for (Index b = 0; b < batches; ++b) {
      const auto begin = static_cast<std::size_t>(b * config.batch_size);
      const Matrix xb = gather_rows(x_data, x_order, begin, config.batch_size);
      const Matrix zb = gather_rows(z_data, z_order, begin, config.batch_size);
      ++step;
      try {
        model.zero_grad();
        Graph graph;
        auto [loss, breakdown] = symot_loss(graph, model, result.bank, xb, zb, config.beta, config.symmetric);
        graph.backward(loss);
        if (config.grad_clip) clip_grad_norm(params, *config.grad_clip);
        adamw_step(params, state, options);
        add_scaled(epoch_avg, breakdown, 1.0 / static_cast<double>(batches));
      } catch (const NumericError& e) {
        throw NumericError("training aborted at step " + std::to_string(step) + " (epoch " + std::to_string(epoch) +
                           "): " + e.what());
      }
    }
    result.trace.push_back(epoch_avg);
    if (on_epoch) on_epoch(epoch, model, epoch_avg);
  }
  model.zero_grad();
  return result;
}

}  // namespace symot
