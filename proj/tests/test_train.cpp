#include <gtest/gtest.h>

#include <cmath>

#include "support.hpp"
#include "symot/data.hpp"
#include "symot/errors.hpp"
#include "symot/train.hpp"

using namespace symot;

namespace {

Parameter scalar_param(double value, double grad) {
  Parameter p(Matrix::Constant(1, 1, value));
  p.grad(0, 0) = grad;
  return p;
}

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 20;
  c.blocks = 2;
  c.subnet_width = 8;
  c.seed = 5;
  return c;
}

Matrix sample(DatasetKind kind, Index n, std::uint64_t seed) { return generate(default_spec(kind, n, seed)); }

}  // namespace

TEST(AdamW, FirstStepMovesByLearningRate) {
  Parameter p = scalar_param(0.0, 1.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state;
  adamw_step(params, state, {0.001, 0.9, 0.999, 1e-8, 0.0});
  EXPECT_NEAR(p.value(0, 0), -0.001, 1e-10);
  EXPECT_DOUBLE_EQ(p.value(0, 0), -0.001 / (1.0 + 1e-8));
  EXPECT_EQ(state.step, 1u);
}

TEST(AdamW, ZeroGradientIsPureDecoupledDecay) {
  Parameter p = scalar_param(1.0, 0.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state;
  adamw_step(params, state, {0.01, 0.9, 0.999, 1e-8, 0.1});
  EXPECT_NEAR(p.value(0, 0), 0.999, 1e-15);
}

TEST(AdamW, ZeroGradientWithoutDecayLeavesValue) {
  Parameter p = scalar_param(0.7, 0.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state;
  for (int i = 0; i < 5; ++i) adamw_step(params, state, {0.1, 0.9, 0.999, 1e-8, 0.0});
  EXPECT_EQ(p.value(0, 0), 0.7);
}

TEST(AdamW, HandTracedSecondStep) {
  Parameter p = scalar_param(0.0, 2.0);
  std::vector<Parameter*> params{&p};
  OptimizerState state;
  adamw_step(params, state, {0.1, 0.9, 0.999, 0.0, 0.0});
  p.grad(0, 0) = -1.0;
  adamw_step(params, state, {0.1, 0.9, 0.999, 0.0, 0.0});
  const double m = (0.9 * 0.2 + 0.1 * -1.0) / (1 - 0.81);
  const double v = (0.999 * 0.004 + 0.001 * 1.0) / (1 - 0.999 * 0.999);
  EXPECT_NEAR(p.value(0, 0), -0.1 - 0.1 * m / std::sqrt(v), 1e-12);
}

TEST(AdamW, NonFiniteGradientRejectsWholeStep) {
  Parameter a = scalar_param(1.0, 1.0);
  Parameter b = scalar_param(2.0, std::nan(""));
  std::vector<Parameter*> params{&a, &b};
  OptimizerState state;
  EXPECT_THROW(adamw_step(params, state, {}), NumericError);
  EXPECT_EQ(a.value(0, 0), 1.0);
  EXPECT_EQ(b.value(0, 0), 2.0);
  EXPECT_EQ(state.step, 0u);
}

TEST(ClipGradNorm, RescalesOnlyAboveThreshold) {
  Parameter a = scalar_param(0.0, 3.0);
  Parameter b = scalar_param(0.0, 4.0);
  std::vector<Parameter*> params{&a, &b};
  EXPECT_DOUBLE_EQ(clip_grad_norm(params, 10.0), 5.0);
  EXPECT_EQ(a.grad(0, 0), 3.0);
  EXPECT_DOUBLE_EQ(clip_grad_norm(params, 1.0), 5.0);
  EXPECT_NEAR(a.grad(0, 0), 0.6, 1e-15);
  EXPECT_NEAR(b.grad(0, 0), 0.8, 1e-15);
}

TEST(TrainConfig, ValidateRejectsBadValues) {
  const auto rejects = [](auto mutate) {
    TrainConfig c = tiny_config();
    mutate(c);
    EXPECT_THROW(c.validate(100, 100), ConfigError);
  };
  rejects([](TrainConfig& c) { c.epochs = 0; });
  rejects([](TrainConfig& c) { c.lr = -1; });
  rejects([](TrainConfig& c) { c.beta = -0.1; });
  rejects([](TrainConfig& c) { c.beta = std::nan(""); });
  rejects([](TrainConfig& c) { c.batch_size = 0; });
  rejects([](TrainConfig& c) { c.batch_size = 101; });
  rejects([](TrainConfig& c) { c.blocks = 0; });
  rejects([](TrainConfig& c) { c.gamma = 0; });
  rejects([](TrainConfig& c) { c.kernel_scales.clear(); });
  rejects([](TrainConfig& c) { c.grad_clip = 0.0; });
  EXPECT_NO_THROW(tiny_config().validate(20, 20));
}

TEST(Train, ZeroLearningRateReturnsInitialModel) {
  TrainConfig c = tiny_config();
  c.epochs = 1;
  c.lr = 0.0;
  c.weight_decay = 0.0;
  const TrainResult r = train(sample(DatasetKind::moons, 60, 1), sample(DatasetKind::circles, 60, 2), c);
  EXPECT_EQ(serialize(r.model), serialize(init_model(c.flow_shape(2), derive_seed(c.seed, "init"))));
  ASSERT_EQ(r.trace.size(), 1u);
}

TEST(Train, IsDeterministic) {
  const Matrix x = sample(DatasetKind::moons, 80, 1);
  const Matrix z = sample(DatasetKind::circles, 70, 2);
  const TrainResult a = train(x, z, tiny_config());
  const TrainResult b = train(x, z, tiny_config());
  EXPECT_EQ(serialize(a.model), serialize(b.model));
  ASSERT_EQ(a.trace.size(), 3u);
  for (std::size_t e = 0; e < a.trace.size(); ++e) EXPECT_EQ(a.trace[e].total, b.trace[e].total);
  EXPECT_EQ(a.bank.bandwidths(), b.bank.bandwidths());

  TrainConfig other = tiny_config();
  other.seed = 6;
  EXPECT_NE(serialize(train(x, z, other).model), serialize(a.model));
}

TEST(Train, CallbackSeesEveryEpoch) {
  std::vector<std::size_t> seen;
  train(sample(DatasetKind::moons, 40, 1), sample(DatasetKind::circles, 40, 2), tiny_config(),
        [&](std::size_t epoch, const FlowModel&, const LossBreakdown& b) {
          seen.push_back(epoch);
          EXPECT_TRUE(std::isfinite(b.total));
        });
  EXPECT_EQ(seen, (std::vector<std::size_t>{1, 2, 3}));
}

TEST(Train, ReducesLossOnShiftedGaussians) {
  TrainConfig c = tiny_config();
  c.epochs = 40;
  c.lr = 5e-3;
  c.beta = 0.0;
  const TrainResult r = train(sample(DatasetKind::gauss_pair_a, 200, 1), sample(DatasetKind::gauss_pair_b, 200, 2), c);
  EXPECT_LT(r.trace.back().total, 0.5 * r.trace.front().total);
}

TEST(Train, RejectsMismatchedInputs) {
  EXPECT_THROW(train(Matrix(0, 2), sample(DatasetKind::moons, 40, 1), tiny_config()), DomainError);
  EXPECT_THROW(train(Matrix::Zero(40, 3), sample(DatasetKind::moons, 40, 1), tiny_config()), DimensionError);
  EXPECT_THROW(train(sample(DatasetKind::moons, 10, 1), sample(DatasetKind::moons, 40, 1), tiny_config()), ConfigError);
}

TEST(Train, BankUsesPooledMedian) {
  const Matrix x = sample(DatasetKind::moons, 80, 1);
  const Matrix z = sample(DatasetKind::circles, 80, 2);
  const TrainConfig c = tiny_config();
  const KernelBank bank = training_bank(x, z, c);
  const double med = median_heuristic(x, z, derive_seed(c.seed, "bandwidth"));
  ASSERT_EQ(bank.size(), 5u);
  for (std::size_t l = 0; l < 5; ++l) EXPECT_DOUBLE_EQ(bank.bandwidths()[l], med * kDefaultKernelScales[l]);
}
