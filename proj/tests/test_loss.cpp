#include <gtest/gtest.h>

#include "support.hpp"
#include "symot/errors.hpp"
#include "symot/loss.hpp"
#include "symot/train.hpp"

using namespace symot;
using symot::testing::naive_mmd2;
using symot::testing::naive_ot;
using symot::testing::random_matrix;
using symot::testing::randomize;

namespace {

FlowModel identity_model(std::size_t blocks = 2, Index width = 8) {
  FlowModel model = init_model({2, blocks, width, 2, 2.0}, 1);
  for (std::size_t b = 0; b < model.size(); ++b) model.block(b).set_permutation({0, 1});
  return model;
}

double oracle_total(const FlowModel& model, const KernelBank& bank, const Matrix& x, const Matrix& z, double beta,
                    bool symmetric) {
  const Matrix tx = forward(model, x);
  double total = naive_mmd2(bank, tx, z) + beta * naive_ot(x, tx);
  if (symmetric) {
    const Matrix tz = inverse(model, z);
    total += naive_mmd2(bank, x, tz) + beta * naive_ot(tz, z);
  }
  return total;
}

}  // namespace

TEST(OtCost, ExampleValue) {
  const Matrix a = (Matrix(1, 2) << 0, 0).finished();
  const Matrix b = (Matrix(1, 2) << 3, 4).finished();
  EXPECT_DOUBLE_EQ(ot_cost(a, b), 25.0);
  Graph g;
  EXPECT_DOUBLE_EQ(ot_cost(g.constant(a), g.constant(b)).item(), 25.0);
}

TEST(OtCost, MatchesLoopOracle) {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix a = random_matrix(rng, 1 + trial, 2, -3, 3);
    const Matrix b = random_matrix(rng, 1 + trial, 2, -3, 3);
    EXPECT_NEAR(ot_cost(a, b), naive_ot(a, b), 1e-12);
  }
}

TEST(OtCost, RejectsBadShapes) {
  EXPECT_THROW(ot_cost(Matrix(Matrix::Zero(2, 2)), Matrix(Matrix::Zero(3, 2))), DimensionError);
  EXPECT_THROW(ot_cost(Matrix(0, 2), Matrix(0, 2)), DomainError);
}

TEST(Loss, IdentityMapOnEqualSetsIsZero) {
  FlowModel model = identity_model();
  Rng rng(5);
  const Matrix x = random_matrix(rng, 16, 2);
  const KernelBank bank = default_bank(1.0);
  Graph g;
  const auto [objective, parts] = symot_loss(g, model, bank, x, x, 0.5, true);
  EXPECT_NEAR(parts.total, 0.0, 1e-12);
  EXPECT_NEAR(parts.mmd_fwd, 0.0, 1e-12);
  EXPECT_NEAR(parts.mmd_bwd, 0.0, 1e-12);
  EXPECT_EQ(parts.ot_fwd, 0.0);
  EXPECT_EQ(parts.ot_bwd, 0.0);
}

TEST(Loss, BreakdownMatchesOracle) {
  FlowModel model = init_model({2, 2, 8, 2, 2.0}, 7);
  randomize(model, 8, 0.3);
  Rng rng(9);
  const Matrix x = random_matrix(rng, 10, 2, -2, 2);
  const Matrix z = random_matrix(rng, 10, 2, -2, 2);
  const KernelBank bank = default_bank(0.8);
  for (bool symmetric : {true, false}) {
    Graph g;
    const auto [objective, parts] = symot_loss(g, model, bank, x, z, 0.2, symmetric);
    EXPECT_NEAR(parts.total, oracle_total(model, bank, x, z, 0.2, symmetric), 1e-12);
    EXPECT_NEAR(parts.mmd_fwd + parts.mmd_bwd + 0.2 * (parts.ot_fwd + parts.ot_bwd), parts.total, 1e-12);
    if (!symmetric) {
      EXPECT_EQ(parts.mmd_bwd, 0.0);
      EXPECT_EQ(parts.ot_bwd, 0.0);
    }
  }
}

TEST(Loss, SymmetricIsAtLeastOneDirection) {
  FlowModel model = init_model({2, 2, 8, 2, 2.0}, 11);
  randomize(model, 12, 0.3);
  Rng rng(13);
  const KernelBank bank = default_bank(1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const Matrix x = random_matrix(rng, 12, 2, -2, 2);
    const Matrix z = random_matrix(rng, 12, 2, -2, 2);
    Graph g1, g2;
    const double both = symot_loss(g1, model, bank, x, z, 0.1, true).second.total;
    const double one = symot_loss(g2, model, bank, x, z, 0.1, false).second.total;
    EXPECT_GE(both, one - 1e-15);
  }
}

TEST(Loss, GradientMatchesFiniteDifferences) {
  FlowModel model = init_model({2, 2, 16, 2, 2.0}, 21);
  randomize(model, 22, 0.3);
  Rng rng(23);
  const Matrix x = random_matrix(rng, 8, 2, -2, 2);
  const Matrix z = random_matrix(rng, 8, 2, -2, 2);
  const KernelBank bank = default_bank(1.0);
  const double beta = 0.3;

  model.zero_grad();
  Graph g;
  g.backward(symot_loss(g, model, bank, x, z, beta, true).first);
  const auto check = symot::testing::check_gradients(
      model.parameters(), [&] { return oracle_total(model, bank, x, z, beta, true); }, 1e-5);
  EXPECT_GT(check.checked, 1000u);
  EXPECT_TRUE(check.within(1e-4, 1e-7)) << "rel " << check.max_rel << " small abs " << check.max_abs_small;
}

TEST(Loss, SmallStepAlongGradientDescends) {
  FlowModel model = init_model({2, 2, 16, 2, 2.0}, 31);
  randomize(model, 32, 0.2);
  Rng rng(33);
  const Matrix x = random_matrix(rng, 20, 2, -2, 2);
  const Matrix z = random_matrix(rng, 20, 2, 0, 3);
  const KernelBank bank = default_bank(1.0);
  const double before = oracle_total(model, bank, x, z, 0.1, true);
  model.zero_grad();
  Graph g;
  g.backward(symot_loss(g, model, bank, x, z, 0.1, true).first);
  for (Parameter* p : model.parameters()) p->value -= 1e-3 * p->grad;
  EXPECT_LT(oracle_total(model, bank, x, z, 0.1, true), before);
}

TEST(DMmd, SumOfSquareRootsOfEachDirection) {
  FlowModel model = init_model({2, 2, 8, 2, 2.0}, 41);
  randomize(model, 42, 0.3);
  Rng rng(43);
  const Matrix x = random_matrix(rng, 15, 2, -2, 2);
  const Matrix z = random_matrix(rng, 15, 2, -1, 3);
  const KernelBank bank = default_bank(1.5);
  const double expected =
      std::sqrt(naive_mmd2(bank, forward(model, x), z)) + std::sqrt(naive_mmd2(bank, x, inverse(model, z)));
  EXPECT_NEAR(d_mmd(model, bank, x, z), expected, 1e-10);
}

TEST(DMmd, IdentityIsSymmetricInItsArguments) {
  const FlowModel model = identity_model();
  Rng rng(51);
  const Matrix x = random_matrix(rng, 15, 2, -2, 2);
  const Matrix z = random_matrix(rng, 15, 2, -1, 3);
  const KernelBank bank = default_bank(1.0);
  EXPECT_NEAR(d_mmd(model, bank, x, z), d_mmd(model, bank, z, x), 1e-12);
  EXPECT_NEAR(d_mmd(model, bank, x, x), 0.0, 1e-5);
}
