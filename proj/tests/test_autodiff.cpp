#include <gtest/gtest.h>

#include <cmath>

#include "cyclereg/loss.hpp"
#include "test_util.hpp"

using namespace cyclereg;
using cyclereg::testing::random_away_from;
using cyclereg::testing::random_tensor;
using cyclereg::testing::worst_gradient_error;

namespace {

constexpr int kConfigs = 100;
constexpr double kGradTol = 1e-4;

// Generic scalarization: mean((op(...) - c)^2) with a random target c.
NodeId against(Tape& t, NodeId out, const Tensor& target) {
  return t.reduce_mean(t.square(t.subtract(out, t.constant(target))));
}

}  // namespace

TEST(Primitives, MatmulIdentity) {
  Tape t;
  const NodeId out = t.matmul(t.constant(Tensor::from_rows({{1, 0}, {0, 1}})), t.constant(Tensor::column({3, 4})));
  EXPECT_EQ(t.value(out), Tensor::column({3, 4}));
}

TEST(Primitives, MatmulShapeErrorNamesOperation) {
  Tape t;
  const NodeId a = t.constant(Tensor::matrix(2, 3));
  const NodeId b = t.constant(Tensor::matrix(2, 3));
  try {
    t.matmul(a, b);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    EXPECT_NE(std::string(e.what()).find("matmul"), std::string::npos);
    EXPECT_NE(std::string(e.what()).find("[2x3]"), std::string::npos) << e.what();
  }
}

TEST(Primitives, ReluSignCases) {
  Tape t;
  const NodeId out = t.relu(t.constant(Tensor::from_rows({{-1, 0, 2}})));
  EXPECT_EQ(t.value(out), Tensor::from_rows({{0, 0, 2}}));
}

TEST(Primitives, BatchnormTwoRowsNormalizesToPlusMinusOne) {
  Tape t;
  BatchNormState st = BatchNormState::fresh(1, 0.1, 0.0);
  const NodeId out = t.batchnorm(t.constant(Tensor::column({0, 2})), t.constant(Tensor::matrix(1, 1, 1.0)),
                                 t.constant(Tensor::matrix(1, 1, 0.0)), st, Mode::Training);
  EXPECT_DOUBLE_EQ(t.value(out)[0], -1.0);
  EXPECT_DOUBLE_EQ(t.value(out)[1], 1.0);
}

TEST(Primitives, BatchnormTrainingMomentsProperty) {
  Rng rng(11);
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t rows = 2 + rng() % 30;
    const std::size_t cols = 1 + rng() % 5;
    Tensor x = random_tensor({rows, cols}, rng, -5.0, 5.0);
    BatchNormState st = BatchNormState::fresh(cols);
    Tape t;
    const NodeId out = t.batchnorm(t.constant(x), t.constant(Tensor::matrix(1, cols, 1.0)),
                                   t.constant(Tensor::matrix(1, cols, 0.0)), st, Mode::Training);
    const Tensor& v = t.value(out);
    for (std::size_t j = 0; j < cols; ++j) {
      double mean = 0.0;
      for (std::size_t r = 0; r < rows; ++r) mean += v.at(r, j);
      mean /= static_cast<double>(rows);
      double var = 0.0;
      for (std::size_t r = 0; r < rows; ++r) var += (v.at(r, j) - mean) * (v.at(r, j) - mean);
      var /= static_cast<double>(rows);
      // Population variance of the input, to account for epsilon exactly.
      double xm = 0.0, xv = 0.0;
      for (std::size_t r = 0; r < rows; ++r) xm += x.at(r, j);
      xm /= static_cast<double>(rows);
      for (std::size_t r = 0; r < rows; ++r) xv += (x.at(r, j) - xm) * (x.at(r, j) - xm);
      xv /= static_cast<double>(rows);
      EXPECT_NEAR(mean, 0.0, 1e-10);
      EXPECT_NEAR(var, xv / (xv + st.epsilon), 1e-8);
      EXPECT_NEAR(var, 1.0, 1e-3);  // epsilon only shrinks it slightly
    }
  }
}

TEST(Primitives, BatchnormTrainingNeedsTwoRows) {
  Tape t;
  BatchNormState st = BatchNormState::fresh(1);
  EXPECT_THROW(t.batchnorm(t.constant(Tensor::matrix(1, 1)), t.constant(Tensor::matrix(1, 1, 1.0)),
                           t.constant(Tensor::matrix(1, 1)), st, Mode::Training),
               ShapeError);
}

TEST(Primitives, BatchnormUpdatesRunningStatistics) {
  Tape t;
  BatchNormState st = BatchNormState::fresh(1);
  t.batchnorm(t.constant(Tensor::column({1, 3})), t.constant(Tensor::matrix(1, 1, 1.0)),
              t.constant(Tensor::matrix(1, 1)), st, Mode::Training);
  EXPECT_DOUBLE_EQ(st.running_mean[0], 0.1 * 2.0);
  EXPECT_DOUBLE_EQ(st.running_var[0], 0.9 * 1.0 + 0.1 * 2.0);  // unbiased variance of {1, 3} is 2
}

TEST(Primitives, DropoutInferenceIsIdentity) {
  Rng rng(3);
  const Tensor x = random_tensor({4, 3}, rng);
  Tape t;
  const NodeId out = t.dropout(t.constant(x), 0.5, Mode::Inference, rng);
  EXPECT_EQ(t.value(out), x);
}

TEST(Primitives, DropoutTrainingIsInverted) {
  Rng rng(3);
  Tape t;
  const NodeId out = t.dropout(t.constant(Tensor::matrix(200, 50, 1.0)), 0.2, Mode::Training, rng);
  double sum = 0.0;
  for (double v : t.value(out).values()) {
    EXPECT_TRUE(v == 0.0 || std::abs(v - 1.25) < 1e-15);
    sum += v;
  }
  EXPECT_NEAR(sum / 10000.0, 1.0, 0.05);
}

TEST(Losses, Examples) {
  const Tensor p = Tensor::from_rows({{0, 0}});
  EXPECT_DOUBLE_EQ(loss_eval(LossKind::L2, p, p), 0.0);
  EXPECT_DOUBLE_EQ(loss_eval(LossKind::L1, p, Tensor::from_rows({{1, -1}})), 1.0);
  EXPECT_DOUBLE_EQ(loss_eval(LossKind::SmoothL1, Tensor::from_rows({{0.0}}), Tensor::from_rows({{0.5}})), 0.125);
  EXPECT_DOUBLE_EQ(loss_eval(LossKind::SmoothL1, Tensor::from_rows({{0.0}}), Tensor::from_rows({{3.0}})), 2.5);
}

TEST(Losses, ErrorsOnMismatchOrEmpty) {
  EXPECT_THROW(loss_eval(LossKind::L2, Tensor::matrix(1, 2), Tensor::matrix(2, 1)), ShapeError);
  EXPECT_THROW(loss_eval(LossKind::L2, Tensor(), Tensor()), ShapeError);
}

TEST(Losses, NonNegativeProperty) {
  Rng rng(5);
  for (int k = 0; k < kConfigs; ++k) {
    const Tensor a = random_tensor({3, 2}, rng, -4, 4);
    const Tensor b = random_tensor({3, 2}, rng, -4, 4);
    for (auto kind : {LossKind::L2, LossKind::L1, LossKind::SmoothL1}) EXPECT_GE(loss_eval(kind, a, b), 0.0);
  }
}

TEST(Losses, TapeMatchesDirectEvaluation) {
  Rng rng(6);
  for (auto kind : {LossKind::L2, LossKind::L1, LossKind::SmoothL1}) {
    const Tensor a = random_tensor({5, 2}, rng, -3, 3);
    const Tensor b = random_tensor({5, 2}, rng, -3, 3);
    Tape t;
    const NodeId l = record_loss(t, kind, t.constant(a), t.constant(b));
    EXPECT_DOUBLE_EQ(t.value(l).item(), loss_eval(kind, a, b));
  }
}

TEST(Backward, OneDimensionalLeastSquares) {
  Tape t;
  const NodeId w = t.parameter(ParamId{1, 0}, Tensor::matrix(1, 1, 1.0));
  const NodeId pred = t.matmul(t.constant(Tensor::matrix(1, 1, 1.0)), w);
  const NodeId loss = record_loss(t, LossKind::L2, pred, t.constant(Tensor::matrix(1, 1, 2.0)));
  const Gradients g = t.backward(loss);
  EXPECT_DOUBLE_EQ(g.at(ParamId{1, 0})[0], -2.0);
}

TEST(Backward, DisconnectedParameterGetsZeros) {
  Tape t;
  const NodeId w = t.parameter(ParamId{1, 0}, Tensor::matrix(1, 1, 3.0));
  t.parameter(ParamId{1, 1}, Tensor::matrix(2, 2, 1.0));
  const Gradients g = t.backward(t.reduce_mean(t.square(w)));
  EXPECT_EQ(g.at(ParamId{1, 1}), Tensor::matrix(2, 2, 0.0));
  EXPECT_DOUBLE_EQ(g.at(ParamId{1, 0})[0], 6.0);
}

TEST(Backward, RejectsNonScalarLoss) {
  Tape t;
  const NodeId w = t.parameter(ParamId{1, 0}, Tensor::matrix(2, 1, 1.0));
  EXPECT_THROW(t.backward(w), ShapeError);
}

TEST(Backward, ReusedParameterAccumulates) {
  Tape t;
  const NodeId a = t.parameter(ParamId{1, 0}, Tensor::matrix(1, 1, 3.0));
  const NodeId b = t.parameter(ParamId{1, 0}, Tensor::matrix(1, 1, 3.0));
  EXPECT_EQ(a, b);
  const Gradients g = t.backward(t.reduce_mean(t.add(a, b)));
  EXPECT_DOUBLE_EQ(g.at(ParamId{1, 0})[0], 2.0);
}

TEST(Backward, BitIdenticalOnRepeat) {
  Rng rng(8);
  const Tensor x = random_tensor({6, 3}, rng), w = random_tensor({3, 2}, rng), c = random_tensor({6, 2}, rng);
  auto run = [&] {
    Tape t;
    const NodeId out = t.tanh(t.matmul(t.constant(x), t.parameter(ParamId{1, 0}, w)));
    return t.backward(against(t, out, c));
  };
  EXPECT_EQ(run(), run());
}

TEST(FiniteDifference, Examples) {
  const Tensor g = finite_diff_gradient([](const Tensor& p) { return p[0] * p[0]; }, Tensor::scalar(3.0));
  EXPECT_NEAR(g[0], 6.0, 1e-6);
  const Tensor z = finite_diff_gradient([](const Tensor&) { return 4.0; }, Tensor::matrix(1, 3));
  EXPECT_EQ(z, Tensor::matrix(1, 3, 0.0));
  const Tensor a = finite_diff_gradient([](const Tensor& p) { return std::abs(p[0]); }, Tensor::scalar(1.0));
  EXPECT_NEAR(a[0], 1.0, 1e-8);
}

// ---- gradient properties: 100 random configurations per primitive ----------

class PrimitiveGradient : public ::testing::Test {
 protected:
  Rng rng{2024};
  std::size_t dim() { return 1 + rng() % 4; }
};

TEST_F(PrimitiveGradient, Matmul) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), m = dim(), p = dim();
    const Tensor c = random_tensor({n, p}, rng);
    const double err = worst_gradient_error({random_tensor({n, m}, rng), random_tensor({m, p}, rng)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return against(t, t.matmul(in[0], in[1]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, AddBias) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double err = worst_gradient_error({random_tensor({n, f}, rng), random_tensor({1, f}, rng)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return against(t, t.add_bias(in[0], in[1]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, ReluAwayFromKink) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double err = worst_gradient_error({random_away_from({n, f}, rng, {0.0}, 1e-4)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return against(t, t.relu(in[0]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, Tanh) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double err = worst_gradient_error({random_tensor({n, f}, rng, -2, 2)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return against(t, t.tanh(in[0]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, BatchnormTraining) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = 2 + rng() % 6, f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double err = worst_gradient_error(
        {random_tensor({n, f}, rng, -2, 2), random_tensor({1, f}, rng, 0.5, 2), random_tensor({1, f}, rng)},
        [&](Tape& t, const std::vector<NodeId>& in) {
          BatchNormState st = BatchNormState::fresh(f);
          return against(t, t.tanh(t.batchnorm(in[0], in[1], in[2], st, Mode::Training)), c);
        });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, BatchnormInference) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = 1 + rng() % 6, f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    BatchNormState st = BatchNormState::fresh(f);
    st.running_mean = random_tensor({1, f}, rng);
    st.running_var = random_tensor({1, f}, rng, 0.2, 2);
    const double err = worst_gradient_error(
        {random_tensor({n, f}, rng, -2, 2), random_tensor({1, f}, rng, 0.5, 2), random_tensor({1, f}, rng)},
        [&](Tape& t, const std::vector<NodeId>& in) {
          return against(t, t.batchnorm_inference(in[0], in[1], in[2], st), c);
        });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, DropoutWithFixedMask) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const std::uint64_t mask_seed = rng();
    const double err = worst_gradient_error({random_tensor({n, f}, rng)}, [&](Tape& t, const std::vector<NodeId>& in) {
      Rng mask(mask_seed);
      return against(t, t.dropout(in[0], 0.3, Mode::Training, mask), c);
    });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, SubtractAddScale) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double s = uniform(rng, -3, 3);
    const double err = worst_gradient_error({random_tensor({n, f}, rng), random_tensor({n, f}, rng)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              const NodeId d = t.subtract(in[0], t.scale(in[1], s));
                                              return against(t, t.add(d, in[1]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, ReduceMeanAndSquare) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const double err = worst_gradient_error({random_tensor({n, f}, rng, -2, 2)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return t.reduce_mean(t.square(t.tanh(in[0])));
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, AbsAwayFromZero) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor c = random_tensor({n, f}, rng);
    const double err = worst_gradient_error({random_away_from({n, f}, rng, {0.0}, 1e-4)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return against(t, t.abs(in[0]), c);
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, SmoothL1AwayFromThreshold) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const double err = worst_gradient_error({random_away_from({n, f}, rng, {-1.0, 1.0}, 1e-4, -3, 3)},
                                            [&](Tape& t, const std::vector<NodeId>& in) {
                                              return t.reduce_mean(t.smooth_l1(in[0], 1.0));
                                            });
    ASSERT_LT(err, kGradTol) << "config " << k;
  }
}

TEST_F(PrimitiveGradient, EveryLossKind) {
  for (int k = 0; k < kConfigs; ++k) {
    const std::size_t n = dim(), f = dim();
    const Tensor target = random_tensor({n, f}, rng, -2, 2);
    // Residuals kept away from 0 and +-1, the kinks of L1 and smooth L1.
    Tensor offset = random_away_from({n, f}, rng, {-1.0, 0.0, 1.0}, 1e-3, -2, 2);
    Tensor pred = target;
    for (std::size_t i = 0; i < pred.size(); ++i) pred[i] -= offset[i];
    for (auto kind : {LossKind::L2, LossKind::L1, LossKind::SmoothL1}) {
      const double err = worst_gradient_error({pred}, [&](Tape& t, const std::vector<NodeId>& in) {
        return record_loss(t, kind, in[0], t.constant(target));
      });
      ASSERT_LT(err, kGradTol) << name(kind) << " config " << k;
    }
  }
}
