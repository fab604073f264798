#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "atag/diagnostics.hpp"
#include "atag/errors.hpp"
#include "atag/gradcheck.hpp"
#include "atag/ops.hpp"
#include "atag/optim.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace atag;
using testutil::random_tensor;
using testutil::to_vector;

// --- matmul ---------------------------------------------------------------------

TEST(Matmul, IdentityAndZero) {
  const Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
  EXPECT_EQ(to_vector(matmul(a, Tensor::from({2, 2}, {1, 0, 0, 1}))), (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(to_vector(matmul(a, Tensor::zeros({2, 2}))), (std::vector<double>{0, 0, 0, 0}));
}

TEST(Matmul, MatchesTripleLoop) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor a = random_tensor({3, 4}, rng);
    const Tensor b = random_tensor({4, 2}, rng);
    const auto ref = oracle::matmul(to_vector(a), to_vector(b), 3, 4, 2);
    const auto got = to_vector(matmul(a, b));
    ASSERT_EQ(got.size(), ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(got[i], ref[i], 1e-12);
  }
}

TEST(Matmul, ShapeMismatchNamesBothShapes) {
  try {
    matmul(Tensor::zeros({2, 3}), Tensor::zeros({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("2x3"), std::string::npos) << msg;
  }
}

// --- conv1d -----------------------------------------------------------------------

TEST(Conv1d, AveragingKernelWithZeroPadding) {
  const Tensor x = Tensor::from({1, 4}, {1, 2, 3, 4});
  const Tensor w = Tensor::from({1, 1, 3}, {1.0 / 3, 1.0 / 3, 1.0 / 3});
  const auto y = to_vector(conv1d(x, w, Tensor{}));
  const std::vector<double> want{1, 2, 3, 7.0 / 3};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(y[i], want[i], 1e-12);
}

TEST(Conv1d, DeltaKernelIsIdentityZeroKernelIsZero) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({3, 9}, rng);
  std::vector<double> delta(3 * 3 * 3, 0.0);
  for (std::size_t c = 0; c < 3; ++c) delta[(c * 3 + c) * 3 + 1] = 1.0;
  EXPECT_EQ(to_vector(conv1d(x, Tensor::from({3, 3, 3}, delta), Tensor{})), to_vector(x));
  for (double v : to_vector(conv1d(x, Tensor::zeros({3, 3, 3}), Tensor{}))) EXPECT_EQ(v, 0.0);
}

TEST(Conv1d, LinearInInputAndKernel) {
  std::mt19937_64 rng(2);
  const Tensor x1 = random_tensor({4, 7}, rng), x2 = random_tensor({4, 7}, rng);
  const Tensor w1 = random_tensor({2, 2, 3}, rng), w2 = random_tensor({2, 2, 3}, rng);
  const auto lhs = to_vector(conv1d(add(scale(x1, 2.0), x2), w1, Tensor{}, 2));
  const auto r1 = to_vector(conv1d(x1, w1, Tensor{}, 2));
  const auto r2 = to_vector(conv1d(x2, w1, Tensor{}, 2));
  for (std::size_t i = 0; i < lhs.size(); ++i) EXPECT_NEAR(lhs[i], 2.0 * r1[i] + r2[i], 1e-12);
  const auto k = to_vector(conv1d(x1, add(w1, w2), Tensor{}, 2));
  const auto k2 = to_vector(conv1d(x1, w2, Tensor{}, 2));
  for (std::size_t i = 0; i < k.size(); ++i) EXPECT_NEAR(k[i], r1[i] + k2[i], 1e-12);
}

TEST(Conv1d, GroupDivisibilityIsConfigError) {
  EXPECT_THROW(conv1d(Tensor::zeros({3, 5}), Tensor::zeros({2, 1, 3}), Tensor{}, 2), ConfigError);
}

// --- softmax ----------------------------------------------------------------------

TEST(Softmax, Values) {
  const auto a = to_vector(softmax_lastdim(Tensor::from({2}, {0, 0})));
  EXPECT_DOUBLE_EQ(a[0], 0.5);
  EXPECT_DOUBLE_EQ(a[1], 0.5);
  const auto b = to_vector(softmax_lastdim(Tensor::from({3}, {1, 2, 3})));
  EXPECT_NEAR(b[0], 0.0900, 1e-4);
  EXPECT_NEAR(b[1], 0.2447, 1e-4);
  EXPECT_NEAR(b[2], 0.6652, 1e-4);
  const double inf = std::numeric_limits<double>::infinity();
  const auto c = to_vector(softmax_lastdim(Tensor::from({2}, {0.7, -inf})));
  EXPECT_EQ(c[0], 1.0);
  EXPECT_EQ(c[1], 0.0);
}

TEST(Softmax, MatchesDirectEvaluation) {
  std::mt19937_64 rng(5);
  const Tensor x = random_tensor({6, 9}, rng, -4.0, 4.0);
  const auto y = to_vector(softmax_lastdim(x));
  for (std::size_t r = 0; r < 6; ++r) {
    double z = 0.0;
    for (std::size_t c = 0; c < 9; ++c) z += std::exp(x.at(r, c));
    double row = 0.0;
    for (std::size_t c = 0; c < 9; ++c) {
      EXPECT_NEAR(y[r * 9 + c], std::exp(x.at(r, c)) / z, 1e-12);
      row += y[r * 9 + c];
    }
    EXPECT_NEAR(row, 1.0, 1e-6);
  }
}

TEST(Softmax, MaskedRowsAndEmptyRowWarning) {
  take_warnings();
  const double inf = std::numeric_limits<double>::infinity();
  const std::vector<std::uint8_t> keep{1, 1, 0, 0, 0, 0};
  const auto y = to_vector(softmax_lastdim(Tensor::from({2, 3}, {-inf, -inf, 5, 1, 2, 3}), &keep));
  // Row 0: every kept entry is -inf -> uniform over the kept set.
  EXPECT_DOUBLE_EQ(y[0], 0.5);
  EXPECT_DOUBLE_EQ(y[1], 0.5);
  EXPECT_EQ(y[2], 0.0);
  // Row 1: nothing kept -> zeros plus a warning.
  for (std::size_t i = 3; i < 6; ++i) EXPECT_EQ(y[i], 0.0);
  EXPECT_EQ(take_warnings().size(), 1u);
}

TEST(Softmax, LargeLogitsStayFinite) {
  const auto y = to_vector(softmax_lastdim(Tensor::from({3}, {1000, 1001, 999})));
  for (double v : y) {
    EXPECT_TRUE(std::isfinite(v));
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

// --- layer norm -------------------------------------------------------------------

TEST(LayerNorm, ConstantRowAndZeroGamma) {
  const Tensor x = Tensor::from({1, 4}, {3, 3, 3, 3});
  for (double v : to_vector(layer_norm(x, Tensor::full({4}, 1.0), Tensor::zeros({4})))) EXPECT_EQ(v, 0.0);
  std::mt19937_64 rng(4);
  const Tensor r = random_tensor({2, 5}, rng);
  for (double v : to_vector(layer_norm(r, Tensor::zeros({5}), Tensor::full({5}, 0.25)))) EXPECT_EQ(v, 0.25);
}

TEST(LayerNorm, MatchesTwoPassStatistics) {
  std::mt19937_64 rng(6);
  const Tensor x = random_tensor({3, 8}, rng, -3.0, 3.0);
  const auto y = to_vector(layer_norm(x, Tensor::full({8}, 1.0), Tensor::zeros({8})));
  for (std::size_t r = 0; r < 3; ++r) {
    double mean = 0.0;
    for (std::size_t c = 0; c < 8; ++c) mean += x.at(r, c);
    mean /= 8.0;
    double var = 0.0;
    for (std::size_t c = 0; c < 8; ++c) var += (x.at(r, c) - mean) * (x.at(r, c) - mean);
    var /= 8.0;
    for (std::size_t c = 0; c < 8; ++c) {
      EXPECT_NEAR(y[r * 8 + c], (x.at(r, c) - mean) / std::sqrt(var + 1e-5), 1e-10);
    }
  }
}

// --- backward of every op -------------------------------------------------------------

class OpGradient : public ::testing::Test {
 protected:
  std::mt19937_64 rng{11};
  // Weighted sum so every output element gets a distinct upstream gradient.
  Tensor reduce(const Tensor& y) {
    std::mt19937_64 r(99);
    return sum(mul(y, random_tensor(y.shape(), r)));
  }
  void expect_pass(const GradCheckReport& r) {
    EXPECT_TRUE(r.passed) << r.worst_param << "[" << r.worst_index << "] rel err " << r.max_rel_error;
    EXPECT_LT(r.max_rel_error, 1e-4);
  }
};

TEST_F(OpGradient, LinearAlgebraAndElementwise) {
  Tensor a = random_tensor({3, 4}, rng, -1, 1, true);
  Tensor b = random_tensor({4, 5}, rng, -1, 1, true);
  Tensor c = random_tensor({3, 4}, rng, 0.5, 2.0, true);
  expect_pass(testutil::check_inputs([&] { return reduce(matmul(a, b)); }, {{"a", a}, {"b", b}}));
  expect_pass(testutil::check_inputs([&] { return reduce(transpose(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(mul(add(a, c), sub(a, c))); }, {{"a", a}, {"c", c}}));
  expect_pass(testutil::check_inputs([&] { return reduce(log(c)); }, {{"c", c}}));
  expect_pass(testutil::check_inputs([&] { return reduce(exp(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(sigmoid(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(square(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return mean(scale(add_scalar(c, 1.0), 3.0)); }, {{"c", c}}));
  expect_pass(testutil::check_inputs([&] { return reduce(concat_lastdim(a, c)); }, {{"a", a}, {"c", c}}));
  expect_pass(testutil::check_inputs([&] { return reduce(concat_firstdim(a, c)); }, {{"a", a}, {"c", c}}));
  expect_pass(testutil::check_inputs([&] { return reduce(slice_lastdim(a, 1, 2)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(slice_firstdim(a, 1, 2)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(reshape(a, {2, 6})); }, {{"a", a}}));
}

TEST_F(OpGradient, KinkedOpsAwayFromKinks) {
  // Values bounded away from 0 and from the clamp limits.
  std::vector<double> v{-0.9, -0.5, -0.3, 0.2, 0.4, 0.8, -0.7, 0.6};
  Tensor a = Tensor::from({2, 4}, v, true);
  expect_pass(testutil::check_inputs([&] { return reduce(relu(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(abs(a)); }, {{"a", a}}));
  expect_pass(testutil::check_inputs([&] { return reduce(clamp(a, -0.6, 0.5)); }, {{"a", a}}));
}

TEST_F(OpGradient, BiasSoftmaxLayerNorm) {
  Tensor x = random_tensor({4, 6}, rng, -2, 2, true);
  Tensor b6 = random_tensor({6}, rng, -1, 1, true);
  Tensor b4 = random_tensor({4}, rng, -1, 1, true);
  Tensor g = random_tensor({6}, rng, 0.5, 1.5, true);
  expect_pass(testutil::check_inputs([&] { return reduce(add_bias_lastdim(x, b6)); }, {{"x", x}, {"b", b6}}));
  expect_pass(testutil::check_inputs([&] { return reduce(add_bias_firstdim(x, b4)); }, {{"x", x}, {"b", b4}}));
  expect_pass(testutil::check_inputs([&] { return reduce(softmax_lastdim(x)); }, {{"x", x}}));
  std::vector<std::uint8_t> keep(24, 1);
  for (std::size_t i = 0; i < 24; i += 5) keep[i] = 0;
  expect_pass(testutil::check_inputs([&] { return reduce(softmax_lastdim(x, &keep)); }, {{"x", x}}));
  expect_pass(testutil::check_inputs([&] { return reduce(layer_norm(x, g, b6)); },
                                     {{"x", x}, {"gamma", g}, {"beta", b6}}));
}

TEST_F(OpGradient, Convolutions) {
  Tensor x = random_tensor({4, 9}, rng, -1, 1, true);
  Tensor w = random_tensor({6, 2, 3}, rng, -1, 1, true);
  Tensor b = random_tensor({6}, rng, -1, 1, true);
  expect_pass(testutil::check_inputs([&] { return reduce(conv1d(x, w, b, 2)); }, {{"x", x}, {"w", w}, {"b", b}}));
  Tensor dw = random_tensor({4, 1, 5}, rng, -1, 1, true);
  expect_pass(testutil::check_inputs([&] { return reduce(conv1d(x, dw, Tensor{}, 4)); }, {{"x", x}, {"w", dw}}));
  expect_pass(testutil::check_inputs([&] { return reduce(avg_pool1d(x, 3)); }, {{"x", x}}));
  Tensor x2 = random_tensor({3, 4, 5}, rng, -1, 1, true);
  Tensor w2 = random_tensor({2, 3, 3, 3}, rng, -1, 1, true);
  Tensor b2 = random_tensor({2}, rng, -1, 1, true);
  expect_pass(testutil::check_inputs([&] { return reduce(conv2d(x2, w2, b2)); }, {{"x", x2}, {"w", w2}, {"b", b2}}));
}

TEST_F(OpGradient, SparseMatmul) {
  auto s = std::make_shared<SparseMatrix>();
  s->rows = 4;
  s->cols = 3;
  s->col_start = {0, 2, 2, 5};
  s->row_index = {0, 3, 1, 2, 3};
  s->weight = {0.5, -1.0, 2.0, 0.25, 1.5};
  Tensor d = random_tensor({2, 4}, rng, -1, 1, true);
  const auto y = to_vector(sparse_matmul(d, s));
  // Dense oracle.
  std::vector<double> dense(12, 0.0);
  for (std::size_t j = 0; j < 3; ++j)
    for (std::size_t k = s->col_start[j]; k < s->col_start[j + 1]; ++k) dense[s->row_index[k] * 3 + j] = s->weight[k];
  const auto ref = oracle::matmul(to_vector(d), dense, 2, 4, 3);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-12);
  expect_pass(testutil::check_inputs([&] { return reduce(sparse_matmul(d, s)); }, {{"d", d}}));
}

// --- dropout ----------------------------------------------------------------------

TEST(Dropout, RateZeroIdentityAndInvertedScaling) {
  std::mt19937_64 rng(8);
  const Tensor x = Tensor::full({1000}, 1.0);
  EXPECT_EQ(to_vector(dropout(x, 0.0, rng)), to_vector(x));
  const auto y = to_vector(dropout(x, 0.25, rng));
  double total = 0.0;
  for (double v : y) {
    EXPECT_TRUE(v == 0.0 || std::fabs(v - 1.0 / 0.75) < 1e-12);
    total += v;
  }
  EXPECT_NEAR(total / 1000.0, 1.0, 0.1);
}

// --- Adam --------------------------------------------------------------------------

TEST(Adam, ZeroGradientLeavesEverythingUnchanged) {
  ParameterSet ps;
  Tensor p = ps.add("p", Tensor::from({3}, {1, -2, 3}, true));
  p.zero_grad();
  Adam adam(ps, AdamConfig{});
  adam.step(0);
  EXPECT_EQ(to_vector(p), (std::vector<double>{1, -2, 3}));
  for (double m : adam.state().first_moment[0]) EXPECT_EQ(m, 0.0);
  for (double v : adam.state().second_moment[0]) EXPECT_EQ(v, 0.0);
}

TEST(Adam, FirstStepHandComputed) {
  ParameterSet ps;
  Tensor p = ps.add("p", Tensor::from({2}, {0.5, 0.5}, true));
  p.mutable_grad()[0] = 1.0;
  p.mutable_grad()[1] = -3.0;
  Adam adam(ps, AdamConfig{});
  adam.step(0);
  // m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps).
  EXPECT_NEAR(p.at(0), 0.5 - 1e-3 * 1.0 / (1.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.at(1), 0.5 + 1e-3 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_EQ(adam.state().step, 1u);
}

TEST(Adam, StepDecayEveryTenEpochs) {
  ParameterSet ps;
  ps.add("p", Tensor::zeros({1}, true));
  Adam adam(ps, AdamConfig{});
  EXPECT_DOUBLE_EQ(adam.learning_rate(0), 1e-3);
  EXPECT_DOUBLE_EQ(adam.learning_rate(9), 1e-3);
  EXPECT_NEAR(adam.learning_rate(10), 1e-4, 1e-18);
  EXPECT_NEAR(adam.learning_rate(25), 1e-5, 1e-19);
}

TEST(Adam, NonFiniteGradientAbortsAndNamesParameter) {
  ParameterSet ps;
  Tensor a = ps.add("alpha", Tensor::from({2}, {1, 1}, true));
  Tensor b = ps.add("beta", Tensor::from({2}, {1, 1}, true));
  a.mutable_grad()[0] = 1.0;
  b.mutable_grad()[1] = std::nan("");
  Adam adam(ps, AdamConfig{});
  try {
    adam.step(0);
    FAIL();
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("beta"), std::string::npos);
  }
  EXPECT_EQ(to_vector(a), (std::vector<double>{1, 1}));
  EXPECT_EQ(adam.state().step, 0u);
}

TEST(Adam, StepCounterStrictlyIncreases) {
  ParameterSet ps;
  Tensor p = ps.add("p", Tensor::from({1}, {1.0}, true));
  Adam adam(ps, AdamConfig{});
  std::uint64_t last = adam.state().step;
  for (int i = 0; i < 5; ++i) {
    p.mutable_grad()[0] = 0.1 * i;
    adam.step(i);
    EXPECT_GT(adam.state().step, last);
    last = adam.state().step;
  }
}

// --- grad_check itself ------------------------------------------------------------

TEST(GradCheck, QuadraticIsExact) {
  std::mt19937_64 rng(12);
  Tensor p = random_tensor({7}, rng, -2, 2, true);
  const auto r = testutil::check_inputs([&] { return scale(sum(square(p)), 0.5); }, {{"p", p}});
  EXPECT_TRUE(r.passed);
  EXPECT_LT(r.max_rel_error, 1e-8);
}

TEST(GradCheck, DetachedTensorIsAbsentFromReport) {
  std::mt19937_64 rng(13);
  Tensor p = random_tensor({3}, rng, -1, 1, true);
  Tensor frozen = random_tensor({3}, rng, -1, 1, false);
  const auto r = testutil::check_inputs([&] { return sum(mul(p, frozen)); }, {{"p", p}, {"frozen", frozen}});
  ASSERT_EQ(r.tensors.size(), 1u);
  EXPECT_EQ(r.tensors[0].name, "p");
}

TEST(GradCheck, WrongGradientIsReported) {
  // A custom op whose backward is off by a factor of two.
  Tensor p = Tensor::from({2}, {0.3, -0.4}, true);
  auto broken = [&] {
    std::vector<double> v{p.at(0) * p.at(0) + p.at(1)};
    return make_result({}, v, {p}, [pn = p.node()](Node& o) {
      auto& g = pn->ensure_grad();
      g[0] += o.grad[0] * 4.0 * pn->value[0];
      g[1] += o.grad[0];
    });
  };
  const auto r = testutil::check_inputs(broken, {{"p", p}});
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_param, "p");
  EXPECT_EQ(r.worst_index, 0u);
}

TEST(GradCheck, RequiresF64) {
  PrecisionScope f32(Precision::f32);
  Tensor p = Tensor::from({1}, {1.0}, true);
  EXPECT_THROW(testutil::check_inputs([&] { return sum(p); }, {{"p", p}}), ConfigError);
}

// --- precision and determinism ------------------------------------------------------

TEST(Precision, F32ModeRoundsStoredValues) {
  const Tensor a = Tensor::from({1}, {0.1});
  const Tensor b = Tensor::from({1}, {0.2});
  const double f64 = add(a, b).item();
  double f32;
  {
    PrecisionScope scope(Precision::f32);
    f32 = add(a, b).item();
  }
  EXPECT_EQ(f32, static_cast<double>(static_cast<float>(0.1 + 0.2)));
  EXPECT_NE(f32, f64);
  EXPECT_EQ(current_precision(), Precision::f64);
}

TEST(Determinism, OpsAreBitIdentical) {
  std::mt19937_64 r1(21), r2(21);
  const Tensor x1 = random_tensor({5, 8}, r1), x2 = random_tensor({5, 8}, r2);
  const Tensor w1 = random_tensor({8, 8}, r1), w2 = random_tensor({8, 8}, r2);
  const auto y1 = to_vector(softmax_lastdim(matmul(x1, w1)));
  const auto y2 = to_vector(softmax_lastdim(matmul(x2, w2)));
  EXPECT_EQ(y1, y2);
}

TEST(Tensor, ShapeInvariants) {
  EXPECT_THROW(Tensor::from({2, 3}, {1, 2, 3}), DimensionError);
  Tensor t = Tensor::zeros({2, 3}, true);
  EXPECT_EQ(t.numel(), 6u);
  sum(t).backward();
  ASSERT_TRUE(t.has_grad());
  EXPECT_EQ(t.grad().size(), 6u);
}
