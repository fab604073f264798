#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "atag/errors.hpp"
#include "atag/gcn.hpp"
#include "atag/ops.hpp"
#include "test_util.hpp"

using namespace atag;
using testutil::random_tensor;
using testutil::to_vector;

namespace {

void set_all(Tensor& t, double v) {
  for (double& x : t.mutable_data()) x = v;
}

void set_identity(Tensor& w) {
  const std::size_t n = w.dim(0);
  auto d = w.mutable_data();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < w.dim(1); ++j) d[i * w.dim(1) + j] = i == j ? 1.0 : 0.0;
}

// Features on a dyadic grid so differences and shifts are exact.
Tensor dyadic_features(std::size_t t, std::size_t c, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> k(-64, 64);
  std::vector<double> v(t * c);
  for (auto& x : v) x = k(rng) / 16.0;
  return Tensor::from({t, c}, v);
}

}  // namespace

TEST(BandMask, Definition) {
  const BandMask m = build_mask(5, 2);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) {
      const bool in = (i > j ? i - j : j - i) <= 2;
      EXPECT_EQ(m.inside(i, j), in);
      EXPECT_EQ(m.matrix.at(i, j), in ? 1.0 : 0.0);
      EXPECT_EQ(m.inside(i, j), m.inside(j, i));
    }
  const BandMask id = build_mask(4, 0);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(id.matrix.at(i, j), i == j ? 1.0 : 0.0);
  EXPECT_EQ(ModelConfig{}.delta, 2u);
}

TEST(BandMask, DeltaAtLeastTIsConfigError) {
  EXPECT_THROW(build_mask(4, 4), ConfigError);
  EXPECT_THROW(build_mask(4, 9), ConfigError);
}

TEST(ContentAdjacency, IdenticalFeaturesOrZeroThetaGiveUniformBandRows) {
  const BandMask mask = build_mask(7, 2);
  std::mt19937_64 rng(1);
  const Tensor theta = random_tensor({4}, rng);
  const Tensor same = Tensor::full({7, 4}, 0.3);
  const Tensor varied = random_tensor({7, 4}, rng);
  for (const auto& [f, th] : std::vector<std::pair<Tensor, Tensor>>{{same, theta}, {varied, Tensor::zeros({4})}}) {
    const Tensor a = content_adjacency(f, th, mask);
    for (std::size_t m = 0; m < 7; ++m) {
      std::size_t band = 0;
      for (std::size_t n = 0; n < 7; ++n) band += mask.inside(m, n);
      for (std::size_t n = 0; n < 7; ++n) {
        EXPECT_NEAR(a.at(m, n), mask.inside(m, n) ? 1.0 / static_cast<double>(band) : 0.0, 1e-15);
      }
    }
  }
}

TEST(ContentAdjacency, MatchesDirectEntryOracle) {
  const BandMask mask = build_mask(4, 1);
  const Tensor f = Tensor::from({4, 2}, {0.0, 1.0, 2.0, -1.0, 0.5, 0.5, -3.0, 2.0});
  const Tensor theta = Tensor::from({2}, {0.7, -0.2});
  const Tensor a = content_adjacency(f, theta, mask);
  for (std::size_t m = 0; m < 4; ++m) {
    double z = 0.0;
    std::vector<double> e(4, 0.0);
    for (std::size_t n = 0; n < 4; ++n) {
      if ((m > n ? m - n : n - m) > 1) continue;
      const double logit = std::max(0.0, 0.7 * std::fabs(f.at(m, 0) - f.at(n, 0)) -
                                             0.2 * std::fabs(f.at(m, 1) - f.at(n, 1)));
      e[n] = std::exp(logit);
      z += e[n];
    }
    for (std::size_t n = 0; n < 4; ++n) EXPECT_NEAR(a.at(m, n), e[n] / z, 1e-10);
  }
}

TEST(ContentAdjacency, RowsStochasticBandedAndInputDependent) {
  std::mt19937_64 rng(2);
  const BandMask mask = build_mask(12, 2);
  const Tensor theta = random_tensor({6}, rng);
  const Tensor f1 = random_tensor({12, 6}, rng, -2, 2);
  const Tensor f2 = random_tensor({12, 6}, rng, -2, 2);
  const Tensor a1 = content_adjacency(f1, theta, mask);
  for (std::size_t m = 0; m < 12; ++m) {
    double row = 0.0;
    for (std::size_t n = 0; n < 12; ++n) {
      EXPECT_GE(a1.at(m, n), 0.0);
      if (!mask.inside(m, n)) EXPECT_EQ(a1.at(m, n), 0.0);
      row += a1.at(m, n);
    }
    EXPECT_NEAR(row, 1.0, 1e-6);
  }
  EXPECT_NE(to_vector(a1), to_vector(content_adjacency(f2, theta, mask)));
}

TEST(ContentAdjacency, ExactlyInvariantToConstantShift) {
  std::mt19937_64 rng(3);
  const BandMask mask = build_mask(10, 2);
  const Tensor theta = random_tensor({5}, rng);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor f = dyadic_features(10, 5, rng);
    std::vector<double> shift(5);
    std::uniform_int_distribution<int> k(-32, 32);
    for (auto& s : shift) s = k(rng) / 8.0;
    std::vector<double> moved(f.data().begin(), f.data().end());
    for (std::size_t t = 0; t < 10; ++t)
      for (std::size_t c = 0; c < 5; ++c) moved[t * 5 + c] += shift[c];
    EXPECT_EQ(to_vector(content_adjacency(f, theta, mask)),
              to_vector(content_adjacency(Tensor::from({10, 5}, moved), theta, mask)));
  }
}

TEST(AdaptiveGcn, InitializationNearSmoothingFilter) {
  std::mt19937_64 rng(4);
  ParameterSet ps;
  const GcnParams p = init_gcn(ps, "l.", 9, 4, 4, 2, LocalVariant::adaptive, rng);
  for (std::size_t m = 0; m < 9; ++m)
    for (std::size_t n = 0; n < 9; ++n) {
      if (p.mask.inside(m, n)) EXPECT_NEAR(p.a_a.at(m, n), 0.2, 0.01 + 1e-15);
      else EXPECT_EQ(p.a_a.at(m, n), 0.0);
    }
  EXPECT_TRUE(ps.contains("l.a_a"));
  EXPECT_TRUE(ps.contains("l.theta"));
  EXPECT_TRUE(ps.contains("l.w"));
}

TEST(AdaptiveGcn, UniformAdjacencyAveragesBand) {
  std::mt19937_64 rng(5);
  ParameterSet ps;
  GcnParams p = init_gcn(ps, "l.", 7, 3, 3, 2, LocalVariant::adaptive, rng);
  set_all(p.a_a, 0.0);
  set_identity(p.w);
  // Identical snippets: A_d is the uniform band average, and the aggregate
  // of identical rows is that row.
  std::vector<double> row{0.4, -0.3, 1.2};
  std::vector<double> v;
  for (int t = 0; t < 7; ++t) v.insert(v.end(), row.begin(), row.end());
  const LocalOutput out = adaptive_gcn_forward(Tensor::from({7, 3}, v), p);
  for (std::size_t m = 0; m < 7; ++m) {
    double band = 0.0;
    for (std::size_t n = 0; n < 7; ++n) band += p.mask.inside(m, n);
    for (std::size_t n = 0; n < 7; ++n) EXPECT_NEAR(out.adjacency.at(m, n), p.mask.inside(m, n) / band, 1e-15);
    for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(out.features.at(m, c), std::max(0.0, row[c]) + row[c], 1e-12);
  }
}

TEST(AdaptiveGcn, SelfLoopOnlyIsPointwise) {
  std::mt19937_64 rng(6);
  ParameterSet ps;
  GcnParams p = init_gcn(ps, "l.", 6, 4, 4, 0, LocalVariant::adaptive, rng);
  set_all(p.a_a, 0.0);
  const Tensor f = random_tensor({6, 4}, rng);
  const LocalOutput out = adaptive_gcn_forward(f, p);
  for (std::size_t m = 0; m < 6; ++m)
    for (std::size_t n = 0; n < 6; ++n) EXPECT_EQ(out.content.at(m, n), m == n ? 1.0 : 0.0);
  const Tensor want = add(relu(matmul(f, transpose(p.w))), f);
  for (std::size_t i = 0; i < want.numel(); ++i) EXPECT_NEAR(out.features.data()[i], want.data()[i], 1e-12);
}

TEST(AdaptiveGcn, AdjacencyZeroOutsideBandEvenWithLargeLearnedValues) {
  std::mt19937_64 rng(7);
  ParameterSet ps;
  GcnParams p = init_gcn(ps, "l.", 10, 4, 4, 2, LocalVariant::adaptive, rng);
  // A trained A_a is unconstrained; fill every entry, band or not.
  for (double& v : p.a_a.mutable_data()) v = std::uniform_real_distribution<double>(-5, 5)(rng);
  for (int trial = 0; trial < 10; ++trial) {
    const LocalOutput out = adaptive_gcn_forward(random_tensor({10, 4}, rng, -3, 3), p);
    for (std::size_t m = 0; m < 10; ++m)
      for (std::size_t n = 0; n < 10; ++n)
        if (!p.mask.inside(m, n)) EXPECT_EQ(out.adjacency.at(m, n), 0.0);
  }
}

TEST(AdaptiveGcn, LengthMismatchIsConfigError) {
  std::mt19937_64 rng(8);
  ParameterSet ps;
  const GcnParams p = init_gcn(ps, "l.", 8, 4, 4, 2, LocalVariant::adaptive, rng);
  EXPECT_THROW(local_variant_forward(random_tensor({9, 4}, rng), p), ConfigError);
}

TEST(AdaptiveGcn, GradientCheck) {
  std::mt19937_64 rng(9);
  ParameterSet ps;
  const GcnParams p = init_gcn(ps, "local.", 8, 8, 8, 2, LocalVariant::adaptive, rng);
  Tensor f = random_tensor({8, 8}, rng, -1, 1, true);
  const Tensor w = random_tensor({8, 8}, rng);
  auto entries = ps.entries();
  entries.push_back({"input", f});
  GradCheckOptions opt;
  opt.fallback_steps = {1e-6, 1e-7};
  const auto r = grad_check([&] { return sum(mul(adaptive_gcn_forward(f, p).features, w)); }, entries, opt);
  EXPECT_TRUE(r.passed) << r.worst_param << " " << r.max_rel_error;
  EXPECT_EQ(r.tensors.size(), 4u);
}

TEST(LocalVariants, ConvWithAveragingKernelEqualsGeneralGcnInside) {
  std::mt19937_64 rng(10);
  const std::size_t t = 11, c = 4, delta = 2;
  ParameterSet ps;
  GcnParams gen = init_gcn(ps, "g.", t, c, c, delta, LocalVariant::general_gcn, rng);
  GcnParams conv = init_gcn(ps, "c.", t, c, c, delta, LocalVariant::conv, rng);
  // conv_w[o][i][k] = W[o][i] / (2 delta + 1).
  auto cw = conv.conv_w.mutable_data();
  for (std::size_t o = 0; o < c; ++o)
    for (std::size_t i = 0; i < c; ++i)
      for (std::size_t k = 0; k < 2 * delta + 1; ++k) cw[(o * c + i) * (2 * delta + 1) + k] = gen.w.at(o, i) / 5.0;
  const Tensor f = random_tensor({t, c}, rng);
  const Tensor a = local_variant_forward(f, gen).features;
  const Tensor b = local_variant_forward(f, conv).features;
  for (std::size_t s = delta; s + delta < t; ++s)
    for (std::size_t k = 0; k < c; ++k) EXPECT_NEAR(a.at(s, k), b.at(s, k), 1e-12);
}

TEST(LocalVariants, SelfAttentionRowsStochasticWithinBand) {
  std::mt19937_64 rng(11);
  ParameterSet ps;
  const GcnParams p = init_gcn(ps, "s.", 9, 4, 4, 2, LocalVariant::self_attn_gcn, rng);
  const LocalOutput out = local_variant_forward(random_tensor({9, 4}, rng, -2, 2), p);
  for (std::size_t m = 0; m < 9; ++m) {
    double row = 0.0;
    for (std::size_t n = 0; n < 9; ++n) {
      if (!p.mask.inside(m, n)) EXPECT_EQ(out.adjacency.at(m, n), 0.0);
      row += out.adjacency.at(m, n);
    }
    EXPECT_NEAR(row, 1.0, 1e-6);
  }
}

TEST(LocalVariants, GeneralGcnUsesFixedRowNormalizedBand) {
  std::mt19937_64 rng(12);
  ParameterSet ps;
  const GcnParams p = init_gcn(ps, "g.", 6, 4, 4, 1, LocalVariant::general_gcn, rng);
  const LocalOutput a = local_variant_forward(random_tensor({6, 4}, rng), p);
  const LocalOutput b = local_variant_forward(random_tensor({6, 4}, rng), p);
  EXPECT_EQ(to_vector(a.adjacency), to_vector(b.adjacency));
  EXPECT_NEAR(a.adjacency.at(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(a.adjacency.at(3, 2), 1.0 / 3.0, 1e-15);
}

TEST(LocalVariants, AllShapeCompatibleAndDifferentiable) {
  for (LocalVariant v : {LocalVariant::adaptive, LocalVariant::general_gcn, LocalVariant::self_attn_gcn,
                         LocalVariant::conv}) {
    std::mt19937_64 rng(13);
    ParameterSet ps;
    const GcnParams p = init_gcn(ps, "x.", 8, 8, 12, 2, v, rng);
    Tensor f = random_tensor({8, 8}, rng, -1, 1, true);
    EXPECT_EQ(local_variant_forward(f, p).features.shape(), (Shape{8, 12})) << to_string(v);
    const Tensor w = random_tensor({8, 12}, rng);
    auto entries = ps.entries();
    entries.push_back({"input", f});
    GradCheckOptions opt;
    opt.fallback_steps = {1e-6, 1e-7};
    const auto r = grad_check([&] { return sum(mul(local_variant_forward(f, p).features, w)); }, entries, opt);
    EXPECT_TRUE(r.passed) << to_string(v) << ": " << r.worst_param << " " << r.max_rel_error;
  }
}

TEST(LocalVariants, ParseNames) {
  EXPECT_EQ(parse_local_variant("adaptive"), LocalVariant::adaptive);
  EXPECT_EQ(parse_local_variant("general-gcn"), LocalVariant::general_gcn);
  EXPECT_EQ(parse_local_variant("self-attn-gcn"), LocalVariant::self_attn_gcn);
  EXPECT_EQ(parse_local_variant("conv"), LocalVariant::conv);
  EXPECT_THROW(parse_local_variant("gat"), ConfigError);
}
