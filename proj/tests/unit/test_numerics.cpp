// Copyright 2026 The gnmt-desk Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "gnmt/gradcheck.hpp"
#include "gnmt/lstm.hpp"
#include "gnmt/tensor.hpp"

namespace gnmt {
namespace {

Tensor2D random_tensor(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Tensor2D t(r, c);
  for (double& x : t.data()) x = rng.uniform(-scale, scale);
  return t;
}

LstmCellParams random_cell(Rng& rng, std::size_t in, std::size_t h, double scale = 0.8) {
  return {random_tensor(rng, 4 * h, in, scale), random_tensor(rng, 4 * h, h, scale), random_tensor(rng, 4 * h, 1, scale)};
}

TEST(Matmul, IdentityLeavesMatrixUnchanged) {
  const Tensor2D m = Tensor2D::from_rows({{1, 2, 3}, {4, 5, 6}, {7, 8, 9}});
  EXPECT_EQ(matmul(Tensor2D::identity(3), m), m);
}

TEST(Matmul, RowTimesColumn) {
  const Tensor2D r = matmul(Tensor2D::from_rows({{1, 2}}), Tensor2D::from_rows({{3}, {4}}));
  ASSERT_EQ(r.rows(), 1u);
  ASSERT_EQ(r.cols(), 1u);
  EXPECT_EQ(r(0, 0), 11.0);
}

TEST(Matmul, ZeroAnnihilates) {
  Rng rng(1);
  const Tensor2D m = random_tensor(rng, 3, 4);
  EXPECT_EQ(matmul(Tensor2D(2, 3), m), Tensor2D(2, 4));
}

TEST(Matmul, DimensionMismatchThrows) { EXPECT_THROW(matmul(Tensor2D(2, 3), Tensor2D(2, 3)), ShapeError); }

TEST(Matmul, AssociativeOnRandomInstances) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = [&] { return 1 + static_cast<std::size_t>(rng.below(8)); };
    const std::size_t a = d(), b = d(), c = d(), e = d();
    const Tensor2D x = random_tensor(rng, a, b), y = random_tensor(rng, b, c), z = random_tensor(rng, c, e);
    const Tensor2D l = matmul(matmul(x, y), z), r = matmul(x, matmul(y, z));
    for (std::size_t i = 0; i < l.size(); ++i) EXPECT_NEAR(l[i], r[i], 1e-9);
  }
}

TEST(Softmax, SymmetricInputsGiveUniform) {
  const Tensor2D p2 = softmax(Tensor2D::row_vector({0, 0}));
  EXPECT_DOUBLE_EQ(p2[0], 0.5);
  EXPECT_DOUBLE_EQ(p2[1], 0.5);
  const Tensor2D p4 = softmax(Tensor2D::row_vector({3.7, 3.7, 3.7, 3.7}));
  for (double p : p4.data()) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, LargeLogitDoesNotOverflow) {
  const Tensor2D p = softmax(Tensor2D::row_vector({1000, 0}));
  // Reference in extended precision with the exponents shifted by hand:
  // p0 = 1 / (1 + e^-1000), p1 = e^-1000 / (1 + e^-1000).
  const long double tail = std::exp(-1000.0L);
  EXPECT_EQ(p[0], static_cast<double>(1.0L / (1.0L + tail)));
  EXPECT_EQ(p[1], static_cast<double>(tail / (1.0L + tail)));
  EXPECT_TRUE(p.all_finite());
}

TEST(Softmax, EmptyInputThrows) { EXPECT_THROW(softmax(Tensor2D(1, 0)), ShapeError); }

TEST(Softmax, SumsToOneAndIgnoresShift) {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(12);
    Tensor2D v = random_tensor(rng, 1, n, 30.0);
    const Tensor2D p = softmax(v);
    double sum = 0.0;
    for (double x : p.data()) {
      EXPECT_GT(x, 0.0 - 1e-300);
      sum += x;
    }
    EXPECT_NEAR(sum, 1.0, 1e-6);
    const double shift = rng.uniform(-50, 50);
    for (double& x : v.data()) x += shift;
    const Tensor2D q = softmax(v);
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
  }
}

// Straight-line evaluation of one cell step, one unit at a time.
LstmState scalar_reference(const LstmCellParams& p, const LstmState& prev, const Tensor2D& x) {
  const std::size_t h = p.hidden_size(), in = p.input_size();
  LstmState out = LstmState::zeros(h);
  for (std::size_t k = 0; k < h; ++k) {
    double z[4];
    for (int g = 0; g < 4; ++g) {
      const std::size_t r = g * h + k;
      double acc = p.bias(r, 0);
      for (std::size_t j = 0; j < in; ++j) acc += p.w_ih(r, j) * x(0, j);
      for (std::size_t j = 0; j < h; ++j) acc += p.w_hh(r, j) * prev.m(0, j);
      z[g] = acc;
    }
    const double i = 1.0 / (1.0 + std::exp(-z[0]));
    const double cand = std::tanh(z[1]);
    const double f = 1.0 / (1.0 + std::exp(-z[2]));
    const double o = 1.0 / (1.0 + std::exp(-z[3]));
    out.c(0, k) = prev.c(0, k) * f + cand * i;
    out.m(0, k) = out.c(0, k) * o;
  }
  return out;
}

TEST(LstmForward, ZeroParamsGiveZeroOutput) {
  Rng rng(4);
  const LstmCellParams p = LstmCellParams::zeros(3, 5);
  const LstmState s = lstm_cell_forward(p, LstmState::zeros(5), random_tensor(rng, 1, 3));
  for (double v : s.m.data()) EXPECT_EQ(v, 0.0);
  for (double v : s.c.data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmForward, SaturatedGatesPassMemoryThrough) {
  Rng rng(5);
  const std::size_t h = 3;
  LstmCellParams p = LstmCellParams::zeros(2, h);
  for (std::size_t k = 0; k < h; ++k) {
    p.bias(k, 0) = -60.0;         // input gate closed
    p.bias(2 * h + k, 0) = 60.0;  // forget gate open
  }
  LstmState prev{random_tensor(rng, 1, h), random_tensor(rng, 1, h)};
  const LstmState s = lstm_cell_forward(p, prev, random_tensor(rng, 1, 2));
  for (std::size_t k = 0; k < h; ++k) EXPECT_NEAR(s.c(0, k), prev.c(0, k), 1e-15);
}

TEST(LstmForward, MatchesScalarReference) {
  Rng rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const LstmCellParams p = random_cell(rng, 3, 2);
    const LstmState prev{random_tensor(rng, 1, 2), random_tensor(rng, 1, 2)};
    const Tensor2D x = random_tensor(rng, 1, 3);
    const LstmState got = lstm_cell_forward(p, prev, x);
    const LstmState want = scalar_reference(p, prev, x);
    for (std::size_t k = 0; k < 2; ++k) {
      EXPECT_NEAR(got.c(0, k), want.c(0, k), 1e-14);
      EXPECT_NEAR(got.m(0, k), want.m(0, k), 1e-14);
    }
  }
}

TEST(LstmForward, ShapeMismatchThrows) {
  const LstmCellParams p = LstmCellParams::zeros(3, 2);
  EXPECT_THROW(lstm_cell_forward(p, LstmState::zeros(2), Tensor2D(1, 4)), ShapeError);
  EXPECT_THROW(lstm_cell_forward(p, LstmState::zeros(3), Tensor2D(1, 3)), ShapeError);
}

TEST(LstmForward, ClippedMemoryStaysInRange) {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const double delta = rng.uniform(0.05, 2.0);
    const LstmCellParams p = random_cell(rng, 4, 3, 3.0);
    LstmState s{random_tensor(rng, 1, 3, delta), random_tensor(rng, 1, 3)};
    for (int t = 0; t < 5; ++t) {
      s = lstm_cell_forward(p, s, random_tensor(rng, 1, 4, 3.0), delta);
      for (double c : s.c.data()) EXPECT_LE(std::abs(c), delta);
    }
  }
}

// Scalar loss L = sum(a * c) + sum(b * m) for fixed random weights a, b.
struct CellLoss {
  Tensor2D a, b;
  double operator()(const LstmState& s) const {
    double l = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) l += a[k] * s.c[k] + b[k] * s.m[k];
    return l;
  }
};

TEST(LstmBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  const LstmCellParams p = random_cell(rng, 3, 2);
  LstmCache cache;
  lstm_cell_forward(p, {random_tensor(rng, 1, 2), random_tensor(rng, 1, 2)}, random_tensor(rng, 1, 3), std::nullopt,
                    &cache);
  const LstmGrads g = lstm_cell_backward(p, cache, LstmState::zeros(2));
  for (const Tensor2D* t : {&g.params.w_ih, &g.params.w_hh, &g.params.bias, &g.prev.c, &g.prev.m, &g.x})
    for (double v : t->data()) EXPECT_EQ(v, 0.0);
}

TEST(LstmBackward, MissingCacheThrows) {
  const LstmCellParams p = LstmCellParams::zeros(1, 1);
  EXPECT_THROW(lstm_cell_backward(p, LstmCache{}, LstmState::zeros(1)), UsageError);
}

TEST(LstmBackward, MatchesFiniteDifferences) {
  Rng rng(9);
  for (std::size_t h : {1u, 2u, 5u}) {
    LstmCellParams p = random_cell(rng, 3, h);
    LstmState prev{random_tensor(rng, 1, h), random_tensor(rng, 1, h)};
    Tensor2D x = random_tensor(rng, 1, 3);
    const CellLoss loss{random_tensor(rng, 1, h), random_tensor(rng, 1, h)};

    LstmCache cache;
    lstm_cell_forward(p, prev, x, std::nullopt, &cache);
    const LstmGrads g = lstm_cell_backward(p, cache, {loss.a, loss.b});

    auto f = [&] { return loss(lstm_cell_forward(p, prev, x)); };
    auto check = [&](Tensor2D& value, const Tensor2D& analytic) {
      for (std::size_t i = 0; i < value.size(); ++i) {
        const double numeric = central_difference(f, value[i], 1e-4);
        EXPECT_LT(relative_error(analytic[i], numeric, 1e-6), 1e-4) << "h=" << h << " coord " << i;
      }
    };
    check(p.w_ih, g.params.w_ih);
    check(p.w_hh, g.params.w_hh);
    check(p.bias, g.params.bias);
    check(prev.c, g.prev.c);
    check(prev.m, g.prev.m);
    check(x, g.x);
  }
}

TEST(LstmBackward, ClampedCoordinateBlocksGradient) {
  // Unit 0 is driven far past delta; unit 1 stays inside.
  const double delta = 0.5;
  LstmCellParams p = LstmCellParams::zeros(1, 2);
  p.bias(0, 0) = 10.0;       // i
  p.bias(2, 0) = 10.0;       // i' of unit 0 -> tanh ~ 1
  p.bias(2 * 2 + 0, 0) = 10.0;  // f
  p.bias(3 * 2 + 0, 0) = 1.0;
  p.bias(1, 0) = 0.1;
  p.bias(3, 0) = 0.2;
  p.w_ih(0, 0) = 0.3;
  const LstmState prev{Tensor2D::row_vector({0.45, 0.1}), Tensor2D::row_vector({0.2, -0.3})};
  LstmCache cache;
  const LstmState s = lstm_cell_forward(p, prev, Tensor2D::row_vector({0.7}), delta, &cache);
  ASSERT_EQ(s.c(0, 0), delta);
  ASSERT_LT(std::abs(s.c(0, 1)), delta);
  const LstmGrads g = lstm_cell_backward(p, cache, {Tensor2D::row_vector({1.0, 0.0}), Tensor2D(1, 2)});
  EXPECT_EQ(g.prev.c(0, 0), 0.0);
  EXPECT_EQ(g.params.bias(0, 0), 0.0);
  EXPECT_EQ(g.x(0, 0), 0.0);
}

TEST(ClipGlobalNorm, SmallNormUnchanged) {
  // Norm of (1.8, 2.4) is 3.
  const auto out = clip_global_norm({Tensor2D::row_vector({1.8}), Tensor2D::row_vector({2.4})}, 5.0);
  EXPECT_EQ(out[0][0], 1.8);
  EXPECT_EQ(out[1][0], 2.4);
}

TEST(ClipGlobalNorm, LargeNormHalved) {
  // Norm of (6, 8) is 10.
  const auto out = clip_global_norm({Tensor2D::row_vector({6.0, 0.0}), Tensor2D::row_vector({8.0})}, 5.0);
  EXPECT_DOUBLE_EQ(out[0][0], 3.0);
  EXPECT_DOUBLE_EQ(out[1][0], 4.0);
}

TEST(ClipGlobalNorm, ZeroGradientsUnchanged) {
  const auto out = clip_global_norm({Tensor2D(2, 2), Tensor2D(1, 3)}, 5.0);
  for (const auto& t : out)
    for (double v : t.data()) EXPECT_EQ(v, 0.0);
}

TEST(ClipGlobalNorm, NormNeverExceedsCap) {
  Rng rng(10);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Tensor2D> g;
    for (int k = 0; k < 3; ++k) g.push_back(random_tensor(rng, 1 + rng.below(4), 1 + rng.below(4), rng.uniform(0, 20)));
    double sq = 0.0;
    for (const auto& t : clip_global_norm(g, 5.0)) sq += sum_of_squares(t.data());
    EXPECT_LE(std::sqrt(sq), 5.0 + 1e-9);
  }
}

TEST(UniformInit, EntriesInRange) {
  const Tensor2D t = uniform_init(50, 40, 11);
  for (double v : t.data()) {
    EXPECT_GE(v, -0.04);
    EXPECT_LE(v, 0.04);
  }
}

TEST(UniformInit, DeterministicPerSeed) {
  EXPECT_EQ(uniform_init(7, 3, 12), uniform_init(7, 3, 12));
  EXPECT_NE(uniform_init(7, 3, 12), uniform_init(7, 3, 13));
}

TEST(UniformInit, MeanNearZero) {
  // sd of one draw is 0.04 / sqrt(3); the mean of 1e4 draws has sd 2.3e-4,
  // so 0.004 is a > 17 sigma bound.
  const Tensor2D t = uniform_init(100, 100, 14);
  const double mean = std::accumulate(t.data().begin(), t.data().end(), 0.0) / static_cast<double>(t.size());
  EXPECT_LT(std::abs(mean), 0.004);
}

}  // namespace
}  // namespace gnmt
