#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "fuselstm/activations.hpp"
#include "fuselstm/matrix.hpp"
#include "fuselstm/rng.hpp"

using namespace fuselstm;

TEST(Sigmoid, ZeroMapsToHalf) {
  const Vector y = sigmoid({0.0});
  EXPECT_DOUBLE_EQ(y[0], 0.5);
}

TEST(Sigmoid, SymmetricPairSumsToOne) {
  const Vector y = sigmoid({3.7, -3.7});
  EXPECT_NEAR(y[0] + y[1], 1.0, 1e-15);
}

TEST(Sigmoid, MatchesHighPrecisionReference) {
  // 1/(1+e^-2) evaluated at 40 decimal digits: 0.8807970779778824440...
  const Vector y = sigmoid({2.0});
  EXPECT_NEAR(y[0], 0.8807970779778824, 1e-15);
}

TEST(Sigmoid, StrictlyInsideUnitIntervalAndMonotone) {
  RngStream stream(7);
  Vector x(512);
  for (auto& v : x) v = stream.next_uniform(-30.0, 30.0);
  std::sort(x.begin(), x.end());
  const Vector y = sigmoid(x);
  for (std::size_t i = 0; i < y.size(); ++i) {
    EXPECT_GT(y[i], 0.0);
    EXPECT_LT(y[i], 1.0);
    if (i > 0) EXPECT_GE(y[i], y[i - 1]);
  }
}

TEST(TanhAct, ZeroAndOddness) {
  EXPECT_DOUBLE_EQ(tanh_act({0.0})[0], 0.0);
  EXPECT_DOUBLE_EQ(tanh_act({-0.3})[0], -tanh_act({0.3})[0]);
}

TEST(TanhAct, SigmoidIdentityAtOne) {
  // tanh(x) = 2*sigmoid(2x) - 1
  const double lhs = tanh_act({1.0})[0];
  const double rhs = 2.0 * sigmoid({2.0})[0] - 1.0;
  EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(TanhAct, SigmoidIdentityOnRandomPoints) {
  RngStream stream(11);
  double max_err = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double x = stream.next_uniform(-10.0, 10.0);
    const double diff = std::fabs(tanh_act({x})[0] - (2.0 * sigmoid({2.0 * x})[0] - 1.0));
    max_err = std::max(max_err, diff);
  }
  EXPECT_LT(max_err, 1e-12);
}

TEST(TanhAct, Monotone) {
  RngStream stream(13);
  Vector x(256);
  for (auto& v : x) v = stream.next_uniform(-8.0, 8.0);
  std::sort(x.begin(), x.end());
  const Vector y = tanh_act(x);
  for (std::size_t i = 1; i < y.size(); ++i) EXPECT_GE(y[i], y[i - 1]);
}

TEST(Affine, IdentityAndZeroWeight) {
  Matrix eye(2, 2);
  eye(0, 0) = 1.0;
  eye(1, 1) = 1.0;
  EXPECT_EQ(affine(eye, {3.0, 4.0}, {0.0, 0.0}), (Vector{3.0, 4.0}));

  Matrix zero(2, 3);
  EXPECT_EQ(affine(zero, {9.0, 9.0, 9.0}, {1.0, 2.0}), (Vector{1.0, 2.0}));
}

TEST(Affine, HandComputedProduct) {
  Matrix w(2, 2);
  w(0, 0) = 1.0;
  w(0, 1) = 2.0;
  w(1, 0) = 3.0;
  w(1, 1) = 4.0;
  const Vector y = affine(w, {1.0, 1.0}, {0.5, 0.5});
  EXPECT_DOUBLE_EQ(y[0], 3.5);
  EXPECT_DOUBLE_EQ(y[1], 7.5);
}

TEST(Affine, MismatchNamesShapes) {
  Matrix w(2, 3);
  try {
    affine(w, {1.0, 2.0}, {0.0, 0.0});
    FAIL() << "expected an exception";
  } catch (const std::invalid_argument& e) {
    EXPECT_NE(std::string(e.what()).find("2x3"), std::string::npos) << e.what();
  }
}

TEST(Affine, Linearity) {
  RngStream stream(17);
  Matrix w(3, 4);
  for (auto& v : w.data) v = stream.next_uniform(-2.0, 2.0);
  const Vector zero3(3, 0.0);
  for (int trial = 0; trial < 20; ++trial) {
    Vector x(4), y(4);
    for (auto& v : x) v = stream.next_uniform(-2.0, 2.0);
    for (auto& v : y) v = stream.next_uniform(-2.0, 2.0);
    const double a = stream.next_uniform(-2.0, 2.0);
    const double b = stream.next_uniform(-2.0, 2.0);
    Vector combo(4);
    for (int i = 0; i < 4; ++i) combo[i] = a * x[i] + b * y[i];
    const Vector lhs = affine(w, combo, zero3);
    const Vector rx = affine(w, x, zero3);
    const Vector ry = affine(w, y, zero3);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(lhs[i], a * rx[i] + b * ry[i], 1e-12);
  }
}

TEST(RngStream, SameSeedSameSequence) {
  RngStream a(123456), b(123456);
  for (int i = 0; i < 100; ++i) EXPECT_EQ(a.next_u64(), b.next_u64());
}

TEST(RngStream, DeriveSeedDistinctForDistinctTags) {
  const std::uint64_t base = 99;
  for (std::uint64_t t1 = 0; t1 < 50; ++t1)
    for (std::uint64_t t2 = t1 + 1; t2 < 50; ++t2)
      EXPECT_NE(derive_seed(base, t1), derive_seed(base, t2));
}

TEST(SampleGaussian, Deterministic) {
  RngStream a(2024), b(2024);
  EXPECT_EQ(sample_gaussian(a, 4), sample_gaussian(b, 4));
}

TEST(SampleGaussian, MomentsMatchStandardNormal) {
  RngStream stream(42);
  const int n = 100000;
  const Vector draws = sample_gaussian(stream, n);
  double mean = 0.0;
  for (double v : draws) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : draws) var += (v - mean) * (v - mean);
  var /= n - 1;
  EXPECT_NEAR(mean, 0.0, 0.02);
  EXPECT_NEAR(var, 1.0, 0.03);
}

TEST(SampleGaussian, RejectsNonPositiveCount) {
  RngStream stream(1);
  EXPECT_THROW(sample_gaussian(stream, 0), std::invalid_argument);
}

TEST(GlorotUniform, BoundAndDeterminism) {
  RngStream a(5), b(5);
  const Matrix m1 = glorot_uniform(a, 3, 3);  // limit sqrt(6/6) = 1
  const Matrix m2 = glorot_uniform(b, 3, 3);
  EXPECT_EQ(m1.data, m2.data);
  for (double v : m1.data) EXPECT_LE(std::fabs(v), 1.0);
}

TEST(GlorotUniform, EmpiricalMaxApproachesLimit) {
  // rows=2, cols=4 also has limit sqrt(6/6) = 1
  RngStream stream(6);
  double max_abs = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const Matrix m = glorot_uniform(stream, 2, 4);
    for (double v : m.data) max_abs = std::max(max_abs, std::fabs(v));
  }
  EXPECT_LE(max_abs, 1.0);
  EXPECT_GT(max_abs, 0.99);
}

TEST(Softmax, UniformAndShiftInvariant) {
  const Vector u = softmax({0.0, 0.0, 0.0, 0.0});
  for (double v : u) EXPECT_NEAR(v, 0.25, 1e-15);

  const Vector p = softmax({0.3, -1.2, 2.0});
  const Vector q = softmax({0.3 + 7.5, -1.2 + 7.5, 2.0 + 7.5});
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p[i], q[i], 1e-12);
}

TEST(Softmax, MatchesHighPrecisionReference) {
  // e^1/(e^1+e^2) = 0.2689414213699951, e^2/(e^1+e^2) = 0.7310585786300049
  const Vector p = softmax({1.0, 2.0});
  EXPECT_NEAR(p[0], 0.2689414213699951, 1e-15);
  EXPECT_NEAR(p[1], 0.7310585786300049, 1e-15);
}
