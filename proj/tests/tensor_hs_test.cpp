#include "ssv/tensor_hs.hpp"

#include <gtest/gtest.h>

namespace ssv {
namespace {

GTEST_TEST(TensorHsTest, PureTensor) {
  Vec e1 = Vec::Zero(2), e2 = Vec::Zero(2);
  e1(0) = 1.0;
  e2(1) = 1.0;
  Mat u = hsVec(kron(e1, e2), 2, 2);
  Mat expect = Mat::Zero(2, 2);
  expect(0, 1) = 1.0;
  EXPECT_EQ((u - expect).norm(), 0.0);

  CounterRng rng(1);
  Vec h = randomComplex(3, 1, rng), k = randomComplex(4, 1, rng);
  EXPECT_LT((hsVec(kron(h, k), 3, 4) - h * k.transpose()).norm(), 1e-14);
  EXPECT_THROW(hsVec(h, 2, 2), InputError);
}

GTEST_TEST(TensorHsTest, Unitarity) {
  CounterRng rng(2);
  for (int dh : {2, 3, 5})
    for (int dk : {2, 3, 5})
      for (int t = 0; t < 100; ++t) {
        Vec x = randomComplex(dh * dk, 1, rng), y = randomComplex(dh * dk, 1, rng);
        const cplx hs = (hsVec(x, dh, dk).adjoint() * hsVec(y, dh, dk)).trace();
        EXPECT_LT(std::abs(hs - x.dot(y)), 1e-12 * std::max(1.0, x.norm() * y.norm()));
        EXPECT_EQ((hsUnvec(hsVec(x, dh, dk)) - x).norm(), 0.0);
      }
}

GTEST_TEST(TensorHsTest, Intertwining) {
  CounterRng rng(3);
  for (int t = 0; t < 200; ++t) {
    Mat X = randomComplex(3, 2, rng), Y = randomComplex(4, 5, rng);
    Vec h = randomComplex(2 * 5, 1, rng);
    Mat lhs = hsVec(kron(X, Y) * h, 3, 4);
    Mat rhs = X * hsVec(h, 2, 5) * transposeOp(Y);
    EXPECT_LT((lhs - rhs).norm(), 1e-12 * std::max(1.0, lhs.norm()));
  }
  Mat y = randomComplex(3, 3, rng);
  EXPECT_EQ((transposeOp(y) - y.transpose()).norm(), 0.0);
}

GTEST_TEST(TensorHsTest, DouglasExamples) {
  Vec e1 = Vec::Zero(2), e2 = Vec::Zero(2);
  e1(0) = 1.0;
  e2(1) = 1.0;
  Mat X = douglasSolve(kron(e1, e1), kron(e2, e1), 2, 2, 2);
  Mat expect = e2 * e1.adjoint();
  EXPECT_LT((X - expect).norm(), 1e-14);
  EXPECT_NEAR(opNorm(X), 1.0, 1e-14);

  CounterRng rng(4);
  Vec p = randomComplex(6, 1, rng);
  Mat zero = douglasSolve(p, Vec::Zero(6), 3, 3, 2);
  EXPECT_EQ(zero.norm(), 0.0);
}

GTEST_TEST(TensorHsTest, DouglasRoundTrip) {
  CounterRng rng(5);
  for (int t = 0; t < 100; ++t) {
    const int dh = 2 + t % 3, dk = 1 + t % 4, d0 = 1 + t % 3;
    Mat X0 = clipToContraction(randomComplex(dk, dh, rng) * 2.0);
    Vec p = randomComplex(dh * d0, 1, rng);
    Vec q = kron(X0, identity(d0)) * p;
    Mat X = douglasSolve(p, q, dh, dk, d0);
    EXPECT_LE((kron(X, identity(d0)) * p - q).norm(), 1e-8 * p.norm());
    EXPECT_LE(opNorm(X), 1.0 + 1e-10);
  }
}

GTEST_TEST(TensorHsTest, DouglasCriterion) {
  Vec p = Vec::Zero(2), q = Vec::Zero(2);
  p(0) = 1.0;
  q(0) = 2.0;
  try {
    douglasSolve(p, q, 2, 2, 1);
    FAIL() << "expected CriterionViolated";
  } catch (const CriterionViolated& e) {
    EXPECT_NEAR(e.violatingEigenvalue, 3.0, 1e-12);
  }
}

}  // namespace
}  // namespace ssv
