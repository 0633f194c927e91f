#include "ssv/mu.hpp"

#include <gtest/gtest.h>

namespace ssv {
namespace {

Mat mat2(cplx a, cplx b, cplx c, cplx d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

StructureGraph scalars(int count) {
  std::vector<Component> c;
  for (int k = 0; k < count; ++k) c.push_back(fullBlock("d" + std::to_string(k), 1, 1));
  return StructureGraph(c);
}

GTEST_TEST(MuTest, ExactSpecial) {
  StructureGraph full({fullBlock("a", 2, 2)});
  EXPECT_NEAR(*muExactSpecial(full, mat2(2.0, 0.0, 0.0, 0.5)), 2.0, 1e-14);
  StructureGraph rep({scalarBlock("a", 2)});
  EXPECT_NEAR(*muExactSpecial(rep, mat2(0.0, 4.0, 0.25, 0.0)), 1.0, 1e-12);
  EXPECT_FALSE(muExactSpecial(scalars(2), Mat::Identity(2, 2)).has_value());
}

GTEST_TEST(MuTest, FrontierCounts) {
  auto fr = frontierCounts(StructureGraph({scalarBlock("a", 2), fullBlock("b", 2, 1)}));
  EXPECT_EQ(fr.s, 1);
  EXPECT_EQ(fr.f, 1);
  EXPECT_TRUE(fr.tightExpected());
  EXPECT_FALSE(frontierCounts(scalars(4)).tightExpected());
  auto mixed = frontierCounts(StructureGraph({Component{"m", 2, 2, 2}}));
  EXPECT_EQ(mixed.f, 1);
  EXPECT_FALSE(mixed.tightExpected());
}

GTEST_TEST(MuTest, LowerExamples) {
  EXPECT_EQ(muLowerSearch(scalars(2), Mat::Zero(2, 2)).muLower, 0.0);

  auto id = muLowerSearch(scalars(2), Mat::Identity(2, 2), {8, 1});
  EXPECT_NEAR(id.muLower, 1.0, 1e-9);
  ASSERT_TRUE(id.cert.has_value());
  EXPECT_TRUE(certificateHolds(Mat::Identity(2, 2), *id.cert, id.muLower));

  auto nil = muLowerSearch(scalars(2), mat2(0.0, 1.0, 0.0, 0.0), {8, 1});
  EXPECT_EQ(nil.muLower, 0.0);
  EXPECT_LT(gridOracle(scalars(2), mat2(0.0, 1.0, 0.0, 0.0)), 1e-12);
}

GTEST_TEST(MuTest, GridExamples) {
  Mat c(1, 1);
  c << cplx(0.3, -0.4);
  EXPECT_NEAR(gridOracle(scalars(1), c), 0.5, 1e-9);
  EXPECT_NEAR(gridOracle(scalars(2), Mat::Identity(2, 2)), 1.0, 1e-9);

  CounterRng rng(31);
  StructureGraph full({fullBlock("a", 2, 2)});
  for (int t = 0; t < 5; ++t) {
    Mat M = randomComplex(2, 2, rng);
    auto gr = gridSearch(full, M);
    EXPECT_LE(gr.dimension, 6);
    EXPECT_NEAR(gr.value, opNorm(M), 1e-6 * opNorm(M));
  }
  EXPECT_THROW(gridOracle(scalars(8), Mat::Identity(8, 8)), InputError);
  EXPECT_THROW(gridOracle(StructureGraph({Component{"m", 2, 2, 2}}), Mat::Identity(4, 4)), InputError);
}

GTEST_TEST(MuTest, SpecialCertificates) {
  CounterRng rng(32);
  StructureGraph full({fullBlock("a", 3, 2)});
  StructureGraph rep({scalarBlock("a", 3)});
  for (int t = 0; t < 10; ++t) {
    Mat M = randomComplex(2, 3, rng);
    auto r = muLowerSearch(full, M, {4, uint64_t(t)});
    EXPECT_NEAR(r.muLower, opNorm(M), 1e-10 * opNorm(M));
    Mat R = randomComplex(3, 3, rng);
    auto s = muLowerSearch(rep, R, {4, uint64_t(t)});
    EXPECT_NEAR(s.muLower, spectralRadius(R), 1e-9 * spectralRadius(R));
  }
}

GTEST_TEST(MuTest, SandwichAndScaling) {
  CounterRng rng(33);
  StructureGraph g({fullBlock("a", 1, 1), fullBlock("b", 2, 1), scalarBlock("c", 2)});
  for (int t = 0; t < 6; ++t) {
    Mat M = randomComplex(g.rangeDim(), g.sourceDim(), rng);
    MuOptions opts;
    opts.lower.restarts = 16;
    auto rep = analyze(g, M, opts);
    EXPECT_LE(rep.muLower, rep.muHat * (1 + 1e-4));
    const cplx c = rng.complexNormal() * 3.0;
    auto rep2 = analyze(g, c * M, opts);
    EXPECT_NEAR(rep2.muHat, std::abs(c) * rep.muHat, 2e-5 * rep2.muHat);
  }
}

GTEST_TEST(MuTest, TightForSmallStructures) {
  CounterRng rng(34);
  StructureGraph f3 = scalars(3);
  for (int t = 0; t < 5; ++t) {
    Mat M = randomComplex(3, 3, rng);
    auto rep = analyze(f3, M);
    EXPECT_LE(rep.gap, 2e-2 * rep.muHat);
  }
  StructureGraph full({fullBlock("a", 2, 2)});
  Mat M = randomComplex(2, 2, rng);
  auto rep = analyze(full, M);
  EXPECT_LE(rep.gap, 1e-3 * rep.muHat);
}

}  // namespace
}  // namespace ssv
