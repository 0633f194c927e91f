#include "ssv/io.hpp"

#include <gtest/gtest.h>

#include "ssv/mu.hpp"

namespace ssv {
namespace {

const char* kMinimal = R"({"graph": {"components": [{"name": "a", "sources": 1, "ranges": 1}]},
 "matrix": {"rows": 1, "cols": 1, "re": [0.5], "im": [0.25]}})";

GTEST_TEST(IoTest, MinimalFile) {
  ProblemFile p = parseProblemText(kMinimal);
  EXPECT_EQ(p.graph.size(), 1);
  EXPECT_EQ(p.graph[0].multiplicity, 1);
  ASSERT_TRUE(p.M.has_value());
  EXPECT_EQ((*p.M)(0, 0), cplx(0.5, 0.25));
}

GTEST_TEST(IoTest, MismatchNamesSourceDim) {
  const std::string bad = R"({"graph": {"components": [{"name": "a", "sources": 2, "ranges": 1}]},
 "matrix": {"rows": 1, "cols": 1, "re": [1.0], "im": [0.0]}})";
  try {
    parseProblemText(bad);
    FAIL() << "no error";
  } catch (const InputError& e) {
    EXPECT_NE(std::string(e.what()).find("sourceDim"), std::string::npos) << e.what();
  }
}

GTEST_TEST(IoTest, ParseErrorsCarryLocation) {
  try {
    parseProblemText("{\n\"graph\": [\n", "f.json");
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("f.json:"), std::string::npos) << e.what();
  }
  try {
    parseProblemText(R"({"graph": {"components": [{"name": "a", "sources": "x", "ranges": 1}]}})");
    FAIL() << "no error";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("components[0].sources"), std::string::npos) << e.what();
  }
  EXPECT_THROW(parseProblemText(R"({"graph": {"components": []}})"), InputError);
}

GTEST_TEST(IoTest, RoundTrip) {
  for (const auto& p : corpusGenerate(7)) {
    const std::string text = serializeProblem(p);
    const ProblemFile q = parseProblemText(text);
    EXPECT_EQ(serializeProblem(q), text);
    EXPECT_TRUE(q.graph == p.graph);
    EXPECT_EQ((*q.M - *p.M).norm(), 0.0);
  }
  CounterRng rng(3);
  ProblemFile p;
  p.graph = StructureGraph({fullBlock("a", 1, 2), scalarBlock("b", 2)});
  p.colligation = Colligation{randomComplex(4, 3, rng), randomComplex(4, 1, rng), randomComplex(2, 3, rng),
                              randomComplex(2, 1, rng), 1, 2};
  p.gamma = 1.0 / 3.0;
  const std::string text = serializeProblem(p);
  const ProblemFile q = parseProblemText(text);
  EXPECT_EQ(serializeProblem(q), text);
  EXPECT_EQ((q.colligation->block() - p.colligation->block()).norm(), 0.0);
  EXPECT_EQ(*q.gamma, *p.gamma);
}

GTEST_TEST(IoTest, CorpusDeterminism) {
  EXPECT_EQ(serializeCorpus(5, corpusGenerate(5)), serializeCorpus(5, corpusGenerate(5)));
  EXPECT_NE(serializeCorpus(5, corpusGenerate(5)), serializeCorpus(6, corpusGenerate(6)));

  CorpusSpec single{{{0, 1, 3, 4, 8}}, false};
  for (const auto& p : corpusGenerate(1, single)) {
    EXPECT_EQ(p.graph.size(), 1);
    EXPECT_EQ(specialCaseOf(p.graph), SpecialCase::FullBlock);
  }
  CorpusSpec gap{{{0, 4, 1, 4, 3}}, false};
  for (const auto& p : corpusGenerate(1, gap)) {
    const Frontier fr = frontierCounts(p.graph);
    EXPECT_EQ(fr.f, 4);
    EXPECT_FALSE(fr.tightExpected());
  }
}

GTEST_TEST(IoTest, Specials) {
  for (const auto& p : canonicalSpecials()) {
    const auto exact = muExactSpecial(p.graph, *p.M);
    if (p.name == "zero" || p.name == "nilpotent") EXPECT_EQ(*exact, 0.0);
    if (p.name == "identity" || p.name == "rho") EXPECT_NEAR(*exact, 1.0, 1e-12);
    if (p.name == "sigma") EXPECT_NEAR(*exact, 2.0, 1e-12);
  }
  EXPECT_NEAR(opNorm(gapInstanceMatrix()), 1.0, 1e-12);
}

GTEST_TEST(IoTest, ReportDigestIgnoresTimings) {
  Report r;
  r.command = "analyze";
  r.seed = 3;
  r.results["muHat"] = 0.5;
  const std::string d = r.digest();
  r.timings["total"] = 12.5;
  EXPECT_EQ(r.digest(), d);
  EXPECT_EQ(r.toJson()["digest"], d);
  r.results["muHat"] = 0.25;
  EXPECT_NE(r.digest(), d);
  EXPECT_EQ(hexDigest(""), "cbf29ce484222325");
}

GTEST_TEST(IoTest, AtomicWrite) {
  const auto dir = std::filesystem::temp_directory_path() / ("ssv_io_" + std::to_string(::getpid()));
  const std::string path = (dir / "sub" / "out.json").string();
  atomicWrite(path, "one\n");
  atomicWrite(path, "two\n");
  EXPECT_EQ(readFile(path), "two\n");
  int files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir / "sub")) files += e.is_regular_file();
  EXPECT_EQ(files, 1);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace ssv
