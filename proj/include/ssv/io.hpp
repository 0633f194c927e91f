#pragma once

// Problem files, reports and the instance corpus.
//
// Matrices are stored as {"rows", "cols", "re", "im"} with row-major flat
// arrays. Serialization is canonical: sorted keys, shortest round-trip doubles,
// two-space indentation, trailing newline.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "ssv/brl.hpp"
#include "ssv/graph.hpp"

namespace ssv {

using Json = nlohmann::json;

class ParseError : public InputError {
 public:
  using InputError::InputError;
};

struct ProblemFile {
  std::string name;
  StructureGraph graph;
  std::optional<Mat> M;
  std::optional<Colligation> colligation;  // A : H_S -> H_R on the graph
  std::optional<Colligation> system;       // state space, graph describes D : U -> Y
  std::optional<double> gamma;
  std::map<std::string, std::string> hints;
};

namespace detail {

inline const Json& field(const Json& j, const std::string& key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ParseError(where + ": missing field '" + key + "'");
  return j.at(key);
}

inline int intField(const Json& j, const std::string& key, const std::string& where) {
  const Json& v = field(j, key, where);
  if (!v.is_number_integer()) throw ParseError(where + "." + key + ": expected an integer");
  return v.get<int>();
}

inline std::vector<double> numbers(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ParseError(where + ": expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ParseError(where + ": expected an array of numbers");
    out.push_back(x.get<double>());
  }
  return out;
}

inline std::size_t lineOf(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i)
    if (text[i] == '\n') ++line;
  return line;
}

}  // namespace detail

inline Json matrixToJson(const Mat& m) {
  Json re = Json::array(), im = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      re.push_back(m(i, j).real());
      im.push_back(m(i, j).imag());
    }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"re", re}, {"im", im}};
}

inline Mat matrixFromJson(const Json& j, const std::string& where) {
  const int r = detail::intField(j, "rows", where), c = detail::intField(j, "cols", where);
  if (r < 0 || c < 0) throw ParseError(where + ": negative dimension");
  const auto re = detail::numbers(detail::field(j, "re", where), where + ".re");
  const auto im = j.contains("im") ? detail::numbers(j.at("im"), where + ".im") : std::vector<double>(re.size(), 0.0);
  const std::size_t n = static_cast<std::size_t>(r) * c;
  if (re.size() != n) throw ParseError(where + ".re: expected rows*cols = " + std::to_string(n) + " entries");
  if (im.size() != n) throw ParseError(where + ".im: expected rows*cols = " + std::to_string(n) + " entries");
  Mat m(r, c);
  for (int i = 0; i < r; ++i)
    for (int k = 0; k < c; ++k) m(i, k) = cplx(re[i * c + k], im[i * c + k]);
  if (!m.allFinite()) throw NumericError(where + ": NaN or Inf entry");
  return m;
}

inline Json graphToJson(const StructureGraph& g) {
  Json comps = Json::array();
  for (const auto& c : g.components())
    comps.push_back(
        Json{{"name", c.name}, {"sources", c.sources}, {"ranges", c.ranges}, {"multiplicity", c.multiplicity}});
  return Json{{"components", comps}};
}

inline StructureGraph graphFromJson(const Json& j, const std::string& where) {
  const Json& cs = detail::field(j, "components", where);
  if (!cs.is_array()) throw ParseError(where + ".components: expected an array");
  std::vector<Component> comps;
  for (std::size_t k = 0; k < cs.size(); ++k) {
    const std::string at = where + ".components[" + std::to_string(k) + "]";
    const Json& name = detail::field(cs[k], "name", at);
    if (!name.is_string()) throw ParseError(at + ".name: expected a string");
    Component c{name.get<std::string>(), detail::intField(cs[k], "sources", at), detail::intField(cs[k], "ranges", at),
                cs[k].contains("multiplicity") ? detail::intField(cs[k], "multiplicity", at) : 1};
    comps.push_back(c);
  }
  return StructureGraph(comps);
}

inline Json colligationToJson(const Colligation& c) {
  return Json{{"A", matrixToJson(c.A)}, {"B", matrixToJson(c.B)}, {"C", matrixToJson(c.C)}, {"D", matrixToJson(c.D)}};
}

inline Colligation colligationFromJson(const Json& j, const std::string& where) {
  Colligation c;
  c.A = matrixFromJson(detail::field(j, "A", where), where + ".A");
  c.B = matrixFromJson(detail::field(j, "B", where), where + ".B");
  c.C = matrixFromJson(detail::field(j, "C", where), where + ".C");
  c.D = matrixFromJson(detail::field(j, "D", where), where + ".D");
  c.dimU = static_cast<int>(c.D.cols());
  c.dimY = static_cast<int>(c.D.rows());
  return c;
}

/// Graph invariants are checked by the StructureGraph constructor; this checks
/// the attached data against them.
inline void validateProblem(const ProblemFile& p) {
  const StructureGraph& g = p.graph;
  if (p.M) {
    if (p.M->rows() != g.rangeDim())
      throw InputError("problem.matrix: rows = " + std::to_string(p.M->rows()) + " must equal rangeDim = " +
                       std::to_string(g.rangeDim()));
    if (p.M->cols() != g.sourceDim())
      throw InputError("problem.matrix: cols = " + std::to_string(p.M->cols()) + " must equal sourceDim = " +
                       std::to_string(g.sourceDim()));
  }
  if (p.colligation) p.colligation->validate(g);
  if (p.system) {
    const int nx = static_cast<int>(p.system->A.rows());
    p.system->validate(nx, nx);
    if (p.system->dimU != g.sourceDim() || p.system->dimY != g.rangeDim())
      throw InputError("problem.system: D must be rangeDim x sourceDim = " + std::to_string(g.rangeDim()) + "x" +
                       std::to_string(g.sourceDim()));
  }
  if (p.gamma && !(*p.gamma > 0.0)) throw InputError("problem.gamma: must be positive");
}

inline Json problemToJson(const ProblemFile& p) {
  Json j{{"graph", graphToJson(p.graph)}};
  if (!p.name.empty()) j["name"] = p.name;
  if (p.M) j["matrix"] = matrixToJson(*p.M);
  if (p.colligation) j["colligation"] = colligationToJson(*p.colligation);
  if (p.system) j["system"] = colligationToJson(*p.system);
  if (p.gamma) j["gamma"] = *p.gamma;
  if (!p.hints.empty()) j["hints"] = p.hints;
  return j;
}

inline ProblemFile problemFromJson(const Json& j, const std::string& where = "problem") {
  if (!j.is_object()) throw ParseError(where + ": expected an object");
  ProblemFile p;
  if (j.contains("name")) {
    if (!j.at("name").is_string()) throw ParseError(where + ".name: expected a string");
    p.name = j.at("name").get<std::string>();
  }
  p.graph = graphFromJson(detail::field(j, "graph", where), where + ".graph");
  if (j.contains("matrix")) p.M = matrixFromJson(j.at("matrix"), where + ".matrix");
  if (j.contains("colligation")) p.colligation = colligationFromJson(j.at("colligation"), where + ".colligation");
  if (j.contains("system")) p.system = colligationFromJson(j.at("system"), where + ".system");
  if (j.contains("gamma")) {
    if (!j.at("gamma").is_number()) throw ParseError(where + ".gamma: expected a number");
    p.gamma = j.at("gamma").get<double>();
  }
  if (j.contains("hints")) {
    const Json& h = j.at("hints");
    if (!h.is_object()) throw ParseError(where + ".hints: expected an object of strings");
    for (auto it = h.begin(); it != h.end(); ++it) {
      if (!it.value().is_string()) throw ParseError(where + ".hints." + it.key() + ": expected a string");
      p.hints[it.key()] = it.value().get<std::string>();
    }
  }
  validateProblem(p);
  return p;
}

inline std::string canonicalDump(const Json& j) { return j.dump(2) + "\n"; }

inline Json parseJsonText(const std::string& text, const std::string& source) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ParseError(source + ":" + std::to_string(detail::lineOf(text, e.byte)) + ": " + e.what());
  }
}

inline std::string readFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline ProblemFile parseProblemText(const std::string& text, const std::string& source = "<string>") {
  return problemFromJson(parseJsonText(text, source));
}

inline ProblemFile parseProblem(const std::string& path) { return parseProblemText(readFile(path), path); }

inline std::string serializeProblem(const ProblemFile& p) { return canonicalDump(problemToJson(p)); }

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hexDigest(const std::string& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(s)));
  return buf;
}

/// Temp file in the target directory, then rename over the destination.
inline void atomicWrite(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw InputError("write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, target);
}

struct Report {
  std::string command;
  std::string inputDigest;
  std::uint64_t seed = 0;
  Json results = Json::object();
  Json certificates = Json::object();
  Json verification = Json::object();  // residuals backing the numeric claims
  std::vector<std::string> warnings;
  std::map<std::string, double> timings;

  Json body() const {
    return Json{{"command", command},        {"inputDigest", inputDigest},   {"seed", seed},
                {"results", results},        {"certificates", certificates}, {"verification", verification},
                {"warnings", warnings}};
  }
  /// Digest of everything but the timings.
  std::string digest() const { return hexDigest(canonicalDump(body())); }
  Json toJson() const {
    Json j = body();
    j["timings"] = timings;
    j["digest"] = digest();
    return j;
  }
};

inline Json gammasToJson(const std::vector<Mat>& gammas) {
  Json out = Json::array();
  for (const auto& g : gammas) out.push_back(matrixToJson(g));
  return out;
}

// ---------------------------------------------------------------------------
// Corpus.

struct CorpusStratum {
  int s = 0;          // repeated-scalar components (n = m = 1, d >= 2)
  int f = 0;          // full blocks
  int maxBlock = 2;   // bound on n_k, m_k and d_k
  int maxTotal = 4;   // bound on sourceDim and rangeDim
  int count = 10;
};

struct CorpusSpec {
  std::vector<CorpusStratum> strata;
  bool specials = true;
};

/// Strata for the sandwich statistics plus the f = 4 scalar stratum.
inline CorpusSpec defaultCorpusSpec() {
  CorpusSpec spec;
  spec.strata = {{0, 1, 3, 4, 10}, {0, 2, 2, 4, 10}, {0, 3, 1, 4, 10}, {1, 0, 4, 4, 10}, {1, 1, 2, 4, 10},
                 {0, 4, 1, 4, 10}, {1, 2, 2, 5, 5},  {2, 0, 3, 5, 5}};
  return spec;
}

/// Four 1x1 blocks with mu strictly below muHat.
inline Mat gapInstanceMatrix() {
  const double g = 3.0 + std::sqrt(3.0);
  const double b = std::sqrt(3.0) - 1.0;
  const cplx j(0.0, 1.0);
  const double a = std::sqrt(2.0 / g), c = 1.0 / std::sqrt(g), d = -std::sqrt(b / g);
  const cplx f = (1.0 + j) * std::sqrt(1.0 / (g * b));
  Mat U(4, 2), V(4, 2);
  U << a, 0.0, c, c, c, j * c, d, f;
  V << 0.0, a, c, -c, c, -j * c, -j * f, -d;
  return U * V.adjoint();
}

inline std::vector<ProblemFile> canonicalSpecials() {
  std::vector<ProblemFile> out;
  auto add = [&](std::string name, StructureGraph g, Mat M, std::string expect) {
    ProblemFile p;
    p.name = std::move(name);
    p.graph = std::move(g);
    p.M = std::move(M);
    p.hints["expect"] = std::move(expect);
    out.push_back(std::move(p));
  };
  add("zero", StructureGraph({fullBlock("a", 2, 2)}), Mat::Zero(2, 2), "mu=0");
  add("identity", StructureGraph({scalarBlock("d", 3)}), identity(3), "mu=1");
  Mat nil = Mat::Zero(3, 3);
  nil(0, 1) = 1.0;
  nil(1, 2) = 1.0;
  add("nilpotent", StructureGraph({scalarBlock("d", 3)}), nil, "mu=0");
  Mat sig = Mat::Zero(2, 2);
  sig(0, 0) = 2.0;
  sig(1, 1) = 0.5;
  add("sigma", StructureGraph({fullBlock("a", 2, 2)}), sig, "mu=2");
  Mat rho(2, 2);
  rho << 1.0, 4.0, 0.0, 0.5;
  add("rho", StructureGraph({scalarBlock("d", 2)}), rho, "mu=1");
  StructureGraph four({fullBlock("d0", 1, 1), fullBlock("d1", 1, 1), fullBlock("d2", 1, 1), fullBlock("d3", 1, 1)});
  add("gap", four, gapInstanceMatrix(), "mu<muHat");
  return out;
}

inline StructureGraph randomStratumGraph(const CorpusStratum& st, CounterRng& rng) {
  require(st.s >= 0 && st.f >= 0 && st.s + st.f >= 1, "corpus: stratum needs s + f >= 1");
  require(st.maxBlock >= 1, "corpus: maxBlock must be >= 1");
  auto pick = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  for (int attempt = 0; attempt < 1000; ++attempt) {
    std::vector<Component> comps;
    for (int i = 0; i < st.s; ++i) comps.push_back(scalarBlock("s" + std::to_string(i), pick(2, std::max(2, st.maxBlock))));
    for (int i = 0; i < st.f; ++i)
      comps.push_back(fullBlock("f" + std::to_string(i), pick(1, st.maxBlock), pick(1, st.maxBlock)));
    StructureGraph g(comps);
    if (g.sourceDim() <= st.maxTotal && g.rangeDim() <= st.maxTotal) return g;
  }
  throw InputError("corpus: stratum (s=" + std::to_string(st.s) + ", f=" + std::to_string(st.f) +
                   ") does not fit maxTotal = " + std::to_string(st.maxTotal));
}

inline std::vector<ProblemFile> corpusGenerate(std::uint64_t seed, const CorpusSpec& spec = defaultCorpusSpec()) {
  std::vector<ProblemFile> out;
  if (spec.specials) out = canonicalSpecials();
  for (std::size_t k = 0; k < spec.strata.size(); ++k) {
    const auto& st = spec.strata[k];
    CounterRng rng(seed, 1000 + k);
    for (int i = 0; i < st.count; ++i) {
      ProblemFile p;
      p.name = "s" + std::to_string(st.s) + "f" + std::to_string(st.f) + "-" + std::to_string(i);
      p.graph = randomStratumGraph(st, rng);
      p.M = randomComplex(p.graph.rangeDim(), p.graph.sourceDim(), rng);
      p.hints["stratum"] = "s=" + std::to_string(st.s) + ",f=" + std::to_string(st.f);
      out.push_back(std::move(p));
    }
  }
  return out;
}

inline std::string serializeCorpus(std::uint64_t seed, const std::vector<ProblemFile>& corpus) {
  Json probs = Json::array();
  for (const auto& p : corpus) probs.push_back(problemToJson(p));
  return canonicalDump(Json{{"seed", seed}, {"problems", probs}});
}

/// A corpus file ({"problems": [...]}) or a single problem.
inline std::vector<ProblemFile> parseProblemsText(const std::string& text, const std::string& source) {
  const Json j = parseJsonText(text, source);
  std::vector<ProblemFile> out;
  if (j.is_object() && j.contains("problems")) {
    const Json& ps = j.at("problems");
    if (!ps.is_array()) throw ParseError(source + ": problems must be an array");
    for (std::size_t i = 0; i < ps.size(); ++i) out.push_back(problemFromJson(ps[i], "problems[" + std::to_string(i) + "]"));
  } else {
    out.push_back(problemFromJson(j));
  }
  return out;
}

}  // namespace ssv
