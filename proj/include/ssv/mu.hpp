#pragma once

// Classical structured singular value: exact special cases, a restart-based
// lower bound with verified destabilizing certificates, a brute-force grid
// oracle for tiny structures, and the combined report.

#include <optional>
#include <string>
#include <vector>

#include "ssv/graph.hpp"
#include "ssv/lmi.hpp"
#include "ssv/tensor_hs.hpp"

namespace ssv {

enum class SpecialCase { None, FullBlock, RepeatedScalar };

inline const char* toString(SpecialCase s) {
  switch (s) {
    case SpecialCase::FullBlock:
      return "FullBlock";
    case SpecialCase::RepeatedScalar:
      return "RepeatedScalar";
    default:
      return "None";
  }
}

inline SpecialCase specialCaseOf(const StructureGraph& g) {
  if (g.size() != 1) return SpecialCase::None;
  const auto& c = g[0];
  if (c.multiplicity == 1) return SpecialCase::FullBlock;
  if (c.sources == 1 && c.ranges == 1) return SpecialCase::RepeatedScalar;
  return SpecialCase::None;
}

/// sigma_max(M) for one full block, rho(M) for one repeated scalar; empty otherwise.
inline std::optional<double> muExactSpecial(const StructureGraph& g, const Mat& M) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(), "mu: M must be rangeDim x sourceDim");
  switch (specialCaseOf(g)) {
    case SpecialCase::FullBlock:
      return opNorm(M);
    case SpecialCase::RepeatedScalar:
      return spectralRadius(M);
    default:
      return std::nullopt;
  }
}

struct Frontier {
  int s = 0;
  int f = 0;
  bool mixed = false;
  bool tightExpected() const { return !mixed && 2 * s + f <= 3; }
};

inline Frontier frontierCounts(const StructureGraph& g) {
  Frontier fr;
  for (const auto& c : g.components()) {
    if (c.isRepeatedScalar()) {
      ++fr.s;
    } else {
      ++fr.f;
      if (c.multiplicity >= 2) fr.mixed = true;
    }
  }
  return fr;
}

/// Delta with 1 in sigma(Delta M), plus the kernel vector h of I - Delta M.
struct CertPerturbation {
  StructuredPerturbation delta;
  Vec h;
  double residual = 0.0;  // ||(I - Delta M) h|| / ||h||
  double sigmaMin = 0.0;  // sigma_min(I - Delta M)
};

/// Sums a dense (sourceDim x rangeDim) gradient over the multiplicity index into block coordinates.
inline std::vector<Mat> blockGradient(const StructureGraph& g, const Mat& G) {
  BlockLayout lay(g);
  std::vector<Mat> out;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    Mat w = Mat::Zero(c.sources, c.ranges);
    for (int i = 0; i < c.sources; ++i)
      for (int j = 0; j < c.ranges; ++j)
        for (int a = 0; a < c.multiplicity; ++a)
          w(i, j) += G(lay.sourceOffset(k) + i * c.multiplicity + a, lay.rangeOffset(k) + j * c.multiplicity + a);
    out.push_back(std::move(w));
  }
  return out;
}

/// Independent check of a lower-bound certificate.
inline bool certificateHolds(const Mat& M, const CertPerturbation& c, double muLower) {
  const double nd = c.delta.norm();
  if (!(muLower > 0.0) || nd > (1.0 / muLower) * (1.0 + 1e-8)) return false;
  Mat IdM = identity(M.cols()) - c.delta.dense() * M;
  const double smin = singularValues(IdM).minCoeff();
  const double res = (IdM * c.h).norm() / std::max(c.h.norm(), 1e-300);
  return smin <= 1e-6 * std::max(1.0, opNorm(M)) && res <= 1e-6;
}

/// Builds the minimal-norm structured Delta with Delta M h = h, blockwise by Douglas
/// (X = Q P^+ is the least-norm solution of X P = Q). Empty when some block is unsolvable.
inline std::optional<CertPerturbation> certificateFromVector(const StructureGraph& g, const Mat& M, const Vec& h) {
  if (h.norm() == 0.0) return std::nullopt;
  BlockLayout lay(g);
  const Vec Mh = M * h;
  std::vector<Mat> blocks;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    const Mat P = hsVec(lay.extractRange(Mh, k), c.ranges, c.multiplicity);
    const Mat Q = hsVec(lay.extractSource(h, k), c.sources, c.multiplicity);
    if (Q.norm() == 0.0) {
      blocks.push_back(Mat::Zero(c.sources, c.ranges));
      continue;
    }
    Eigen::CompleteOrthogonalDecomposition<Mat> cod(P.transpose());
    cod.setThreshold(1e-12);
    // X P = Q  <=>  P^T X^T = Q^T.
    Mat X = cod.solve(Q.transpose()).transpose();
    if ((X * P - Q).norm() > 1e-9 * std::max(Q.norm(), 1e-300)) return std::nullopt;
    blocks.push_back(std::move(X));
  }
  CertPerturbation cert{StructuredPerturbation(g, std::move(blocks)), h / h.norm(), 0.0, 0.0};
  Mat IdM = identity(M.cols()) - cert.delta.dense() * M;
  cert.residual = (IdM * cert.h).norm();
  cert.sigmaMin = singularValues(IdM).minCoeff();
  return cert;
}

namespace detail {

struct DominantEig {
  cplx lambda;
  Vec right;
  Vec left;
};

inline DominantEig dominantEig(const Mat& A) {
  Eigen::ComplexEigenSolver<Mat> es(A, true);
  if (es.info() != Eigen::Success) throw NumericError("eigen solver failed in mu search");
  Eigen::Index best = 0;
  es.eigenvalues().cwiseAbs().maxCoeff(&best);
  DominantEig d{es.eigenvalues()(best), es.eigenvectors().col(best), Vec()};
  Eigen::ComplexEigenSolver<Mat> el(A.adjoint(), true);
  Eigen::Index li = 0;
  (el.eigenvalues().array() - std::conj(d.lambda)).abs().minCoeff(&li);
  d.left = el.eigenvectors().col(li);
  return d;
}

/// Projected gradient ascent of |lambda_max(Delta(W) M)| over ||W_k|| <= 1.
inline std::vector<Mat> ascend(const StructureGraph& g, const Mat& M, std::vector<Mat> W, int iters, double& value) {
  auto eval = [&](const std::vector<Mat>& w) -> Mat { return StructuredPerturbation(g, w).dense() * M; };
  DominantEig de = dominantEig(eval(W));
  value = std::abs(de.lambda);
  double eta = 0.5;
  for (int it = 0; it < iters && eta > 1e-10; ++it) {
    const Vec Mu = M * de.right;
    const cplx vu = de.left.dot(de.right);
    if (std::abs(vu) < 1e-14 || value == 0.0) break;
    const cplx c = std::conj(de.lambda) / (value * std::conj(vu));
    // d|lambda| = Re tr(G^* dDelta) with G = conj(c) v (Mu)^*.
    const Mat G = std::conj(c) * de.left * Mu.adjoint();
    std::vector<Mat> gb = blockGradient(g, G);
    double gn = 0.0;
    for (const auto& b : gb) gn += b.squaredNorm();
    gn = std::sqrt(gn);
    if (gn < 1e-14) break;
    bool improved = false;
    while (eta > 1e-10) {
      std::vector<Mat> trial = W;
      for (std::size_t k = 0; k < trial.size(); ++k) trial[k] = clipToContraction(trial[k] + (eta / gn) * gb[k]);
      DominantEig dt = dominantEig(eval(trial));
      if (std::abs(dt.lambda) > value * (1 + 1e-13)) {
        W = std::move(trial);
        de = dt;
        value = std::abs(dt.lambda);
        eta = std::min(2.0 * eta, 4.0);
        improved = true;
        break;
      }
      eta *= 0.5;
    }
    if (!improved) break;
  }
  return W;
}

}  // namespace detail

/// Certificate from a search direction: the dominant eigenvector of Delta M, rebuilt by Douglas.
inline std::optional<CertPerturbation> certificateFromDirection(const StructureGraph& g, const Mat& M,
                                                                const std::vector<Mat>& blocks) {
  const Mat A = StructuredPerturbation(g, blocks).dense() * M;
  if (A.norm() == 0.0) return std::nullopt;
  auto de = detail::dominantEig(A);
  if (std::abs(de.lambda) == 0.0) return std::nullopt;
  return certificateFromVector(g, M, de.right);
}

struct GridResult {
  double value = 0.0;
  std::vector<Mat> blocks;
  long points = 0;
  int dimension = 0;
  int stepsUsed = 0;
};

namespace detail {

// Parameter layout of the reduced grid: one phase per n=m=1 component, a
// rank-one x y^* (unit vectors) per full block, global phase removed.
struct GridParam {
  enum Kind { Angle, Phase } kind;
};

struct GridModel {
  std::vector<GridParam> params;
  std::vector<int> offset;  // first parameter of each component
  std::vector<int> fixedPhase;  // component whose overall phase is pinned (or -1)
};

inline GridModel gridModel(const StructureGraph& g) {
  GridModel m;
  bool pinned = false;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    m.offset.push_back(static_cast<int>(m.params.size()));
    if (c.sources == 1 && c.ranges == 1) {
      if (pinned) m.params.push_back({GridParam::Phase});
      m.fixedPhase.push_back(pinned ? 0 : 1);
      pinned = true;
      continue;
    }
    require(c.multiplicity == 1, "gridOracle: component '" + c.name + "' mixes multiplicity and block size");
    for (int i = 1; i < c.sources; ++i) m.params.push_back({GridParam::Angle});
    for (int i = 1; i < c.sources; ++i) m.params.push_back({GridParam::Phase});
    for (int j = 1; j < c.ranges; ++j) m.params.push_back({GridParam::Angle});
    for (int j = 1; j < c.ranges; ++j) m.params.push_back({GridParam::Phase});
    if (pinned) m.params.push_back({GridParam::Phase});
    m.fixedPhase.push_back(pinned ? 0 : 1);
    pinned = true;
  }
  return m;
}

// Unit vector in C^n from n-1 hyperspherical angles and n-1 relative phases.
inline Vec unitFrom(const double* ang, const double* ph, int n) {
  Vec v(n);
  double rest = 1.0;
  for (int i = 0; i < n - 1; ++i) {
    v(i) = rest * std::cos(ang[i]);
    rest *= std::sin(ang[i]);
  }
  v(n - 1) = rest;
  for (int i = 1; i < n; ++i) v(i) *= std::polar(1.0, ph[i - 1]);
  return v;
}

inline std::vector<Mat> gridBlocks(const StructureGraph& g, const GridModel& m, const std::vector<double>& x) {
  std::vector<Mat> out;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    const double* p = x.data() + m.offset[k];
    if (c.sources == 1 && c.ranges == 1) {
      Mat w(1, 1);
      w(0, 0) = m.fixedPhase[k] ? cplx(1.0) : std::polar(1.0, p[0]);
      out.push_back(w);
      continue;
    }
    const int n = c.sources, r = c.ranges;
    Vec xv = unitFrom(p, p + (n - 1), n);
    p += 2 * (n - 1);
    Vec yv = unitFrom(p, p + (r - 1), r);
    p += 2 * (r - 1);
    const cplx phase = m.fixedPhase[k] ? cplx(1.0) : std::polar(1.0, p[0]);
    out.push_back(phase * xv * yv.adjoint());
  }
  return out;
}

}  // namespace detail

/// Reduced real dimension of the grid for `g`; throws for unsupported components.
inline int gridDimension(const StructureGraph& g) { return static_cast<int>(detail::gridModel(g).params.size()); }

/// Exhaustive search of rho(Delta M) over a grid of norm-one structured
/// directions, followed by local pattern-search refinement from the best
/// grid points. The returned value is max rho found if 1/value <= radius.
inline GridResult gridSearch(const StructureGraph& g, const Mat& M, double radius = 1e6, int steps = 25) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(), "gridOracle: M must be rangeDim x sourceDim");
  require(steps >= 2 && steps <= 25, "gridOracle: steps must be in [2, 25]");
  const detail::GridModel model = detail::gridModel(g);
  const int dim = static_cast<int>(model.params.size());
  require(dim <= 6, "gridOracle: reduced parameter dimension " + std::to_string(dim) + " exceeds 6");

  GridResult res;
  res.dimension = dim;
  int st = steps;
  while (dim > 0 && std::pow(double(st), dim) > 2e4 && st > 2) --st;
  res.stepsUsed = st;

  auto coord = [&](int p, int i) {
    if (model.params[p].kind == detail::GridParam::Angle) return (M_PI / 2) * i / double(st - 1);
    return 2 * M_PI * i / double(st);
  };
  auto rho = [&](const std::vector<double>& x) {
    return spectralRadius(StructuredPerturbation(g, detail::gridBlocks(g, model, x)).dense() * M);
  };

  // Exhaustive pass, keeping the best few seeds.
  std::vector<std::pair<double, std::vector<double>>> seeds;
  std::vector<int> idx(dim, 0);
  std::vector<double> x(dim, 0.0);
  const long total = dim == 0 ? 1 : static_cast<long>(std::llround(std::pow(double(st), dim)));
  for (long n = 0; n < total; ++n) {
    long r = n;
    for (int p = 0; p < dim; ++p) {
      idx[p] = static_cast<int>(r % st);
      r /= st;
      x[p] = coord(p, idx[p]);
    }
    const double v = rho(x);
    ++res.points;
    if (seeds.size() < 6 || v > seeds.back().first) {
      seeds.emplace_back(v, x);
      std::sort(seeds.begin(), seeds.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      if (seeds.size() > 6) seeds.pop_back();
    }
  }

  double best = -1.0;
  std::vector<double> bestX;
  for (auto& [v0, x0] : seeds) {
    double v = v0;
    std::vector<double> xc = x0;
    double h = dim > 0 ? M_PI / st : 0.0;
    while (h > 1e-10) {
      bool moved = false;
      for (int p = 0; p < dim; ++p)
        for (double sgn : {1.0, -1.0}) {
          std::vector<double> xt = xc;
          xt[p] += sgn * h;
          if (model.params[p].kind == detail::GridParam::Angle) xt[p] = std::clamp(xt[p], 0.0, M_PI / 2);
          const double vt = rho(xt);
          ++res.points;
          if (vt > v) {
            v = vt;
            xc = std::move(xt);
            moved = true;
          }
        }
      if (!moved) h *= 0.5;
    }
    if (v > best) {
      best = v;
      bestX = xc;
    }
  }
  res.value = (best > 0.0 && 1.0 / best <= radius) ? best : 0.0;
  res.blocks = detail::gridBlocks(g, model, bestX);
  return res;
}

inline double gridOracle(const StructureGraph& g, const Mat& M, double radius = 1e6, int steps = 25) {
  return gridSearch(g, M, radius, steps).value;
}

struct LowerOptions {
  int restarts = 64;
  std::uint64_t seed = 0;
  int iterations = 200;
  bool useGrid = true;
};

struct LowerResult {
  double muLower = 0.0;
  std::optional<CertPerturbation> cert;
  std::string source;  // "search", "special", "grid" or "none"
};

/// Restart-based lower bound. Every candidate is turned into a Douglas certificate
/// and kept only if the certificate re-verifies.
inline LowerResult muLowerSearch(const StructureGraph& g, const Mat& M, const LowerOptions& opts = {}) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(), "mu: M must be rangeDim x sourceDim");
  LowerResult best;
  best.source = "none";
  if (M.norm() == 0.0) return best;

  auto consider = [&](const std::optional<CertPerturbation>& c, const char* src) {
    if (!c) return;
    const double nd = c->delta.norm();
    if (!(nd > 0.0)) return;
    const double mu = 1.0 / nd;
    if (mu > best.muLower && certificateHolds(M, *c, mu)) {
      best.muLower = mu;
      best.cert = c;
      best.source = src;
    }
  };

  // Special structures: the exact value with an explicit certificate.
  if (specialCaseOf(g) == SpecialCase::FullBlock) {
    Eigen::JacobiSVD<Mat> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
    consider(certificateFromVector(g, M, svd.matrixV().col(0)), "special");
  } else if (specialCaseOf(g) == SpecialCase::RepeatedScalar) {
    Mat one = Mat::Ones(1, 1);
    consider(certificateFromDirection(g, M, {one}), "special");
  }

  for (int r = 0; r < opts.restarts; ++r) {
    CounterRng rng(opts.seed, 1000 + r);
    std::vector<Mat> W;
    for (const auto& c : g.components()) W.push_back(clipToContraction(randomComplex(c.sources, c.ranges, rng) * 3.0));
    double v = 0.0;
    W = detail::ascend(g, M, std::move(W), opts.iterations, v);
    consider(certificateFromDirection(g, M, W), "search");
  }

  if (opts.useGrid) {
    bool supported = true;
    int dim = 0;
    try {
      dim = gridDimension(g);
    } catch (const InputError&) {
      supported = false;
    }
    if (supported && dim <= 6) {
      GridResult gr = gridSearch(g, M);
      // Polish the grid maximizer with the same ascent before certifying it.
      double v = 0.0;
      auto W = detail::ascend(g, M, gr.blocks, opts.iterations, v);
      consider(certificateFromDirection(g, M, gr.blocks), "grid");
      consider(certificateFromDirection(g, M, W), "grid");
    }
  }
  return best;
}

struct MuOptions {
  LowerOptions lower;
  MuHatOptions upper;
};

struct MuReport {
  double muLower = 0.0;
  std::optional<CertPerturbation> lowerCert;
  std::string lowerSource;
  MuHatResult upper;
  double muHat = 0.0;
  double gap = 0.0;
  SpecialCase special = SpecialCase::None;
  std::optional<double> exact;
  Frontier frontier;
  std::vector<std::string> warnings;
};

inline MuReport analyze(const StructureGraph& g, const Mat& M, const MuOptions& opts = {}) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(),
          "mu: M must be rangeDim x sourceDim = " + std::to_string(g.rangeDim()) + "x" +
              std::to_string(g.sourceDim()));
  if (!M.allFinite()) throw NumericError("mu: M contains NaN or Inf");
  MuReport rep;
  rep.special = specialCaseOf(g);
  rep.exact = muExactSpecial(g, M);
  rep.frontier = frontierCounts(g);

  LowerResult lo = muLowerSearch(g, M, opts.lower);
  rep.muLower = lo.muLower;
  rep.lowerCert = lo.cert;
  rep.lowerSource = lo.source;

  rep.upper = muHatBisect(g, M, opts.upper);
  rep.muHat = rep.upper.muHat;
  rep.warnings = rep.upper.warnings;
  rep.gap = rep.muHat - rep.muLower;

  // muHat is reported as the bisection midpoint; its certified upper end is upper.upper.
  if (rep.muLower > rep.upper.upper * (1.0 + 1e-4))
    throw VerificationError("mu: lower bound " + std::to_string(rep.muLower) + " exceeds certified upper bound " +
                            std::to_string(rep.upper.upper));
  if (rep.lowerCert && !certificateHolds(M, *rep.lowerCert, rep.muLower))
    throw VerificationError("mu: lower-bound certificate failed re-verification");
  return rep;
}

}  // namespace ssv
