#pragma once

// The BFT enhancement for multiplicity-one structures. Blocks are enhanced by
// K = H_S, so a candidate kernel element is a matrix k : K -> H_S and the
// per-component forms reduce to traces against
//
//   Q_k = M^* P_{R,k} M - P_{S,k}.
//
// gamma_k >= 0 with sum_k gamma_k Q_k < 0 excludes the enhanced kernel; a
// density Upsilon with trace(Q_k Upsilon) >= 0 for all k builds one.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssv/graph.hpp"
#include "ssv/lmi.hpp"
#include "ssv/tensor_hs.hpp"
#include "ssv/tv.hpp"

namespace ssv {

class BftProblem {
 public:
  BftProblem(StructureGraph g, Mat M0) : g_(std::move(g)), M0_(std::move(M0)) {
    for (const auto& c : g_.components())
      require(c.multiplicity == 1, "bft: component '" + c.name + "' must have multiplicity 1");
    require(M0_.rows() == g_.rangeDim() && M0_.cols() == g_.sourceDim(), "bft: M must be rangeDim x sourceDim");
    if (!M0_.allFinite()) throw NumericError("bft: M contains NaN or Inf");
  }

  const StructureGraph& graph() const { return g_; }
  const Mat& M() const { return M0_; }
  int dim() const { return g_.sourceDim(); }

  /// Q_k for M / gamma.
  std::vector<Mat> forms(double gamma = 1.0) const {
    BlockLayout lay(g_);
    const Mat Mg = M0_ / gamma;
    std::vector<Mat> out;
    for (int k = 0; k < g_.size(); ++k) {
      const Mat R = lay.rangeSelector(k) * Mg;
      const Mat S = lay.sourceSelector(k);
      out.push_back(herm(R.adjoint() * R - S.adjoint() * S));
    }
    return out;
  }

 private:
  StructureGraph g_;
  Mat M0_;
};

/// phi_k(h) = trace(Q_k H H^*) where H = hsVec(h, n, n) is the HS form of h in H_S (x) K.
inline std::vector<double> phiBft(const BftProblem& prob, const Vec& h, double gamma = 1.0) {
  const int n = prob.dim();
  const Mat H = hsVec(h, n, n);
  std::vector<double> out;
  for (const auto& q : prob.forms(gamma)) out.push_back((q * H * H.adjoint()).trace().real());
  return out;
}

/// Unit k with phi(k) = alpha phi(h) + (1 - alpha) phi(ht): the square root of
/// alpha H H^* + (1 - alpha) Ht Ht^*.
inline Vec convexWitness(const BftProblem& prob, const Vec& h, const Vec& ht, double alpha) {
  const int n = prob.dim();
  require(alpha >= 0.0 && alpha <= 1.0, "convexWitness: alpha must lie in [0, 1]");
  require(std::abs(h.norm() - 1.0) < 1e-9 && std::abs(ht.norm() - 1.0) < 1e-9, "convexWitness: h and ht must be unit");
  const Mat H = hsVec(h, n, n), Ht = hsVec(ht, n, n);
  const Mat U = herm(alpha * H * H.adjoint() + (1.0 - alpha) * Ht * Ht.adjoint());
  return hsUnvec(sqrtPsd(U));
}

namespace bft_verdict {

struct EnhancedGE1 {
  Mat upsilon;
  std::vector<double> traces;  // trace(Q_k Upsilon)
  std::vector<Factor> factors;
  StructuredPerturbation delta;  // level n = sourceDim
  Vec khat;  // slot-major: khat[t * n + i] = k(i, t), k = Upsilon^{1/2}
  double residual = 0.0;  // ||(I - Delta (I_n (x) M / gamma)) khat||
  double deltaNorm = 0.0;
};

struct EnhancedLT1 {
  std::vector<double> gammas;
  double margin = 0.0;  // -lambda_max(sum gamma_k Q_k)
};

struct Undecided {
  double bestMargin = 0.0;
};

}  // namespace bft_verdict

using BftVerdict = std::variant<bft_verdict::EnhancedGE1, bft_verdict::EnhancedLT1, bft_verdict::Undecided>;

/// Independent re-checks; empty string when the verdict holds.
inline std::string verifyBft(const BftProblem& prob, double gamma, const BftVerdict& v, double tol = 1e-8) {
  const auto Q = prob.forms(gamma);
  const double thr = steinThreshold(prob.M() / gamma, tol);
  if (auto* lt = std::get_if<bft_verdict::EnhancedLT1>(&v)) {
    Mat S = Mat::Zero(prob.dim(), prob.dim());
    for (std::size_t k = 0; k < Q.size(); ++k) {
      if (!(lt->gammas[k] > 0.0)) return "non-positive scaling";
      S += lt->gammas[k] * Q[k];
    }
    if (!choleskyOk(-S - 0.5 * lt->margin * identity(prob.dim()))) return "sum gamma_k Q_k is not negative definite";
    return {};
  }
  if (auto* ge = std::get_if<bft_verdict::EnhancedGE1>(&v)) {
    if (std::abs(ge->upsilon.trace().real() - 1.0) > 1e-9 || lambdaMin(ge->upsilon) < -1e-12)
      return "Upsilon is not a density";
    for (const auto& q : Q)
      if ((q * ge->upsilon).trace().real() < -thr * (1 + 1e-6)) return "trace(Q_k Upsilon) below -threshold";
    const int n = prob.dim();
    if (structureDefect(prob.graph(), ge->delta.dense(), n) != 0.0) return "Delta is not structured";
    if (ge->delta.norm() > 1.0 + 1e-8) return "Delta norm exceeds one";
    const Vec r = ge->khat - ge->delta.dense() * (kron(identity(n), prob.M() / gamma) * ge->khat);
    if (r.norm() > 1e-6) return "kernel residual too large";
    return {};
  }
  return "undecided";
}

inline BftVerdict bftDecide(const BftProblem& prob, double gamma, const SteinOptions& opts = {}) {
  require(gamma > 0.0, "bft: gamma must be positive");
  const auto Q = prob.forms(gamma);
  const int n = prob.dim();
  // Each Q_k is split into positive and negative square-root factors; the solver sees
  // a sum of scalar-weighted terms and never the graph layout.
  std::vector<ScalingTerm> terms;
  for (const auto& q : Q) terms.push_back(detail::offsetTerm(q));
  const double thr = steinThreshold(prob.M() / gamma, opts.tol);
  detail::SteinSolver solver(terms, n, thr);
  auto out = solver.solve(opts.maxIter);

  if (out.gammas) {
    bft_verdict::EnhancedLT1 lt;
    for (const auto& gk : *out.gammas) lt.gammas.push_back(gk(0, 0).real());
    lt.margin = out.margin;
    BftVerdict v = lt;
    if (verifyBft(prob, gamma, v, opts.tol).empty()) return v;
    return bft_verdict::Undecided{out.bestMargin};
  }
  if (!out.upsilon) return bft_verdict::Undecided{out.bestMargin};

  bft_verdict::EnhancedGE1 ge;
  ge.upsilon = purifyUpsilon(*out.upsilon, [&](const Mat& u) {
    for (const auto& q : Q)
      if ((q * u).trace().real() < -thr) return false;
    return true;
  });
  for (const auto& q : Q) ge.traces.push_back((q * ge.upsilon).trace().real());
  ge.factors = factorUpsilon(ge.upsilon);

  const Mat k = sqrtPsd(ge.upsilon);
  ge.khat = Vec(static_cast<Eigen::Index>(n) * n);
  for (int t = 0; t < n; ++t)
    for (int i = 0; i < n; ++i) ge.khat(t * n + i) = k(i, t);
  const Vec Lk = kron(identity(n), prob.M() / gamma) * ge.khat;

  BlockLayout lay(prob.graph());
  std::vector<Mat> blocks;
  for (int p = 0; p < prob.graph().size(); ++p) {
    const auto& c = prob.graph()[p];
    const Vec r = lay.extractRange(Lk, p, n);
    const Vec s = lay.extractSource(ge.khat, p, n);
    const double scale = std::max({r.squaredNorm(), s.squaredNorm(), 1e-300});
    const double slack = std::max(0.0, -ge.traces[p]);
    blocks.push_back(douglasSolve(r, s, n * c.ranges, n * c.sources, 1, std::max(1e-10, 4.0 * slack / scale + 1e-14)));
  }
  ge.delta = StructuredPerturbation(prob.graph(), std::move(blocks), n);
  ge.deltaNorm = ge.delta.norm();
  ge.residual = (ge.khat - ge.delta.dense() * Lk).norm();
  BftVerdict v = std::move(ge);
  if (verifyBft(prob, gamma, v, opts.tol).empty()) return v;
  return bft_verdict::Undecided{out.bestMargin};
}

struct BftMuResult {
  double mu = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  std::vector<double> gammas;
  int undecided = 0;
};

/// Bisection over bftDecide, independent of muHatBisect.
inline BftMuResult bftMu(const BftProblem& prob, double relTol = 1e-5, const SteinOptions& opts = {}) {
  BftMuResult res;
  const double smax = opNorm(prob.M());
  if (smax == 0.0) return res;
  double lo = 0.0, hi = smax * (1.0 + 1e-9);
  res.gammas.assign(prob.graph().size(), 1.0);
  while (hi - lo > relTol * hi) {
    const double mid = 0.5 * (lo + hi);
    BftVerdict v = bftDecide(prob, mid, opts);
    if (auto* lt = std::get_if<bft_verdict::EnhancedLT1>(&v)) {
      hi = mid;
      res.gammas = lt->gammas;
    } else {
      if (std::holds_alternative<bft_verdict::Undecided>(v)) ++res.undecided;
      lo = mid;
    }
  }
  res.lower = lo;
  res.upper = hi;
  res.mu = 0.5 * (lo + hi);
  return res;
}

}  // namespace ssv
