#pragma once

// Time-varying enhancement on a truncated time axis [0, N).
//
// Level-N vectors are slot-major: slot t of a level-N source vector is
// h[t * sourceDim, (t + 1) * sourceDim). A time-invariant plant acts as
// I_N (x) M. A level-N structured perturbation built from Upsilon mixes
// time slots freely; that freedom is exactly what the enhancement buys.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssv/graph.hpp"
#include "ssv/lmi.hpp"
#include "ssv/mu.hpp"
#include "ssv/tensor_hs.hpp"

namespace ssv {

class TruncatedSpace {
 public:
  TruncatedSpace(int N, int baseDim, std::vector<int> windows = {}) : N_(N), base_(baseDim), windows_(std::move(windows)) {
    require(N >= 1 && baseDim >= 1, "truncation: N and base dimension must be >= 1");
    if (windows_.empty()) windows_ = {0, N};
    require(windows_.front() == 0 && windows_.back() == N, "truncation: windows must start at 0 and end at N");
    for (std::size_t i = 1; i < windows_.size(); ++i)
      require(windows_[i] > windows_[i - 1], "truncation: window boundaries must increase");
  }

  int horizon() const { return N_; }
  int baseDim() const { return base_; }
  int dim() const { return N_ * base_; }
  const std::vector<int>& windows() const { return windows_; }
  int windowCount() const { return static_cast<int>(windows_.size()) - 1; }

  /// Forward shift V (x) I: slot t moves to slot t + 1, the last slot falls off.
  Mat shift() const {
    Mat v = Mat::Zero(dim(), dim());
    for (int t = 0; t + 1 < N_; ++t) v.block((t + 1) * base_, t * base_, base_, base_) = identity(base_);
    return v;
  }

  Mat slotProjector(int from, int to) const {
    Mat p = Mat::Zero(dim(), dim());
    for (int t = from; t < to; ++t) p.block(t * base_, t * base_, base_, base_) = identity(base_);
    return p;
  }

  Mat windowProjector(int n) const { return slotProjector(windows_.at(n), windows_.at(n + 1)); }
  Mat lastSlotProjector() const { return slotProjector(N_ - 1, N_); }

 private:
  int N_;
  int base_;
  std::vector<int> windows_;
};

/// phi_k(h) = U[P_{R,k} M h]^* U[P_{R,k} M h] - U[P_{S,k} h]^* U[P_{S,k} h] for a
/// full level-N operator M (block Toeplitz or I_N (x) M0).
inline std::vector<Mat> phiFormsOperator(const StructureGraph& g, const Mat& Mfull, const Vec& h, int N) {
  require(N >= 1, "phiForms: N must be >= 1");
  require(h.size() == static_cast<Eigen::Index>(N) * g.sourceDim(),
          "phiForms: h must have length N * sourceDim = " + std::to_string(N * g.sourceDim()));
  require(Mfull.rows() == static_cast<Eigen::Index>(N) * g.rangeDim() && Mfull.cols() == h.size(),
          "phiForms: operator must be (N rangeDim) x (N sourceDim)");
  BlockLayout lay(g);
  const Vec Mh = Mfull * h;
  std::vector<Mat> out;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    const Mat P = hsVec(lay.extractRange(Mh, k, N), N * c.ranges, c.multiplicity);
    const Mat Q = hsVec(lay.extractSource(h, k, N), N * c.sources, c.multiplicity);
    out.push_back(herm(P.adjoint() * P - Q.adjoint() * Q));
  }
  return out;
}

inline std::vector<Mat> phiForms(const StructureGraph& g, const Mat& M0, const Vec& h, int N) {
  require(M0.rows() == g.rangeDim() && M0.cols() == g.sourceDim(), "phiForms: M must be rangeDim x sourceDim");
  return phiFormsOperator(g, kron(identity(N), M0), h, N);
}

struct Factor {
  double alpha = 0.0;
  Vec h;  // single-slot source vector
};

/// h = sum_i sqrt(alpha_i) (slot-i copy of h_i); phi_k is additive over disjoint slots.
inline Vec windowCombine(const StructureGraph& g, const std::vector<Factor>& factors) {
  require(!factors.empty(), "windowCombine: need at least one factor");
  const int S = g.sourceDim();
  const int N = static_cast<int>(factors.size());
  Vec h = Vec::Zero(static_cast<Eigen::Index>(N) * S);
  for (int i = 0; i < N; ++i) {
    require(factors[i].alpha >= 0.0, "windowCombine: weights must be nonnegative");
    require(factors[i].h.size() == S, "windowCombine: factor vectors must have length sourceDim");
    h.segment(static_cast<Eigen::Index>(i) * S, S) = std::sqrt(factors[i].alpha) * factors[i].h;
  }
  return h;
}

/// Eigen-factorization of a PSD Upsilon, dropping alpha_i < cutoff * alpha_max.
inline std::vector<Factor> factorUpsilon(const Mat& upsilon, double cutoff = 1e-12) {
  HermEig e = hermEig(upsilon);
  const double amax = e.values.maxCoeff();
  std::vector<Factor> out;
  if (!(amax > 0.0)) return out;
  double total = 0.0;
  for (Eigen::Index i = e.values.size() - 1; i >= 0; --i) {
    if (e.values(i) < cutoff * amax) continue;
    out.push_back({e.values(i), e.vectors.col(i)});
    total += e.values(i);
  }
  for (auto& f : out) f.alpha /= total;
  return out;
}

/// Delta-hat on the truncated axis. `full` is the level-N structured operator;
/// windowPiece(n) = Delta-hat P_[t_n, t_{n+1}) is its restriction to one window.
struct TvPerturbation {
  TruncatedSpace rangeAxis;
  StructuredPerturbation full;

  Mat dense() const { return full.dense(); }
  double norm() const { return full.norm(); }
  Mat windowPiece(int n) const { return full.dense() * rangeAxis.windowProjector(n); }
};

struct TvSynthesis {
  TvPerturbation tv;
  Vec h;
  std::vector<Factor> factors;
  Mat upsilon;
  double residual = 0.0;  // ||(I - Delta-hat (I_N (x) M0 / gamma)) h|| / ||h||
  double deltaNorm = 0.0;
  double structureDefect = 0.0;
  bool verified = false;
};

struct TvNotPossible {
  std::vector<Mat> gammas;  // Stein certificate for M0 / gamma
  double margin = 0.0;
};

struct TvUndecided {
  double bestMargin = 0.0;
};

using TvOutcome = std::variant<TvSynthesis, TvNotPossible, TvUndecided>;

/// Re-checks a synthesis from its parts.
inline bool verifyTv(const StructureGraph& g, const Mat& M0, double gamma, TvSynthesis& s) {
  const int N = s.tv.rangeAxis.horizon();
  const Mat D = s.tv.dense();
  s.structureDefect = structureDefect(g, D, N);
  s.deltaNorm = opNorm(D);
  const Vec r = s.h - D * (kron(identity(N), M0 / gamma) * s.h);
  s.residual = r.norm() / std::max(s.h.norm(), 1e-300);
  s.verified = s.structureDefect == 0.0 && s.deltaNorm <= 1.0 + 1e-8 && s.residual <= 1e-5;
  return s.verified;
}

inline TvOutcome synthesizeTv(const StructureGraph& g, const Mat& M0, double gamma, const SteinOptions& opts = {}) {
  require(gamma > 0.0, "synthesizeTv: gamma must be positive");
  require(M0.rows() == g.rangeDim() && M0.cols() == g.sourceDim(), "synthesizeTv: M must be rangeDim x sourceDim");
  const Mat Mg = M0 / gamma;
  LmiVerdict v = solveStein(SteinProblem{g, Mg, std::nullopt}, opts);
  if (auto* f = std::get_if<lmi_verdict::Feasible>(&v)) return TvNotPossible{f->gammas, f->margin};
  if (auto* u = std::get_if<lmi_verdict::Undecided>(&v)) return TvUndecided{u->bestMargin};
  const auto& inf = std::get<lmi_verdict::Infeasible>(v);

  TvSynthesis s{TvPerturbation{TruncatedSpace(1, g.rangeDim()), zeroPerturbation(g)}, Vec(), {}, inf.upsilon};
  s.factors = factorUpsilon(inf.upsilon);
  const int N = static_cast<int>(s.factors.size());
  s.h = windowCombine(g, s.factors);

  BlockLayout lay(g);
  const Vec Mh = kron(identity(N), Mg) * s.h;
  std::vector<Mat> blocks;
  for (int k = 0; k < g.size(); ++k) {
    const auto& c = g[k];
    const Vec p = lay.extractRange(Mh, k, N);
    const Vec q = lay.extractSource(s.h, k, N);
    // The certificate only guarantees phi_k >= -threshold; allow exactly that much slack.
    const double scale = std::max({p.squaredNorm(), q.squaredNorm(), 1e-300});
    const Mat phi = hsVec(p, N * c.ranges, c.multiplicity).adjoint() * hsVec(p, N * c.ranges, c.multiplicity) -
                    hsVec(q, N * c.sources, c.multiplicity).adjoint() * hsVec(q, N * c.sources, c.multiplicity);
    const double slack = std::max(0.0, -lambdaMin(phi));
    const double tol = std::max(1e-10, 4.0 * slack / scale + 1e-14);
    blocks.push_back(douglasSolve(p, q, N * c.ranges, N * c.sources, c.multiplicity, tol));
  }
  std::vector<int> windows(N + 1);
  for (int i = 0; i <= N; ++i) windows[i] = i;
  s.tv = TvPerturbation{TruncatedSpace(N, g.rangeDim(), windows), StructuredPerturbation(g, std::move(blocks), N)};
  verifyTv(g, M0, gamma, s);
  return s;
}

struct ProbeResult {
  int N = 0;
  int samples = 0;
  double maxResolvent = 0.0;
  double bound = 0.0;  // sqrt(cond(Y)) / (1 - ||X^{1/2} M Y^{-1/2}||)
  double scaledNorm = 0.0;
};

/// Samples ||(I - Delta (I_N (x) M0))^{-1}|| over level-N structured Delta with
/// ||Delta|| <= 1. Requires a scaling certificate with ||X^{1/2} M0 Y^{-1/2}|| < 1.
inline ProbeResult uniformBoundProbe(const StructureGraph& g, const Mat& M0, int samples, int N, std::uint64_t seed,
                                     const std::vector<Mat>& gammas) {
  require(N >= 1 && samples >= 1, "probe: N and samples must be >= 1");
  ProbeResult res;
  res.N = N;
  ScalingPair sp = assembleScaling(g, gammas);
  res.scaledNorm = opNorm(sqrtPsd(sp.X) * M0 * invSqrtPd(sp.Y));
  require(res.scaledNorm < 1.0, "probe: scaling certificate does not show muHat < 1");
  const RVec ey = hermEig(sp.Y).values;
  res.bound = std::sqrt(ey.maxCoeff() / ey.minCoeff()) / (1.0 - res.scaledNorm);

  const Mat MN = kron(identity(N), M0);
  const Mat I = identity(MN.cols());
  CounterRng rng(seed, static_cast<std::uint64_t>(N));
  auto evaluate = [&](const StructuredPerturbation& d) {
    const double smin = singularValues(I - d.dense() * MN).minCoeff();
    if (!(smin > 0.0))
      throw NumericError("probe: I - Delta M is singular for ||Delta|| <= 1, contradicting the uniform bound");
    res.maxResolvent = std::max(res.maxResolvent, 1.0 / smin);
    ++res.samples;
  };

  // Constant-in-time lift of the worst classical direction, then random time-varying draws.
  LowerResult lo = muLowerSearch(g, M0, {8, seed, 100, false});
  if (lo.cert) {
    std::vector<Mat> blocks;
    const double nd = lo.cert->delta.norm();
    for (const auto& w : lo.cert->delta.blocks()) blocks.push_back(kron(identity(N), w / nd));
    evaluate(StructuredPerturbation(g, blocks, N));
  }
  for (int s = 0; s < samples; ++s) {
    std::vector<Mat> blocks;
    for (const auto& c : g.components()) {
      Mat w = randomComplex(c.sources * N, c.ranges * N, rng);
      blocks.push_back(w / opNorm(w));
    }
    evaluate(StructuredPerturbation(g, blocks, N));
  }
  if (res.maxResolvent > res.bound * (1.0 + 1e-9))
    throw VerificationError("probe: sampled resolvent norm exceeds the scaling bound");
  return res;
}

}  // namespace ssv
