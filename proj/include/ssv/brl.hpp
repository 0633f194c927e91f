#pragma once

// Structured colligations U = [[A, B], [C, D]] and the strict bounded real lemma.
//
// A : H_S -> H_R, B : U -> H_R, C : H_S -> Y, D : U -> Y. The transfer
// function at a level-q structured tuple Z is
//
//   S(Z) = I (x) D + (I (x) C)(I - L(Z)(I (x) A))^{-1} L(Z)(I (x) B),
//
// a (q dimY) x (q dimU) matrix.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ssv/graph.hpp"
#include "ssv/lmi.hpp"

namespace ssv {

class SingularResolvent : public NumericError {
 public:
  using NumericError::NumericError;
};

class UnstableA : public NumericError {
 public:
  using NumericError::NumericError;
};

struct Colligation {
  Mat A, B, C, D;
  int dimU = 0;
  int dimY = 0;

  /// Shape check against `stateSource` x `stateRange` for A.
  void validate(int sourceDim, int rangeDim) const {
    require(dimU >= 1 && dimY >= 1, "colligation: dimU and dimY must be >= 1");
    require(A.rows() == rangeDim && A.cols() == sourceDim,
            "colligation: A must be rangeDim x sourceDim = " + std::to_string(rangeDim) + "x" +
                std::to_string(sourceDim));
    require(B.rows() == rangeDim && B.cols() == dimU, "colligation: B must be rangeDim x dimU");
    require(C.rows() == dimY && C.cols() == sourceDim, "colligation: C must be dimY x sourceDim");
    require(D.rows() == dimY && D.cols() == dimU, "colligation: D must be dimY x dimU");
    if (!A.allFinite() || !B.allFinite() || !C.allFinite() || !D.allFinite())
      throw NumericError("colligation: NaN or Inf entry");
  }
  void validate(const StructureGraph& g) const { validate(g.sourceDim(), g.rangeDim()); }

  Mat block() const {
    Mat u(A.rows() + C.rows(), A.cols() + B.cols());
    u << A, B, C, D;
    return u;
  }
};

inline Mat evalTransfer(const StructureGraph& g, const Colligation& col, const StructuredPerturbation& Z) {
  col.validate(g);
  require(Z.graph() == g, "evalTransfer: Z must live on the colligation's graph");
  const int q = Z.level();
  const Mat L = Z.dense();
  const Mat Iq = identity(q);
  const Mat LA = L * kron(Iq, col.A);
  const Mat I = identity(LA.rows());
  const Mat K = I - LA;
  if (singularValues(K).minCoeff() < 1e-12 * std::max(1.0, opNorm(LA)))
    throw SingularResolvent("evalTransfer: I - L(Z) A is numerically singular");
  return kron(Iq, col.D) + kron(Iq, col.C) * K.partialPivLu().solve(L * kron(Iq, col.B));
}

/// Complex Gaussian Z rescaled so that ||L(Z)|| = u with u uniform on [0, 1].
inline StructuredPerturbation sampleTuple(const StructureGraph& g, int q, CounterRng& rng) {
  StructuredPerturbation z = randomPerturbation(g, rng, q);
  const double u = rng.uniform();
  const double n = z.norm();
  return n > 0.0 ? z.scaled(u / n) : z;
}

struct BrlCertificate {
  std::vector<Mat> gammas;
  Colligation scaled;          // U' = diag(X^{1/2}, I) U diag(Y^{-1/2}, I)
  double margin = 0.0;         // 1 - ||U'||
  double lmiMargin = 0.0;      // -lambda_max(U^* diag(X, I) U - diag(Y, I))
};

struct BrlInfeasible {
  Mat upsilon;
};

struct BrlUndecided {
  double bestMargin = 0.0;
};

using BrlOutcome = std::variant<BrlCertificate, BrlInfeasible, BrlUndecided>;

inline Colligation similarityTransform(const StructureGraph& g, const std::vector<Mat>& gammas, const Colligation& col) {
  col.validate(g);
  ScalingPair sp = assembleScaling(g, gammas);
  const Mat Xh = sqrtPsd(sp.X);
  const Mat Yih = invSqrtPd(sp.Y);
  return Colligation{Xh * col.A * Yih, Xh * col.B, col.C * Yih, col.D, col.dimU, col.dimY};
}

/// The LMI form of the bounded real condition: U^* diag(X, I) U - diag(Y, I).
inline Mat brlLmi(const StructureGraph& g, const std::vector<Mat>& gammas, const Colligation& col) {
  ScalingPair sp = assembleScaling(g, gammas);
  const int r = g.rangeDim(), s = g.sourceDim();
  Mat Xa = Mat::Zero(r + col.dimY, r + col.dimY);
  Xa.topLeftCorner(r, r) = sp.X;
  Xa.bottomRightCorner(col.dimY, col.dimY) = identity(col.dimY);
  Mat Ya = Mat::Zero(s + col.dimU, s + col.dimU);
  Ya.topLeftCorner(s, s) = sp.Y;
  Ya.bottomRightCorner(col.dimU, col.dimU) = identity(col.dimU);
  const Mat U = col.block();
  return herm(U.adjoint() * Xa * U - Ya);
}

/// Strict BRL via the augmented structure g + full(dimU -> dimY); the solution is
/// divided by the loop block's scalar so that block's scaling is one.
inline BrlOutcome brlCheck(const StructureGraph& g, const Colligation& col, const SteinOptions& opts = {}) {
  col.validate(g);
  const StructureGraph aug = augmentWithFullBlock(g, col.dimU, col.dimY);
  LmiVerdict v = solveStein(SteinProblem{aug, col.block(), std::nullopt}, opts);
  if (auto* u = std::get_if<lmi_verdict::Undecided>(&v)) return BrlUndecided{u->bestMargin};
  if (auto* inf = std::get_if<lmi_verdict::Infeasible>(&v)) return BrlInfeasible{inf->upsilon};

  const auto& f = std::get<lmi_verdict::Feasible>(v);
  const double s = f.gammas.back()(0, 0).real();
  BrlCertificate cert;
  for (int k = 0; k < g.size(); ++k) cert.gammas.push_back(herm(f.gammas[k] / s));
  cert.scaled = similarityTransform(g, cert.gammas, col);
  cert.margin = 1.0 - opNorm(cert.scaled.block());
  const Mat lmi = brlLmi(g, cert.gammas, col);
  cert.lmiMargin = -lambdaMax(lmi);
  // Both forms must agree: the Schur complement links them exactly.
  const bool contractive = cert.margin > 0.0;
  const bool lmiStrict = choleskyOk(-lmi);
  if (contractive != lmiStrict)
    throw VerificationError("brl: contraction and LMI forms of the certificate disagree");
  if (!contractive) return BrlUndecided{f.margin};
  return cert;
}

/// max over samples of ||S(Z) - S'(Z)||, Z random with q in [1, qmax].
inline double transferDefect(const StructureGraph& g, const Colligation& a, const Colligation& b, int samples,
                             std::uint64_t seed, int qmax = 3) {
  CounterRng rng(seed, 91);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    const int q = 1 + i % qmax;
    auto z = sampleTuple(g, q, rng);
    try {
      worst = std::max(worst, (evalTransfer(g, a, z) - evalTransfer(g, b, z)).norm());
    } catch (const SingularResolvent&) {
      // The sample sits on a pole of the original realization; draw again.
      --i;
    }
  }
  return worst;
}

/// max over samples of ||S(Z)|| with ||L(Z)|| <= 1.
inline double sampledTransferNorm(const StructureGraph& g, const Colligation& col, int samples, std::uint64_t seed,
                                  int qmax = 3) {
  CounterRng rng(seed, 92);
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) worst = std::max(worst, opNorm(evalTransfer(g, col, sampleTuple(g, 1 + i % qmax, rng))));
  return worst;
}

struct FreqCertificate {
  std::vector<Mat> gammas;  // one per component of g
  Mat stateGamma;           // nx x nx
  double sweepMax = 0.0;    // max over the grid of sigma_max(X^{1/2} M(zeta) / gamma Y^{-1/2})
  int sweepPoints = 0;
  int violations = 0;
};

struct FreqInfeasible {
  Mat upsilon;
};

using FreqOutcome = std::variant<FreqCertificate, FreqInfeasible, BrlUndecided>;

/// M(zeta) = D + C (I - zeta A)^{-1} zeta B.
inline Mat freqResponse(const Colligation& ss, cplx zeta) {
  const Mat I = identity(ss.A.rows());
  return ss.D + ss.C * (I - zeta * ss.A).partialPivLu().solve(zeta * ss.B);
}

/// Constant D-scaling of a stable realization over the closed disk: the
/// structure gets an extra repeated-scalar state component of multiplicity nx.
inline FreqOutcome freqDomainScale(const StructureGraph& g, const Colligation& ss, double gamma = 1.0,
                                   int sweepPoints = 512, const SteinOptions& opts = {}) {
  const int nx = static_cast<int>(ss.A.rows());
  require(gamma > 0.0, "freq: gamma must be positive");
  require(nx >= 1 && ss.A.cols() == nx, "freq: A must be square");
  require(ss.dimU == g.sourceDim() && ss.dimY == g.rangeDim(),
          "freq: the structure must have sourceDim = dimU and rangeDim = dimY");
  ss.validate(nx, nx);
  const double rho = spectralRadius(ss.A);
  if (!(rho < 1.0)) throw UnstableA("freq: spectral radius of A is " + std::to_string(rho) + " >= 1");

  std::vector<Component> comps;
  std::string name = "state";
  for (const auto& c : g.components())
    if (c.name == name) name += "_";
  comps.push_back(Component{name, 1, 1, nx});
  for (const auto& c : g.components()) comps.push_back(c);
  const StructureGraph aug(comps);
  Mat M(nx + ss.dimY, nx + ss.dimU);
  M << ss.A, ss.B, ss.C / gamma, ss.D / gamma;

  LmiVerdict v = solveStein(SteinProblem{aug, M, std::nullopt}, opts);
  if (auto* u = std::get_if<lmi_verdict::Undecided>(&v)) return BrlUndecided{u->bestMargin};
  if (auto* inf = std::get_if<lmi_verdict::Infeasible>(&v)) return FreqInfeasible{inf->upsilon};
  const auto& f = std::get<lmi_verdict::Feasible>(v);

  FreqCertificate cert;
  cert.stateGamma = f.gammas[0];
  cert.gammas.assign(f.gammas.begin() + 1, f.gammas.end());
  ScalingPair sp = assembleScaling(g, cert.gammas);
  const Mat Xh = sqrtPsd(sp.X);
  const Mat Yih = invSqrtPd(sp.Y);
  cert.sweepPoints = sweepPoints;
  for (int i = 0; i < sweepPoints; ++i) {
    const cplx zeta = std::polar(1.0, 2.0 * M_PI * i / sweepPoints);
    const double s = opNorm(Xh * freqResponse(ss, zeta) * Yih) / gamma;
    cert.sweepMax = std::max(cert.sweepMax, s);
    if (!(s < 1.0)) ++cert.violations;
  }
  return cert;
}

}  // namespace ssv
