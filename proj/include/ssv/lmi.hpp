#pragma once

// Structured Stein feasibility: find Hermitian Gamma_k > 0 with
//
//   F(Gamma) = M^* X(Gamma) M - Y(Gamma) (+ R)  < 0,
//
// or prove that none exists with a PSD, trace-one Upsilon whose
// compressions Phi_k(Upsilon) are all PSD. The two sides are linked by
//
//   trace(F(Gamma) Upsilon) = sum_k trace(Gamma_k Phi_k(Upsilon)).
//
// Internally every component contributes a term
//   T_k(G) = sum_c pos_c^* G pos_c - sum_c neg_c^* G neg_c
// and the solver works on min over the trace-one PSD simplex of
// lambda_max(sum_k T_k(Gamma_k)), whose saddle-point dual is
// max over density matrices of min_k lambda_min(Phi_k(Upsilon)).

#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ssv/graph.hpp"

namespace ssv {

struct SteinProblem {
  StructureGraph graph;
  Mat M;                      // rangeDim x sourceDim
  std::optional<Mat> offset;  // Hermitian on the source space
};

struct SteinOptions {
  double tol = 1e-8;    // strictness margin, scaled by max(1, ||M||^2)
  int maxIter = 500;    // interior-point iterations
  std::uint64_t seed = 0x5eed;  // weak-duality spot checks
};

namespace lmi_verdict {

struct Feasible {
  std::vector<Mat> gammas;  // one per graph component, PD, trace sum one for homogeneous problems
  double margin = 0.0;      // -lambda_max(F(Gamma))
  int iterations = 0;
};

struct Infeasible {
  Mat upsilon;                    // PSD, trace one, on the source space
  std::vector<Mat> compressions;  // Phi_k(Upsilon), one per graph component
  double minEigenvalue = 0.0;     // min_k lambda_min(Phi_k), >= -threshold
  int iterations = 0;
};

struct Undecided {
  double bestMargin = 0.0;
  int iterations = 0;
};

}  // namespace lmi_verdict

using LmiVerdict = std::variant<lmi_verdict::Feasible, lmi_verdict::Infeasible, lmi_verdict::Undecided>;

inline bool isFeasible(const LmiVerdict& v) { return std::holds_alternative<lmi_verdict::Feasible>(v); }
inline bool isInfeasible(const LmiVerdict& v) { return std::holds_alternative<lmi_verdict::Infeasible>(v); }

/// One scaling variable Gamma (dim x dim) and its contribution to F.
struct ScalingTerm {
  int dim = 1;
  Mat pos;  // (copies * dim) x n
  Mat neg;

  Mat apply(const Mat& gamma) const {
    const Eigen::Index n = pos.cols() > 0 ? pos.cols() : neg.cols();
    Mat out = Mat::Zero(n, n);
    for (Eigen::Index c = 0; c < pos.rows() / dim; ++c) {
      const auto blk = pos.middleRows(c * dim, dim);
      out += blk.adjoint() * gamma * blk;
    }
    for (Eigen::Index c = 0; c < neg.rows() / dim; ++c) {
      const auto blk = neg.middleRows(c * dim, dim);
      out -= blk.adjoint() * gamma * blk;
    }
    return out;
  }

  /// Adjoint of apply under the trace pairing.
  Mat compress(const Mat& upsilon) const {
    Mat out = Mat::Zero(dim, dim);
    for (Eigen::Index c = 0; c < pos.rows() / dim; ++c) {
      const auto blk = pos.middleRows(c * dim, dim);
      out += blk * upsilon * blk.adjoint();
    }
    for (Eigen::Index c = 0; c < neg.rows() / dim; ++c) {
      const auto blk = neg.middleRows(c * dim, dim);
      out -= blk * upsilon * blk.adjoint();
    }
    return herm(out);
  }
};

/// Terms for the graph components of M^* X M - Y, in component order.
inline std::vector<ScalingTerm> graphTerms(const StructureGraph& g, const Mat& M) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(),
          "stein: M must be rangeDim x sourceDim = " + std::to_string(g.rangeDim()) + "x" +
              std::to_string(g.sourceDim()));
  BlockLayout lay(g);
  std::vector<ScalingTerm> terms;
  for (int k = 0; k < g.size(); ++k) {
    ScalingTerm t;
    t.dim = g[k].multiplicity;
    t.pos = M.middleRows(lay.rangeOffset(k), lay.rangeExtent(k));
    t.neg = lay.sourceSelector(k);
    terms.push_back(std::move(t));
  }
  return terms;
}

/// Phi_k(Upsilon) for every component: the partial trace onto C^{d_k} of
/// the component-k rows of (M Upsilon M^*) minus those of Upsilon.
inline std::vector<Mat> compress(const StructureGraph& g, const Mat& M, const Mat& upsilon) {
  require(upsilon.rows() == g.sourceDim() && upsilon.cols() == g.sourceDim(), "compress: Upsilon must be sourceDim square");
  std::vector<Mat> out;
  for (const auto& t : graphTerms(g, M)) out.push_back(t.compress(upsilon));
  return out;
}

/// F(Gamma) = M^* X M - Y assembled through graph_core (independent of the solver's terms).
inline Mat steinMatrix(const StructureGraph& g, const Mat& M, const std::vector<Mat>& gammas) {
  ScalingPair sp = assembleScaling(g, gammas);
  return herm(M.adjoint() * sp.X * M - sp.Y);
}

namespace detail {

using Blocks = std::vector<Mat>;

inline double inner(const Blocks& a, const Blocks& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i].conjugate().cwiseProduct(b[i])).sum().real();
  return s;
}

/// Largest alpha with X + alpha dX still PSD (infinite if dX >= 0).
inline double maxStep(const Blocks& X, const Blocks& dX) {
  double alpha = 1e300;
  for (std::size_t b = 0; b < X.size(); ++b) {
    Eigen::LLT<Mat> llt(X[b]);
    if (llt.info() != Eigen::Success) return 0.0;
    Mat Linv = llt.matrixL().solve(identity(X[b].rows()));
    const double lmin = lambdaMin(Linv * dX[b] * Linv.adjoint());
    if (lmin < 0.0) alpha = std::min(alpha, -1.0 / lmin);
  }
  return alpha;
}

/// Primal-dual interior point for the normalized Stein problem.
class SteinSolver {
 public:
  SteinSolver(std::vector<ScalingTerm> terms, Eigen::Index n, double threshold)
      : terms_(std::move(terms)), n_(n), thr_(threshold) {
    K_ = static_cast<int>(terms_.size());
    int D = 0;
    for (const auto& t : terms_) D += t.dim;
    D_ = D;
    buildBasis();
  }

  struct Outcome {
    std::optional<std::vector<Mat>> gammas;  // trace-normalized, PD
    double margin = 0.0;
    std::optional<Mat> upsilon;
    double upsilonMinEig = 0.0;
    double bestMargin = -1e300;
    int iterations = 0;
  };

  Mat evalF(const std::vector<Mat>& gammas) const {
    Mat f = Mat::Zero(n_, n_);
    for (int k = 0; k < K_; ++k) f += terms_[k].apply(gammas[k]);
    return herm(f);
  }

  Outcome solve(int maxIter) {
    Outcome out;
    const int nb = K_ + 1;
    // Dual (inequality) form: S = C - sum_i y_i A_i >= 0, maximize b^T y with b = -e_0.
    Blocks C(nb);
    C[0] = -evalF(gamma0());
    for (int k = 0; k < K_; ++k) C[k + 1] = identity(terms_[k].dim) / double(D_);

    const int m = static_cast<int>(A_.size());
    RVec b = RVec::Zero(m);
    b(0) = -1.0;

    double ntot = static_cast<double>(n_);
    for (const auto& t : terms_) ntot += t.dim;

    double normA = 0.0;
    for (const auto& a : A_) normA = std::max(normA, std::sqrt(inner(a, a)));
    const double normC = std::sqrt(inner(C, C));
    const double xi = std::max({10.0, std::sqrt(ntot), 2.0 / (1.0 + normA)});
    const double eta = std::max({10.0, std::sqrt(ntot), normA, normC});

    Blocks X(nb), S(nb);
    X[0] = identity(n_) * xi;
    S[0] = identity(n_) * eta;
    for (int k = 0; k < K_; ++k) {
      X[k + 1] = identity(terms_[k].dim) * xi;
      S[k + 1] = identity(terms_[k].dim) * eta;
    }
    RVec y = RVec::Zero(m);

    // Once a certificate appears, keep iterating towards the saddle point and
    // keep the latest certificate of the same kind: it has the widest margin.
    std::optional<Outcome> found;
    auto record = [&](int it) {
      Outcome trial;
      trial.bestMargin = out.bestMargin;
      const bool ok = checkCandidates(X, y, trial);
      out.bestMargin = std::max(out.bestMargin, trial.bestMargin);
      if (!ok) return;
      if (found && found->gammas.has_value() != trial.gammas.has_value()) return;
      trial.iterations = it;
      found = std::move(trial);
    };

    for (int it = 0; it < maxIter; ++it) {
      out.iterations = it + 1;
      record(it + 1);

      RVec rp = b - Aop(X);
      Blocks Rd = C;
      Blocks Ay = Aadj(y);
      for (int i = 0; i < nb; ++i) Rd[i] = C[i] - S[i] - Ay[i];
      const double mu = inner(X, S) / ntot;

      const double pinf = rp.norm() / (1.0 + b.norm());
      const double dinf = std::sqrt(inner(Rd, Rd)) / (1.0 + normC);
      const double pobj = inner(C, X);
      const double dobj = b.dot(y);
      const double gap = std::abs(pobj - dobj) / (1.0 + std::abs(pobj) + std::abs(dobj));
      if (pinf < 1e-13 && dinf < 1e-13 && gap < 1e-13) break;
      if (found && pinf < 1e-10 && dinf < 1e-10 && gap < 1e-10) break;
      if (!X[0].allFinite() || !S[0].allFinite()) throw NumericError("stein: NaN in interior-point iterate");

      Blocks Sinv(nb);
      for (int i = 0; i < nb; ++i) {
        Eigen::LLT<Mat> llt(S[i]);
        if (llt.info() != Eigen::Success) return found ? *found : out;
        Sinv[i] = llt.solve(identity(S[i].rows()));
      }

      // Schur complement H_ij = <A_i, X A_j S^{-1}>.
      std::vector<Blocks> G(m, Blocks(nb));
      for (int j = 0; j < m; ++j)
        for (int i = 0; i < nb; ++i) G[j][i] = X[i] * A_[j][i] * Sinv[i];
      RMat H(m, m);
      for (int i = 0; i < m; ++i)
        for (int j = i; j < m; ++j) {
          double s = 0.0;
          for (int blk = 0; blk < nb; ++blk) s += (A_[i][blk].transpose().cwiseProduct(G[j][blk])).sum().real();
          H(i, j) = s;
          H(j, i) = s;
        }
      Eigen::LDLT<RMat> ldlt(H);
      if (ldlt.info() != Eigen::Success) return found ? *found : out;

      auto direction = [&](const Blocks& Rc, RVec& dy, Blocks& dX, Blocks& dS) {
        Blocks t(nb);
        for (int i = 0; i < nb; ++i) t[i] = Rc[i] - X[i] * Rd[i] * Sinv[i];
        dy = ldlt.solve(rp - Aop(t));
        Blocks Ady = Aadj(dy);
        dS.assign(nb, Mat());
        dX.assign(nb, Mat());
        for (int i = 0; i < nb; ++i) {
          dS[i] = Rd[i] - Ady[i];
          dX[i] = herm(Rc[i] - X[i] * dS[i] * Sinv[i]);
        }
      };

      // Predictor.
      Blocks Rc(nb);
      for (int i = 0; i < nb; ++i) Rc[i] = -X[i];
      RVec dya;
      Blocks dXa, dSa;
      direction(Rc, dya, dXa, dSa);
      const double ap = std::min(1.0, maxStep(X, dXa));
      const double ad = std::min(1.0, maxStep(S, dSa));
      Blocks Xa = X, Sa = S;
      for (int i = 0; i < nb; ++i) {
        Xa[i] += ap * dXa[i];
        Sa[i] += ad * dSa[i];
      }
      const double mua = inner(Xa, Sa) / ntot;
      const double sigma = std::clamp(std::pow(std::max(mua, 0.0) / mu, 3.0), 0.0, 1.0);

      // Corrector.
      for (int i = 0; i < nb; ++i) Rc[i] = sigma * mu * Sinv[i] - X[i] - dXa[i] * dSa[i] * Sinv[i];
      RVec dy;
      Blocks dX, dS;
      direction(Rc, dy, dX, dS);
      const double frac = 0.95;
      const double alphaP = std::min(1.0, frac * maxStep(X, dX));
      const double alphaD = std::min(1.0, frac * maxStep(S, dS));
      if (alphaP < 1e-14 && alphaD < 1e-14) break;
      for (int i = 0; i < nb; ++i) {
        X[i] = herm(X[i] + alphaP * dX[i]);
        S[i] = herm(S[i] + alphaD * dS[i]);
      }
      y += alphaD * dy;
    }
    record(out.iterations);
    if (found) {
      found->bestMargin = out.bestMargin;
      return *found;
    }
    return out;
  }

  const std::vector<ScalingTerm>& terms() const { return terms_; }

 private:
  std::vector<Mat> gamma0() const {
    std::vector<Mat> g;
    for (const auto& t : terms_) g.push_back(identity(t.dim) / double(D_));
    return g;
  }

  // Trace-zero Hermitian basis, orthonormal in the Frobenius inner product.
  void buildBasis() {
    std::vector<std::vector<Mat>> basis;
    auto zeros = [&]() {
      std::vector<Mat> z;
      for (const auto& t : terms_) z.push_back(Mat::Zero(t.dim, t.dim));
      return z;
    };
    const double r2 = 1.0 / std::sqrt(2.0);
    for (int k = 0; k < K_; ++k) {
      const int d = terms_[k].dim;
      for (int a = 0; a < d; ++a)
        for (int c = a + 1; c < d; ++c) {
          auto re = zeros();
          re[k](a, c) = r2;
          re[k](c, a) = r2;
          basis.push_back(std::move(re));
          auto im = zeros();
          im[k](a, c) = cplx(0, r2);
          im[k](c, a) = cplx(0, -r2);
          basis.push_back(std::move(im));
        }
    }
    // Helmert vectors over all D diagonal positions.
    std::vector<std::pair<int, int>> diag;
    for (int k = 0; k < K_; ++k)
      for (int a = 0; a < terms_[k].dim; ++a) diag.emplace_back(k, a);
    for (int j = 1; j < D_; ++j) {
      auto v = zeros();
      const double s = 1.0 / std::sqrt(double(j) * (j + 1));
      for (int i = 0; i < j; ++i) v[diag[i].first](diag[i].second, diag[i].second) = s;
      v[diag[j].first](diag[j].second, diag[j].second) = -double(j) * s;
      basis.push_back(std::move(v));
    }
    basis_ = std::move(basis);

    // Constraint matrices: index 0 is t, then one per basis element.
    const int nb = K_ + 1;
    Blocks At(nb);
    At[0] = -identity(n_);
    for (int k = 0; k < K_; ++k) At[k + 1] = Mat::Zero(terms_[k].dim, terms_[k].dim);
    A_.push_back(std::move(At));
    for (const auto& B : basis_) {
      Blocks Aj(nb);
      Aj[0] = evalF(B);
      for (int k = 0; k < K_; ++k) Aj[k + 1] = -B[k];
      A_.push_back(std::move(Aj));
    }
  }

  RVec Aop(const Blocks& X) const {
    RVec out(A_.size());
    for (std::size_t i = 0; i < A_.size(); ++i) out(i) = inner(A_[i], X);
    return out;
  }

  Blocks Aadj(const RVec& y) const {
    Blocks out(K_ + 1);
    out[0] = Mat::Zero(n_, n_);
    for (int k = 0; k < K_; ++k) out[k + 1] = Mat::Zero(terms_[k].dim, terms_[k].dim);
    for (std::size_t i = 0; i < A_.size(); ++i)
      for (int b = 0; b < K_ + 1; ++b) out[b] += y(i) * A_[i][b];
    return out;
  }

  std::vector<Mat> gammasFrom(const RVec& y) const {
    std::vector<Mat> g = gamma0();
    for (std::size_t j = 0; j < basis_.size(); ++j)
      for (int k = 0; k < K_; ++k) g[k] += y(j + 1) * basis_[j][k];
    for (auto& gk : g) gk = herm(gk);
    return g;
  }

  // Tests the current iterate for either certificate. Returns true when one verifies.
  bool checkCandidates(const Blocks& X, const RVec& y, Outcome& out) const {
    // Gamma side.
    std::vector<Mat> g = gammasFrom(y);
    double tr = 0.0;
    for (auto& gk : g) {
      gk = projectPsd(gk);
      tr += gk.trace().real();
    }
    if (tr > 0.0) {
      for (auto& gk : g) gk /= tr;
      double lmax = lambdaMax(evalF(g));
      out.bestMargin = std::max(out.bestMargin, -lmax);
      if (lmax < -thr_) {
        // Nudge every block into the open cone without giving back more than 0.1% of the margin.
        double scaleF = 0.0;
        for (const auto& t : terms_) scaleF = std::max(scaleF, opNorm(t.apply(identity(t.dim))));
        const double eps = 1e-3 * (-lmax) / (double(D_) * std::max(scaleF, 1e-300));
        double tr2 = 0.0;
        for (std::size_t k = 0; k < g.size(); ++k) {
          g[k] += eps * identity(g[k].rows());
          tr2 += g[k].trace().real();
        }
        for (auto& gk : g) gk /= tr2;
        const Mat F = evalF(g);
        const double margin = -lambdaMax(F);
        bool ok = margin > thr_ && choleskyOk(-F - 0.5 * margin * identity(n_));
        for (const auto& gk : g) ok = ok && choleskyOk(gk) && lambdaMin(gk) > 0.0;
        if (ok) {
          out.gammas = std::move(g);
          out.margin = margin;
          return true;
        }
      }
    }
    // Upsilon side.
    Mat U = projectPsd(X[0]);
    const double utr = U.trace().real();
    if (utr > 0.0 && U.allFinite()) {
      U /= utr;
      double mine = 1e300;
      for (const auto& t : terms_) mine = std::min(mine, lambdaMin(t.compress(U)));
      if (mine >= -thr_) {
        out.upsilon = U;
        out.upsilonMinEig = mine;
        return true;
      }
    }
    return false;
  }

  std::vector<ScalingTerm> terms_;
  Eigen::Index n_;
  double thr_;
  int K_ = 0;
  int D_ = 0;
  std::vector<std::vector<Mat>> basis_;
  std::vector<Blocks> A_;
};

/// Splits a Hermitian offset R into a multiplicity-one term with pos/neg square roots.
inline ScalingTerm offsetTerm(const Mat& R) {
  HermEig e = hermEig(R);
  ScalingTerm t;
  t.dim = 1;
  std::vector<Eigen::Index> p, q;
  for (Eigen::Index i = 0; i < e.values.size(); ++i) {
    if (e.values(i) > 0) p.push_back(i);
    if (e.values(i) < 0) q.push_back(i);
  }
  t.pos = Mat::Zero(static_cast<Eigen::Index>(p.size()), R.cols());
  t.neg = Mat::Zero(static_cast<Eigen::Index>(q.size()), R.cols());
  for (std::size_t i = 0; i < p.size(); ++i) t.pos.row(i) = std::sqrt(e.values(p[i])) * e.vectors.col(p[i]).adjoint();
  for (std::size_t i = 0; i < q.size(); ++i) t.neg.row(i) = std::sqrt(-e.values(q[i])) * e.vectors.col(q[i]).adjoint();
  return t;
}

}  // namespace detail

/// Drops the interior-point tail of an Upsilon certificate: eigenvalues below
/// 1e-6 alpha_max are removed when the truncated density still passes `check`.
template <typename Check>
Mat purifyUpsilon(const Mat& upsilon, Check check) {
  HermEig e = hermEig(upsilon);
  const double amax = e.values.maxCoeff();
  if (!(amax > 0.0)) return upsilon;
  RVec kept = e.values;
  for (Eigen::Index i = 0; i < kept.size(); ++i)
    if (kept(i) < 1e-6 * amax) kept(i) = 0.0;
  Mat u = e.vectors * kept.cast<cplx>().asDiagonal() * e.vectors.adjoint();
  u = herm(u / u.trace().real());
  return check(u) ? u : upsilon;
}

/// Threshold used for strictness: tol * max(1, ||M||^2).
inline double steinThreshold(const Mat& M, double tol) { return tol * std::max(1.0, opNorm(M) * opNorm(M)); }

/// Re-verifies a Feasible verdict from scratch through graph_core. Returns an error message or empty.
inline std::string verifyFeasible(const SteinProblem& prob, const lmi_verdict::Feasible& f) {
  if (static_cast<int>(f.gammas.size()) != prob.graph.size()) return "wrong number of Gamma blocks";
  for (const auto& g : f.gammas)
    if (!choleskyOk(g)) return "Gamma block is not positive definite";
  Mat F = steinMatrix(prob.graph, prob.M, f.gammas);
  if (prob.offset) F += herm(*prob.offset);
  if (!(f.margin > 0.0)) return "non-positive margin";
  if (!choleskyOk(-F - 0.5 * f.margin * identity(F.rows()))) return "Cholesky of -F(Gamma) failed";
  return {};
}

/// Re-verifies an Infeasible verdict: PSD, trace one, compressions >= -thr and
/// weak duality trace(F(Gamma) Upsilon) >= -thr sum_k tr Gamma_k on random PSD draws.
inline std::string verifyInfeasible(const SteinProblem& prob, const lmi_verdict::Infeasible& inf, double thr,
                                    std::uint64_t seed, int draws = 20) {
  const Mat& U = inf.upsilon;
  if (U.rows() != prob.graph.sourceDim()) return "Upsilon has the wrong size";
  if (std::abs(U.trace().real() - 1.0) > 1e-9) return "Upsilon trace is not one";
  if (lambdaMin(U) < -1e-12) return "Upsilon is not PSD";
  const double slack = thr * (1.0 + 1e-6) + 1e-15;
  std::vector<Mat> phi = compress(prob.graph, prob.M, U);
  for (const auto& p : phi)
    if (!choleskyOk(p + slack * identity(p.rows()))) return "compression below -threshold";
  CounterRng rng(seed, 77);
  const double offsetPart = prob.offset ? (herm(*prob.offset) * U).trace().real() : 0.0;
  for (int d = 0; d < draws; ++d) {
    std::vector<Mat> g;
    double trg = 0.0;
    for (const auto& c : prob.graph.components()) {
      g.push_back(randomPsd(c.multiplicity, rng));
      trg += g.back().trace().real();
    }
    const double lhs = (steinMatrix(prob.graph, prob.M, g) * U).trace().real();
    // With an offset the certificate is for the homogenized problem at tau = 1.
    const double mass = trg + (prob.offset ? 1.0 : 0.0);
    const double bound = -slack * mass * (1.0 + 1e-9) - 1e-12 * trg;
    if (lhs + offsetPart < bound) return "weak duality violated";
  }
  if (prob.offset && offsetPart < -slack) return "offset compression below -threshold";
  return {};
}

inline LmiVerdict solveStein(const SteinProblem& prob, const SteinOptions& opts = {}) {
  const auto& g = prob.graph;
  require(prob.M.rows() == g.rangeDim() && prob.M.cols() == g.sourceDim(),
          "stein: M must be rangeDim x sourceDim = " + std::to_string(g.rangeDim()) + "x" +
              std::to_string(g.sourceDim()));
  if (!prob.M.allFinite()) throw NumericError("stein: M contains NaN or Inf");
  if (prob.offset) {
    require(prob.offset->rows() == g.sourceDim() && prob.offset->cols() == g.sourceDim(),
            "stein: offset must be sourceDim square");
    require(hermitianDefect(*prob.offset) <= 1e-12, "stein: offset must be Hermitian");
  }

  std::vector<ScalingTerm> terms = graphTerms(g, prob.M);
  if (prob.offset) terms.push_back(detail::offsetTerm(*prob.offset));
  const double thr = steinThreshold(prob.M, opts.tol);
  detail::SteinSolver solver(terms, g.sourceDim(), thr);
  auto out = solver.solve(opts.maxIter);

  if (out.gammas) {
    std::vector<Mat> gam(out.gammas->begin(), out.gammas->begin() + g.size());
    double margin = out.margin;
    if (prob.offset) {
      // Undo the homogenization: divide by the offset's scalar, or scale up when it vanished.
      const double tau = (*out.gammas)[g.size()](0, 0).real();
      const Mat F0 = steinMatrix(g, prob.M, gam);
      const double lam0 = lambdaMax(F0);
      const double lamR = lambdaMax(herm(*prob.offset));
      double c = tau > 0.0 ? 1.0 / tau : 0.0;
      auto marginAt = [&](double s) { return -lambdaMax(s * F0 + herm(*prob.offset)); };
      if (!(c > 0.0) || marginAt(c) <= 0.0) c = lam0 < 0.0 ? 2.0 * std::max(lamR, 1.0) / (-lam0) : 0.0;
      if (c > 0.0 && marginAt(c) > 0.0) {
        for (auto& gk : gam) gk *= c;
        margin = marginAt(c);
      } else {
        return lmi_verdict::Undecided{out.bestMargin, out.iterations};
      }
    }
    lmi_verdict::Feasible f{std::move(gam), margin, out.iterations};
    if (verifyFeasible(prob, f).empty()) return f;
    return lmi_verdict::Undecided{out.bestMargin, out.iterations};
  }
  if (out.upsilon) {
    lmi_verdict::Infeasible inf;
    inf.upsilon = purifyUpsilon(*out.upsilon, [&](const Mat& u) {
      for (const auto& t : terms)
        if (lambdaMin(t.compress(u)) < -thr) return false;
      return true;
    });
    out.upsilonMinEig = 1e300;
    for (const auto& t : terms) out.upsilonMinEig = std::min(out.upsilonMinEig, lambdaMin(t.compress(inf.upsilon)));
    inf.compressions = compress(g, prob.M, inf.upsilon);
    inf.minEigenvalue = out.upsilonMinEig;
    inf.iterations = out.iterations;
    if (verifyInfeasible(prob, inf, thr, opts.seed).empty()) return inf;
  }
  return lmi_verdict::Undecided{out.bestMargin, out.iterations};
}

struct MuHatOptions {
  double relTol = 1e-5;
  std::optional<double> gammaMax;  // defaults to sigma_max(M) (1 + 1e-9)
  SteinOptions stein;
};

struct MuHatResult {
  double muHat = 0.0;
  double lower = 0.0;  // largest gamma shown not feasible (Infeasible or Undecided)
  double upper = 0.0;  // smallest gamma with a Gamma certificate
  std::vector<Mat> gammas;  // certificate: ||X^{1/2} M Y^{-1/2}|| < upper
  std::vector<std::string> warnings;
  int solves = 0;
};

/// Bisection on gamma: muHat < gamma iff the Stein problem for M / gamma is feasible.
inline MuHatResult muHatBisect(const StructureGraph& g, const Mat& M, const MuHatOptions& opts = {}) {
  require(M.rows() == g.rangeDim() && M.cols() == g.sourceDim(), "muHat: M must be rangeDim x sourceDim");
  MuHatResult res;
  const double smax = opNorm(M);
  res.gammas = identityGammas(g);
  double D = 0.0;
  for (const auto& c : g.components()) D += c.multiplicity;
  for (auto& gk : res.gammas) gk /= D;
  if (smax == 0.0) {
    res.muHat = res.lower = res.upper = 0.0;
    return res;
  }
  double hi = opts.gammaMax.value_or(smax * (1.0 + 1e-9));
  double lo = 0.0;
  // Square structures contain delta * I, so the spectral radius is a valid lower bracket.
  bool allSquare = true;
  for (const auto& c : g.components()) allSquare = allSquare && c.sources == c.ranges;
  if (allSquare) lo = std::min(spectralRadius(M) * (1.0 - 1e-9), hi);
  double undecidedHi = 0.0;
  while (hi - lo > opts.relTol * hi) {
    const double mid = 0.5 * (lo + hi);
    SteinProblem p{g, M / mid, std::nullopt};
    LmiVerdict v = solveStein(p, opts.stein);
    ++res.solves;
    if (auto* f = std::get_if<lmi_verdict::Feasible>(&v)) {
      hi = mid;
      res.gammas = f->gammas;
    } else {
      if (std::holds_alternative<lmi_verdict::Undecided>(v)) undecidedHi = std::max(undecidedHi, mid);
      lo = mid;
    }
  }
  if (undecidedHi > 0.0)
    res.warnings.push_back("undecided Stein verdicts; muHat interval widened to [" + std::to_string(lo) + ", " +
                           std::to_string(hi) + "]");
  res.lower = lo;
  res.upper = hi;
  res.muHat = 0.5 * (lo + hi);
  return res;
}

/// ||X^{1/2} M Y^{-1/2}|| for a scaling certificate; strictly below gamma when the certificate is valid.
inline double scaledNorm(const StructureGraph& g, const Mat& M, const std::vector<Mat>& gammas) {
  ScalingPair sp = assembleScaling(g, gammas);
  return opNorm(sqrtPsd(sp.X) * M * invSqrtPd(sp.Y));
}

}  // namespace ssv
