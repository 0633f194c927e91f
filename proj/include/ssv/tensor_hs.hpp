#pragma once

// Tensor products as Hilbert-Schmidt operators.
//
// With conjugation fixed to entrywise conjugation, the identification
// U : H (x) K -> C_2(K, H) sends h (x) k to h k^T. Under the ordering used
// everywhere in this library (H index slow, K index fast) it is a plain
// row-major reshape.

#include <sstream>

#include "ssv/linalg.hpp"

namespace ssv {

/// U_{H,K}: length dimH*dimK vector -> dimH x dimK matrix.
inline Mat hsVec(const Vec& h, int dimH, int dimK) {
  require(dimH >= 0 && dimK >= 0 && h.size() == static_cast<Eigen::Index>(dimH) * dimK,
          "hsVec: vector length " + std::to_string(h.size()) + " != " + std::to_string(dimH) + "*" +
              std::to_string(dimK));
  Mat out(dimH, dimK);
  for (int a = 0; a < dimH; ++a)
    for (int j = 0; j < dimK; ++j) out(a, j) = h(a * dimK + j);
  return out;
}

/// Inverse of hsVec.
inline Vec hsUnvec(const Mat& m) {
  Vec out(m.rows() * m.cols());
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out(a * m.cols() + j) = m(a, j);
  return out;
}

/// Y^T : k -> conj(Y^* conj(k)), which in the standard basis is the plain transpose.
inline Mat transposeOp(const Mat& y) { return y.adjoint().conjugate(); }

/// Thrown when the solvability criterion U[q]^*U[q] - U[p]^*U[p] <= 0 fails.
class CriterionViolated : public NumericError {
 public:
  CriterionViolated(double eig, double tol)
      : NumericError(message(eig, tol)), violatingEigenvalue(eig), tolerance(tol) {}
  double violatingEigenvalue;
  double tolerance;

 private:
  static std::string message(double eig, double tol) {
    std::ostringstream os;
    os << "douglasSolve: criterion violated, lambda_max = " << eig << " > tol = " << tol;
    return os.str();
  }
};

/// Finds X : H -> K with ||X|| <= 1 and (X (x) I_{H0}) p = q.
///
/// `tol` bounds the allowed criterion violation relative to max(||p||^2, ||q||^2).
/// The solution is Q P^+ on range(P^*), zero on its complement, with its
/// singular values clipped to one.
inline Mat douglasSolve(const Vec& p, const Vec& q, int dimH, int dimK, int dimH0, double tol = 1e-10) {
  const Mat P = hsVec(p, dimH, dimH0);
  const Mat Q = hsVec(q, dimK, dimH0);
  const double scale = std::max(p.squaredNorm(), q.squaredNorm());
  if (scale == 0.0) return Mat::Zero(dimK, dimH);
  const double viol = lambdaMax(Q.adjoint() * Q - P.adjoint() * P);
  if (viol > tol * scale) throw CriterionViolated(viol, tol * scale);

  // X P = Q with X = Q P^+, where P^+ uses an SVD cutoff of 1e-12 * sigma_max.
  Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const RVec& s = svd.singularValues();
  Mat X = Mat::Zero(dimK, dimH);
  if (s.size() > 0 && s(0) > 0.0) {
    const double cut = 1e-12 * s(0);
    for (Eigen::Index i = 0; i < s.size(); ++i) {
      if (s(i) <= cut) break;
      // P = sum_i s_i u_i v_i^*, so P^+ = sum_i v_i u_i^* / s_i and Q P^+ = sum_i (Q v_i) u_i^* / s_i.
      X += (Q * svd.matrixV().col(i)) * svd.matrixU().col(i).adjoint() / s(i);
    }
  }
  return clipToContraction(X);
}

}  // namespace ssv
