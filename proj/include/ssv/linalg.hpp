#pragma once

// Dense complex linear algebra helpers shared by every module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace ssv {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

/// Malformed input: wrong shapes, invalid graphs, unparsable files.
class InputError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical routine could not produce a trustworthy answer.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An independently re-checked certificate did not hold.
class VerificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& what) {
  if (!cond) throw InputError(what);
}

inline Mat herm(const Mat& a) { return (a + a.adjoint()) * 0.5; }

inline bool allFinite(const Mat& a) { return a.allFinite(); }

/// Eigenvalues (ascending) and eigenvectors of the Hermitian part of `a`.
struct HermEig {
  RVec values;
  Mat vectors;
};

inline HermEig hermEig(const Mat& a) {
  Eigen::SelfAdjointEigenSolver<Mat> es(herm(a));
  if (es.info() != Eigen::Success) throw NumericError("Hermitian eigensolver failed");
  return {es.eigenvalues(), es.eigenvectors()};
}

inline double lambdaMax(const Mat& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(herm(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

inline double lambdaMin(const Mat& a) {
  if (a.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(herm(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline RVec singularValues(const Mat& a) {
  if (a.size() == 0) return RVec::Zero(0);
  Eigen::JacobiSVD<Mat> svd(a);
  return svd.singularValues();
}

inline double opNorm(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return singularValues(a)(0);
}

inline double sigmaMin(const Mat& a) {
  if (a.size() == 0) return 0.0;
  RVec s = singularValues(a);
  if (a.rows() != a.cols()) return 0.0;
  return s(s.size() - 1);
}

inline Eigen::VectorXcd eigenvalues(const Mat& a) {
  if (a.size() == 0) return Eigen::VectorXcd::Zero(0);
  Eigen::ComplexEigenSolver<Mat> es(a, false);
  if (es.info() != Eigen::Success) throw NumericError("complex eigensolver failed");
  return es.eigenvalues();
}

inline double spectralRadius(const Mat& a) {
  if (a.size() == 0) return 0.0;
  return eigenvalues(a).cwiseAbs().maxCoeff();
}

/// Standard Kronecker product, second factor varying fastest.
inline Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline Mat identity(Eigen::Index n) { return Mat::Identity(n, n); }

/// Principal square root of a Hermitian PSD matrix; negative round-off eigenvalues are clipped.
inline Mat sqrtPsd(const Mat& a) {
  HermEig e = hermEig(a);
  RVec s = e.values.cwiseMax(0.0).cwiseSqrt();
  return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

inline Mat invSqrtPd(const Mat& a) {
  HermEig e = hermEig(a);
  if (e.values.minCoeff() <= 0.0) throw NumericError("inverse square root of a non-positive matrix");
  RVec s = e.values.cwiseSqrt().cwiseInverse();
  return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

inline Mat projectPsd(const Mat& a) {
  HermEig e = hermEig(a);
  RVec s = e.values.cwiseMax(0.0);
  return e.vectors * s.cast<cplx>().asDiagonal() * e.vectors.adjoint();
}

/// Cholesky-based positive definiteness test, independent of any eigen solve.
inline bool choleskyOk(const Mat& a) {
  if (a.size() == 0) return true;
  Eigen::LLT<Mat> llt(herm(a));
  return llt.info() == Eigen::Success;
}

/// Relative symmetry defect ||A - A*|| / max(1, ||A||) in the Frobenius norm.
inline double hermitianDefect(const Mat& a) {
  if (a.rows() != a.cols()) return std::numeric_limits<double>::infinity();
  return (a - a.adjoint()).norm() / std::max(1.0, a.norm());
}

/// Counter-based generator: the i-th output is splitmix64(seed + i * golden).
/// Satisfies UniformRandomBitGenerator so it plugs into <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : seed_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() { return mix(seed_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  double normal() {
    // Box-Muller keeps the stream layout independent of the standard library.
    double u1 = uniform();
    double u2 = uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  cplx complexNormal() { return {normal() / std::sqrt(2.0), normal() / std::sqrt(2.0)}; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

inline Mat randomComplex(Eigen::Index rows, Eigen::Index cols, CounterRng& rng) {
  Mat out(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) out(i, j) = rng.complexNormal();
  return out;
}

inline Vec randomUnitVector(Eigen::Index n, CounterRng& rng) {
  Vec v = randomComplex(n, 1, rng);
  return v / v.norm();
}

inline Mat randomHermitian(Eigen::Index n, CounterRng& rng) { return herm(randomComplex(n, n, rng)); }

inline Mat randomPsd(Eigen::Index n, CounterRng& rng) {
  Mat g = randomComplex(n, n, rng);
  return g * g.adjoint();
}

/// Scales `a` so that its largest singular value is at most one.
inline Mat clipToContraction(const Mat& a) {
  if (a.size() == 0) return a;
  Eigen::JacobiSVD<Mat> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  RVec s = svd.singularValues().cwiseMin(1.0);
  return svd.matrixU() * s.cast<cplx>().asDiagonal() * svd.matrixV().adjoint();
}

}  // namespace ssv
