#pragma once

// Dense complex linear algebra for the small matrices (n, m1, m2 <= 16) that
// appear in the construction: matrix exponential, Sylvester solve, spectra and
// composite Simpson quadrature of matrix-valued integrands.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "nnls_gbdt/error.hpp"

namespace nnls {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

inline constexpr Complex kI{0.0, 1.0};

namespace numkit {

inline bool all_finite(const ComplexMatrix& m) {
  for (Eigen::Index k = 0; k < m.size(); ++k) {
    const Complex v = m.data()[k];
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
  }
  return true;
}

/// Builds a rows x cols matrix from row-major entries; rejects wrong sizes and NaN/Inf.
inline ComplexMatrix make_matrix(Eigen::Index rows, Eigen::Index cols,
                                 std::span<const Complex> row_major) {
  if (rows <= 0 || cols <= 0)
    throw Error(ErrorKind::DimensionMismatch, "matrix dimensions must be positive");
  if (static_cast<Eigen::Index>(row_major.size()) != rows * cols)
    throw Error(ErrorKind::DimensionMismatch,
                "expected " + std::to_string(rows * cols) + " entries, got " +
                    std::to_string(row_major.size()));
  ComplexMatrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = row_major[r * cols + c];
  if (!all_finite(m)) throw Error(ErrorKind::NonFinite, "matrix has non-finite entries");
  return m;
}

/// Maximum absolute column sum.
inline double norm1(const ComplexMatrix& m) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < m.cols(); ++c) best = std::max(best, m.col(c).cwiseAbs().sum());
  return best;
}

/// Largest entry modulus; the norm used for all residual reports.
inline double max_abs(const ComplexMatrix& m) {
  return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

inline void require_square(const ComplexMatrix& m, const char* what) {
  if (m.rows() != m.cols())
    throw Error(ErrorKind::NonSquare, std::string(what) + " must be square, got " +
                                          std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

/// Upper bound on the 1-norm accepted by expm.
inline constexpr double kExpmMaxNorm = 1.0e3;

/// e^M by scaling and squaring with the degree-13 Pade approximant.
inline ComplexMatrix expm(const ComplexMatrix& m) {
  require_square(m, "expm argument");
  if (!all_finite(m)) throw Error(ErrorKind::NonFinite, "expm argument has non-finite entries");
  const Eigen::Index n = m.rows();
  const double norm = norm1(m);
  if (norm > kExpmMaxNorm)
    throw Error(ErrorKind::Overflow,
                "expm argument norm " + std::to_string(norm) + " exceeds " + std::to_string(kExpmMaxNorm));

  constexpr double theta13 = 5.371920351148152;
  constexpr double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                          1187353796428800.0,  129060195264000.0,   10559470521600.0,
                          670442572800.0,      33522128640.0,       1323241920.0,
                          40840800.0,          960960.0,            16380.0,
                          182.0,               1.0};

  int squarings = 0;
  if (norm > theta13) squarings = static_cast<int>(std::ceil(std::log2(norm / theta13)));
  const ComplexMatrix a = m / std::ldexp(1.0, squarings);
  const ComplexMatrix id = ComplexMatrix::Identity(n, n);
  const ComplexMatrix a2 = a * a;
  const ComplexMatrix a4 = a2 * a2;
  const ComplexMatrix a6 = a4 * a2;

  const ComplexMatrix u_inner = a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 +
                                b[3] * a2 + b[1] * id;
  const ComplexMatrix u = a * u_inner;
  const ComplexMatrix v = a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 +
                          b[2] * a2 + b[0] * id;

  ComplexMatrix r = (v - u).partialPivLu().solve(v + u);
  for (int k = 0; k < squarings; ++k) r = r * r;
  if (!all_finite(r)) throw Error(ErrorKind::Overflow, "expm result overflowed");
  return r;
}

inline std::vector<Complex> eigenvalues(const ComplexMatrix& m) {
  require_square(m, "eigenvalue argument");
  if (!all_finite(m)) throw Error(ErrorKind::NonFinite, "eigenvalue argument has non-finite entries");
  Eigen::ComplexEigenSolver<ComplexMatrix> solver(m, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success)
    throw Error(ErrorKind::NoConvergence, "complex Schur iteration did not converge");
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

/// min |lambda_i(A) + mu_j(B)|: distance of spec(A) from spec(-B).
inline double spectral_separation(const std::vector<Complex>& spec_a, const std::vector<Complex>& spec_b) {
  double best = std::numeric_limits<double>::infinity();
  for (const Complex& l : spec_a)
    for (const Complex& mu : spec_b) best = std::min(best, std::abs(l + mu));
  return best;
}

/// Relative threshold below which spectra of A and -B are treated as clashing.
inline constexpr double kSpectralClashTolerance = 1.0e-8;

/// The operator X -> A X + X B, linearized over column-stacked unknowns and
/// LU-factorized once so repeated right-hand sides are cheap.
class SylvesterOperator {
 public:
  SylvesterOperator(const ComplexMatrix& a, const ComplexMatrix& b) : a_(a), b_(b) {
    require_square(a, "Sylvester A");
    require_square(b, "Sylvester B");
    if (a.rows() != b.rows())
      throw Error(ErrorKind::DimensionMismatch, "Sylvester A and B must have equal size");
    margin_ = spectral_separation(eigenvalues(a), eigenvalues(b));
    const double scale = a.norm() + b.norm();
    threshold_ = kSpectralClashTolerance * scale;
    if (!(margin_ > threshold_))
      throw Error(ErrorKind::SpectralClash,
                  "spectra of A and -B are not separated (min |lambda+mu| = " + std::to_string(margin_) +
                      ", threshold " + std::to_string(threshold_) + ")");

    const Eigen::Index n = a.rows();
    ComplexMatrix k = ComplexMatrix::Zero(n * n, n * n);
    // vec(A X) = (I kron A) vec X ; vec(X B) = (B^T kron I) vec X
    for (Eigen::Index col = 0; col < n; ++col) {
      k.block(col * n, col * n, n, n) += a;
      for (Eigen::Index row = 0; row < n; ++row) {
        const Complex coeff = b(row, col);
        if (coeff != Complex{}) k.block(col * n, row * n, n, n).diagonal().array() += coeff;
      }
    }
    lu_.compute(k);
  }

  Eigen::Index size() const noexcept { return a_.rows(); }
  double spectral_margin() const noexcept { return margin_; }

  ComplexMatrix apply(const ComplexMatrix& x) const { return a_ * x + x * b_; }

  ComplexMatrix solve(const ComplexMatrix& c) const {
    const Eigen::Index n = a_.rows();
    if (c.rows() != n || c.cols() != n)
      throw Error(ErrorKind::DimensionMismatch, "Sylvester right-hand side has wrong size");
    Eigen::VectorXcd rhs = Eigen::Map<const Eigen::VectorXcd>(c.data(), n * n);
    Eigen::VectorXcd x = lu_.solve(rhs);
    // One step of iterative refinement.
    const ComplexMatrix xm = Eigen::Map<const ComplexMatrix>(x.data(), n, n);
    const ComplexMatrix r = c - apply(xm);
    Eigen::VectorXcd dr = Eigen::Map<const Eigen::VectorXcd>(r.data(), n * n);
    x += lu_.solve(dr);
    return Eigen::Map<const ComplexMatrix>(x.data(), n, n);
  }

 private:
  ComplexMatrix a_, b_;
  Eigen::PartialPivLU<ComplexMatrix> lu_;
  double margin_ = 0.0;
  double threshold_ = 0.0;
};

/// Solves A X + X B = C.
inline ComplexMatrix solve_sylvester(const ComplexMatrix& a, const ComplexMatrix& b, const ComplexMatrix& c) {
  return SylvesterOperator(a, b).solve(c);
}

/// Composite Simpson rule for a matrix-valued integrand over [lo, hi]
/// (hi < lo gives the signed integral). An odd step count is rounded up.
template <typename F>
ComplexMatrix integrate_matrix(F&& f, double lo, double hi, int steps) {
  if (!std::isfinite(lo) || !std::isfinite(hi))
    throw Error(ErrorKind::InvalidRange, "integration bounds must be finite");
  if (steps < 1) throw Error(ErrorKind::InvalidRange, "integration needs at least one step");
  if (steps % 2 != 0) ++steps;
  const double h = (hi - lo) / steps;
  ComplexMatrix acc = f(lo);
  if (h == 0.0) return ComplexMatrix::Zero(acc.rows(), acc.cols());
  acc += f(hi);
  for (int k = 1; k < steps; ++k) acc += (k % 2 == 1 ? 4.0 : 2.0) * f(lo + k * h);
  return acc * (h / 3.0);
}

}  // namespace numkit
}  // namespace nnls
