#pragma once

// Backlund-Darboux (GBDT) construction of nonlocal NLS solutions from the
// trivial seed u = 0. A parameter triple {A, S(0,0), [theta1 theta2]} fixes
//
//   Pi(x,t) = [ e^{i(xA - 2tA^2)} theta1 , e^{-i(xA - 2tA^2)} theta2 ],
//   A S(x,t) + S(x,t) A^* = Pi(x,t) j^kappa Pi(-x,t)^*,
//   u(x,t) = -2i theta1^* e^{i(xA^* + 2t(A^*)^2)} S(x,t)^{-1} e^{-i(xA - 2tA^2)} theta2,
//
// with j = diag(I_m1, -I_m2) and kappa = (1 - sigma)/2. The Darboux matrix
// w_A and the wave function of the transformed auxiliary systems follow from
// the same data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "nnls_gbdt/error.hpp"
#include "nnls_gbdt/numkit.hpp"

namespace nnls::core {

using numkit::max_abs;

struct GbdtTriple {
  int sigma = 1;  ///< +1 defocusing, -1 focusing
  ComplexMatrix a;
  ComplexMatrix s0;
  ComplexMatrix theta1;  ///< n x m1
  ComplexMatrix theta2;  ///< n x m2

  int kappa() const noexcept { return (1 - sigma) / 2; }
  Eigen::Index n() const noexcept { return a.rows(); }
  Eigen::Index m1() const noexcept { return theta1.cols(); }
  Eigen::Index m2() const noexcept { return theta2.cols(); }
  Eigen::Index m() const noexcept { return m1() + m2(); }
};

inline constexpr Eigen::Index kMaxOrder = 16;

inline void check_shapes(const GbdtTriple& tr) {
  if (tr.sigma != 1 && tr.sigma != -1)
    throw Error(ErrorKind::InvalidParameter, "sigma must be +1 or -1");
  numkit::require_square(tr.a, "A");
  const Eigen::Index n = tr.a.rows();
  if (n < 1 || n > kMaxOrder) throw Error(ErrorKind::DimensionMismatch, "n must lie in [1, 16]");
  if (tr.s0.size() != 0 && (tr.s0.rows() != n || tr.s0.cols() != n))
    throw Error(ErrorKind::DimensionMismatch, "S(0,0) must be n x n");
  if (tr.theta1.rows() != n || tr.theta2.rows() != n)
    throw Error(ErrorKind::DimensionMismatch, "theta1 and theta2 must have n rows");
  if (tr.theta1.cols() < 1 || tr.theta2.cols() < 1 || tr.theta1.cols() > kMaxOrder ||
      tr.theta2.cols() > kMaxOrder)
    throw Error(ErrorKind::DimensionMismatch, "m1 and m2 must lie in [1, 16]");
  for (const ComplexMatrix* m : {&tr.a, &tr.s0, &tr.theta1, &tr.theta2})
    if (!numkit::all_finite(*m)) throw Error(ErrorKind::NonFinite, "triple has non-finite entries");
}

/// j^power for the signature matrix j = diag(I_m1, -I_m2), as a diagonal of +-1.
inline Eigen::VectorXd signature_diagonal(Eigen::Index m1, Eigen::Index m2, int power) {
  Eigen::VectorXd d(m1 + m2);
  d.head(m1).setOnes();
  d.tail(m2).setConstant(power % 2 == 0 ? 1.0 : -1.0);
  return d;
}

inline ComplexMatrix signature(Eigen::Index m1, Eigen::Index m2, int power = 1) {
  return signature_diagonal(m1, m2, power).cast<Complex>().asDiagonal();
}

/// theta1 theta1^* + (-1)^kappa theta2 theta2^*
inline ComplexMatrix seed_identity_rhs(const GbdtTriple& tr) {
  const double sign = tr.kappa() == 0 ? 1.0 : -1.0;
  return tr.theta1 * tr.theta1.adjoint() + sign * (tr.theta2 * tr.theta2.adjoint());
}

// ---------------------------------------------------------------------------
// Validation

struct NamedResidual {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  bool gating = true;  ///< false: reported only, does not affect the verdict
};

struct ValidationReport {
  std::vector<NamedResidual> items;
  bool passed = false;

  const NamedResidual* find(std::string_view name) const {
    for (const auto& it : items)
      if (it.name == name) return &it;
    return nullptr;
  }
};

inline constexpr double kHermitianTolerance = 1e-12;
inline constexpr double kDeterminantTolerance = 1e-12;
inline constexpr double kIdentityTolerance = 1e-10;

/// Residuals of the triple hypotheses: Hermitian S(0,0), invertible S(0,0) and
/// A S0 + S0 A^* = theta1 theta1^* + (-1)^kappa theta2 theta2^*. The spectral
/// margin min |lambda_i + conj(lambda_j)| is reported but not gating, since a
/// clash only rules out the identity route for S(x,t).
inline ValidationReport validate_triple(const GbdtTriple& tr) {
  check_shapes(tr);
  if (tr.s0.size() == 0) throw Error(ErrorKind::DimensionMismatch, "S(0,0) missing");
  const Eigen::Index n = tr.n();
  ValidationReport rep;

  const double s_norm = max_abs(tr.s0);
  const double herm = max_abs(tr.s0 - tr.s0.adjoint()) / std::max(1.0, s_norm);
  rep.items.push_back({"hermiticity", herm, kHermitianTolerance, herm <= kHermitianTolerance});

  const double det = std::abs(tr.s0.determinant());
  const double det_floor = kDeterminantTolerance * std::pow(tr.s0.norm(), static_cast<double>(n));
  rep.items.push_back({"determinant", det, det_floor, det > det_floor});

  const ComplexMatrix rhs = seed_identity_rhs(tr);
  const double scale = std::max(1.0, 2.0 * tr.a.norm() * tr.s0.norm() + rhs.norm());
  const double ident = (tr.a * tr.s0 + tr.s0 * tr.a.adjoint() - rhs).norm() / scale;
  rep.items.push_back({"identity", ident, kIdentityTolerance, ident <= kIdentityTolerance});

  const auto spec = numkit::eigenvalues(tr.a);
  std::vector<Complex> spec_adj(spec.size());
  std::transform(spec.begin(), spec.end(), spec_adj.begin(), [](Complex l) { return std::conj(l); });
  const double margin = numkit::spectral_separation(spec, spec_adj);
  const double clash = numkit::kSpectralClashTolerance * 2.0 * tr.a.norm();
  rep.items.push_back({"spectral_margin", margin, clash, margin > clash, /*gating=*/false});

  rep.passed = std::all_of(rep.items.begin(), rep.items.end(),
                           [](const NamedResidual& r) { return r.passed || !r.gating; });
  return rep;
}

/// Recovers S(0,0) from the seed identity and returns the completed triple.
inline GbdtTriple complete_triple(int sigma, ComplexMatrix a, ComplexMatrix theta1, ComplexMatrix theta2) {
  GbdtTriple tr{sigma, std::move(a), ComplexMatrix(), std::move(theta1), std::move(theta2)};
  check_shapes(tr);
  ComplexMatrix s0 = numkit::solve_sylvester(tr.a, tr.a.adjoint(), seed_identity_rhs(tr));
  tr.s0 = 0.5 * (s0 + s0.adjoint());
  const double det = std::abs(tr.s0.determinant());
  const double floor = kDeterminantTolerance * std::pow(tr.s0.norm(), static_cast<double>(tr.n()));
  if (!(det > floor))
    throw Error(ErrorKind::DegenerateS, "S(0,0) recovered from the identity is singular (|det|=" +
                                            std::to_string(det) + ")");
  return tr;
}

// ---------------------------------------------------------------------------
// Lax coefficients. For the zero seed q1 = i j, Q2 = -2i j and q0 = Q1 = Q0 = 0;
// after the transformation q0 = j xi, Q1 = -2 j xi, Q0 = i (j xi^2 - xi_x).

struct LaxCoefficients {
  ComplexMatrix q1, q0, big_q2, big_q1, big_q0;

  /// G = -(z q1 + q0)
  ComplexMatrix g(Complex z) const { return -(z * q1 + q0); }
  /// F = -(z^2 Q2 + z Q1 + Q0)
  ComplexMatrix f(Complex z) const { return -(z * z * big_q2 + z * big_q1 + big_q0); }
};

inline LaxCoefficients zero_seed_coefficients(Eigen::Index m1, Eigen::Index m2) {
  const ComplexMatrix j = signature(m1, m2);
  const ComplexMatrix zero = ComplexMatrix::Zero(m1 + m2, m1 + m2);
  return {kI * j, zero, -2.0 * kI * j, zero, zero};
}

inline LaxCoefficients transformed_coefficients(const ComplexMatrix& xi, const ComplexMatrix& xi_x,
                                                Eigen::Index m1, Eigen::Index m2) {
  const ComplexMatrix j = signature(m1, m2);
  return {kI * j, j * xi, -2.0 * kI * j, -2.0 * (j * xi), kI * (j * xi * xi - xi_x)};
}

// ---------------------------------------------------------------------------
// Pointwise evaluation

struct SpectralSample {
  Complex z;
  ComplexMatrix wa;    ///< Darboux matrix w_A(x,t,z)
  ComplexMatrix wb;    ///< w_A(x,t,z)^{-1}
  ComplexMatrix wave;  ///< w_A(x,t,z) e^{-i(zx - 2z^2 t) j}
};

/// |det S| relative to the no-cancellation size of S below which a point is singular.
inline constexpr double kPointSingularity = 1e-13;
inline constexpr double kDarbouxTolerance = 1e-9;
inline constexpr int kDefaultIntegrationSteps = 2000;

/// Holds a triple with the precomputed pieces shared by all evaluations:
/// A^2, the spectrum of A and, when spec(A) and spec(-A^*) are separated, the
/// factorized Sylvester operator X -> A X + X A^*. Evaluations are const and
/// thread-safe.
class Evaluator {
 public:
  struct PointState {
    double x = 0.0, t = 0.0;
    ComplexMatrix pi, pi_mirror, s;  // Pi(x,t), Pi(-x,t), S(x,t)
    Eigen::PartialPivLU<ComplexMatrix> lu;
    Complex det;
    double relative_det = 0.0;  ///< |det S| / scale^n, scale the size of S without cancellation
    bool singular = false;
  };

  explicit Evaluator(GbdtTriple triple, int integration_steps = kDefaultIntegrationSteps)
      : tr_(std::move(triple)), steps_(integration_steps) {
    check_shapes(tr_);
    a2_ = tr_.a * tr_.a;
    spectrum_ = numkit::eigenvalues(tr_.a);
    try {
      sylvester_.emplace(tr_.a, tr_.a.adjoint());
      margin_ = sylvester_->spectral_margin();
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::SpectralClash) throw;
      margin_ = 0.0;
    }
  }

  const GbdtTriple& triple() const noexcept { return tr_; }
  bool has_identity_route() const noexcept { return sylvester_.has_value(); }
  double spectral_margin() const noexcept { return margin_; }
  const std::vector<Complex>& spectrum() const noexcept { return spectrum_; }

  /// e^{i(xA - 2tA^2)}
  ComplexMatrix phase(double x, double t) const { return numkit::expm(kI * (x * tr_.a - 2.0 * t * a2_)); }

  ComplexMatrix pi(double x, double t) const {
    return assemble_pi(phase(x, t), numkit::expm(-kI * (x * tr_.a - 2.0 * t * a2_)));
  }

  ComplexMatrix assemble_pi(const ComplexMatrix& forward, const ComplexMatrix& backward) const {
    ComplexMatrix p(tr_.n(), tr_.m());
    p.leftCols(tr_.m1()) = forward * tr_.theta1;
    p.rightCols(tr_.m2()) = backward * tr_.theta2;
    return p;
  }

  /// Pi through the doubled block form P e^{-2it B} e^{ix A} Theta with
  /// A = diag(A, -A), B = diag(A^2, -A^2), P = [I I], Theta = diag(theta1, theta2).
  ComplexMatrix pi_block_route(double x, double t) const {
    const Eigen::Index n = tr_.n();
    ComplexMatrix big_a = ComplexMatrix::Zero(2 * n, 2 * n);
    big_a.topLeftCorner(n, n) = tr_.a;
    big_a.bottomRightCorner(n, n) = -tr_.a;
    const ComplexMatrix big_b = big_a * big_a * signature(n, n);  // diag(A^2, -A^2)
    const ComplexMatrix proj = (ComplexMatrix(n, 2 * n) << ComplexMatrix::Identity(n, n),
                                ComplexMatrix::Identity(n, n)).finished();
    return proj * numkit::expm(-2.0 * kI * t * big_b) * numkit::expm(kI * x * big_a) * block_theta();
  }

  /// Pi(x,t) j^kappa Pi(-x,t)^*
  ComplexMatrix identity_rhs(const ComplexMatrix& pi, const ComplexMatrix& pi_mirror) const {
    return pi * signature_diagonal(tr_.m1(), tr_.m2(), tr_.kappa()).cast<Complex>().asDiagonal() *
           pi_mirror.adjoint();
  }

  /// S(x,t) from the operator identity; throws SpectralClash without separated spectra.
  ComplexMatrix s_identity(double x, double t) const {
    if (!sylvester_) throw Error(ErrorKind::SpectralClash, "spec(A) meets spec(-A^*); use integration");
    return s_from_pi(pi(x, t), pi(-x, t));
  }

  ComplexMatrix s_from_pi(const ComplexMatrix& pi, const ComplexMatrix& pi_mirror) const {
    return sylvester_->solve(identity_rhs(pi, pi_mirror));
  }

  /// S_x = i Pi(x,t) j^{kappa+1} Pi(-x,t)^*
  ComplexMatrix s_x(double x, double t) const {
    return kI * pi(x, t) * signature(tr_.m1(), tr_.m2(), tr_.kappa() + 1) * pi(-x, t).adjoint();
  }

  /// S_t = 2i (Pi j^{kappa+1} Pi(-x,t)^* A^* - A Pi j^{kappa+1} Pi(-x,t)^*)
  ComplexMatrix s_t(double x, double t) const {
    const ComplexMatrix w = pi(x, t) * signature(tr_.m1(), tr_.m2(), tr_.kappa() + 1) * pi(-x, t).adjoint();
    return 2.0 * kI * (w * tr_.a.adjoint() - tr_.a * w);
  }

  /// S(x,t) = S(0,0) + int_0^t S_t(0,r) dr + int_0^x S_x(r,t) dr
  ComplexMatrix s_integrated(double x, double t, int steps) const {
    if (tr_.s0.size() == 0) throw Error(ErrorKind::DimensionMismatch, "S(0,0) missing");
    ComplexMatrix s = tr_.s0;
    if (t != 0.0) s += numkit::integrate_matrix([&](double r) { return s_t(0.0, r); }, 0.0, t, steps);
    if (x != 0.0) s += numkit::integrate_matrix([&](double r) { return s_x(r, t); }, 0.0, x, steps);
    return s;
  }

  /// S(x,t) through S = C(t) + P e^{-2itB} e^{ixA} SS e^{ixA^*} e^{2itB^*} P^*,
  /// where A SS + SS A^* = Theta j^{kappa+1} Theta^* on the doubled space.
  ComplexMatrix s_block_route(double x, double t) const {
    const Eigen::Index n = tr_.n();
    ComplexMatrix big_a = ComplexMatrix::Zero(2 * n, 2 * n);
    big_a.topLeftCorner(n, n) = tr_.a;
    big_a.bottomRightCorner(n, n) = -tr_.a;
    const ComplexMatrix big_b = big_a * big_a * signature(n, n);
    const ComplexMatrix proj = (ComplexMatrix(n, 2 * n) << ComplexMatrix::Identity(n, n),
                                ComplexMatrix::Identity(n, n)).finished();
    const ComplexMatrix th = block_theta();
    const ComplexMatrix big_s = numkit::solve_sylvester(
        big_a, big_a.adjoint(), th * signature(tr_.m1(), tr_.m2(), tr_.kappa() + 1) * th.adjoint());
    const ComplexMatrix et = numkit::expm(-2.0 * kI * t * big_b);
    const ComplexMatrix ex = numkit::expm(kI * x * big_a);
    const ComplexMatrix ex_mirror = numkit::expm(-kI * x * big_a);  // e^{ixA^*} = (e^{-ixA})^*
    const ComplexMatrix c = s(0.0, t) - proj * et * big_s * et.adjoint() * proj.adjoint();
    return c + proj * et * ex * big_s * ex_mirror.adjoint() * et.adjoint() * proj.adjoint();
  }

  /// Identity route when available, integration otherwise.
  ComplexMatrix s(double x, double t) const {
    return sylvester_ ? s_identity(x, t) : s_integrated(x, t, steps_);
  }

  PointState state(double x, double t) const {
    PointState st;
    st.x = x;
    st.t = t;
    st.pi = pi(x, t);
    st.pi_mirror = pi(-x, t);
    st.s = sylvester_ ? s_from_pi(st.pi, st.pi_mirror) : s_integrated(x, t, steps_);
    finish_state(st);
    return st;
  }

  void finish_state(PointState& st) const {
    st.lu.compute(st.s);
    st.det = st.lu.determinant();
    const double n = static_cast<double>(tr_.n());
    double scale = st.s.norm();
    if (sylvester_ && margin_ > 0.0) scale = std::max(scale, st.pi.norm() * st.pi_mirror.norm() / margin_);
    st.relative_det = scale > 0.0 ? std::abs(st.det) / std::pow(scale, n) : 0.0;
    st.singular = !std::isfinite(st.relative_det) || st.relative_det <= kPointSingularity;
  }

  ComplexMatrix u_tilde(double x, double t) const { return u_from_state(require_regular(state(x, t))); }

  /// -2i [I 0] Pi(-x,t)^* S^{-1} Pi(x,t) [0 ; I]
  ComplexMatrix u_from_state(const PointState& st) const {
    return -2.0 * kI * st.pi_mirror.leftCols(tr_.m1()).adjoint() * st.lu.solve(st.pi.rightCols(tr_.m2()));
  }

  /// Lower-left block of xi: -2i (-1)^kappa [0 I] Pi(-x,t)^* S^{-1} Pi(x,t) [I ; 0]
  ComplexMatrix v2_from_state(const PointState& st) const {
    const double sign = tr_.kappa() == 0 ? 1.0 : -1.0;
    return -2.0 * kI * sign * st.pi_mirror.rightCols(tr_.m2()).adjoint() *
           st.lu.solve(st.pi.leftCols(tr_.m1()));
  }

  /// xi = i (j X0 j - X0) with X0 = j^kappa Pi(-x,t)^* S^{-1} Pi(x,t).
  ComplexMatrix xi_tilde(double x, double t) const {
    const PointState st = require_regular(state(x, t));
    const ComplexMatrix jk = signature(tr_.m1(), tr_.m2(), tr_.kappa());
    const ComplexMatrix j = signature(tr_.m1(), tr_.m2());
    const ComplexMatrix x0 = jk * st.pi_mirror.adjoint() * st.lu.solve(st.pi);
    return kI * (j * x0 * j - x0);
  }

  SpectralSample darboux(double x, double t, Complex z) const {
    check_spectral_parameter(z);
    const PointState st = require_regular(state(x, t));
    SpectralSample out = darboux_from_state(st, z);

    const ComplexMatrix id = ComplexMatrix::Identity(tr_.m(), tr_.m());
    const double prod_scale = std::max(1.0, max_abs(out.wa) * max_abs(out.wb));
    const double inv_err = max_abs(out.wa * out.wb - id) / prod_scale;
    if (!(inv_err <= kDarbouxTolerance))
      throw Error(ErrorKind::InvariantViolation, "w_A w_B != I (residual " + std::to_string(inv_err) + ")");

    const PointState mirrored = require_regular(state(-x, t));
    const ComplexMatrix jk = signature(tr_.m1(), tr_.m2(), tr_.kappa());
    const ComplexMatrix reduced = jk * darboux_from_state(mirrored, -std::conj(z)).wa.adjoint() * jk;
    const double red_err = max_abs(out.wb - reduced) / std::max(1.0, max_abs(out.wb));
    if (!(red_err <= kDarbouxTolerance))
      throw Error(ErrorKind::InvariantViolation,
                  "w_B != j^k w_A(-x,t,-conj z)^* j^k (residual " + std::to_string(red_err) + ")");
    return out;
  }

  ComplexMatrix wave(double x, double t, Complex z) const { return darboux(x, t, z).wave; }

  /// e^{-i(zx - 2z^2 t) j}
  ComplexMatrix free_wave(double x, double t, Complex z) const {
    const Complex phi = z * x - 2.0 * z * z * t;
    Eigen::VectorXcd d(tr_.m());
    d.head(tr_.m1()).setConstant(std::exp(-kI * phi));
    d.tail(tr_.m2()).setConstant(std::exp(kI * phi));
    return d.asDiagonal();
  }

  void check_spectral_parameter(Complex z) const {
    const double tol = 1e-12 * std::max(1.0, tr_.a.norm());
    for (const Complex& l : spectrum_) {
      if (std::abs(l - z) <= tol)
        throw Error(ErrorKind::SpectralPole, "z is an eigenvalue of A; w_A has a pole");
      if (std::abs(l + std::conj(z)) <= tol)
        throw Error(ErrorKind::SpectralPole, "-conj(z) is an eigenvalue of A; w_B has a pole");
    }
  }

  SpectralSample darboux_from_state(const PointState& st, Complex z) const {
    const Eigen::Index n = tr_.n();
    const ComplexMatrix id_n = ComplexMatrix::Identity(n, n);
    const ComplexMatrix id_m = ComplexMatrix::Identity(tr_.m(), tr_.m());
    const ComplexMatrix jk = signature(tr_.m1(), tr_.m2(), tr_.kappa());
    const ComplexMatrix left = jk * st.pi_mirror.adjoint();
    SpectralSample out;
    out.z = z;
    out.wa = id_m - left * st.lu.solve((tr_.a - z * id_n).partialPivLu().solve(st.pi));
    out.wb = id_m - left * (tr_.a.adjoint() + z * id_n).partialPivLu().solve(st.lu.solve(st.pi));
    out.wave = out.wa * free_wave(st.x, st.t, z);
    return out;
  }

  const PointState& require_regular(const PointState& st) const {
    if (st.singular) throw SingularPointError(st.x, st.t, std::abs(st.det));
    return st;
  }
  PointState require_regular(PointState&& st) const {
    if (st.singular) throw SingularPointError(st.x, st.t, std::abs(st.det));
    return std::move(st);
  }

 private:
  ComplexMatrix block_theta() const {
    const Eigen::Index n = tr_.n();
    ComplexMatrix th = ComplexMatrix::Zero(2 * n, tr_.m());
    th.topLeftCorner(n, tr_.m1()) = tr_.theta1;
    th.bottomRightCorner(n, tr_.m2()) = tr_.theta2;
    return th;
  }

  GbdtTriple tr_;
  int steps_;
  ComplexMatrix a2_;
  std::vector<Complex> spectrum_;
  std::optional<numkit::SylvesterOperator> sylvester_;
  double margin_ = 0.0;
};

// Free-function surface. Each call builds its own Evaluator; reuse an
// Evaluator directly when evaluating many points of one triple.

inline ComplexMatrix pi_at(const GbdtTriple& tr, double x, double t) { return Evaluator(tr).pi(x, t); }
inline ComplexMatrix s_at(const GbdtTriple& tr, double x, double t) { return Evaluator(tr).s_identity(x, t); }
inline ComplexMatrix s_via_integration(const GbdtTriple& tr, double x, double t, int steps) {
  return Evaluator(tr).s_integrated(x, t, steps);
}
inline ComplexMatrix u_tilde_at(const GbdtTriple& tr, double x, double t) {
  return Evaluator(tr).u_tilde(x, t);
}
inline ComplexMatrix xi_tilde_at(const GbdtTriple& tr, double x, double t) {
  return Evaluator(tr).xi_tilde(x, t);
}
inline SpectralSample darboux_at(const GbdtTriple& tr, double x, double t, Complex z) {
  return Evaluator(tr).darboux(x, t, z);
}
inline ComplexMatrix wave_at(const GbdtTriple& tr, double x, double t, Complex z) {
  return Evaluator(tr).wave(x, t, z);
}

// ---------------------------------------------------------------------------
// Grids and sampled fields

/// x nodes k*hx for k = -K..K (exactly mirror-symmetric), t nodes l*ht for
/// l = lo..hi with lo <= 0 <= hi, so t = 0 is always a node.
class Grid {
 public:
  Grid() = default;

  static Grid from_steps(double hx, int half_nx, double ht, int t_lo, int t_hi) {
    if (half_nx < 0 || t_lo > 0 || t_hi < 0)
      throw Error(ErrorKind::InvalidParameter, "grid index ranges must contain the origin");
    if ((half_nx > 0 && !(hx > 0.0)) || (t_hi > t_lo && !(ht > 0.0)))
      throw Error(ErrorKind::InvalidParameter, "grid spacings must be positive");
    Grid g;
    g.hx_ = half_nx > 0 ? hx : 0.0;
    g.ht_ = t_hi > t_lo ? ht : 0.0;
    for (int k = -half_nx; k <= half_nx; ++k) g.x_.push_back(k * g.hx_);
    for (int l = t_lo; l <= t_hi; ++l) g.t_.push_back(l * g.ht_);
    return g;
  }

  /// nx odd; t_min <= 0 <= t_max with 0 on the uniform t lattice.
  static Grid symmetric(double x_max, int nx, double t_min, double t_max, int nt) {
    if (nx < 1 || nx % 2 == 0) throw Error(ErrorKind::InvalidParameter, "nx must be odd and positive");
    if (nt < 1) throw Error(ErrorKind::InvalidParameter, "nt must be positive");
    if (!(t_min <= 0.0 && t_max >= 0.0)) throw Error(ErrorKind::InvalidParameter, "t range must contain 0");
    if (nx > 1 && !(x_max > 0.0)) throw Error(ErrorKind::InvalidParameter, "x_max must be positive");
    const int half = (nx - 1) / 2;
    const double hx = half > 0 ? x_max / half : 0.0;
    if (nt == 1) {
      if (t_min != 0.0 || t_max != 0.0)
        throw Error(ErrorKind::InvalidParameter, "a single t node must be t = 0");
      return from_steps(hx, half, 0.0, 0, 0);
    }
    if (!(t_max > t_min)) throw Error(ErrorKind::InvalidParameter, "t_max must exceed t_min");
    const double ht = (t_max - t_min) / (nt - 1);
    const double lo = -t_min / ht;
    const int lo_idx = static_cast<int>(std::lround(lo));
    if (std::abs(lo - lo_idx) > 1e-9)
      throw Error(ErrorKind::InvalidParameter, "t = 0 is not a node of the t grid");
    return from_steps(hx, half, ht, -lo_idx, nt - 1 - lo_idx);
  }

  /// Halves both spacings `levels` times; old nodes stay nodes.
  Grid refined(int levels) const {
    const int f = 1 << levels;
    const double scale = std::ldexp(1.0, -levels);
    return from_steps(hx_ * scale, half_nx() * f, ht_ * scale, t_lo() * f, t_hi() * f);
  }

  const std::vector<double>& x() const noexcept { return x_; }
  const std::vector<double>& t() const noexcept { return t_; }
  int nx() const noexcept { return static_cast<int>(x_.size()); }
  int nt() const noexcept { return static_cast<int>(t_.size()); }
  double hx() const noexcept { return hx_; }
  double ht() const noexcept { return ht_; }
  int half_nx() const noexcept { return (nx() - 1) / 2; }
  int t_lo() const noexcept { return ht_ > 0.0 ? static_cast<int>(std::lround(t_.front() / ht_)) : 0; }
  int t_hi() const noexcept { return ht_ > 0.0 ? static_cast<int>(std::lround(t_.back() / ht_)) : 0; }
  int mirror(int i) const noexcept { return nx() - 1 - i; }
  std::size_t index(int i, int j) const noexcept {
    return static_cast<std::size_t>(j) * x_.size() + static_cast<std::size_t>(i);
  }
  std::size_t size() const noexcept { return x_.size() * t_.size(); }

 private:
  std::vector<double> x_, t_;
  double hx_ = 0.0, ht_ = 0.0;
};

inline constexpr double kFieldSingularity = 1e-8;

/// u, the lower-left block v2 of xi, S and det S on a grid; index with grid.index(i, j).
struct SolutionField {
  Grid grid;
  int sigma = 1;
  Eigen::Index n = 0, m1 = 0, m2 = 0;
  std::vector<ComplexMatrix> u;   ///< m1 x m2; NaN where singular
  std::vector<ComplexMatrix> v2;  ///< m2 x m1; NaN where singular
  std::vector<ComplexMatrix> s;   ///< n x n
  std::vector<Complex> det_s;
  std::vector<double> relative_det;  ///< |det S| against the no-cancellation size of S
  std::vector<std::uint8_t> singular;
  double singular_threshold = 0.0;  ///< kFieldSingularity * max |det S|

  std::size_t singular_count() const {
    return static_cast<std::size_t>(std::count(singular.begin(), singular.end(), std::uint8_t{1}));
  }
};

struct FieldOptions {
  unsigned workers = 1;
  int integration_steps = kDefaultIntegrationSteps;
};

/// Evaluates the solution on every grid node. Exponentials are cached per x
/// and per t node; the (-x,t) data of a node is taken from its grid mirror.
/// Output is independent of the worker count.
inline SolutionField assemble_field(const GbdtTriple& triple, const Grid& grid, FieldOptions opts = {}) {
  const Evaluator ev(triple, opts.integration_steps);
  const GbdtTriple& tr = ev.triple();
  const int nx = grid.nx(), nt = grid.nt();

  SolutionField field;
  field.grid = grid;
  field.sigma = tr.sigma;
  field.n = tr.n();
  field.m1 = tr.m1();
  field.m2 = tr.m2();
  field.u.resize(grid.size());
  field.v2.resize(grid.size());
  field.s.resize(grid.size());
  field.det_s.resize(grid.size());
  field.relative_det.resize(grid.size());
  field.singular.assign(grid.size(), 0);

  // e^{ixA} per x node; e^{-2itA^2} theta1 and e^{2itA^2} theta2 per t node.
  std::vector<ComplexMatrix> ex(nx), ft(nt), gt(nt);
  const ComplexMatrix a2 = tr.a * tr.a;
  for (int i = 0; i < nx; ++i) ex[i] = numkit::expm(kI * grid.x()[i] * tr.a);
  for (int j = 0; j < nt; ++j) {
    ft[j] = numkit::expm(-2.0 * kI * grid.t()[j] * a2) * tr.theta1;
    gt[j] = numkit::expm(2.0 * kI * grid.t()[j] * a2) * tr.theta2;
  }
  auto pi_node = [&](int i, int j) {
    ComplexMatrix p(tr.n(), tr.m());
    p.leftCols(tr.m1()) = ex[i] * ft[j];
    p.rightCols(tr.m2()) = ex[grid.mirror(i)] * gt[j];
    return p;
  };

  std::vector<std::uint8_t> point_singular(grid.size(), 0);
  auto work_rows = [&](int j_begin, int j_end) {
    for (int j = j_begin; j < j_end; ++j) {
      for (int i = 0; i < nx; ++i) {
        Evaluator::PointState st;
        st.x = grid.x()[i];
        st.t = grid.t()[j];
        if (ev.has_identity_route()) {
          st.pi = pi_node(i, j);
          st.pi_mirror = pi_node(grid.mirror(i), j);
          st.s = ev.s_from_pi(st.pi, st.pi_mirror);
        } else {
          st.pi = ev.pi(st.x, st.t);
          st.pi_mirror = ev.pi(-st.x, st.t);
          st.s = ev.s_integrated(st.x, st.t, opts.integration_steps);
        }
        ev.finish_state(st);
        const std::size_t k = grid.index(i, j);
        field.s[k] = st.s;
        field.det_s[k] = st.det;
        field.relative_det[k] = st.relative_det;
        point_singular[k] = st.singular ? 1 : 0;
        if (!st.singular) {
          field.u[k] = ev.u_from_state(st);
          field.v2[k] = ev.v2_from_state(st);
        }
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(opts.workers, static_cast<unsigned>(nt)));
  if (workers == 1) {
    work_rows(0, nt);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (nt + static_cast<int>(workers) - 1) / static_cast<int>(workers);
    for (int begin = 0; begin < nt; begin += chunk)
      pool.emplace_back(work_rows, begin, std::min(nt, begin + chunk));
    for (auto& th : pool) th.join();
  }

  double max_det = 0.0;
  for (const Complex& d : field.det_s)
    if (std::isfinite(std::abs(d))) max_det = std::max(max_det, std::abs(d));
  field.singular_threshold = kFieldSingularity * max_det;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double ad = std::abs(field.det_s[k]);
    const bool sing = point_singular[k] != 0 || !(ad >= field.singular_threshold) || max_det == 0.0;
    field.singular[k] = sing ? 1 : 0;
    if (sing) {
      field.u[k] = ComplexMatrix::Constant(tr.m1(), tr.m2(), Complex(nan, nan));
      field.v2[k] = ComplexMatrix::Constant(tr.m2(), tr.m1(), Complex(nan, nan));
    }
  }
  return field;
}

// ---------------------------------------------------------------------------
// Blow-up location

struct Blowup {
  double x = 0.0;
  double abs_det = 0.0;
};

/// Local minima of |det S(., t)| on [x_lo, x_hi], each refined by golden-section
/// search between its neighbouring samples. Returned in increasing x.
inline std::vector<Blowup> locate_blowups(const GbdtTriple& triple, double t, double x_lo, double x_hi,
                                          int samples) {
  if (samples < 3 || !(x_hi > x_lo)) throw Error(ErrorKind::InvalidRange, "need x_hi > x_lo and >= 3 samples");
  const Evaluator ev(triple);
  auto abs_det = [&](double x) { return std::abs(ev.s(x, t).determinant()); };
  const double h = (x_hi - x_lo) / (samples - 1);
  std::vector<double> vals(samples);
  for (int k = 0; k < samples; ++k) vals[k] = abs_det(x_lo + k * h);

  std::vector<Blowup> out;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  for (int k = 1; k + 1 < samples; ++k) {
    if (!(vals[k] <= vals[k - 1] && vals[k] < vals[k + 1])) continue;
    double lo = x_lo + (k - 1) * h, hi = x_lo + (k + 1) * h;
    double c = hi - golden * (hi - lo), d = lo + golden * (hi - lo);
    double fc = abs_det(c), fd = abs_det(d);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * (1.0 + std::abs(lo)); ++it) {
      if (fc < fd) {
        hi = d;
        d = c;
        fd = fc;
        c = hi - golden * (hi - lo);
        fc = abs_det(c);
      } else {
        lo = c;
        c = d;
        fc = fd;
        d = lo + golden * (hi - lo);
        fd = abs_det(d);
      }
    }
    const double xm = fc < fd ? c : d;
    out.push_back({xm, std::min(fc, fd)});
  }
  return out;
}

}  // namespace nnls::core
