#pragma once

// Closed-form solutions for three small parameter families, written out
// term by term with std::complex only. Nothing here calls into the general
// construction, so agreement between the two is a meaningful check.
//
//   family 1: n = m1 = m2 = 1, A = a, scalar theta1, theta2
//   family 2: n = 2, m1 = m2 = 1, A = a I + [[0,1],[0,0]], theta1 = [0; b], theta2 = [0; c]
//   family 3: n = 1, m1 = 2, m2 = 1, A = a, theta1 = [b1 b2], theta2 = c

#include <array>
#include <cmath>
#include <complex>
#include <optional>

#include "nnls_gbdt/error.hpp"

namespace nnls::oracles {

using C = std::complex<double>;

inline constexpr double kOracleSingularity = 1e-12;

struct Example1Params {
  C a;
  C theta1;
  C theta2;
  int kappa = 0;
};

struct Example2Params {
  C a;
  C b;
  C c;
  int kappa = 0;
};

struct Example3Params {
  C a;
  C b1, b2;
  C c;
  int kappa = 0;
};

namespace detail {

inline void check_a(C a, int kappa) {
  if (!(std::abs(a.real()) > 0.0)) throw Error(ErrorKind::InvalidParameter, "a + conj(a) must be nonzero");
  if (kappa != 0 && kappa != 1) throw Error(ErrorKind::InvalidParameter, "kappa must be 0 or 1");
}

inline double sign(int kappa) { return kappa == 0 ? 1.0 : -1.0; }

/// (a + conj a) x - 2 (a^2 - conj(a)^2) t
inline C phase1(C a, double x, double t) {
  const C ab = a + std::conj(a);
  return ab * x - 2.0 * (a * a - std::conj(a * a)) * t;
}

}  // namespace detail

inline void validate(const Example1Params& p) {
  detail::check_a(p.a, p.kappa);
  if (p.theta1 == C{} || p.theta2 == C{}) throw Error(ErrorKind::InvalidParameter, "theta1, theta2 must be nonzero");
}
inline void validate(const Example2Params& p) { detail::check_a(p.a, p.kappa); }
inline void validate(const Example3Params& p) { detail::check_a(p.a, p.kappa); }

/// S(x,t) = (e^{i phi}|theta1|^2 + (-1)^kappa e^{-i phi}|theta2|^2) / (a + conj a)
inline C ex1_S(const Example1Params& p, double x, double t) {
  validate(p);
  const C i{0.0, 1.0};
  const C phi = detail::phase1(p.a, x, t);
  return (std::exp(i * phi) * std::norm(p.theta1) +
          detail::sign(p.kappa) * std::exp(-i * phi) * std::norm(p.theta2)) /
         (p.a + std::conj(p.a));
}

inline C ex1_u(const Example1Params& p, double x, double t) {
  validate(p);
  const C i{0.0, 1.0};
  const C a = p.a;
  const C ab = a + std::conj(a);
  const C tail = std::exp(-2.0 * i * detail::phase1(a, x, t)) * std::norm(p.theta2);
  const C den = std::norm(p.theta1) + detail::sign(p.kappa) * tail;
  if (std::abs(den) <= kOracleSingularity * (std::norm(p.theta1) + std::abs(tail)))
    throw SingularPointError(x, t, std::abs(den));
  return -2.0 * i * ab * std::exp(-2.0 * i * a * (x - 2.0 * a * t)) * std::conj(p.theta1) * p.theta2 / den;
}

/// The single time at which S(., t) has real zeros: |theta1|^2 = e^{-8 Im(a^2) t} |theta2|^2.
/// Absent for real a, where the condition does not depend on t.
inline std::optional<double> ex1_blowup_time(const Example1Params& p) {
  validate(p);
  const double im_a2 = (p.a * p.a).imag();
  if (im_a2 == 0.0) return std::nullopt;
  return std::log(std::norm(p.theta1) / std::norm(p.theta2)) / (-8.0 * im_a2);
}

/// Zero spacing in x at the blow-up time.
inline double ex1_blowup_period(const Example1Params& p) {
  validate(p);
  return M_PI / (2.0 * p.a.real());
}

/// P(x,t) = i((a + conj a) x + 2(conj(a)^2 - a^2) t)
inline C ex2_P(C a, double x, double t) {
  const C i{0.0, 1.0};
  const C ac = std::conj(a);
  return i * ((a + ac) * x + 2.0 * (ac * ac - a * a) * t);
}

namespace detail {

struct Ex2Det {
  C value;
  double magnitude;  // sum of the moduli of the four terms
};

/// (a + conj a)^4 det S
inline Ex2Det ex2_scaled_det(const Example2Params& p, double x, double t) {
  const C a = p.a, ac = std::conj(a), ab = a + ac;
  const C P = ex2_P(a, x, t);
  const double s = sign(p.kappa);
  const double bc2 = std::norm(p.b) * std::norm(p.c);
  const C t1 = std::norm(p.b) * std::norm(p.b) * std::exp(2.0 * P);
  const C t2 = std::norm(p.c) * std::norm(p.c) * std::exp(-2.0 * P);
  const C t3 = 2.0 * s * bc2;
  const C t4 = -s * 4.0 * bc2 * ab * ab * (x - 4.0 * a * t) * (x + 4.0 * ac * t);
  return {t1 + t2 + t3 + t4, std::abs(t1) + std::abs(t2) + std::abs(t3) + std::abs(t4)};
}

}  // namespace detail

inline C ex2_detS(const Example2Params& p, double x, double t) {
  validate(p);
  return detail::ex2_scaled_det(p, x, t).value / std::pow(p.a + std::conj(p.a), 4);
}

inline C ex2_u(const Example2Params& p, double x, double t) {
  validate(p);
  const C i{0.0, 1.0};
  const C a = p.a, ac = std::conj(a), ab = a + ac;
  const C P = ex2_P(a, x, t);
  const auto det = detail::ex2_scaled_det(p, x, t);
  if (std::abs(det.value) <= kOracleSingularity * det.magnitude)
    throw SingularPointError(x, t, std::abs(det.value / std::pow(ab, 4)));
  const C front = -2.0 * i * std::conj(p.b) * p.c * ab * std::exp(i * ((ac - a) * x + 2.0 * (a * a + ac * ac) * t));
  const C num = std::norm(p.b) * std::exp(P) * (8.0 * i * a * ab * t - 2.0 * i * ab * x + 2.0) +
                detail::sign(p.kappa) * std::norm(p.c) * std::exp(-P) *
                    (8.0 * i * ac * ab * t + 2.0 * i * ab * x + 2.0);
  return front * num / det.value;
}

inline std::array<C, 2> ex3_u(const Example3Params& p, double x, double t) {
  validate(p);
  const C i{0.0, 1.0};
  const C a = p.a, ab = a + std::conj(a);
  const double b2 = std::norm(p.b1) + std::norm(p.b2);
  const C tail = std::exp(-2.0 * i * detail::phase1(a, x, t)) * std::norm(p.c);
  const C den = b2 + detail::sign(p.kappa) * tail;
  if (std::abs(den) <= kOracleSingularity * (b2 + std::abs(tail))) throw SingularPointError(x, t, std::abs(den));
  const C f = -2.0 * i * p.c * ab * std::exp(-2.0 * i * a * (x - 2.0 * a * t)) / den;
  return {f * std::conj(p.b1), f * std::conj(p.b2)};
}

}  // namespace nnls::oracles
