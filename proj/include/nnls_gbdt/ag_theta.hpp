#pragma once

// Genus-one stationary solutions: the Riemann theta series, branch point
// classification, the constants of the stationary AKNS system, the map
// between stationary nonlocal NLS and stationary AKNS solutions, theta-function
// potentials and their nonlocal constraints, and (experimental) periods of the
// curve y^2 = prod (z - E_k) for four real branch points.
//
// Equations used throughout:
//   stationary AKNS   (i/2) v1'' - i v1^2 v2 - c1 v1' - 2i c2 v1 = 0
//                    -(i/2) v2'' + i v1 v2^2 - c1 v2' + 2i c2 v2 = 0
//   stationary nNLS   (i/2) u'' - i sigma u^2 conj(u(-x)) - c1~ u' - 2i c2~ u = 0
// with sigma = +1 the defocusing and sigma = -1 the focusing equation.
//
// akns_constants(E) gives c1 = -(E0+E1+E2+E3)/2 and c2 = -c1^2/2 + e2(E)/2.
// With this sign of c1 the spectral curve of a solution with constants
// (c1, c2) has branch points -E.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

#include "nnls_gbdt/error.hpp"
#include "nnls_gbdt/gbdt_core.hpp"
#include "nnls_gbdt/numkit.hpp"
#include "nnls_gbdt/verify.hpp"

namespace nnls::ag {

// ---------------------------------------------------------------------------
// Theta series

struct ThetaSum {
  Complex value;
  double abs_sum = 0.0;  ///< sum of the moduli of the terms kept
};

inline constexpr double kStripWidth = 5.0;  ///< |Im z| <= kStripWidth * Im tau

/// d-th z-derivative of theta(z) = sum_m exp(2 pi i m z + pi i m^2 tau). Terms
/// are kept within a window around the largest one, wide enough that the
/// Gaussian tail beyond it is below 1e-17 of that term.
inline ThetaSum theta_series(Complex z, Complex tau, int derivative = 0) {
  if (!std::isfinite(tau.real()) || !std::isfinite(tau.imag()) || !(tau.imag() > 0.0))
    throw Error(ErrorKind::BadTau, "Im(tau) must be positive");
  if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) throw Error(ErrorKind::NonFinite, "theta argument");
  if (derivative < 0) throw Error(ErrorKind::InvalidParameter, "negative derivative order");
  const double s = tau.imag(), y = z.imag();
  if (std::abs(y) > kStripWidth * s)
    throw Error(ErrorKind::RangeExceeded, "|Im z| exceeds 5 Im(tau)");
  const double peak = -y / s;
  if (M_PI * s * peak * peak > 700.0) throw Error(ErrorKind::RangeExceeded, "theta value overflows");
  const double half_width = std::sqrt(std::log(1e17) / (M_PI * s)) + 1.0 + derivative;
  if (half_width > 1e5) throw Error(ErrorKind::RangeExceeded, "Im(tau) too small for the series");
  const long lo = static_cast<long>(std::floor(peak - half_width));
  const long hi = static_cast<long>(std::ceil(peak + half_width));

  ThetaSum out;
  for (long m = lo; m <= hi; ++m) {
    const double md = static_cast<double>(m);
    Complex term = std::exp(2.0 * M_PI * kI * md * z + M_PI * kI * md * md * tau);
    if (derivative > 0) term *= std::pow(2.0 * M_PI * kI * md, derivative);
    out.value += term;
    out.abs_sum += std::abs(term);
  }
  return out;
}

inline Complex theta(Complex z, Complex tau) { return theta_series(z, tau).value; }

inline Complex theta_derivative(Complex z, Complex tau, int derivative) {
  return theta_series(z, tau, derivative).value;
}

// ---------------------------------------------------------------------------
// Branch points

enum class BranchCase { I, II, III, Unsupported };

inline std::string_view to_string(BranchCase c) {
  switch (c) {
    case BranchCase::I: return "i";
    case BranchCase::II: return "ii";
    case BranchCase::III: return "iii";
    case BranchCase::Unsupported: return "unsupported";
  }
  return "unsupported";
}

struct BranchData {
  std::array<Complex, 4> e{};
  BranchCase label = BranchCase::Unsupported;
};

inline constexpr double kBranchTolerance = 1e-10;

/// Relabels and classifies: (i) four distinct reals in increasing order;
/// (ii) E0, conj E0, E1, conj E1 non-real (stored as E0, conj E0, E1, conj E1);
/// (iii) reals E0 < E1 followed by E2, conj E2. Anything else is unsupported
/// and returned in input order.
inline BranchData classify_branch_points(const std::array<Complex, 4>& e) {
  double scale = 1.0;
  for (const Complex& v : e) {
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw Error(ErrorKind::NonFinite, "branch point");
    scale = std::max(scale, std::abs(v));
  }
  const double tol = kBranchTolerance * scale;
  BranchData out{e, BranchCase::Unsupported};

  std::vector<double> reals;
  std::vector<Complex> upper, lower;
  for (const Complex& v : e) {
    if (std::abs(v.imag()) <= tol) reals.push_back(v.real());
    else if (v.imag() > 0.0) upper.push_back(v);
    else lower.push_back(v);
  }
  std::sort(reals.begin(), reals.end());
  for (std::size_t k = 1; k < reals.size(); ++k)
    if (reals[k] - reals[k - 1] <= tol) return out;
  if (upper.size() != lower.size()) return out;

  // Match every upper-half point with the conjugate of a lower-half point.
  std::sort(upper.begin(), upper.end(), [](Complex a, Complex b) {
    return a.real() < b.real() || (a.real() == b.real() && a.imag() < b.imag());
  });
  std::vector<Complex> pairs;
  std::vector<bool> used(lower.size(), false);
  for (const Complex& u : upper) {
    bool found = false;
    for (std::size_t k = 0; k < lower.size(); ++k) {
      if (!used[k] && std::abs(lower[k] - std::conj(u)) <= tol) {
        used[k] = true;
        found = true;
        pairs.push_back(u);
        pairs.push_back(lower[k]);
        break;
      }
    }
    if (!found) return out;
  }
  if (upper.size() == 2 && std::abs(upper[0] - upper[1]) <= tol) return out;

  if (reals.size() == 4) {
    out.label = BranchCase::I;
    for (int k = 0; k < 4; ++k) out.e[k] = reals[k];
  } else if (reals.empty()) {
    out.label = BranchCase::II;
    for (int k = 0; k < 4; ++k) out.e[k] = pairs[k];
  } else if (reals.size() == 2) {
    out.label = BranchCase::III;
    out.e = {reals[0], reals[1], pairs[0], pairs[1]};
  }
  return out;
}

// ---------------------------------------------------------------------------
// Constants

struct AknsConstants {
  Complex c1;
  Complex c2;
};

struct NnlsConstants {
  double c1_tilde = 0.0;
  double c2_tilde = 0.0;
  int sigma = 1;
};

inline AknsConstants akns_constants(const std::array<Complex, 4>& e) {
  Complex sum, e2;
  for (int m = 0; m < 4; ++m) {
    sum += e[m];
    for (int n = m + 1; n < 4; ++n) e2 += e[m] * e[n];
  }
  const Complex c1 = -0.5 * sum;
  return {c1, -0.5 * c1 * c1 + 0.5 * e2};
}

inline AknsConstants akns_constants(const BranchData& b) { return akns_constants(b.e); }

// ---------------------------------------------------------------------------
// Stationary nonlocal NLS <-> stationary AKNS

struct AknsSamples {
  std::vector<Complex> v1, v2;
  AknsConstants constants;
};

struct NnlsSamples {
  std::vector<Complex> u;
  NnlsConstants constants;
};

namespace detail {

inline void require_symmetric(std::span<const double> x) {
  double scale = 0.0;
  for (double v : x) scale = std::max(scale, std::abs(v));
  const std::size_t n = x.size();
  for (std::size_t k = 0; k < n; ++k)
    if (std::abs(x[k] + x[n - 1 - k]) > 1e-12 * std::max(1.0, scale))
      throw Error(ErrorKind::AsymmetricGrid, "sample abscissae are not symmetric about 0");
}

inline void require_sign(int sigma) {
  if (sigma != 1 && sigma != -1) throw Error(ErrorKind::InvalidParameter, "sign must be +1 or -1");
}

}  // namespace detail

/// v1(x) = u(x) e^{i e0 x}, v2(x) = sigma conj(u(-x)) e^{-i e0 x},
/// c1 = c1~ - e0, c2 = c2~ - e0^2/4 - e0 c1/2.
inline AknsSamples lemma61_forward(std::span<const Complex> u, std::span<const double> x, double e0,
                                   const NnlsConstants& k) {
  detail::require_sign(k.sigma);
  if (u.size() != x.size()) throw Error(ErrorKind::DimensionMismatch, "u and x differ in length");
  detail::require_symmetric(x);
  const std::size_t n = x.size();
  AknsSamples out;
  out.v1.resize(n);
  out.v2.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.v1[i] = u[i] * std::exp(kI * e0 * x[i]);
    out.v2[i] = static_cast<double>(k.sigma) * std::conj(u[n - 1 - i]) * std::exp(-kI * e0 * x[i]);
  }
  const double c1 = k.c1_tilde - e0;
  out.constants = {c1, k.c2_tilde - 0.25 * e0 * e0 - 0.5 * e0 * c1};
  return out;
}

/// u(x) = v1(x) e^{-i e0 x} with c1~ = c1 + e0, c2~ = c2 + e0^2/4 + e0 c1/2.
/// The constants must come out real.
inline NnlsSamples lemma61_inverse(std::span<const Complex> v1, std::span<const double> x, double e0,
                                   const AknsConstants& k, int sigma) {
  detail::require_sign(sigma);
  if (v1.size() != x.size()) throw Error(ErrorKind::DimensionMismatch, "v1 and x differ in length");
  detail::require_symmetric(x);
  const Complex c1t = k.c1 + e0;
  const Complex c2t = k.c2 + 0.25 * e0 * e0 + 0.5 * e0 * k.c1;
  if (std::abs(c1t.imag()) > 1e-8 * (1.0 + std::abs(c1t)) || std::abs(c2t.imag()) > 1e-8 * (1.0 + std::abs(c2t)))
    throw Error(ErrorKind::InvalidParameter, "constants of the nonlocal equation are not real");
  NnlsSamples out;
  out.u.resize(v1.size());
  for (std::size_t i = 0; i < v1.size(); ++i) out.u[i] = v1[i] * std::exp(-kI * e0 * x[i]);
  out.constants = {c1t.real(), c2t.real(), sigma};
  return out;
}

namespace detail {

/// Interior sample indices for a 1-D stencil plan on n samples centred at (n-1)/2.
inline std::vector<std::size_t> stencil_nodes(std::size_t n, verify::StencilPlan plan) {
  if (plan.step < 1 || plan.sample < 1) throw Error(ErrorKind::InvalidParameter, "bad stencil plan");
  std::vector<std::size_t> out;
  const long c = static_cast<long>(n - 1) / 2, s = plan.step;
  for (long i = s; i + s < static_cast<long>(n); ++i)
    if ((i - c) % plan.sample == 0) out.push_back(static_cast<std::size_t>(i));
  return out;
}

}  // namespace detail

/// Central-difference residual of the stationary nonlocal NLS on samples
/// taken on a uniform grid symmetric about 0 with spacing h.
inline verify::ResidualReport snnls_residual(std::span<const Complex> u, const NnlsConstants& k, double h,
                                             double tolerance, verify::StencilPlan plan = {}) {
  detail::require_sign(k.sigma);
  if (u.size() < 5) throw Error(ErrorKind::GridTooSmall, "need at least 5 samples");
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidParameter, "h must be positive");
  verify::ResidualReport rep;
  rep.name = k.sigma == 1 ? "snnls_defocusing" : "snnls_focusing";
  rep.hx = h * plan.step;
  rep.tolerance = tolerance;
  const std::size_t n = u.size(), s = static_cast<std::size_t>(plan.step);
  const double hs = rep.hx;
  for (std::size_t i : detail::stencil_nodes(n, plan)) {
    const Complex uxx = (u[i + s] - 2.0 * u[i] + u[i - s]) / (hs * hs);
    const Complex ux = (u[i + s] - u[i - s]) / (2.0 * hs);
    const Complex res = 0.5 * kI * uxx - kI * static_cast<double>(k.sigma) * u[i] * u[i] * std::conj(u[n - 1 - i]) -
                        k.c1_tilde * ux - 2.0 * kI * k.c2_tilde * u[i];
    rep.residual = std::max(rep.residual, std::abs(res));
    ++rep.evaluated;
  }
  rep.passed = rep.residual <= tolerance;
  return rep;
}

/// Central-difference residual of both components of the stationary AKNS system.
inline verify::ResidualReport sakns_residual(std::span<const Complex> v1, std::span<const Complex> v2,
                                             const AknsConstants& k, double h, double tolerance,
                                             verify::StencilPlan plan = {}) {
  if (v1.size() != v2.size()) throw Error(ErrorKind::DimensionMismatch, "v1 and v2 differ in length");
  if (v1.size() < 5) throw Error(ErrorKind::GridTooSmall, "need at least 5 samples");
  if (!(h > 0.0)) throw Error(ErrorKind::InvalidParameter, "h must be positive");
  verify::ResidualReport rep;
  rep.name = "sakns";
  rep.hx = h * plan.step;
  rep.tolerance = tolerance;
  const std::size_t s = static_cast<std::size_t>(plan.step);
  const double hs = rep.hx;
  for (std::size_t i : detail::stencil_nodes(v1.size(), plan)) {
    const Complex a = v1[i], b = v2[i];
    const Complex axx = (v1[i + s] - 2.0 * a + v1[i - s]) / (hs * hs);
    const Complex bxx = (v2[i + s] - 2.0 * b + v2[i - s]) / (hs * hs);
    const Complex ax = (v1[i + s] - v1[i - s]) / (2.0 * hs);
    const Complex bx = (v2[i + s] - v2[i - s]) / (2.0 * hs);
    const Complex r1 = 0.5 * kI * axx - kI * a * a * b - k.c1 * ax - 2.0 * kI * k.c2 * a;
    const Complex r2 = -0.5 * kI * bxx + kI * a * b * b - k.c1 * bx + 2.0 * kI * k.c2 * b;
    rep.residual = std::max({rep.residual, std::abs(r1), std::abs(r2)});
    ++rep.evaluated;
  }
  rep.passed = rep.residual <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Theta-function potentials

struct ThetaParams {
  Complex tau{0.0, 1.0};
  Complex a_theta;
  Complex b_theta;
  Complex delta;
  double e0 = 0.0;
  Complex c1{1.0, 0.0};
  Complex c2{1.0, 0.0};
  int chi = 0;
  std::optional<Complex> omega0_sq;
  std::optional<std::array<Complex, 4>> branch_points;
};

inline constexpr double kProductTolerance = 1e-10;

inline void validate(const ThetaParams& p) {
  if (!std::isfinite(p.tau.real()) || !std::isfinite(p.tau.imag()) || !(p.tau.imag() > 0.0))
    throw Error(ErrorKind::BadTau, "Im(tau) must be positive");
  for (const Complex& v : {p.a_theta, p.b_theta, p.delta, p.c1, p.c2})
    if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) throw Error(ErrorKind::NonFinite, "theta parameter");
  if (!std::isfinite(p.e0)) throw Error(ErrorKind::NonFinite, "e0");
  if (p.chi != 0 && p.chi != 1) throw Error(ErrorKind::InvalidParameter, "chi must be 0 or 1");
  if (p.omega0_sq) {
    const Complex w = *p.omega0_sq;
    if (w == Complex{}) throw Error(ErrorKind::InvalidParameter, "omega0^2 must be nonzero");
    const Complex target = 4.0 / w;
    if (std::abs(p.c1 * p.c2 - target) > kProductTolerance * std::max(1.0, std::abs(target)))
      throw Error(ErrorKind::InvalidParameter, "C1 C2 differs from 4 / omega0^2");
  }
}

/// theta(z) with a check that z is not (numerically) on the theta divisor.
inline Complex nonzero_theta(Complex z, Complex tau) {
  const ThetaSum s = theta_series(z, tau);
  if (std::abs(s.value) <= 1e-13 * s.abs_sum)
    throw Error(ErrorKind::ThetaZero, "theta vanishes at the requested point");
  return s.value;
}

/// v1 = C1 theta(A+Bx-D)/theta(A+Bx) e^{i e0 x}, v2 = C2 theta(A+Bx+D)/theta(A+Bx) e^{-i e0 x}
inline std::pair<Complex, Complex> v_from_theta(const ThetaParams& p, double x) {
  validate(p);
  const Complex z = p.a_theta + p.b_theta * x;
  const Complex den = nonzero_theta(z, p.tau);
  const Complex v1 = p.c1 * theta(z - p.delta, p.tau) / den * std::exp(kI * p.e0 * x);
  const Complex v2 = p.c2 * theta(z + p.delta, p.tau) / den * std::exp(-kI * p.e0 * x);
  return {v1, v2};
}

/// theta(A+Bx) conj(theta(A-Bx-D)) / (theta(A+Bx+D) conj(theta(A-Bx)))
inline Complex reduction_ratio(const ThetaParams& p, double x) {
  const Complex zp = p.a_theta + p.b_theta * x;
  const Complex zm = p.a_theta - p.b_theta * x;
  return theta(zp, p.tau) * std::conj(theta(zm - p.delta, p.tau)) /
         (nonzero_theta(zp + p.delta, p.tau) * std::conj(nonzero_theta(zm, p.tau)));
}

struct ConstraintReport {
  std::vector<core::NamedResidual> items;
  bool passed = false;
  Complex ratio;                 ///< reduction ratio at the first sample
  std::optional<int> implied_sign;  ///< s with s C2 / conj(C1) = ratio, when it is +-1
};

inline constexpr double kCongruenceTolerance = 1e-9;
inline constexpr double kRatioTolerance = 1e-8;

/// Re(Delta) = chi/2 (mod 1), Im(A) = chi Im(tau)/2 (mod Im(tau)), constancy of the
/// reduction ratio over 16 points of [x_lo, x_hi], and C1 C2 = 4/omega0^2 when given.
inline ConstraintReport check_nnls_constraints(const ThetaParams& p, double x_lo = -1.0, double x_hi = 1.0) {
  validate(p);
  ConstraintReport rep;
  auto add = [&](std::string name, double value, double tol) {
    rep.items.push_back({std::move(name), value, tol, value <= tol});
  };

  const double re_shift = p.delta.real() - 0.5 * p.chi;
  add("re_delta", std::abs(re_shift - std::round(re_shift)), kCongruenceTolerance);

  const double s = p.tau.imag();
  const double im_shift = (p.a_theta.imag() - 0.5 * p.chi * s) / s;
  add("im_a", std::abs(im_shift - std::round(im_shift)) * s, kCongruenceTolerance);

  constexpr int kSamples = 16;
  rep.ratio = reduction_ratio(p, x_lo);
  double dev = 0.0;
  for (int k = 1; k < kSamples; ++k) {
    const double x = x_lo + (x_hi - x_lo) * k / (kSamples - 1);
    dev = std::max(dev, std::abs(reduction_ratio(p, x) - rep.ratio) / std::abs(rep.ratio));
  }
  add("ratio_constancy", dev, kRatioTolerance);

  if (p.omega0_sq) {
    const Complex target = 4.0 / *p.omega0_sq;
    add("c1c2", std::abs(p.c1 * p.c2 - target) / std::max(1.0, std::abs(target)), kProductTolerance);
  }

  const Complex sign = rep.ratio * std::conj(p.c1) / p.c2;
  if (std::abs(sign - 1.0) <= kRatioTolerance) rep.implied_sign = 1;
  if (std::abs(sign + 1.0) <= kRatioTolerance) rep.implied_sign = -1;

  rep.passed = std::all_of(rep.items.begin(), rep.items.end(), [](const auto& r) { return r.passed; });
  return rep;
}

/// max_x |v2(x) - sign conj(v1(-x)) e^{-2 i e0 x}| / max(1, |v2(x)|) over the samples.
inline verify::ResidualReport theta_reduction_residual(const ThetaParams& p, std::span<const double> x, int sign,
                                                       double tolerance = kRatioTolerance) {
  detail::require_sign(sign);
  detail::require_symmetric(x);
  verify::ResidualReport rep;
  rep.name = "reduction";
  rep.tolerance = tolerance;
  if (x.size() > 1) rep.hx = x[1] - x[0];
  for (double xv : x) {
    const auto [v1, v2] = v_from_theta(p, xv);
    const Complex v1m = v_from_theta(p, -xv).first;
    const Complex expected = static_cast<double>(sign) * std::conj(v1m) * std::exp(-2.0 * kI * p.e0 * xv);
    rep.residual = std::max(rep.residual, std::abs(v2 - expected) / std::max(1.0, std::abs(v2)));
    ++rep.evaluated;
  }
  rep.passed = rep.residual <= tolerance;
  return rep;
}

// ---------------------------------------------------------------------------
// Periods for four real branch points (experimental)

struct Periods {
  Complex tau;
  Complex delta;
};

namespace detail {

/// Composite 20-point Gauss-Legendre over [lo, hi], panels doubled until two
/// successive results agree to 1e-13.
template <typename F>
double integrate_smooth(F&& f, double lo, double hi) {
  using Rule = boost::math::quadrature::gauss<double, 20>;
  auto composite = [&](int panels) {
    const double w = (hi - lo) / panels;
    double acc = 0.0;
    for (int k = 0; k < panels; ++k) acc += Rule::integrate(f, lo + k * w, lo + (k + 1) * w);
    return acc;
  };
  double prev = composite(1);
  for (int panels = 2; panels <= 4096; panels *= 2) {
    const double cur = composite(panels);
    if (std::abs(cur - prev) <= 1e-13 * std::abs(cur)) return cur;
    prev = cur;
  }
  throw Error(ErrorKind::QuadratureFailure, "composite Gauss rule did not settle");
}

}  // namespace detail

/// tau and Delta for E0 < E1 < E2 < E3. The a-cycle encircles [E1, E2], the
/// b-cycle encircles [E0, E1]; with I_jk = int_{Ej}^{Ek} dz / sqrt|R4(z)|,
/// tau = i I_01 / I_12 and Delta = int_{E3}^{inf} dz / sqrt R4(z) / I_12.
/// Endpoint singularities are removed by z = mid + half sin(s) on finite
/// intervals and z = E3 + (L tan phi)^2 on the infinite one.
inline Periods periods_case_i(const BranchData& b) {
  std::array<double, 4> e{};
  for (int k = 0; k < 4; ++k) {
    if (std::abs(b.e[k].imag()) > kBranchTolerance * std::max(1.0, std::abs(b.e[k])))
      throw Error(ErrorKind::InvalidParameter, "periods need four real branch points");
    e[k] = b.e[k].real();
  }
  std::sort(e.begin(), e.end());
  const double scale = std::max({1.0, std::abs(e[0]), std::abs(e[3])});
  for (int k = 1; k < 4; ++k)
    if (e[k] - e[k - 1] <= kBranchTolerance * scale)
      throw Error(ErrorKind::DegenerateCurve, "coincident branch points");

  auto finite_period = [&](int lo, int hi, int other1, int other2) {
    const double mid = 0.5 * (e[lo] + e[hi]), half = 0.5 * (e[hi] - e[lo]);
    return detail::integrate_smooth(
        [&](double s) {
          const double z = mid + half * std::sin(s);
          return 1.0 / std::sqrt(std::abs((z - e[other1]) * (z - e[other2])));
        },
        -0.5 * M_PI, 0.5 * M_PI);
  };
  const double i12 = finite_period(1, 2, 0, 3);
  const double i01 = finite_period(0, 1, 2, 3);

  const std::array<double, 3> d{e[3] - e[0], e[3] - e[1], e[3] - e[2]};
  const double len = std::sqrt(d[0]);
  const double i_inf = detail::integrate_smooth(
      [&](double phi) {
        const double sn = std::sin(phi), cs = std::cos(phi);
        double prod = 1.0;
        for (double dk : d) prod *= len * len * sn * sn + dk * cs * cs;
        return 2.0 * len * cs / std::sqrt(prod);
      },
      0.0, 0.5 * M_PI);

  return {Complex(0.0, i01 / i12), Complex(i_inf / i12, 0.0)};
}

inline Periods periods_case_i(const std::array<Complex, 4>& e) {
  for (const Complex& v : e)
    if (std::abs(v.imag()) > kBranchTolerance * std::max(1.0, std::abs(v)))
      throw Error(ErrorKind::InvalidParameter, "periods need four real branch points");
  BranchData b{e, BranchCase::I};
  return periods_case_i(b);
}

}  // namespace nnls::ag
