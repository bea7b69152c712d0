#pragma once

// Shared helpers for the test binaries: random triples and oracles that do
// not go through the library code they are compared against.

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "nnls_gbdt/ag_theta.hpp"
#include "nnls_gbdt/gbdt_core.hpp"

namespace testing_support {

using nnls::Complex;
using nnls::ComplexMatrix;

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Complex cuniform(std::mt19937_64& rng, double r) { return {uniform(rng, -r, r), uniform(rng, -r, r)}; }

/// A triple with n <= 4, m1, m2 <= 2: A diagonally dominant with Re spectrum
/// in [0.3, 1.2], so the identity route exists, and one of theta1, theta2
/// shrunk so that the field stays moderate on [-2, 2] x [-0.5, 0.5].
inline std::optional<nnls::core::GbdtTriple> random_triple(std::mt19937_64& rng, int sigma) {
  const int n = 1 + static_cast<int>(rng() % 4);
  const int m1 = 1 + static_cast<int>(rng() % 2);
  const int m2 = 1 + static_cast<int>(rng() % 2);
  ComplexMatrix a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      a(i, j) = i == j ? Complex(0.3 + 0.45 * (uniform(rng, -1, 1) + 1), 0.3 * uniform(rng, -1, 1))
                       : cuniform(rng, 0.15);
  ComplexMatrix t1(n, m1), t2(n, m2);
  for (Eigen::Index k = 0; k < t1.size(); ++k) t1.data()[k] = cuniform(rng, 1.0);
  for (Eigen::Index k = 0; k < t2.size(); ++k) t2.data()[k] = cuniform(rng, 1.0);
  if (rng() % 2)
    t2 *= 0.25;
  else
    t1 *= 0.25;
  try {
    return nnls::core::complete_triple(sigma, a, t1, t2);
  } catch (const nnls::Error&) {
    return std::nullopt;
  }
}

/// Triples whose field on the 101 x 101 grid over [-2,2] x [-0.5,0.5] keeps
/// min relative |det S| >= 0.05, i.e. no blow-up inside or near the window.
struct AcceptedTriple {
  nnls::core::GbdtTriple triple;
  nnls::core::SolutionField field;
};

inline constexpr double kMinRelativeDet = 0.05;

inline nnls::core::Grid standard_grid() { return nnls::core::Grid::symmetric(2.0, 101, -0.5, 0.5, 101); }

inline std::vector<AcceptedTriple> accepted_triples(std::uint64_t seed, int sigma, int count) {
  std::mt19937_64 rng(seed);
  std::vector<AcceptedTriple> out;
  const auto grid = standard_grid();
  while (static_cast<int>(out.size()) < count) {
    auto tr = random_triple(rng, sigma);
    if (!tr) continue;
    auto field = nnls::core::assemble_field(*tr, grid);
    const double mr = *std::min_element(field.relative_det.begin(), field.relative_det.end());
    if (mr < kMinRelativeDet) continue;
    out.push_back({std::move(*tr), std::move(field)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Theta oracles

/// Jacobi triple product: prod (1 - q^{2m})(1 + q^{2m-1} w)(1 + q^{2m-1}/w), q = e^{i pi tau}, w = e^{2 pi i z}.
inline Complex theta_product(Complex z, Complex tau, int terms = 200) {
  const Complex i{0.0, 1.0};
  const Complex q = std::exp(i * M_PI * tau);
  const Complex w = std::exp(2.0 * i * M_PI * z);
  Complex prod = 1.0;
  Complex q2m = 1.0;
  for (int m = 1; m <= terms; ++m) {
    const Complex q2m1 = q2m * q;  // q^{2m-1}
    q2m = q2m1 * q;                // q^{2m}
    prod *= (1.0 - q2m) * (1.0 + q2m1 * w) * (1.0 + q2m1 / w);
  }
  return prod;
}

/// Plain truncated sum over |n| <= terms.
inline Complex theta_partial_sum(Complex z, Complex tau, int terms = 40) {
  const Complex i{0.0, 1.0};
  Complex sum = 0.0;
  for (int n = -terms; n <= terms; ++n) sum += std::exp(i * M_PI * double(n * n) * tau + 2.0 * i * M_PI * double(n) * z);
  return sum;
}

inline double agm(double a, double b) {
  for (int k = 0; k < 60 && std::abs(a - b) > 1e-16 * a; ++k) {
    const double m = 0.5 * (a + b);
    b = std::sqrt(a * b);
    a = m;
  }
  return a;
}

/// tau = i K(k') / K(k) = i agm(1, k') / agm(1, k) for four real branch points e0 < e1 < e2 < e3,
/// with k^2 the cross ratio (e2-e1)(e3-e0)/((e3-e1)(e2-e0)).
inline Complex tau_agm(const std::array<double, 4>& e) {
  const double k2 = (e[2] - e[1]) * (e[3] - e[0]) / ((e[3] - e[1]) * (e[2] - e[0]));
  const double k = std::sqrt(k2), kp = std::sqrt(1.0 - k2);
  return {0.0, agm(1.0, kp) / agm(1.0, k)};
}

/// Coefficients of the monic square (l^2 + c1 l + c2)^2 that agree with
/// prod (l - e_k) in the l^4, l^3, l^2 terms, by explicit expansion.
inline nnls::ag::AknsConstants akns_by_expansion(const std::array<Complex, 4>& e) {
  std::vector<Complex> poly{1.0};  // highest degree first
  for (Complex r : e) {
    std::vector<Complex> next(poly.size() + 1, 0.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      next[k] += poly[k];
      next[k + 1] -= r * poly[k];
    }
    poly = next;
  }
  // (l^2 + c1 l + c2)^2 = l^4 + 2 c1 l^3 + (c1^2 + 2 c2) l^2 + ...
  const Complex c1 = poly[1] / 2.0;
  const Complex c2 = (poly[2] - c1 * c1) / 2.0;
  return {c1, c2};
}

/// Least-squares fit of (P, c1, c2) in (i/2)(L^2 + L') - i P r - c1 L - 2 i c2 = 0, where
/// v1 = theta(z-D)/theta(z) e^{i e0 x}, L = v1'/v1, P = C1 C2 and r = theta(z-D)theta(z+D)/theta(z)^2,
/// which is the first stationary equation with v2 = C2 theta(z+D)/theta(z) e^{-i e0 x}.
/// Derivatives are taken from the triple product by fourth-order central differences in z.
struct ThetaFit {
  Complex p, c1, c2;
};

inline ThetaFit fit_theta_constants(Complex tau, Complex delta, Complex b, double e0, Complex a) {
  const double hz = 1e-3;
  auto th = [&](Complex z) { return theta_product(z, tau); };
  auto d1 = [&](Complex z) {
    return (-th(z + 2.0 * hz) + 8.0 * th(z + hz) - 8.0 * th(z - hz) + th(z - 2.0 * hz)) / (12.0 * hz);
  };
  auto d2 = [&](Complex z) {
    return (-th(z + 2.0 * hz) + 16.0 * th(z + hz) - 30.0 * th(z) + 16.0 * th(z - hz) - th(z - 2.0 * hz)) /
           (12.0 * hz * hz);
  };
  auto logd = [&](Complex z) { return d1(z) / th(z); };
  auto logdd = [&](Complex z) { return (d2(z) * th(z) - d1(z) * d1(z)) / (th(z) * th(z)); };
  const Complex i{0.0, 1.0};
  Eigen::MatrixXcd rows(9, 3);
  Eigen::VectorXcd rhs(9);
  for (int k = 0; k < 9; ++k) {
    const double x = -1.0 + 0.25 * k;
    const Complex z = a + b * x;
    const Complex l = b * (logd(z - delta) - logd(z)) + i * e0;
    const Complex lp = b * b * (logdd(z - delta) - logdd(z));
    const Complex r = th(z - delta) * th(z + delta) / (th(z) * th(z));
    rows(k, 0) = -i * r;
    rows(k, 1) = -l;
    rows(k, 2) = -2.0 * i;
    rhs(k) = -0.5 * i * (l * l + lp);
  }
  const Eigen::VectorXcd sol = rows.colPivHouseholderQr().solve(rhs);
  return {sol(0), sol(1), sol(2)};
}

}  // namespace testing_support
