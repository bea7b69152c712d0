// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>

#include "nnls_gbdt/ag_theta.hpp"
#include "nnls_gbdt/oracles.hpp"
#include "nnls_gbdt/scenario.hpp"
#include "nnls_gbdt/verify.hpp"
#include "support.hpp"

using namespace nnls;
namespace ts = testing_support;

namespace {

struct Outcome {
  bool passed = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Random triples shared by several criteria, built once.
struct Corpus {
  std::vector<ts::AcceptedTriple> items;
};

const Corpus& corpus() {
  static const Corpus c = [] {
    Corpus out;
    for (int sigma : {-1, 1}) {
      auto batch = ts::accepted_triples(sigma == 1 ? 101 : 202, sigma, 20);
      for (auto& b : batch) out.items.push_back(std::move(b));
    }
    return out;
  }();
  return c;
}

// Fields of the three closed-form families on the 41 x 41 grid.
struct OracleCase {
  std::string family;
  core::GbdtTriple triple;
  core::SolutionField field;
  std::function<ComplexMatrix(double, double)> oracle;
};

const std::vector<OracleCase>& oracle_cases() {
  static const std::vector<OracleCase> cases = [] {
    std::vector<OracleCase> out;
    std::mt19937_64 rng(404);
    const auto grid = core::Grid::symmetric(2.0, 41, -0.5, 0.5, 41);
    auto draw_a = [&] { return Complex(ts::uniform(rng, 0.3, 1.0), ts::uniform(rng, -0.5, 0.5)); };
    for (int k = 0; k < 5; ++k) {
      oracles::Example1Params p{draw_a(), ts::cuniform(rng, 1.0), ts::cuniform(rng, 1.0), k % 2};
      auto tr = cli::triple_of(p);
      out.push_back({"family1", tr, core::assemble_field(tr, grid),
                     [p](double x, double t) { return cli::scalar(oracles::ex1_u(p, x, t)); }});
    }
    for (int k = 0; k < 5; ++k) {
      oracles::Example2Params p{draw_a(), ts::cuniform(rng, 1.0), ts::cuniform(rng, 1.0), k % 2};
      auto tr = cli::triple_of(p);
      out.push_back({"family2", tr, core::assemble_field(tr, grid),
                     [p](double x, double t) { return cli::scalar(oracles::ex2_u(p, x, t)); }});
    }
    for (int k = 0; k < 5; ++k) {
      oracles::Example3Params p{draw_a(), ts::cuniform(rng, 1.0), ts::cuniform(rng, 1.0), ts::cuniform(rng, 1.0),
                                k % 2};
      auto tr = cli::triple_of(p);
      out.push_back({"family3", tr, core::assemble_field(tr, grid), [p](double x, double t) {
                       const auto v = oracles::ex3_u(p, x, t);
                       ComplexMatrix m(2, 1);
                       m << v[0], v[1];
                       return m;
                     }});
    }
    return out;
  }();
  return cases;
}

Outcome pde_convergence() {
  Outcome o;
  double worst_lo = 10, worst_hi = 0;
  int failures = 0;
  for (const auto& item : corpus().items) {
    const auto fine = core::assemble_field(item.triple, ts::standard_grid().refined(2));
    const auto reps = verify::nnls_convergence(fine, item.triple.sigma, 2, 0.0);
    for (std::size_t k = 1; k < reps.size(); ++k) {
      const double ord = *reps[k].order;
      worst_lo = std::min(worst_lo, ord);
      worst_hi = std::max(worst_hi, ord);
      if (std::abs(ord - 2.0) > 0.3 || reps[k].evaluated == 0) {
        o.passed = false;
        ++failures;
      }
    }
  }
  o.detail = std::to_string(corpus().items.size()) + " triples, orders in [" + fmt(worst_lo) + ", " +
             fmt(worst_hi) + "], " + std::to_string(failures) + " outside 2 +- 0.3";
  return o;
}

Outcome operator_identity() {
  Outcome o;
  double worst = 0;
  auto take = [&](const core::GbdtTriple& tr, const core::SolutionField& f) {
    const auto r = verify::identity_residual(tr, f, 1e-10);
    worst = std::max(worst, r.residual);
    o.passed = o.passed && r.passed;
  };
  for (const auto& item : corpus().items) take(item.triple, item.field);
  for (const auto& c : oracle_cases()) take(c.triple, c.field);
  o.detail = "max relative residual " + fmt(worst);
  return o;
}

Outcome symmetries() {
  Outcome o;
  double mirror = 0, reduction = 0;
  auto take = [&](int sigma, const core::SolutionField& f) {
    const auto a = verify::hermitian_mirror_residual(f, 1e-10);
    const auto b = verify::reduction_residual(f, sigma, 1e-10);
    mirror = std::max(mirror, a.residual);
    reduction = std::max(reduction, b.residual);
    o.passed = o.passed && a.passed && b.passed;
  };
  for (const auto& item : corpus().items) take(item.triple.sigma, item.field);
  for (const auto& c : oracle_cases()) take(c.triple.sigma, c.field);
  o.detail = "S mirror " + fmt(mirror) + ", v2 reduction " + fmt(reduction);
  return o;
}

Outcome oracle_equivalence() {
  Outcome o;
  double worst = 0;
  std::size_t points = 0, skipped = 0;
  for (const auto& c : oracle_cases()) {
    const auto& g = c.field.grid;
    for (int j = 0; j < g.nt(); ++j)
      for (int i = 0; i < g.nx(); ++i) {
        const std::size_t k = g.index(i, j);
        if (c.field.singular[k]) {
          ++skipped;
          continue;
        }
        ComplexMatrix expected;
        try {
          expected = c.oracle(g.x()[i], g.t()[j]);
        } catch (const SingularPointError&) {
          ++skipped;
          continue;
        }
        const double rel = (c.field.u[k] - expected).cwiseAbs().maxCoeff() / expected.cwiseAbs().maxCoeff();
        worst = std::max(worst, rel);
        ++points;
      }
  }
  o.passed = worst <= 1e-9 && points > 0;
  o.detail = std::to_string(oracle_cases().size()) + " draws, " + std::to_string(points) +
             " points, max relative difference " + fmt(worst) + ", " + std::to_string(skipped) + " singular skipped";
  return o;
}

Outcome blowup_prediction() {
  Outcome o;
  const oracles::Example1Params p{{1.0, 1.0}, 2.0, 1.0, 1};
  const double t_star = *oracles::ex1_blowup_time(p);
  const auto tr = cli::triple_of(p);
  const double x_lo = -4.0, x_hi = 4.0;
  const int samples = 801;
  const double cell = (x_hi - x_lo) / (samples - 1);
  const auto hits = core::locate_blowups(tr, t_star, x_lo, x_hi, samples);
  double min_abs = std::numeric_limits<double>::infinity();
  for (const auto& h : hits) min_abs = std::min(min_abs, h.abs_det);
  const double period = M_PI / (2.0 * p.a.real());
  double worst_gap = 0;
  for (std::size_t k = 1; k < hits.size(); ++k)
    worst_gap = std::max(worst_gap, std::abs(hits[k].x - hits[k - 1].x - period));
  o.passed = hits.size() >= 3 && min_abs < 1e-6 && worst_gap <= cell;
  o.detail = "t* = " + fmt(t_star) + ", " + std::to_string(hits.size()) + " zeros, min |S| " + fmt(min_abs) +
             ", spacing error " + fmt(worst_gap) + " (cell " + fmt(cell) + ")";
  return o;
}

Outcome darboux_algebra() {
  Outcome o;
  double worst = 0, ord_lo = 10, ord_hi = 0;
  std::size_t evaluated = 0;
  std::mt19937_64 rng(606);
  for (const auto& item : corpus().items) {
    std::vector<verify::SpectralPoint> pts;
    for (int k = 0; k < 50; ++k)
      pts.push_back({ts::uniform(rng, -2, 2), ts::uniform(rng, -0.5, 0.5), ts::cuniform(rng, 2.0)});
    const auto r = verify::darboux_residual(item.triple, pts, 1e-9);
    worst = std::max(worst, r.residual);
    evaluated += r.evaluated;
    o.passed = o.passed && r.passed;
    const auto [wx, wt] = verify::wave_ode_residual(item.triple, ts::uniform(rng, -1, 1), ts::uniform(rng, -0.3, 0.3),
                                                    {ts::uniform(rng, 0.2, 1.0), ts::uniform(rng, 0.2, 1.0)}, 1e-2);
    for (const auto& w : {wx, wt}) {
      ord_lo = std::min(ord_lo, *w.order);
      ord_hi = std::max(ord_hi, *w.order);
      o.passed = o.passed && std::abs(*w.order - 2.0) <= 0.3;
    }
  }
  o.detail = std::to_string(evaluated) + " spectral points, max residual " + fmt(worst) + ", wave orders in [" +
             fmt(ord_lo) + ", " + fmt(ord_hi) + "]";
  return o;
}

Outcome route_equivalence() {
  Outcome o;
  double worst = 0;
  int triples = 0;
  std::mt19937_64 rng(707);
  for (const auto& item : corpus().items) {
    if (core::Evaluator(item.triple).spectral_margin() <= 0.1) continue;
    if (++triples > 8) break;
    std::vector<std::pair<double, double>> pts;
    for (int k = 0; k < 100; ++k) pts.emplace_back(ts::uniform(rng, -2, 2), ts::uniform(rng, -0.5, 0.5));
    const auto r = verify::route_residual(item.triple, pts, 400, 1e-7);
    worst = std::max(worst, r.residual);
    o.passed = o.passed && r.passed;
  }
  o.passed = o.passed && triples > 0;
  o.detail = std::to_string(std::min(triples, 8)) + " triples x 100 points, max relative difference " + fmt(worst);
  return o;
}

Outcome theta_suite() {
  Outcome o;
  std::ostringstream d;
  // value at the origin against the closed form pi^{1/4} / Gamma(3/4) and the partial sum
  const Complex th0 = ag::theta({0.0, 0.0}, {0.0, 1.0});
  const double closed = std::pow(M_PI, 0.25) / std::tgamma(0.75);
  const double e_val = std::max(std::abs(th0 - closed), std::abs(th0 - ts::theta_partial_sum(0.0, {0.0, 1.0})));
  o.passed = o.passed && e_val <= 1e-9;
  d << "theta(0,i) err " << fmt(e_val);

  // quasi-periodicity
  std::mt19937_64 rng(808);
  double quasi = 0;
  for (int k = 0; k < 50; ++k) {
    const Complex tau{ts::uniform(rng, -0.5, 0.5), ts::uniform(rng, 0.5, 1.5)};
    const Complex z{ts::uniform(rng, -1, 1), ts::uniform(rng, -0.5, 0.5) * tau.imag()};
    const Complex th = ag::theta(z, tau);
    const double scale = std::max(1.0, std::abs(th));
    quasi = std::max(quasi, std::abs(ag::theta(z + 1.0, tau) - th) / scale);
    const Complex shifted = std::exp(-kI * M_PI * tau - 2.0 * kI * M_PI * z) * th;
    quasi = std::max(quasi, std::abs(ag::theta(z + tau, tau) - shifted) / std::max(1.0, std::abs(shifted)));
  }
  o.passed = o.passed && quasi <= 1e-11;
  d << "; quasi-periodicity " << fmt(quasi);

  // AKNS constants against explicit polynomial expansion
  double akns = 0;
  for (int k = 0; k < 20; ++k) {
    std::array<Complex, 4> e{};
    for (auto& v : e) v = ts::cuniform(rng, 3.0);
    const auto got = ag::akns_constants(e);
    const auto want = ts::akns_by_expansion(e);
    akns = std::max({akns, std::abs(got.c1 - want.c1), std::abs(got.c2 - want.c2)});
  }
  o.passed = o.passed && akns <= 1e-12;
  d << "; akns " << fmt(akns);

  // constant solutions u = rho, c2~ = -sigma |rho|^2 / 2
  const int n = 201;
  std::vector<double> x(n);
  for (int i = 0; i < n; ++i) x[i] = -1.0 + 2.0 * i / (n - 1);
  const double h = x[1] - x[0];
  double constant = 0;
  double sakns_order = 0;
  bool orders_ok = true;
  for (int sigma : {1, -1}) {
    const Complex rho{0.7, -0.4};
    const std::vector<Complex> u(n, rho);
    const ag::NnlsConstants k{0.25, -sigma * std::norm(rho) / 2.0, sigma};
    const auto r = ag::snnls_residual(u, k, h, 1e-10);
    constant = std::max(constant, r.residual);
    o.passed = o.passed && r.passed;

    const double e0 = 0.8;
    const auto v = ag::lemma61_forward(u, x, e0, k);
    const auto coarse = ag::sakns_residual(v.v1, v.v2, v.constants, h, 0.0, {2, 2});
    const auto fine = ag::sakns_residual(v.v1, v.v2, v.constants, h, 0.0, {1, 2});
    sakns_order = verify::estimate_order(coarse, fine);
    orders_ok = orders_ok && std::abs(sakns_order - 2.0) <= 0.3;
  }
  o.passed = o.passed && orders_ok;
  d << "; constant-solution snnls " << fmt(constant) << ", sakns order " << fmt(sakns_order);

  // ratio constancy for a constraint-compliant parameter set
  ag::ThetaParams p;
  p.tau = {0.0, 0.9};
  p.a_theta = {0.1, 0.45};
  p.b_theta = {0.0, -0.8};
  p.delta = 0.5;
  p.e0 = 0.3;
  p.chi = 1;
  const auto fit = ts::fit_theta_constants(p.tau, p.delta, p.b_theta, p.e0, p.a_theta);
  p.c1 = std::sqrt(fit.p.real());
  p.c2 = fit.p.real() / p.c1.real();
  const auto cons = ag::check_nnls_constraints(p);
  const auto* ratio = [&]() -> const core::NamedResidual* {
    for (const auto& it : cons.items)
      if (it.name == "ratio_constancy") return &it;
    return nullptr;
  }();
  o.passed = o.passed && ratio && ratio->value <= 1e-8 && cons.passed;
  d << "; ratio constancy " << (ratio ? fmt(ratio->value) : "missing");
  o.detail = d.str();
  return o;
}

Outcome periods() {
  Outcome o;
  const auto sym = ag::periods_case_i(std::array<Complex, 4>{-2.0, -1.0, 1.0, 2.0});
  const auto gen = ag::periods_case_i(std::array<Complex, 4>{0.0, 1.0, 2.0, 3.0});
  const Complex want = ts::tau_agm({0.0, 1.0, 2.0, 3.0});
  const double err = std::abs(gen.tau - want);
  o.passed = std::abs(sym.tau.real()) <= 1e-8 && sym.tau.imag() > 0 && err <= 1e-9;
  o.detail = "E={-2,-1,1,2}: tau = " + fmt(sym.tau.real()) + " + " + fmt(sym.tau.imag()) +
             "i; E={0,1,2,3}: |tau - agm| = " + fmt(err);
  return o;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  Outcome o;
  const std::filesystem::path root = std::filesystem::temp_directory_path() / "nnls_gbdt_determinism";
  std::filesystem::remove_all(root);
  int scenarios = 0, compared = 0;
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(NNLS_SCENARIO_DIR))
    if (entry.path().extension() == ".json") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    ++scenarios;
    std::ostringstream log, err;
    const auto a = root / f.stem() / "a";
    const auto b = root / f.stem() / "b";
    const int ca = cli::run_scenario(f.string(), {a.string(), 0}, log, err);
    const int cb = cli::run_scenario(f.string(), {b.string(), 0}, log, err);
    if (ca != cb) o.passed = false;
    if (ca > 1) continue;  // rejected scenarios write nothing
    for (const char* name : {"u.csv", "detS.csv", "report.json"}) {
      ++compared;
      if (slurp(a / name) != slurp(b / name) || slurp(a / name).empty()) o.passed = false;
    }
  }
  std::filesystem::remove_all(root);
  o.detail = std::to_string(scenarios) + " scenarios, " + std::to_string(compared) + " files compared";
  return o;
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"1 pde convergence", pde_convergence},     {"2 operator identity", operator_identity},
      {"3 symmetries", symmetries},               {"4 oracle equivalence", oracle_equivalence},
      {"5 blow-up prediction", blowup_prediction}, {"6 darboux algebra", darboux_algebra},
      {"7 route equivalence", route_equivalence}, {"8 theta suite", theta_suite},
      {"9 periods", periods},                     {"10 determinism", determinism},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (o.passed ? "PASS" : "FAIL") << "  criterion " << name << ": " << o.detail << " [" << fmt(secs)
              << " s]" << std::endl;
    failed += o.passed ? 0 : 1;
  }
  std::cout << (failed == 0 ? "all criteria passed" : std::to_string(failed) + " criteria failed") << std::endl;
  return failed == 0 ? 0 : 1;
}
