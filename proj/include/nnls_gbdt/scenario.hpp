#pragma once

// Scenario files: JSON descriptions of a construction plus the checks to run
// on it. run_scenario() builds the solution, writes u.csv, detS.csv and
// report.json, and returns the process exit code:
//   0 every requested check passed, 1 some check failed,
//   2 the parameters were rejected (degenerate triple, bad values),
//   3 the file is unreadable or does not match the schema.

#include <algorithm>
#include <cinttypes>
#include <functional>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nnls_gbdt/ag_theta.hpp"
#include "nnls_gbdt/gbdt_core.hpp"
#include "nnls_gbdt/oracles.hpp"
#include "nnls_gbdt/verify.hpp"

namespace nnls::cli {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

enum ExitCode : int { kPassed = 0, kCheckFailed = 1, kRejected = 2, kSchema = 3 };

// ---------------------------------------------------------------------------
// Schema reading

class Reader {
 public:
  static const json& field(const json& obj, const std::string& key, const std::string& path) {
    if (!obj.is_object()) throw Error(ErrorKind::SchemaError, path + ": expected an object");
    auto it = obj.find(key);
    if (it == obj.end()) throw Error(ErrorKind::SchemaError, path + "." + key + ": missing");
    return *it;
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) throw Error(ErrorKind::SchemaError, path + ": expected a number");
    return v.get<double>();
  }

  static int integer(const json& v, const std::string& path) {
    if (!v.is_number_integer()) throw Error(ErrorKind::SchemaError, path + ": expected an integer");
    return v.get<int>();
  }

  static Complex complex(const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != 2 || !v[0].is_number() || !v[1].is_number())
      throw Error(ErrorKind::SchemaError, path + ": expected [re, im]");
    return {v[0].get<double>(), v[1].get<double>()};
  }

  static ComplexMatrix matrix(const json& v, const std::string& path) {
    if (!v.is_array() || v.empty()) throw Error(ErrorKind::SchemaError, path + ": expected a list of rows");
    const std::size_t rows = v.size();
    if (!v[0].is_array() || v[0].empty()) throw Error(ErrorKind::SchemaError, path + "[0]: expected a row");
    const std::size_t cols = v[0].size();
    ComplexMatrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string rp = path + "[" + std::to_string(r) + "]";
      if (!v[r].is_array() || v[r].size() != cols)
        throw Error(ErrorKind::SchemaError, rp + ": rows must have " + std::to_string(cols) + " entries");
      for (std::size_t c = 0; c < cols; ++c)
        m(r, c) = complex(v[r][c], rp + "[" + std::to_string(c) + "]");
    }
    return m;
  }
};

struct GridSpec {
  double x_max = 1.0;
  int nx = 1;
  double t_min = 0.0, t_max = 0.0;
  int nt = 1;
};

struct WaveSpec {
  double x = 0.25, t = 0.05, h = 1e-2;
  Complex z{1.0, 1.0};
};

struct Scenario {
  std::string kind;
  json parameters;
  GridSpec grid;
  std::vector<std::string> checks;
  std::string output;
  std::map<std::string, double> tolerances;
  WaveSpec wave;
  unsigned workers = 1;

  double tolerance(const std::string& check, double fallback) const {
    auto it = tolerances.find(check);
    return it == tolerances.end() ? fallback : it->second;
  }
};

inline const std::set<std::string>& kinds() {
  static const std::set<std::string> k{"gbdt", "example1", "example2", "example3", "theta"};
  return k;
}

inline const std::set<std::string>& checks_for(const std::string& kind) {
  static const std::set<std::string> field_checks{"pde", "identity", "mirror", "reduction", "darboux", "wave", "routes"};
  static const std::set<std::string> example_checks{"pde",    "identity", "mirror", "reduction",
                                                    "darboux", "wave",    "routes", "oracle"};
  static const std::set<std::string> theta_checks{"constraints", "reduction", "sakns", "snnls"};
  if (kind == "theta") return theta_checks;
  if (kind == "gbdt") return field_checks;
  return example_checks;
}

inline Scenario parse_scenario(const json& doc) {
  Scenario sc;
  if (!doc.is_object()) throw Error(ErrorKind::SchemaError, "scenario: expected an object");
  static const std::set<std::string> known{"kind", "parameters", "grid", "checks", "output", "tolerances", "wave", "workers"};
  for (const auto& [key, value] : doc.items())
    if (!known.count(key)) throw Error(ErrorKind::SchemaError, "scenario." + key + ": unknown key");
  const json& kind = Reader::field(doc, "kind", "scenario");
  if (!kind.is_string() || !kinds().count(kind.get<std::string>()))
    throw Error(ErrorKind::SchemaError, "scenario.kind: expected one of gbdt, example1, example2, example3, theta");
  sc.kind = kind.get<std::string>();
  sc.parameters = Reader::field(doc, "parameters", "scenario");
  if (!sc.parameters.is_object()) throw Error(ErrorKind::SchemaError, "scenario.parameters: expected an object");

  const json& g = Reader::field(doc, "grid", "scenario");
  sc.grid.x_max = Reader::number(Reader::field(g, "x_max", "scenario.grid"), "scenario.grid.x_max");
  sc.grid.nx = Reader::integer(Reader::field(g, "nx", "scenario.grid"), "scenario.grid.nx");
  if (sc.grid.nx < 1 || sc.grid.nx % 2 == 0)
    throw Error(ErrorKind::SchemaError, "scenario.grid.nx: must be odd and positive");
  if (!(sc.grid.x_max > 0.0)) throw Error(ErrorKind::SchemaError, "scenario.grid.x_max: must be positive");
  if (sc.kind != "theta") {
    sc.grid.t_min = Reader::number(Reader::field(g, "t_min", "scenario.grid"), "scenario.grid.t_min");
    sc.grid.t_max = Reader::number(Reader::field(g, "t_max", "scenario.grid"), "scenario.grid.t_max");
    sc.grid.nt = Reader::integer(Reader::field(g, "nt", "scenario.grid"), "scenario.grid.nt");
    if (sc.grid.nt < 1) throw Error(ErrorKind::SchemaError, "scenario.grid.nt: must be positive");
    if (!(sc.grid.t_min <= 0.0 && sc.grid.t_max >= 0.0))
      throw Error(ErrorKind::SchemaError, "scenario.grid: [t_min, t_max] must contain 0");
  }

  const json& checks = Reader::field(doc, "checks", "scenario");
  if (!checks.is_array()) throw Error(ErrorKind::SchemaError, "scenario.checks: expected a list");
  for (std::size_t k = 0; k < checks.size(); ++k) {
    const std::string path = "scenario.checks[" + std::to_string(k) + "]";
    if (!checks[k].is_string()) throw Error(ErrorKind::SchemaError, path + ": expected a string");
    const std::string name = checks[k].get<std::string>();
    if (!checks_for(sc.kind).count(name))
      throw Error(ErrorKind::SchemaError, path + ": unknown check '" + name + "' for kind " + sc.kind);
    sc.checks.push_back(name);
  }

  if (auto it = doc.find("output"); it != doc.end()) {
    if (!it->is_string()) throw Error(ErrorKind::SchemaError, "scenario.output: expected a string");
    sc.output = it->get<std::string>();
  }
  if (auto it = doc.find("tolerances"); it != doc.end()) {
    if (!it->is_object()) throw Error(ErrorKind::SchemaError, "scenario.tolerances: expected an object");
    for (const auto& [key, value] : it->items())
      sc.tolerances[key] = Reader::number(value, "scenario.tolerances." + key);
  }
  if (auto it = doc.find("wave"); it != doc.end()) {
    const std::string p = "scenario.wave";
    if (it->contains("x")) sc.wave.x = Reader::number((*it)["x"], p + ".x");
    if (it->contains("t")) sc.wave.t = Reader::number((*it)["t"], p + ".t");
    if (it->contains("h")) sc.wave.h = Reader::number((*it)["h"], p + ".h");
    if (it->contains("z")) sc.wave.z = Reader::complex((*it)["z"], p + ".z");
  }
  if (auto it = doc.find("workers"); it != doc.end()) {
    const int w = Reader::integer(*it, "scenario.workers");
    if (w < 1) throw Error(ErrorKind::SchemaError, "scenario.workers: must be positive");
    sc.workers = static_cast<unsigned>(w);
  }
  return sc;
}

inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::SchemaError, path + ": cannot open");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::SchemaError, path + ": " + e.what());
  }
  return parse_scenario(doc);
}

// ---------------------------------------------------------------------------
// Parameters

inline int read_kappa(const json& p, const std::string& path) {
  const int kappa = Reader::integer(Reader::field(p, "kappa", path), path + ".kappa");
  if (kappa != 0 && kappa != 1) throw Error(ErrorKind::SchemaError, path + ".kappa: must be 0 or 1");
  return kappa;
}

inline oracles::Example1Params example1_params(const json& p) {
  const std::string path = "scenario.parameters";
  return {Reader::complex(Reader::field(p, "a", path), path + ".a"),
          Reader::complex(Reader::field(p, "theta1", path), path + ".theta1"),
          Reader::complex(Reader::field(p, "theta2", path), path + ".theta2"), read_kappa(p, path)};
}

inline oracles::Example2Params example2_params(const json& p) {
  const std::string path = "scenario.parameters";
  return {Reader::complex(Reader::field(p, "a", path), path + ".a"),
          Reader::complex(Reader::field(p, "b", path), path + ".b"),
          Reader::complex(Reader::field(p, "c", path), path + ".c"), read_kappa(p, path)};
}

inline oracles::Example3Params example3_params(const json& p) {
  const std::string path = "scenario.parameters";
  return {Reader::complex(Reader::field(p, "a", path), path + ".a"),
          Reader::complex(Reader::field(p, "b1", path), path + ".b1"),
          Reader::complex(Reader::field(p, "b2", path), path + ".b2"),
          Reader::complex(Reader::field(p, "c", path), path + ".c"), read_kappa(p, path)};
}

inline ComplexMatrix scalar(Complex v) { return ComplexMatrix::Constant(1, 1, v); }

inline core::GbdtTriple triple_of(const oracles::Example1Params& p) {
  oracles::validate(p);
  return core::complete_triple(1 - 2 * p.kappa, scalar(p.a), scalar(p.theta1), scalar(p.theta2));
}

inline core::GbdtTriple triple_of(const oracles::Example2Params& p) {
  oracles::validate(p);
  ComplexMatrix a(2, 2), t1(2, 1), t2(2, 1);
  a << p.a, 1.0, 0.0, p.a;
  t1 << 0.0, p.b;
  t2 << 0.0, p.c;
  return core::complete_triple(1 - 2 * p.kappa, a, t1, t2);
}

inline core::GbdtTriple triple_of(const oracles::Example3Params& p) {
  oracles::validate(p);
  ComplexMatrix t1(1, 2);
  t1 << p.b1, p.b2;
  return core::complete_triple(1 - 2 * p.kappa, scalar(p.a), t1, scalar(p.c));
}

/// The triple of a gbdt scenario. Without S0 it is recovered from the identity;
/// with S0 the triple must pass validate_triple.
inline core::GbdtTriple gbdt_triple(const json& p) {
  const std::string path = "scenario.parameters";
  if (auto it = p.find("seed"); it != p.end()) {
    if (!it->is_string()) throw Error(ErrorKind::SchemaError, path + ".seed: expected a string");
    if (it->get<std::string>() != "zero")
      throw Error(ErrorKind::UnsupportedSeed, "only the zero seed solution is supported");
  }
  const int sigma = Reader::integer(Reader::field(p, "sigma", path), path + ".sigma");
  if (sigma != 1 && sigma != -1) throw Error(ErrorKind::SchemaError, path + ".sigma: must be +1 or -1");
  ComplexMatrix a = Reader::matrix(Reader::field(p, "A", path), path + ".A");
  ComplexMatrix t1 = Reader::matrix(Reader::field(p, "theta1", path), path + ".theta1");
  ComplexMatrix t2 = Reader::matrix(Reader::field(p, "theta2", path), path + ".theta2");
  if (!p.contains("S0")) return core::complete_triple(sigma, a, t1, t2);
  core::GbdtTriple tr{sigma, a, Reader::matrix(p["S0"], path + ".S0"), t1, t2};
  const auto rep = core::validate_triple(tr);
  if (!rep.passed) {
    std::string failed;
    for (const auto& it : rep.items)
      if (it.gating && !it.passed) failed += " " + it.name + "=" + std::to_string(it.value);
    throw Error(ErrorKind::DegenerateS, "triple rejected:" + failed);
  }
  return tr;
}

inline ag::ThetaParams theta_params(const json& p) {
  const std::string path = "scenario.parameters";
  auto cx = [&](const char* key) { return Reader::complex(Reader::field(p, key, path), path + "." + key); };
  ag::ThetaParams tp;
  tp.tau = cx("tau");
  tp.a_theta = cx("A");
  tp.b_theta = cx("B");
  tp.delta = cx("Delta");
  tp.e0 = Reader::number(Reader::field(p, "e0", path), path + ".e0");
  tp.c1 = cx("C1");
  tp.c2 = cx("C2");
  tp.chi = Reader::integer(Reader::field(p, "chi", path), path + ".chi");
  if (tp.chi != 0 && tp.chi != 1) throw Error(ErrorKind::SchemaError, path + ".chi: must be 0 or 1");
  if (p.contains("omega0_sq")) tp.omega0_sq = Reader::complex(p["omega0_sq"], path + ".omega0_sq");
  if (p.contains("branch_points")) {
    const json& e = p["branch_points"];
    if (!e.is_array() || e.size() != 4)
      throw Error(ErrorKind::SchemaError, path + ".branch_points: expected four [re, im] pairs");
    std::array<Complex, 4> pts{};
    for (int k = 0; k < 4; ++k)
      pts[k] = Reader::complex(e[k], path + ".branch_points[" + std::to_string(k) + "]");
    tp.branch_points = pts;
  }
  if (!(tp.tau.imag() > 0.0)) throw Error(ErrorKind::BadTau, "scenario.parameters.tau: Im(tau) must be positive");
  return tp;
}

// ---------------------------------------------------------------------------
// Output

inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::InvalidParameter, "cannot write " + path.string());
  out << text;
}

/// u.csv: x, t, then re/im of every entry of u in row-major order.
/// detS.csv: x, t, re, im, singular. Rows run over x fastest, then t.
inline void emit_field(const core::SolutionField& f, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const core::Grid& g = f.grid;
  std::string u = "x,t";
  for (Eigen::Index r = 0; r < f.m1; ++r)
    for (Eigen::Index c = 0; c < f.m2; ++c) {
      const std::string idx = std::to_string(r + 1) + std::to_string(c + 1);
      u += ",re_u" + idx + ",im_u" + idx;
    }
  u += "\n";
  std::string d = "x,t,re,im,singular\n";
  for (int j = 0; j < g.nt(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      const std::string xt = format_double(g.x()[i]) + "," + format_double(g.t()[j]);
      u += xt;
      for (Eigen::Index r = 0; r < f.m1; ++r)
        for (Eigen::Index c = 0; c < f.m2; ++c)
          u += "," + format_double(f.u[k](r, c).real()) + "," + format_double(f.u[k](r, c).imag());
      u += "\n";
      d += xt + "," + format_double(f.det_s[k].real()) + "," + format_double(f.det_s[k].imag()) + "," +
           (f.singular[k] ? "1" : "0") + "\n";
    }
  }
  write_file(dir / "u.csv", u);
  write_file(dir / "detS.csv", d);
}

// ---------------------------------------------------------------------------
// Checks

struct CheckResult {
  std::string check;
  std::vector<verify::ResidualReport> records;
  bool passed = false;
  ordered_json info;
};

/// Deterministic uniform numbers in [0, 1) from the 53 high bits of mt19937_64.
class UnitStream {
 public:
  explicit UnitStream(std::uint64_t seed) : rng_(seed) {}
  double next() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }
  double in(double lo, double hi) { return lo + (hi - lo) * next(); }

 private:
  std::mt19937_64 rng_;
};

inline constexpr double kDefaultPdeTolerance = 1e-2;
inline constexpr double kOracleTolerance = 1e-9;

/// Largest pointwise relative difference between the field and a closed form.
template <typename F>
verify::ResidualReport oracle_residual(const core::SolutionField& f, F&& closed_form, double tolerance) {
  verify::ResidualReport rep;
  rep.name = "oracle";
  rep.hx = f.grid.hx();
  rep.ht = f.grid.ht();
  rep.tolerance = tolerance;
  const core::Grid& g = f.grid;
  for (int j = 0; j < g.nt(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const std::size_t k = g.index(i, j);
      if (f.singular[k]) {
        ++rep.skipped;
        continue;
      }
      ComplexMatrix expected;
      try {
        expected = closed_form(g.x()[i], g.t()[j]);
      } catch (const SingularPointError&) {
        ++rep.skipped;
        continue;
      }
      for (Eigen::Index e = 0; e < expected.size(); ++e) {
        const double diff = std::abs(f.u[k](e) - expected(e));
        const double ref = std::abs(expected(e));
        rep.residual = std::max(rep.residual, ref > 0.0 ? diff / ref : diff);
      }
      ++rep.evaluated;
    }
  }
  rep.passed = rep.residual <= tolerance;
  return rep;
}

inline bool all_passed(const std::vector<verify::ResidualReport>& r) {
  return std::all_of(r.begin(), r.end(), [](const auto& x) { return x.passed; });
}

struct FieldRun {
  core::GbdtTriple triple;
  std::function<ComplexMatrix(double, double)> oracle;  // empty for the gbdt kind
};

inline std::vector<CheckResult> run_field_checks(const Scenario& sc, const FieldRun& run, const core::SolutionField& f,
                                                 int refine) {
  const core::GbdtTriple& tr = run.triple;
  const core::Grid& g = f.grid;
  std::vector<CheckResult> out;
  for (const std::string& name : sc.checks) {
    CheckResult cr;
    cr.check = name;
    if (name == "pde") {
      const double tol = sc.tolerance("pde", kDefaultPdeTolerance);
      if (refine > 0) {
        const auto fine = core::assemble_field(tr, g.refined(refine), {sc.workers});
        cr.records = verify::nnls_convergence(fine, tr.sigma, refine, tol);
        cr.records.front().passed = true;  // the coarsest level carries no order
        cr.passed = std::all_of(cr.records.begin() + 1, cr.records.end(), [](const auto& r) { return r.passed; });
      } else {
        cr.records.push_back(verify::nnls_residual(f, tr.sigma, tol));
        cr.passed = cr.records.back().passed;
      }
      cr.info["skipped_stencils"] = cr.records.back().skipped;
    } else if (name == "identity") {
      cr.records.push_back(verify::identity_residual(tr, f, sc.tolerance("identity", verify::kAlgebraicTolerance)));
    } else if (name == "mirror") {
      cr.records.push_back(verify::hermitian_mirror_residual(f, sc.tolerance("mirror", verify::kAlgebraicTolerance)));
    } else if (name == "reduction") {
      cr.records.push_back(
          verify::reduction_residual(f, tr.sigma, sc.tolerance("reduction", verify::kAlgebraicTolerance)));
    } else if (name == "oracle") {
      cr.records.push_back(oracle_residual(f, run.oracle, sc.tolerance("oracle", kOracleTolerance)));
    } else if (name == "darboux") {
      UnitStream rng(0x5eed'da4b'0000'0001ULL);
      std::vector<verify::SpectralPoint> pts;
      const double x_max = g.x().back(), t_lo = g.t().front(), t_hi = g.t().back();
      for (int k = 0; k < 50; ++k) {
        const double x = rng.in(-x_max, x_max), t = rng.in(t_lo, t_hi);
        const double zr = rng.in(-2.0, 2.0), zi = rng.in(-2.0, 2.0);
        pts.push_back({x, t, {zr, zi}});
      }
      cr.records.push_back(verify::darboux_residual(tr, pts, sc.tolerance("darboux", core::kDarbouxTolerance)));
      cr.info["skipped_points"] = cr.records.back().skipped;
    } else if (name == "wave") {
      const auto [wx, wt] = verify::wave_ode_residual(tr, sc.wave.x, sc.wave.t, sc.wave.z, sc.wave.h);
      cr.records = {wx, wt};
    } else if (name == "routes") {
      UnitStream rng(0x5eed'0000'0000'0002ULL);
      std::vector<std::pair<double, double>> pts;
      const double x_max = g.x().back(), t_lo = g.t().front(), t_hi = g.t().back();
      for (int k = 0; k < 8; ++k) {
        const double x = rng.in(-x_max, x_max);
        pts.emplace_back(x, rng.in(t_lo, t_hi));
      }
      const int steps = static_cast<int>(sc.tolerance("routes_steps", 400));
      cr.records.push_back(verify::route_residual(tr, pts, steps, sc.tolerance("routes", verify::kRouteTolerance)));
    }
    if (name != "pde") cr.passed = all_passed(cr.records);
    out.push_back(std::move(cr));
  }
  return out;
}

struct ThetaSamples {
  std::vector<double> x;
  std::vector<Complex> v1, v2, den;
  std::vector<std::uint8_t> zero;
};

inline ThetaSamples sample_theta(const ag::ThetaParams& p, const core::Grid& g) {
  ThetaSamples s;
  s.x = g.x();
  for (double x : s.x) {
    const Complex z = p.a_theta + p.b_theta * x;
    const ag::ThetaSum th = ag::theta_series(z, p.tau);
    s.den.push_back(th.value);
    const bool zero = std::abs(th.value) <= 1e-13 * th.abs_sum;
    s.zero.push_back(zero ? 1 : 0);
    if (zero) {
      const double nan = std::numeric_limits<double>::quiet_NaN();
      s.v1.emplace_back(nan, nan);
      s.v2.emplace_back(nan, nan);
    } else {
      const auto [v1, v2] = ag::v_from_theta(p, x);
      s.v1.push_back(v1);
      s.v2.push_back(v2);
    }
  }
  return s;
}

inline std::vector<CheckResult> run_theta_checks(const Scenario& sc, const ag::ThetaParams& p,
                                                 const core::Grid& base, int refine) {
  std::vector<CheckResult> out;
  const ag::ConstraintReport cons = ag::check_nnls_constraints(p, -sc.grid.x_max, sc.grid.x_max);
  const std::string path = "scenario.parameters";
  auto akns = [&]() -> ag::AknsConstants {
    const json& q = sc.parameters;
    return {Reader::complex(Reader::field(q, "c1", path), path + ".c1"),
            Reader::complex(Reader::field(q, "c2", path), path + ".c2")};
  };
  // Order estimates use every refinement level at the base nodes.
  auto sweep = [&](auto&& residual_at) {
    std::vector<verify::ResidualReport> recs;
    const core::Grid fine = base.refined(refine);
    const ThetaSamples s = sample_theta(p, fine);
    for (const auto z : s.zero)
      if (z) throw Error(ErrorKind::ThetaZero, "theta vanishes on the sample grid");
    for (int l = refine; l >= 0; --l) {
      verify::ResidualReport r = residual_at(s, fine.hx(), verify::StencilPlan{1 << l, 1 << refine});
      if (!recs.empty()) {
        r.order = verify::estimate_order(recs.back(), r);
        r.passed = r.passed || verify::order_near_two(*r.order);
      }
      recs.push_back(std::move(r));
    }
    if (refine > 0) recs.front().passed = true;
    return recs;
  };

  for (const std::string& name : sc.checks) {
    CheckResult cr;
    cr.check = name;
    if (name == "constraints") {
      for (const auto& item : cons.items) {
        verify::ResidualReport r;
        r.name = "constraint_" + item.name;
        r.residual = item.value;
        r.tolerance = item.tolerance;
        r.passed = item.passed;
        cr.records.push_back(r);
      }
      cr.passed = cons.passed;
      cr.info["ratio"] = {cons.ratio.real(), cons.ratio.imag()};
      cr.info["implied_sign"] = cons.implied_sign ? ordered_json(*cons.implied_sign) : ordered_json(nullptr);
    } else if (name == "reduction") {
      if (!cons.implied_sign) {
        verify::ResidualReport r;
        r.name = "reduction";
        r.residual = std::numeric_limits<double>::infinity();
        cr.records.push_back(r);
        cr.info["note"] = "C2/conj(C1) does not match the reduction ratio up to a sign";
      } else {
        cr.records.push_back(ag::theta_reduction_residual(p, base.x(), *cons.implied_sign,
                                                          sc.tolerance("reduction", ag::kRatioTolerance)));
      }
      cr.passed = all_passed(cr.records);
    } else if (name == "sakns") {
      const ag::AknsConstants k = akns();
      const double tol = sc.tolerance("sakns", kDefaultPdeTolerance);
      cr.records = sweep([&](const ThetaSamples& s, double h, verify::StencilPlan plan) {
        return ag::sakns_residual(s.v1, s.v2, k, h, tol, plan);
      });
      cr.passed = all_passed(cr.records);
    } else if (name == "snnls") {
      const ag::AknsConstants k = akns();
      const double tol = sc.tolerance("snnls", kDefaultPdeTolerance);
      std::optional<int> vanishing;
      for (int sign : {1, -1}) {
        std::vector<verify::ResidualReport> recs = sweep([&](const ThetaSamples& s, double h, verify::StencilPlan plan) {
          const ag::NnlsSamples u = ag::lemma61_inverse(s.v1, s.x, p.e0, k, sign);
          return ag::snnls_residual(u.u, u.constants, h, tol, plan);
        });
        if (all_passed(recs) && !vanishing) vanishing = sign;
        for (auto& r : recs) cr.records.push_back(std::move(r));
      }
      cr.passed = vanishing.has_value();
      cr.info["vanishing_sign"] = vanishing ? ordered_json(*vanishing) : ordered_json(nullptr);
    }
    out.push_back(std::move(cr));
  }
  return out;
}

inline void emit_theta(const ag::ThetaParams& p, const core::Grid& g, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const ThetaSamples s = sample_theta(p, g);
  std::string u = "x,t,re_u11,im_u11\n";
  std::string d = "x,t,re,im,singular\n";
  for (std::size_t i = 0; i < s.x.size(); ++i) {
    const Complex uv = s.v1[i] * std::exp(-kI * p.e0 * s.x[i]);
    const std::string xt = format_double(s.x[i]) + "," + format_double(0.0);
    u += xt + "," + format_double(uv.real()) + "," + format_double(uv.imag()) + "\n";
    d += xt + "," + format_double(s.den[i].real()) + "," + format_double(s.den[i].imag()) + "," +
         (s.zero[i] ? "1" : "0") + "\n";
  }
  write_file(dir / "u.csv", u);
  write_file(dir / "detS.csv", d);
}

// ---------------------------------------------------------------------------
// Driver

struct RunOptions {
  std::string out_dir;  ///< overrides the scenario's output when non-empty
  int refine = 0;
};

inline core::Grid schema_grid(const GridSpec& spec) {
  try {
    return core::Grid::symmetric(spec.x_max, spec.nx, spec.t_min, spec.t_max, spec.nt);
  } catch (const Error& e) {
    throw Error(ErrorKind::SchemaError, std::string("scenario.grid: ") + e.what());
  }
}

inline ordered_json grid_json(const core::Grid& g) {
  ordered_json j;
  j["nx"] = g.nx();
  j["nt"] = g.nt();
  j["hx"] = g.hx();
  j["ht"] = g.ht();
  return j;
}

inline int run_loaded(const Scenario& sc, const RunOptions& opts, std::ostream& log) {
  if (opts.refine < 0 || opts.refine > 6) throw Error(ErrorKind::SchemaError, "--refine must lie in [0, 6]");
  const std::filesystem::path dir = !opts.out_dir.empty() ? opts.out_dir : (sc.output.empty() ? "." : sc.output);

  ordered_json report;
  report["kind"] = sc.kind;
  report["refine"] = opts.refine;
  std::vector<CheckResult> results;

  if (sc.kind == "theta") {
    const ag::ThetaParams p = theta_params(sc.parameters);
    ag::validate(p);
    const int half = (sc.grid.nx - 1) / 2;
    const core::Grid g = core::Grid::from_steps(half > 0 ? sc.grid.x_max / half : 0.0, half, 0.0, 0, 0);
    emit_theta(p, g, dir);
    report["grid"] = grid_json(g);
    if (p.branch_points) {
      const ag::BranchData b = ag::classify_branch_points(*p.branch_points);
      const ag::AknsConstants k = ag::akns_constants(b);
      report["branch_case"] = std::string(ag::to_string(b.label));
      report["akns_constants_of_branch_points"] = {{"c1", {k.c1.real(), k.c1.imag()}},
                                                   {"c2", {k.c2.real(), k.c2.imag()}}};
    }
    results = run_theta_checks(sc, p, g, opts.refine);
  } else {
    FieldRun run;
    if (sc.kind == "gbdt") {
      run.triple = gbdt_triple(sc.parameters);
    } else if (sc.kind == "example1") {
      const auto p = example1_params(sc.parameters);
      run.triple = triple_of(p);
      run.oracle = [p](double x, double t) { return scalar(oracles::ex1_u(p, x, t)); };
    } else if (sc.kind == "example2") {
      const auto p = example2_params(sc.parameters);
      run.triple = triple_of(p);
      run.oracle = [p](double x, double t) { return scalar(oracles::ex2_u(p, x, t)); };
    } else {
      const auto p = example3_params(sc.parameters);
      run.triple = triple_of(p);
      run.oracle = [p](double x, double t) {
        const auto v = oracles::ex3_u(p, x, t);
        ComplexMatrix m(2, 1);
        m << v[0], v[1];
        return m;
      };
    }
    if (sc.kind == "gbdt" && std::count(sc.checks.begin(), sc.checks.end(), "oracle"))
      throw Error(ErrorKind::SchemaError, "scenario.checks: oracle needs an example kind");
    const core::Grid g = schema_grid(sc.grid);
    const core::SolutionField f = core::assemble_field(run.triple, g, {sc.workers});
    emit_field(f, dir);
    report["grid"] = grid_json(g);
    report["sigma"] = run.triple.sigma;
    report["singular_points"] = f.singular_count();
    results = run_field_checks(sc, run, f, opts.refine);
  }

  bool passed = true;
  ordered_json checks = ordered_json::array();
  for (const CheckResult& cr : results) {
    ordered_json c;
    c["check"] = cr.check;
    c["passed"] = cr.passed;
    ordered_json recs = ordered_json::array();
    for (const auto& r : cr.records) recs.push_back(verify::to_json(r));
    c["records"] = recs;
    if (!cr.info.is_null()) c["info"] = cr.info;
    checks.push_back(c);
    passed = passed && cr.passed;
    log << (cr.passed ? "PASS " : "FAIL ") << cr.check;
    for (const auto& r : cr.records) log << "  " << r.name << "=" << format_double(r.residual);
    log << "\n";
  }
  report["checks"] = checks;
  report["passed"] = passed;
  write_file(dir / "report.json", report.dump(2) + "\n");
  return passed ? kPassed : kCheckFailed;
}

/// Runs a scenario file and maps failures to exit codes, printing diagnostics to `err`.
inline int run_scenario(const std::string& path, const RunOptions& opts, std::ostream& log, std::ostream& err) {
  try {
    const Scenario sc = load_scenario(path);
    return run_loaded(sc, opts, log);
  } catch (const Error& e) {
    const bool schema = e.kind() == ErrorKind::SchemaError || e.kind() == ErrorKind::BadTau;
    err << (schema ? "schema error: " : "rejected: ") << e.what() << "\n";
    return schema ? kSchema : kRejected;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "rejected: " << e.what() << "\n";
    return kRejected;
  }
}

}  // namespace nnls::cli
