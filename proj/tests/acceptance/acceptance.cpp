// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fails.
// Every criterion writes its numbers to acceptance_results/pass1/cN.json; criterion 10
// repeats the whole run into pass2 and repeats a set of CLI commands, comparing bytes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

#include "cuspsteklov/assembly.hpp"
#include "cuspsteklov/linear_eigen.hpp"
#include "cuspsteklov/p_solver.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace cusp;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
  Json record;
};

std::string num(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", x);
  return buf;
}

linear::LadderSpec cusp_ladder(double alpha, int levels, fem::SpaceOptions opt = {}) {
  linear::LadderSpec s;
  s.domain.gamma = geometry::CuspProfile::power(alpha);
  s.h = 0.2;
  s.levels = levels;
  s.space = opt;
  return s;
}

fem::FemSpace finest(const linear::LadderSpec& s) {
  auto ladder = linear::build_ladder(s);
  return linear::make_space(s, std::move(ladder.back()));
}

fem::FemSpace disk_level3() {
  linear::LadderSpec s;
  s.disk = true;
  s.radius = 1.0;
  s.h = 0.2;
  s.levels = 4;
  s.space.weight_mode = fem::WeightMode::Unweighted;
  return finest(s);
}

// I_n(x) by its power series, summed until the terms vanish.
double bessel_i(int n, double x) {
  double term = 1.0;
  for (int k = 1; k <= n; ++k) term *= x / 2.0 / k;
  double sum = 0.0;
  for (int m = 0; term > 1e-20 * sum || m == 0; ++m) {
    sum += term;
    term *= (x / 2.0) * (x / 2.0) / ((m + 1.0) * (m + 1.0 + n));
  }
  return sum;
}

// Dirichlet energy as sum over edges of -K_ij (u_i - u_j)^2; the assembled diagonal is
// formed by cancellation and cannot resolve energies below eps * max|K_ij|.
double difference_energy(const fem::FemSpace& V, const fem::FemFunction& u) {
  const SparseSym K = fem::stiffness(V);
  double e = 0.0;
  for (std::size_t i = 0; i < K.size(); ++i)
    for (std::size_t k = K.row_ptr()[i]; k < K.row_ptr()[i + 1]; ++k) {
      const auto j = static_cast<std::size_t>(K.col_idx()[k]);
      if (j != i) e -= K.values()[k] * (u[i] - u[j]) * (u[i] - u[j]);
    }
  return 0.5 * e;
}

Outcome c1() {
  Outcome o;
  const auto V = disk_level3();
  const auto s = linear::steklov_spectrum(V, fem::Problem::Harmonic, 7, false);
  const double want[] = {0, 1, 1, 2, 2, 3, 3};
  Json lam = Json::array();
  double worst = 0.0;
  for (std::size_t i = 0; i < s.pairs.size(); ++i) {
    lam.push_back(s.pairs[i].lambda);
    if (i > 0) worst = std::max(worst, std::abs(s.pairs[i].lambda - want[i]) / want[i]);
  }
  o.pass = s.pairs.size() == 7 && std::abs(s.pairs[0].lambda) <= 1e-8 && worst <= 0.01;
  o.detail = "vertices=" + std::to_string(V.size()) + " lambda0=" + num(s.pairs[0].lambda) +
             " max_rel_err=" + num(worst);
  o.record = {{"vertices", V.size()}, {"eigenvalues", lam}, {"max_rel_err", worst}};
  return o;
}

Outcome c2() {
  Outcome o;
  const auto V = disk_level3();
  const auto s = linear::steklov_spectrum(V, fem::Problem::Schrodinger, 1, false);
  const double oracle = bessel_i(1, 1.0) / bessel_i(0, 1.0);
  const double err = std::abs(s.pairs[0].lambda - oracle) / oracle;
  o.pass = err <= 0.01;
  o.detail = "lambda0=" + num(s.pairs[0].lambda) + " oracle=" + num(oracle) + " rel_err=" + num(err);
  o.record = {{"lambda0", s.pairs[0].lambda}, {"oracle", oracle}, {"rel_err", err}};
  return o;
}

Outcome c3() {
  Outcome o;
  double worst_ratio = 0.0, worst_spread = 0.0, worst_rq = 0.0;
  Json rows = Json::array();
  for (double a : {1.5, 2.0, 3.0}) {
    const auto spec = cusp_ladder(a, 3);
    auto ladder = linear::build_ladder(spec);
    for (std::size_t l = 0; l < ladder.size(); ++l) {
      const auto V = linear::make_space(spec, std::move(ladder[l]));
      const auto s = linear::steklov_spectrum(V, fem::Problem::Harmonic, 2, false);
      const double ratio = std::abs(s.pairs[0].lambda) / s.pairs[1].lambda;
      // constant eigenfunction: flat volume field and zero quotient
      const auto& v = s.pairs[0].volume;
      double lo = v[0], hi = v[0], big = 0.0;
      for (double x : v) lo = std::min(lo, x), hi = std::max(hi, x), big = std::max(big, std::abs(x));
      const double spread = (hi - lo) / big;
      const double rq = difference_energy(V, v) / fem::boundary_weighted_mass(V).quad(v);
      worst_ratio = std::max(worst_ratio, ratio);
      worst_spread = std::max(worst_spread, spread);
      worst_rq = std::max(worst_rq, std::abs(rq) / s.pairs[1].lambda);
      o.pass = o.pass && ratio <= 1e-9 && spread <= 1e-12 && std::abs(rq) <= 1e-9 * s.pairs[1].lambda &&
               s.pairs[1].lambda > 0.0;
      rows.push_back({{"alpha", a}, {"level", l}, {"lambda0", s.pairs[0].lambda}, {"lambda1", s.pairs[1].lambda},
                      {"constant_quotient", rq}, {"spread", spread}});
    }
  }
  o.detail = "meshes=" + std::to_string(rows.size()) + " max lambda0/lambda1=" + num(worst_ratio) +
             " max eigenfunction spread=" + num(worst_spread) + " max R(v0)/lambda1=" + num(worst_rq);
  o.record = rows;
  return o;
}

Outcome c4() {
  Outcome o;
  Json rows = Json::array();
  double inc = 0.0, over = 0.0;
  for (double a : {1.5, 2.0, 3.0}) {
    const auto V = finest(cusp_ladder(a, 3));
    for (double p : {1.5, 2.0, 3.0}) {
      const double tol = psolve::default_outer_tol(p);
      const auto tr = psolve::inverse_iteration(V, p, V.constant(1.0), {}, tol);
      const auto au = psolve::audit_trace(tr);
      inc = std::max(inc, au.max_mu_increase);
      over = std::max(over, au.max_sobolev_over_mu);
      const bool ok = tr.converged && au.max_mu_increase <= 1e-12 && au.max_sobolev_over_mu <= 1e-12 &&
                      au.final_gap <= tol;
      if (!ok) o.detail += " [fail alpha=" + num(a) + " p=" + num(p) + "]";
      o.pass = o.pass && ok;
      rows.push_back({{"alpha", a}, {"p", p}, {"mu", tr.mu}, {"steps", tr.steps.size()},
                      {"max_mu_increase", au.max_mu_increase}, {"max_sobolev_over_mu", au.max_sobolev_over_mu},
                      {"final_gap", au.final_gap}, {"outer_tol", tol}, {"converged", tr.converged}});
    }
  }
  o.detail = "runs=9 level=2 max mu increase=" + num(inc) + " max(sobolev-mu)=" + num(over) + o.detail;
  o.record = rows;
  return o;
}

Outcome c5() {
  Outcome o;
  fem::SpaceOptions four;
  four.boundary_mass_points = 4;
  const auto V = finest(cusp_ladder(2.0, 3, four));
  const auto tr = psolve::inverse_iteration(V, 2.0, V.constant(1.0), {}, 1e-10);
  const auto s = linear::steklov_spectrum(V, fem::Problem::Schrodinger, 1, false);
  const double lam = s.pairs[0].lambda;
  const double err = std::abs(tr.mu - lam) / lam;
  o.pass = tr.converged && err <= 1e-6;
  o.detail = "mu=" + num(tr.mu) + " pencil=" + num(lam) + " rel_diff=" + num(err);
  o.record = {{"mu", tr.mu}, {"pencil_lambda0", lam}, {"rel_diff", err}, {"vertices", V.size()}};
  return o;
}

Outcome c6() {
  Outcome o;
  Json rows = Json::array();
  double hom = 0.0, ineq = 0.0, eq = 0.0;
  for (double a : {1.5, 2.0, 3.0}) {
    const auto V = finest(cusp_ladder(a, 2));
    for (double p : {1.5, 2.0, 3.0}) {
      const auto r = fem::operator_properties(V, p, 200, 11);
      const double h = std::max(r.h1_homogeneity, r.h2_homogeneity);
      const double i = std::max({r.h3_holder, r.h4_holder, r.monotonicity});
      const double e = std::max(r.h3_equality, r.h4_equality);
      hom = std::max(hom, h), ineq = std::max(ineq, i), eq = std::max(eq, e);
      o.pass = o.pass && r.pairs == 200 && h <= 1e-13 && i <= 1e-10 && e <= 1e-10;
      rows.push_back({{"alpha", a}, {"p", p}, {"homogeneity", h}, {"inequalities", i}, {"equality", e}});
    }
  }
  o.detail = "homogeneity=" + num(hom) + " holder/monotonicity=" + num(ineq) + " equality=" + num(eq);
  o.record = rows;
  return o;
}

Outcome c7() {
  Outcome o;
  const auto V = finest(cusp_ladder(2.0, 2));
  Json rows = Json::array();
  double viol = -1e300, self = 0.0;
  for (auto problem : {fem::Problem::Harmonic, fem::Problem::Schrodinger}) {
    const auto s = linear::steklov_spectrum(V, problem, 5, false);
    const auto r = linear::minmax_check(s, linear::system_matrix(V, problem), fem::boundary_weighted_mass(V), 40,
                                        5, 5);
    viol = std::max(viol, r.max_violation);
    self = std::max(self, r.max_self_error);
    o.pass = o.pass && r.samples > 0 && r.max_violation <= 1e-9 && r.max_self_error <= 1e-10;
    rows.push_back({{"problem", fem::to_string(problem)}, {"samples", r.samples},
                    {"max_violation", r.max_violation}, {"max_self_error", r.max_self_error}});
  }
  o.detail = "max violation=" + num(viol) + " max |R(v_n)-lambda_n|=" + num(self);
  o.record = rows;
  return o;
}

Outcome c8() {
  Outcome o;
  const auto w = linear::convergence_study(cusp_ladder(3.0, 4), fem::Problem::Harmonic, 2);
  fem::SpaceOptions flat;
  flat.weight_mode = fem::WeightMode::Unweighted;
  const auto u = linear::convergence_study(cusp_ladder(3.0, 4, flat), fem::Problem::Harmonic, 2);
  const double last = w.rel_delta.back()[1];
  bool decreasing = true;
  Json wl = Json::array(), ul = Json::array();
  for (std::size_t l = 0; l < u.lambda.size(); ++l) {
    wl.push_back(w.lambda[l][1]);
    ul.push_back(u.lambda[l][1]);
    if (l > 0) decreasing = decreasing && u.lambda[l][1] < u.lambda[l - 1][1];
  }
  o.pass = w.lambda.size() == 4 && u.lambda.size() == 4 && std::abs(last) <= 0.05 && decreasing;
  o.detail = "weighted lambda1 last rel delta=" + num(last) + " unweighted lambda1 " +
             (decreasing ? "strictly decreasing: " : "NOT strictly decreasing: ") + ul.dump();
  o.record = {{"weighted_lambda1", wl}, {"unweighted_lambda1", ul}, {"weighted_last_rel_delta", last}};
  return o;
}

Outcome c9() {
  Outcome o;
  Json rows = Json::array();
  double ratio = 0.0, gap = 0.0;
  for (double p : {1.5, 2.0, 3.0}) {
    const auto V = finest(cusp_ladder(2.0, 2));
    const auto tr = psolve::inverse_iteration(V, p, V.constant(1.0), {}, psolve::default_outer_tol(p));
    if (!tr.converged) {
      o.pass = false;
      continue;
    }
    const auto r = psolve::trace_constant(V, tr, 100, 9);
    ratio = std::max(ratio, r.max_ratio);
    gap = std::max(gap, r.equality_gap);
    o.pass = o.pass && r.samples == 100 && r.max_ratio <= 1.0 + 1e-8 && r.equality_gap <= 1e-8;
    rows.push_back({{"p", p}, {"S", r.S}, {"max_ratio", r.max_ratio}, {"equality_gap", r.equality_gap}});
  }
  o.detail = "max ratio=" + num(ratio) + " equality gap=" + num(gap);
  o.record = rows;
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit_seconds;  // 0: no runtime limit
  std::function<Outcome()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {1, "disk Steklov oracle", 120, c1},
      {2, "disk Schrodinger oracle", 120, c2},
      {3, "harmonic lambda0 = 0, constant eigenfunction", 0, c3},
      {4, "inverse iteration monotonicity", 600, c4},
      {5, "p = 2 cross-oracle", 0, c5},
      {6, "operator properties", 0, c6},
      {7, "min-max", 0, c7},
      {8, "weighted vs unweighted cusp ladder", 900, c8},
      {9, "trace inequality", 0, c9},
  };
  return all;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p, std::ios::binary) << text;
}

// Runs every criterion once, writing its record into dir. With report set, prints the
// PASS/FAIL lines. Returns whether all passed.
bool run_pass(const fs::path& dir, bool report) {
  bool all = true;
  for (const auto& c : criteria()) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("exception: ") + e.what();
      o.record = {{"exception", e.what()}};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_seconds == 0 || secs <= c.limit_seconds;
    write(dir / ("c" + std::to_string(c.id) + ".json"), o.record.dump(2) + "\n");
    if (report) {
      std::string timing = " time=" + num(secs) + "s";
      if (c.limit_seconds > 0) timing += " (limit " + num(c.limit_seconds) + "s)";
      std::cout << (o.pass && in_time ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name
                << "): " << o.detail << timing << std::endl;
    }
    all = all && o.pass && in_time;
  }
  return all;
}

// Files under root, relative, in sorted order.
std::vector<fs::path> listing(const fs::path& root) {
  std::vector<fs::path> out;
  for (const auto& e : fs::recursive_directory_iterator(root))
    if (e.is_regular_file()) out.push_back(fs::relative(e.path(), root));
  std::sort(out.begin(), out.end());
  return out;
}

// Manifests carry wall-clock timing; everything else must match byte for byte.
std::string comparable(const fs::path& p) {
  const std::string text = slurp(p);
  if (p.filename().string().find("manifest.json") == std::string::npos) return text;
  Json j = Json::parse(text);
  j.erase("timing_seconds");
  return j.dump();
}

bool same_tree(const fs::path& a, const fs::path& b, std::string& why) {
  const auto la = listing(a), lb = listing(b);
  if (la != lb) {
    why = "different file sets under " + a.string() + " and " + b.string();
    return false;
  }
  for (const auto& f : la)
    if (comparable(a / f) != comparable(b / f)) {
      why = "differs: " + f.string();
      return false;
    }
  return true;
}

const std::vector<std::string> kCliRuns = {
    "mesh --alpha 3 --hmax 0.2 --out {}/mesh.txt",
    "spectrum --oracle-disk --unweighted --levels 4 --k 7 --out {}/spectrum_disk",
    "spectrum --alpha 2 --problem schrodinger --constrained --levels 2 --k 4 --out {}/spectrum_cusp",
    "principal --alpha 2 --p 1.5 --w0 random --seed 7 --levels 2 --out {}/principal",
    "convergence --alpha 3 --levels 3 --k 2 --out {}/convergence",
    "check --alpha 2 --seed 7 --pairs 50 --trials 10 --out {}/check",
};

// Runs the CLI set in a fixed directory (paths are recorded in manifests), then moves it.
bool cli_round(const fs::path& work, const fs::path& dest) {
  fs::remove_all(work);
  fs::create_directories(work);
  const fs::path& dir = work;
  for (std::string cmd : kCliRuns) {
    const auto at = cmd.find("{}");
    cmd.replace(at, 2, dir.string());
    const std::string line = std::string("\"") + CUSPSTEKLOV_EXE + "\" " + cmd + " --threads 1 --log-level quiet > \"" +
                             (dir / "stdout.log").string() + "\" 2>&1";
    if (std::system(line.c_str()) != 0) {
      std::cerr << "command failed: " << line << "\n";
      return false;
    }
    fs::remove(dir / "stdout.log");
  }
  fs::rename(work, dest);
  return true;
}

}  // namespace

int main() {
  const fs::path root = fs::current_path() / "acceptance_results";
  fs::remove_all(root);
  bool all = run_pass(root / "pass1", true);

  const auto t0 = std::chrono::steady_clock::now();
  std::string why;
  bool det = true;
  run_pass(root / "pass2", false);
  det = same_tree(root / "pass1", root / "pass2", why);
  if (det) {
    det = cli_round(root / "cli", root / "cli_a") && cli_round(root / "cli", root / "cli_b");
    if (!det) why = "a CLI command failed";
    else det = same_tree(root / "cli_a", root / "cli_b", why);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << (det ? "PASS" : "FAIL") << " criterion 10 (determinism): "
            << (det ? "library results and " + std::to_string(listing(root / "cli_a").size()) +
                          " CLI result files byte-identical on rerun"
                    : why)
            << " time=" << num(secs) << "s" << std::endl;
  all = all && det;
  return all ? 0 : 1;
}
