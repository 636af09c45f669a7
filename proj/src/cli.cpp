#include "cuspsteklov/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/linear_eigen.hpp"
#include "cuspsteklov/p_solver.hpp"

namespace cusp::cli {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

class HelpRequested : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Property-suite failure: the report is written, the first failing property is named.
class PropertyFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-convergence after the partial results were written.
class ReportedNonConvergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

const char* const kCommands[] = {"mesh", "spectrum", "principal", "convergence", "check"};

Json defaults_json() {
  const RunConfig d;
  Json j;
  j["alpha"] = d.alpha;
  j["gamma_file"] = d.gamma_file;
  j["tip_cutoff"] = d.tip_cutoff;
  j["p"] = d.p;
  j["k"] = d.k;
  j["levels"] = d.levels;
  j["hmax"] = d.hmax;
  j["problem"] = d.problem;
  j["constrained"] = d.constrained;
  j["weighted"] = d.weighted;
  j["oracle_disk"] = d.oracle_disk;
  j["radius"] = d.radius;
  j["w0"] = d.w0;
  j["outer_tol"] = nullptr;
  j["max_outer"] = d.max_outer;
  j["seed"] = d.seed;
  j["threads"] = d.threads;
  j["out"] = d.out;
  j["log_level"] = d.log_level;
  j["perturb_weight"] = d.perturb_weight;
  j["pairs"] = d.pairs;
  j["trials"] = d.trials;
  return j;
}

Json config_to_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["alpha"] = c.alpha;
  j["gamma_file"] = c.gamma_file;
  j["tip_cutoff"] = c.tip_cutoff;
  j["p"] = c.p;
  j["k"] = c.k;
  j["levels"] = c.levels;
  j["hmax"] = c.hmax;
  j["problem"] = c.problem;
  j["constrained"] = c.constrained;
  j["weighted"] = c.weighted;
  j["oracle_disk"] = c.oracle_disk;
  j["radius"] = c.radius;
  j["w0"] = c.w0;
  j["outer_tol"] = c.outer_tol ? Json(*c.outer_tol) : Json(nullptr);
  j["max_outer"] = c.max_outer;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  j["log_level"] = c.log_level;
  j["perturb_weight"] = c.perturb_weight;
  j["pairs"] = c.pairs;
  j["trials"] = c.trials;
  return j;
}

template <typename T>
T take(const Json& j, const char* key) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw UsageError(std::string("configuration key '") + key + "' has the wrong type");
  }
}

RunConfig config_from_json(const Json& j, const std::string& command) {
  RunConfig c;
  c.command = command;
  c.alpha = take<double>(j, "alpha");
  c.gamma_file = take<std::string>(j, "gamma_file");
  c.tip_cutoff = take<double>(j, "tip_cutoff");
  c.p = take<double>(j, "p");
  c.k = take<int>(j, "k");
  c.levels = take<int>(j, "levels");
  c.hmax = take<double>(j, "hmax");
  c.problem = take<std::string>(j, "problem");
  c.constrained = take<bool>(j, "constrained");
  c.weighted = take<bool>(j, "weighted");
  c.oracle_disk = take<bool>(j, "oracle_disk");
  c.radius = take<double>(j, "radius");
  c.w0 = take<std::string>(j, "w0");
  if (!j.at("outer_tol").is_null()) c.outer_tol = take<double>(j, "outer_tol");
  c.max_outer = take<int>(j, "max_outer");
  c.seed = take<std::uint64_t>(j, "seed");
  c.threads = take<int>(j, "threads");
  c.out = take<std::string>(j, "out");
  c.log_level = take<std::string>(j, "log_level");
  c.perturb_weight = take<bool>(j, "perturb_weight");
  c.pairs = take<int>(j, "pairs");
  c.trials = take<int>(j, "trials");
  return c;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void validate(RunConfig& c) {
  auto bad = [](const std::string& m) { throw UsageError(m); };
  if (c.gamma_file.empty() && !c.oracle_disk && !(c.alpha > 1.0 && std::isfinite(c.alpha)))
    bad("alpha must satisfy 1 < alpha < infinity (got " + fmt(c.alpha) + ")");
  if (!(c.p > 1.0 && std::isfinite(c.p))) bad("p must satisfy 1 < p < infinity (got " + fmt(c.p) + ")");
  if (c.p < 1.1 || c.p > 6.0) bad("p must lie in [1.1, 6] (got " + fmt(c.p) + ")");
  if (c.k < 1) bad("k must be at least 1");
  if (c.levels < 0) bad("levels must be positive");
  if (c.levels == 0) c.levels = c.command == "convergence" ? 3 : 1;
  if (c.command == "convergence" && c.levels < 2) bad("a convergence study needs at least 2 levels");
  if (!(c.hmax > 0.0 && std::isfinite(c.hmax))) bad("hmax must be positive");
  if (!(c.radius > 0.0 && std::isfinite(c.radius))) bad("radius must be positive");
  if (!(c.tip_cutoff > 0.0 && c.tip_cutoff < 0.5)) bad("tip_cutoff must lie in (0, 0.5)");
  if (c.problem != "harmonic" && c.problem != "schrodinger")
    bad("problem must be harmonic or schrodinger");
  if (c.w0 != "const" && c.w0 != "random" && c.w0.rfind("file:", 0) != 0)
    bad("w0 must be const, random or file:PATH");
  if (c.outer_tol && !(*c.outer_tol > 0.0)) bad("outer tolerance must be positive");
  if (c.max_outer < 1) bad("max-outer must be at least 1");
  if (c.threads < 1) bad("threads must be at least 1");
  if (c.log_level != "quiet" && c.log_level != "warn" && c.log_level != "info")
    bad("log level must be quiet, warn or info");
  if (c.pairs < 1 || c.trials < 1) bad("pairs and trials must be at least 1");
  if (c.out.empty()) c.out = c.command == "mesh" ? "mesh.txt" : ".";
}

void write_atomic(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw Error("cannot write " + tmp.string());
    os << text;
    if (!os) throw Error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

struct Logger {
  int level = 1;
  std::ostream* err = nullptr;
  void info(const std::string& m) const {
    if (level >= 2) *err << "[info] " << m << "\n";
  }
};

struct Setup {
  linear::LadderSpec ladder;
  Json domain;  // identification of the domain for result files
};

geometry::DomainSpec read_domain_file(const std::string& path, double default_cutoff) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open gamma file " + path);
  Json j;
  try {
    j = Json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("gamma file " + path + " is not valid JSON: " + e.what());
  }
  geometry::DomainSpec spec;
  spec.tip_cutoff = default_cutoff;
  try {
    const Json& g = j.at("gamma");
    const std::string kind = g.at("kind").get<std::string>();
    if (kind == "power") {
      const double a = g.at("alpha").get<double>();
      if (!(a > 1.0 && std::isfinite(a)))
        throw UsageError("alpha must satisfy 1 < alpha < infinity (got " + fmt(a) + ")");
      spec.gamma = geometry::CuspProfile::power(a);
    } else if (kind == "tabulated") {
      std::vector<std::pair<double, double>> samples;
      for (const auto& s : g.at("samples")) samples.emplace_back(s.at(0).get<double>(), s.at(1).get<double>());
      spec.gamma = geometry::CuspProfile::tabulated(std::move(samples));
    } else {
      throw UsageError("gamma kind must be power or tabulated");
    }
    if (j.contains("tip_cutoff")) spec.tip_cutoff = j.at("tip_cutoff").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw UsageError("gamma file " + path + ": " + e.what());
  }
  const auto report = geometry::gamma_validate(spec.gamma, 1000);
  if (!report.ok) throw GeometryError("cusp profile rejected: " + report.violation);
  return spec;
}

Setup make_setup(const RunConfig& c) {
  Setup s;
  s.ladder.h = c.hmax;
  s.ladder.levels = c.levels;
  s.ladder.space.perturb_weight = c.perturb_weight;
  s.ladder.space.weight_mode = c.weighted ? fem::WeightMode::Weighted : fem::WeightMode::Unweighted;
  if (c.oracle_disk) {
    s.ladder.disk = true;
    s.ladder.radius = c.radius;
    s.ladder.space.weight_mode = fem::WeightMode::Unweighted;
    s.domain["oracle_disk"] = true;
    s.domain["radius"] = c.radius;
  } else if (!c.gamma_file.empty()) {
    s.ladder.domain = read_domain_file(c.gamma_file, c.tip_cutoff);
    s.domain["gamma_file"] = c.gamma_file;
  } else {
    s.ladder.domain.gamma = geometry::CuspProfile::power(c.alpha);
    s.ladder.domain.tip_cutoff = c.tip_cutoff;
    s.domain["alpha"] = c.alpha;
  }
  return s;
}

fem::FemSpace finest_space(const Setup& s, int boundary_mass_points = 2) {
  auto ladder = linear::build_ladder(s.ladder);
  linear::LadderSpec spec = s.ladder;
  spec.space.boundary_mass_points = boundary_mass_points;
  return linear::make_space(spec, std::move(ladder.back()));
}

Json mesh_json(const fem::FemSpace& V, int level) {
  Json m;
  m["level"] = level;
  m["vertices"] = V.mesh().num_vertices();
  m["triangles"] = V.mesh().num_triangles();
  m["boundary_vertices"] = V.mesh().boundary_edges.size();
  return m;
}

// Boundary vertices in loop order from the tip (lowest vertex) with arc length and weight.
struct BoundaryRow {
  int v = 0;
  double s = 0.0;
  double w = 0.0;
};

std::vector<BoundaryRow> boundary_rows(const fem::FemSpace& V) {
  const auto& m = V.mesh();
  int start = -1;
  for (const auto& e : m.boundary_edges)
    if (start < 0 || m.vertices[e.v[0]].y < m.vertices[start].y) start = e.v[0];
  const std::vector<int> loop = mesh::boundary_loop_vertices(m, start);
  std::map<int, const mesh::BoundaryEdge*> outgoing;
  for (const auto& e : m.boundary_edges) outgoing[e.v[0]] = &e;
  std::vector<BoundaryRow> rows;
  double s = 0.0;
  for (std::size_t i = 0; i < loop.size(); ++i) {
    if (i > 0) s += geometry::norm(m.vertices[loop[i]] - m.vertices[loop[i - 1]]);
    const auto it = outgoing.find(loop[i]);
    const double w = it == outgoing.end() ? 0.0 : V.weight(it->second->tag, it->second->param[0]);
    rows.push_back({loop[i], s, w});
  }
  return rows;
}

std::string boundary_csv(const fem::FemSpace& V, const std::vector<std::string>& names,
                         const std::vector<const fem::FemFunction*>& columns) {
  std::ostringstream os;
  os << "s,x,y,w";
  for (const auto& n : names) os << "," << n;
  os << "\n";
  for (const auto& r : boundary_rows(V)) {
    const auto& P = V.mesh().vertices[static_cast<std::size_t>(r.v)];
    os << fmt(r.s) << "," << fmt(P.x) << "," << fmt(P.y) << "," << fmt(r.w);
    for (const auto* c : columns) os << "," << fmt((*c)[static_cast<std::size_t>(r.v)]);
    os << "\n";
  }
  return os.str();
}

struct Outputs {
  fs::path dir;
  std::vector<std::string> files;
  void write(const std::string& name, const std::string& text) {
    write_atomic(dir / name, text);
    files.push_back(name);
  }
};

void write_manifest(const fs::path& path, const RunConfig& c, const std::vector<std::string>& files,
                    double seconds) {
  Json m;
  m["command"] = c.command;
  m["config"] = config_to_json(c);
  m["seed"] = c.seed;
  m["threads"] = c.threads;
  Json v;
  v["cuspsteklov"] = kVersion;
#ifdef __VERSION__
  v["compiler"] = __VERSION__;
#endif
  v["cplusplus"] = static_cast<long>(__cplusplus);
  m["versions"] = v;
  m["outputs"] = files;
  m["timing_seconds"] = seconds;
  write_atomic(path, m.dump(2) + "\n");
}

fem::Problem problem_of(const RunConfig& c) {
  return c.problem == "harmonic" ? fem::Problem::Harmonic : fem::Problem::Schrodinger;
}

int cmd_mesh(const RunConfig& c, std::ostream& out, const Logger& log, std::vector<std::string>& files) {
  const Setup s = make_setup(c);
  log.info("building " + std::to_string(c.levels) + " mesh level(s)");
  const auto ladder = linear::build_ladder(s.ladder);
  const auto& m = ladder.back();
  std::ostringstream text;
  mesh::write_mesh(m, text);
  write_atomic(c.out, text.str());
  files.push_back(fs::path(c.out).filename().string());
  const auto q = mesh::mesh_quality(m);
  Json j = s.domain;
  j["level"] = c.levels - 1;
  j["mesh_file"] = c.out;
  j["vertices"] = q.vertices;
  j["triangles"] = q.triangles;
  j["boundary_edges"] = q.boundary_edges;
  j["min_angle_deg"] = q.min_angle_deg;
  j["max_aspect"] = q.max_aspect;
  j["h_min"] = q.h_min;
  j["h_max"] = q.h_max;
  j["area"] = mesh::total_area(m);
  out << j.dump() << "\n";
  return kOk;
}

int cmd_spectrum(const RunConfig& c, std::ostream& out, const Logger& log, Outputs& o) {
  const Setup s = make_setup(c);
  const fem::FemSpace V = finest_space(s);
  log.info("spectrum on " + std::to_string(V.size()) + " vertices");
  linear::SpectrumOptions opt;
  opt.threads = c.threads;
  const auto r = linear::steklov_spectrum(V, problem_of(c), c.k, c.constrained, opt);
  Json j;
  j["problem"] = c.problem;
  j["constrained"] = c.constrained;
  j["weight_mode"] = fem::to_string(V.options().weight_mode);
  for (const auto& [key, value] : s.domain.items()) j[key] = value;
  j["mesh"] = mesh_json(V, c.levels - 1);
  Json lam = Json::array(), res = Json::array();
  std::vector<std::string> names;
  std::vector<const fem::FemFunction*> cols;
  for (std::size_t i = 0; i < r.pairs.size(); ++i) {
    lam.push_back(r.pairs[i].lambda);
    res.push_back(r.pairs[i].residual);
    names.push_back("v" + std::to_string(i));
    cols.push_back(&r.pairs[i].volume);
  }
  j["eigenvalues"] = lam;
  j["residuals"] = res;
  j["traces_csv"] = "traces.csv";
  o.write("traces.csv", boundary_csv(V, names, cols));
  o.write("spectrum.json", j.dump(2) + "\n");
  Json summary;
  summary["eigenvalues"] = lam;
  out << summary.dump() << "\n";
  return kOk;
}

fem::FemFunction initial_iterate(const RunConfig& c, const fem::FemSpace& V) {
  if (c.w0 == "const") return V.constant(1.0);
  if (c.w0 == "random") return psolve::random_function(V, c.seed, 0);
  const std::string path = c.w0.substr(5);
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open initial iterate file " + path);
  fem::FemFunction w;
  double x;
  while (is >> x) w.push_back(x);
  if (!is.eof()) throw UsageError("initial iterate file " + path + " holds a non-number");
  if (w.size() != V.size())
    throw UsageError("initial iterate file has " + std::to_string(w.size()) + " values, the mesh " +
                     std::to_string(V.size()) + " vertices");
  return w;
}

int cmd_principal(const RunConfig& c, std::ostream& out, const Logger& log, Outputs& o) {
  const Setup s = make_setup(c);
  const fem::FemSpace V = finest_space(s);
  const double tol = c.outer_tol ? *c.outer_tol : psolve::default_outer_tol(c.p);
  log.info("inverse iteration, p = " + fmt(c.p) + ", " + std::to_string(V.size()) + " vertices");
  psolve::IterationTrace tr;
  std::string failure;
  try {
    tr = psolve::inverse_iteration(V, c.p, initial_iterate(c, V), psolve::InnerSolveConfig{}, tol,
                                 c.max_outer);
  } catch (const psolve::IterationError& e) {
    tr = e.trace();
    failure = e.what();
  }
  Json j;
  j["p"] = c.p;
  if (s.domain.contains("alpha"))
    j["alpha"] = c.alpha;
  else
    j["alpha"] = nullptr;
  for (const auto& [key, value] : s.domain.items())
    if (key != "alpha") j[key] = value;
  j["mesh_level"] = c.levels - 1;
  j["outer_tol"] = tol;
  Json steps = Json::array();
  for (const auto& st : tr.steps) {
    Json x;
    x["n"] = st.n;
    x["mu"] = st.mu;
    x["sobolev_p"] = st.sobolev_p;
    x["step_diff"] = st.step_diff;
    x["inner_iters"] = st.inner_iterations;
    steps.push_back(x);
  }
  j["steps"] = steps;
  const bool have_limit = failure.empty() && !tr.steps.empty();
  j["mu"] = have_limit ? Json(tr.mu) : Json(nullptr);
  j["converged"] = tr.converged && failure.empty();
  j["residual"] = have_limit ? Json(tr.residual) : Json(nullptr);
  if (!failure.empty()) j["error"] = failure;
  if (have_limit) {
    j["trace_csv"] = "principal_trace.csv";
    o.write("principal_trace.csv", boundary_csv(V, {"w"}, {&tr.w_limit}));
  } else {
    j["trace_csv"] = nullptr;
  }
  o.write("principal.json", j.dump(2) + "\n");
  Json summary;
  summary["mu"] = j["mu"];
  summary["converged"] = j["converged"];
  summary["steps"] = tr.steps.size();
  out << summary.dump() << "\n";
  if (!failure.empty()) throw ReportedNonConvergence(failure);
  if (!tr.converged)
    throw ReportedNonConvergence("inverse iteration did not settle in " +
                                 std::to_string(tr.steps.size()) + " steps");
  return kOk;
}

int cmd_convergence(const RunConfig& c, std::ostream& out, const Logger& log, Outputs& o) {
  const Setup s = make_setup(c);
  linear::SpectrumOptions opt;
  opt.threads = c.threads;
  log.info("convergence study over " + std::to_string(c.levels) + " levels");
  const auto r = linear::convergence_study(s.ladder, problem_of(c), c.k, c.constrained, opt);
  std::ostringstream csv;
  csv << "level,vertices";
  for (int j = 0; j < c.k; ++j) csv << ",lambda" << j;
  for (int j = 0; j < c.k; ++j) csv << ",rel_delta" << j;
  csv << "\n";
  Json levels = Json::array();
  for (std::size_t l = 0; l < r.lambda.size(); ++l) {
    csv << l << "," << r.vertices[l];
    for (double x : r.lambda[l]) csv << "," << fmt(x);
    for (double x : r.rel_delta[l]) csv << "," << (l == 0 ? std::string() : fmt(x));
    csv << "\n";
    Json lv;
    lv["level"] = l;
    lv["vertices"] = r.vertices[l];
    lv["eigenvalues"] = r.lambda[l];
    lv["rel_delta"] = l == 0 ? Json(nullptr) : Json(r.rel_delta[l]);
    levels.push_back(lv);
  }
  Json j;
  j["problem"] = c.problem;
  j["constrained"] = c.constrained;
  j["weight_mode"] = fem::to_string(s.ladder.space.weight_mode);
  for (const auto& [key, value] : s.domain.items()) j[key] = value;
  j["levels"] = levels;
  j["extrapolated"] = r.extrapolated;
  Json order = Json::array();
  for (double x : r.observed_order) order.push_back(std::isfinite(x) ? Json(x) : Json(nullptr));
  j["observed_order"] = order;
  j["table_csv"] = "convergence.csv";
  o.write("convergence.csv", csv.str());
  o.write("convergence.json", j.dump(2) + "\n");
  Json summary;
  summary["finest"] = r.lambda.back();
  summary["last_rel_delta"] = r.rel_delta.back();
  out << summary.dump() << "\n";
  return kOk;
}

int cmd_check(const RunConfig& c, std::ostream& out, const Logger& log, Outputs& o) {
  const Setup s = make_setup(c);
  const fem::FemSpace V = finest_space(s);
  Json props = Json::array();
  std::string first_failure;
  auto record = [&](const std::string& name, double value, double threshold) {
    const bool pass = value <= threshold;
    Json p;
    p["name"] = name;
    p["value"] = std::isfinite(value) ? Json(value) : Json(nullptr);
    p["threshold"] = threshold;
    p["pass"] = pass;
    props.push_back(p);
    if (!pass && first_failure.empty()) first_failure = name;
  };

  std::vector<double> ps = {1.5, 2.0, 3.0};
  if (std::find(ps.begin(), ps.end(), c.p) == ps.end()) ps.push_back(c.p);
  for (double p : ps) {
    log.info("operator properties at p = " + fmt(p));
    const auto r = fem::operator_properties(V, p, c.pairs, c.seed);
    const std::string tag = "(p=" + fmt(p) + ")";
    record("h1_homogeneity" + tag, r.h1_homogeneity, 1e-13);
    record("h2_homogeneity" + tag, r.h2_homogeneity, 1e-13);
    record("h3_holder" + tag, r.h3_holder, 1e-10);
    record("h4_holder" + tag, r.h4_holder, 1e-10);
    record("a_monotonicity" + tag, r.monotonicity, 1e-10);
    record("h3_equality" + tag, r.h3_equality, 1e-10);
    record("h4_equality" + tag, r.h4_equality, 1e-10);
    record("coercivity_identity" + tag, r.coercivity_identity, 1e-12);
    record("pairing_identity" + tag, r.pairing_identity, 1e-12);
  }

  log.info("min-max and spectrum checks");
  linear::SpectrumOptions opt;
  opt.threads = c.threads;
  const auto harm = linear::steklov_spectrum(V, fem::Problem::Harmonic, 5, false, opt);
  const auto mm = linear::minmax_check(harm, linear::system_matrix(V, fem::Problem::Harmonic),
                                       fem::boundary_weighted_mass(V), c.trials, c.seed);
  record("minmax_violation", mm.max_violation, 1e-9);
  record("rayleigh_self_identity", mm.max_self_error, 1e-10);
  record("harmonic_lambda0_ratio", harm.pairs[0].lambda / harm.pairs[1].lambda, 1e-9);

  const auto unc = linear::steklov_spectrum(V, fem::Problem::Schrodinger, 6, false, opt);
  const auto con = linear::steklov_spectrum(V, fem::Problem::Schrodinger, 5, true, opt);
  double interlace = 0.0;
  for (std::size_t j = 0; j < con.pairs.size(); ++j) {
    interlace = std::max(interlace, unc.pairs[j].lambda - con.pairs[j].lambda);
    interlace = std::max(interlace, con.pairs[j].lambda - unc.pairs[j + 1].lambda);
  }
  record("constraint_interlacing", interlace, 1e-9);

  const SparseSym K = fem::stiffness(V);
  double kmax = 0.0;
  for (double x : K.values()) kmax = std::max(kmax, std::abs(x));
  record("stiffness_row_sums", norm_inf(K.multiply(V.constant(1.0))) / kmax, 1e-12);
  const double area = mesh::total_area(V.mesh());
  record("mass_total", std::abs(fem::mass(V).quad(V.constant(1.0)) - area) / area, 1e-12);

  Json j;
  for (const auto& [key, value] : s.domain.items()) j[key] = value;
  j["weight_mode"] = fem::to_string(V.options().weight_mode);
  j["mesh"] = mesh_json(V, c.levels - 1);
  j["seed"] = c.seed;
  j["pairs"] = c.pairs;
  j["trials"] = c.trials;
  j["perturb_weight"] = c.perturb_weight;
  j["properties"] = props;
  j["all_pass"] = first_failure.empty();
  o.write("check.json", j.dump(2) + "\n");
  Json summary;
  summary["all_pass"] = first_failure.empty();
  summary["checked"] = props.size();
  out << summary.dump() << "\n";
  if (!first_failure.empty()) throw PropertyFailure(first_failure);
  return kOk;
}

Json error_json(const std::string& kind, const std::string& message, int code) {
  Json j;
  j["error"] = kind;
  j["message"] = message;
  j["exit_code"] = code;
  return j;
}

}  // namespace

const char* command_help(const std::string& name) {
  if (name == "mesh") return "generate a cusp or disk mesh and report its quality";
  if (name == "spectrum") return "linear Steklov or Schrodinger-Steklov eigenpairs";
  if (name == "principal") return "principal p-eigenvalue by inverse iteration";
  if (name == "convergence") return "eigenvalues over a refinement ladder";
  return "operator property, min-max and consistency checks";
}

RunConfig resolve_config(const std::vector<std::string>& args) {
  CLI::App app{"Finite-element Steklov eigensolver for outward cuspidal domains", "cuspsteklov"};
  app.require_subcommand(1, 1);
  std::string config_file;
  double alpha = 0, p = 0, hmax = 0, radius = 0, outer_tol = 0, tip_cutoff = 0;
  int k = 0, levels = 0, threads = 0, pairs = 0, trials = 0, max_outer = 0;
  std::uint64_t seed = 0;
  std::string gamma_file, problem, w0, out, log_level;
  bool constrained = false, weighted = false, unweighted = false, oracle = false, perturb = false;
  std::vector<std::pair<std::string, CLI::Option*>> given;
  for (const char* name : kCommands) {
    CLI::App* sub = app.add_subcommand(name, command_help(name));
    sub->add_option("--config", config_file, "JSON config file; flags override it");
    given.push_back({"alpha", sub->add_option("--alpha", alpha, "cusp exponent, gamma(t) = t^alpha")});
    given.push_back({"gamma_file", sub->add_option("--gamma-file", gamma_file, "domain JSON with a cusp profile")});
    given.push_back({"tip_cutoff", sub->add_option("--tip-cutoff", tip_cutoff, "lowest wall sample height")});
    given.push_back({"p", sub->add_option("--p", p, "exponent p > 1")});
    given.push_back({"k", sub->add_option("--k", k, "number of eigenpairs")});
    given.push_back({"levels", sub->add_option("--levels", levels, "mesh levels (uniform refinements + 1)")});
    given.push_back({"hmax", sub->add_option("--hmax", hmax, "base mesh size")});
    given.push_back({"problem", sub->add_option("--problem", problem, "harmonic | schrodinger")});
    given.push_back({"constrained", sub->add_flag("--constrained", constrained, "impose the orthogonality constraint")});
    auto* wf = sub->add_flag("--weighted", weighted, "boundary weight w (default)");
    auto* uf = sub->add_flag("--unweighted", unweighted, "boundary weight 1");
    wf->excludes(uf);
    given.push_back({"weighted", wf});
    given.push_back({"!weighted", uf});
    given.push_back({"oracle_disk", sub->add_flag("--oracle-disk", oracle, "unit-weight disk oracle")});
    given.push_back({"radius", sub->add_option("--radius", radius, "oracle disk radius")});
    given.push_back({"w0", sub->add_option("--w0", w0, "const | random | file:PATH")});
    given.push_back({"outer_tol", sub->add_option("--outer-tol", outer_tol, "inverse iteration tolerance")});
    given.push_back({"max_outer", sub->add_option("--max-outer", max_outer, "inverse iteration step budget")});
    given.push_back({"seed", sub->add_option("--seed", seed, "random seed")});
    given.push_back({"threads", sub->add_option("--threads", threads, "worker threads")});
    given.push_back({"out", sub->add_option("--out", out, "output file (mesh) or directory")});
    given.push_back({"log_level", sub->add_option("--log-level", log_level, "quiet | warn | info")});
    given.push_back({"perturb_weight", sub->add_flag("--perturb-weight", perturb, "fault injection: one boundary quadrature weight * 1.1")});
    given.push_back({"pairs", sub->add_option("--pairs", pairs, "check: random pairs per property")});
    given.push_back({"trials", sub->add_option("--trials", trials, "check: min-max samples per eigenpair")});
  }

  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    throw HelpRequested(app.help());
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  const std::string command = app.get_subcommands().front()->get_name();

  Json cfg = defaults_json();
  if (!config_file.empty()) {
    std::ifstream is(config_file);
    if (!is) throw UsageError("cannot open config file " + config_file);
    Json file;
    try {
      file = Json::parse(is);
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("config file " + config_file + " is not valid JSON: " + e.what());
    }
    if (!file.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [key, value] : file.items()) {
      if (!cfg.contains(key)) throw UsageError("unknown configuration key '" + key + "'");
      cfg[key] = value;
    }
  }
  for (const auto& [key, opt] : given) {
    if (opt->count() == 0) continue;
    if (key == "alpha") cfg[key] = alpha;
    else if (key == "gamma_file") cfg[key] = gamma_file;
    else if (key == "tip_cutoff") cfg[key] = tip_cutoff;
    else if (key == "p") cfg[key] = p;
    else if (key == "k") cfg[key] = k;
    else if (key == "levels") cfg[key] = levels;
    else if (key == "hmax") cfg[key] = hmax;
    else if (key == "problem") cfg[key] = problem;
    else if (key == "constrained") cfg[key] = true;
    else if (key == "weighted") cfg[key] = true;
    else if (key == "!weighted") cfg["weighted"] = false;
    else if (key == "oracle_disk") cfg[key] = true;
    else if (key == "radius") cfg[key] = radius;
    else if (key == "w0") cfg[key] = w0;
    else if (key == "outer_tol") cfg[key] = outer_tol;
    else if (key == "max_outer") cfg[key] = max_outer;
    else if (key == "seed") cfg[key] = seed;
    else if (key == "threads") cfg[key] = threads;
    else if (key == "out") cfg[key] = out;
    else if (key == "log_level") cfg[key] = log_level;
    else if (key == "perturb_weight") cfg[key] = true;
    else if (key == "pairs") cfg[key] = pairs;
    else if (key == "trials") cfg[key] = trials;
  }
  RunConfig c = config_from_json(cfg, command);
  validate(c);
  return c;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig c;
  try {
    c = resolve_config(args);
  } catch (const HelpRequested& h) {
    out << h.what();
    return kOk;
  } catch (const UsageError& e) {
    err << error_json("usage", e.what(), kUsage).dump() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << error_json("geometry", e.what(), kSolverError).dump() << "\n";
    return kSolverError;
  }
  Logger log;
  log.level = c.log_level == "quiet" ? 0 : c.log_level == "warn" ? 1 : 2;
  log.err = &err;
  const auto t0 = std::chrono::steady_clock::now();
  Outputs o;
  o.dir = c.command == "mesh" ? fs::path(c.out).parent_path() : fs::path(c.out);
  fs::path manifest = c.command == "mesh" ? fs::path(c.out + ".manifest.json") : o.dir / "manifest.json";
  int code = kOk;
  std::string kind, message;
  try {
    if (c.command == "mesh") code = cmd_mesh(c, out, log, o.files);
    else if (c.command == "spectrum") code = cmd_spectrum(c, out, log, o);
    else if (c.command == "principal") code = cmd_principal(c, out, log, o);
    else if (c.command == "convergence") code = cmd_convergence(c, out, log, o);
    else code = cmd_check(c, out, log, o);
  } catch (const UsageError& e) {
    code = kUsage, kind = "usage", message = e.what();
  } catch (const PropertyFailure& e) {
    code = kPropertyFailure, kind = "property", message = std::string("property failed: ") + e.what();
  } catch (const ReportedNonConvergence& e) {
    code = kNonConvergence, kind = "nonconvergence", message = e.what();
  } catch (const NonConvergenceError& e) {
    code = kNonConvergence, kind = "nonconvergence", message = e.what();
  } catch (const GeometryError& e) {
    code = kSolverError, kind = "geometry", message = e.what();
  } catch (const Error& e) {
    code = kSolverError, kind = "solver", message = e.what();
  } catch (const std::exception& e) {
    code = kSolverError, kind = "io", message = e.what();
  }
  if (code != kUsage) {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      write_manifest(manifest, c, o.files, seconds);
    } catch (const std::exception& e) {
      if (code == kOk) code = kSolverError, kind = "io", message = e.what();
    }
  }
  if (code != kOk) {
    Json j = error_json(kind, message, code);
    if (code == kPropertyFailure) j["property"] = message.substr(message.find(": ") + 2);
    err << j.dump() << "\n";
  }
  return code;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args(argv, argv + argc);
  return run(args, out, err);
}

}  // namespace cusp::cli
