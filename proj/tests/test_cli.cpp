#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sys/wait.h>
#include <sstream>
#include <string>
#include <vector>

#include "cuspsteklov/cli.hpp"
#include "cuspsteklov/mesh.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::json;
using namespace cusp;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "cuspsteklov");
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

// Fresh scratch directory per test case.
fs::path scratch(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("cuspsteklov_cli_test_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Json load(const fs::path& p) { return Json::parse(slurp(p)); }

void put(const fs::path& p, const std::string& text) { std::ofstream(p) << text; }

Json last_error(const Run& r) {
  const auto nl = r.err.find_last_of('\n', r.err.size() - 2);
  return Json::parse(nl == std::string::npos ? r.err : r.err.substr(nl + 1));
}

}  // namespace

TEST_CASE("config precedence: flags over file over defaults") {
  const fs::path d = scratch("precedence");
  put(d / "c.json", R"({"alpha": 3.0, "p": 1.5, "k": 4})");
  const auto c = cli::resolve_config({"cuspsteklov", "spectrum", "--config", (d / "c.json").string(), "--k", "2"});
  CHECK(c.command == "spectrum");
  CHECK(c.alpha == 3.0);
  CHECK(c.p == 1.5);
  CHECK(c.k == 2);
  CHECK(c.hmax == 0.2);
  CHECK(c.levels == 1);
  CHECK(c.out == ".");
  CHECK(cli::resolve_config({"cuspsteklov", "convergence"}).levels == 3);
  CHECK(cli::resolve_config({"cuspsteklov", "mesh"}).out == "mesh.txt");
  CHECK(cli::resolve_config({"cuspsteklov", "spectrum", "--unweighted"}).weighted == false);
}

TEST_CASE("usage errors exit with 1") {
  const fs::path d = scratch("usage");
  put(d / "c.json", R"({"alpha": 2.0, "colour": "blue"})");
  CHECK_THROWS_AS(cli::resolve_config({"cuspsteklov", "spectrum", "--config", (d / "c.json").string()}),
                  cli::UsageError);
  put(d / "t.json", R"({"alpha": "two"})");
  CHECK(invoke(std::vector<std::string>{"spectrum", "--config", (d / "t.json").string()}).code == 1);

  const Run a = invoke({"mesh", "--alpha", "0.5", "--out", (d / "m.txt").string()});
  CHECK(a.code == 1);
  CHECK(a.err.find("1 < alpha") != std::string::npos);
  CHECK(last_error(a)["exit_code"] == 1);
  CHECK_FALSE(fs::exists(d / "m.txt"));
  CHECK(invoke({"principal", "--p", "1", "--out", d.string()}).code == 1);
  CHECK(invoke({"principal", "--p", "1.05", "--out", d.string()}).code == 1);
  CHECK(invoke({"principal", "--p", "7", "--out", d.string()}).code == 1);
  CHECK(invoke({"spectrum", "--no-such-flag"}).code == 1);
  CHECK(invoke({"spectrum", "--weighted", "--unweighted"}).code == 1);
  CHECK(invoke({"convergence", "--levels", "1", "--out", d.string()}).code == 1);
  CHECK(invoke({"check", "--tip-cutoff", "0.7", "--out", d.string()}).code == 1);
  CHECK(invoke({"principal", "--w0", "file:" + (d / "missing.txt").string(), "--out", d.string()}).code == 1);
  CHECK(invoke({}).code == 1);
}

TEST_CASE("help exits with 0") {
  const Run r = invoke({"--help"});
  CHECK(r.code == 0);
  CHECK(r.out.find("spectrum") != std::string::npos);
  CHECK(invoke({"principal", "--help"}).code == 0);
}

TEST_CASE("mesh command writes a readable mesh and a manifest") {
  const fs::path d = scratch("mesh");
  const Run r = invoke({"mesh", "--alpha", "2", "--hmax", "0.25", "--out", (d / "m.txt").string()});
  REQUIRE(r.code == 0);
  std::ifstream in(d / "m.txt");
  const mesh::TriMesh m = mesh::read_mesh(in);
  CHECK_NOTHROW(mesh::validate(m));
  const Json q = Json::parse(r.out);
  CHECK(q["vertices"] == m.num_vertices());
  const Json man = load(d / "m.txt.manifest.json");
  CHECK(man["command"] == "mesh");
  CHECK(man["config"]["hmax"] == 0.25);
  CHECK(man.contains("timing_seconds"));
}

TEST_CASE("spectrum outputs") {
  const fs::path d = scratch("spectrum");
  const Run r = invoke({"spectrum", "--alpha", "2", "--k", "3", "--out", d.string()});
  REQUIRE(r.code == 0);
  const Json s = load(d / "spectrum.json");
  REQUIRE(s["eigenvalues"].size() == 3);
  CHECK(std::abs(s["eigenvalues"][0].get<double>()) <= 1e-9 * s["eigenvalues"][1].get<double>());
  for (std::size_t i = 1; i < 3; ++i) CHECK(s["eigenvalues"][i] >= s["eigenvalues"][i - 1]);
  std::ifstream csv(d / "traces.csv");
  std::string header, row;
  std::getline(csv, header);
  CHECK(header == "s,x,y,w,v0,v1,v2");
  std::size_t rows = 0;
  double prev = -1.0;
  while (std::getline(csv, row)) {
    const double arc = std::stod(row.substr(0, row.find(',')));
    CHECK(arc > prev);
    prev = arc;
    ++rows;
  }
  CHECK(rows == s["mesh"]["boundary_vertices"].get<std::size_t>());
  CHECK(fs::exists(d / "manifest.json"));
}

TEST_CASE("principal at p = 2 matches the Schrodinger spectrum") {
  const fs::path d = scratch("principal");
  REQUIRE(invoke({"spectrum", "--problem", "schrodinger", "--k", "1", "--out", (d / "s").string()}).code == 0);
  REQUIRE(invoke({"principal", "--p", "2", "--outer-tol", "1e-10", "--out", (d / "p").string()}).code == 0);
  const double lam = load(d / "s" / "spectrum.json")["eigenvalues"][0];
  const Json pr = load(d / "p" / "principal.json");
  CHECK(pr["converged"] == true);
  CHECK(std::abs(pr["mu"].get<double>() - lam) <= 1e-6 * lam);
  const auto& steps = pr["steps"];
  for (std::size_t i = 1; i < steps.size(); ++i) CHECK(steps[i]["mu"] <= steps[i - 1]["mu"].get<double>() + 1e-12);
  CHECK(fs::exists(d / "p" / "principal_trace.csv"));
}

TEST_CASE("principal reports non-convergence with exit 3") {
  const fs::path d = scratch("nonconv");
  const Run r = invoke({"principal", "--p", "3", "--max-outer", "2", "--out", d.string()});
  CHECK(r.code == 3);
  CHECK(last_error(r)["error"] == "nonconvergence");
  const Json pr = load(d / "principal.json");
  CHECK(pr["converged"] == false);
  CHECK(pr["steps"].size() == 2);
  CHECK(fs::exists(d / "manifest.json"));
}

TEST_CASE("check passes and detects an injected fault") {
  const fs::path d = scratch("check");
  const Run ok = invoke({"check", "--pairs", "40", "--trials", "5", "--out", (d / "ok").string()});
  CHECK(ok.code == 0);
  const Json c = load(d / "ok" / "check.json");
  for (const auto& p : c["properties"]) CHECK(p["pass"] == true);
  const Run bad = invoke({"check", "--pairs", "40", "--trials", "5", "--perturb-weight", "--out", (d / "bad").string()});
  CHECK(bad.code == 4);
  CHECK(last_error(bad).contains("property"));
}

TEST_CASE("domain files") {
  const fs::path d = scratch("domain");
  put(d / "good.json", R"({"gamma":{"kind":"tabulated","samples":[[0,0],[0.5,0.2],[1,1]]},"tip_cutoff":1e-3})");
  CHECK(invoke({"spectrum", "--gamma-file", (d / "good.json").string(), "--k", "2", "--out", (d / "g").string()}).code ==
        0);
  put(d / "power.json", R"({"gamma":{"kind":"power","alpha":3}})");
  CHECK(invoke({"mesh", "--gamma-file", (d / "power.json").string(), "--out", (d / "p.txt").string()}).code == 0);
  // a concave table is not a cusp
  put(d / "bad.json", R"({"gamma":{"kind":"tabulated","samples":[[0,0],[0.5,0.7],[1,1]]}})");
  const Run r = invoke({"mesh", "--gamma-file", (d / "bad.json").string(), "--out", (d / "b.txt").string()});
  CHECK(r.code == 2);
  put(d / "junk.json", "{not json");
  CHECK(invoke({"mesh", "--gamma-file", (d / "junk.json").string(), "--out", (d / "j.txt").string()}).code == 1);
}

TEST_CASE("convergence ladder output") {
  const fs::path d = scratch("convergence");
  REQUIRE(invoke({"convergence", "--oracle-disk", "--levels", "2", "--k", "3", "--out", d.string()}).code == 0);
  const Json j = load(d / "convergence.json");
  REQUIRE(j["levels"].size() == 2);
  CHECK(j["levels"][0]["rel_delta"].is_null());
  CHECK(j["levels"][1]["rel_delta"].size() == 3);
  const double l1 = j["levels"][1]["eigenvalues"][1];
  CHECK(std::abs(l1 - 1.0) < 0.02);
}

TEST_CASE("reruns are byte-identical") {
  const fs::path d = scratch("rerun");
  for (const char* sub : {"a", "b"})
    REQUIRE(invoke({"principal", "--p", "1.5", "--w0", "random", "--seed", "7", "--out", (d / sub).string()}).code == 0);
  CHECK(slurp(d / "a" / "principal.json") == slurp(d / "b" / "principal.json"));
  CHECK(slurp(d / "a" / "principal_trace.csv") == slurp(d / "b" / "principal_trace.csv"));
}

TEST_CASE("installed executable") {
  const fs::path d = scratch("exe");
  const std::string cmd = std::string("\"") + CUSPSTEKLOV_EXE + "\" spectrum --k 2 --log-level quiet --out \"" +
                          d.string() + "\" > \"" + (d / "stdout.txt").string() + "\"";
  CHECK(std::system(cmd.c_str()) == 0);
  CHECK(Json::parse(slurp(d / "stdout.txt")).contains("eigenvalues"));
  const std::string bad = std::string("\"") + CUSPSTEKLOV_EXE + "\" mesh --alpha 1 2> \"" +
                          (d / "stderr.txt").string() + "\"";
  const int status = std::system(bad.c_str());
  CHECK(WEXITSTATUS(status) == 1);
}
