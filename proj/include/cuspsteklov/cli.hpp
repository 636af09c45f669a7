#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cusp::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kSolverError = 2,
  kNonConvergence = 3,
  kPropertyFailure = 4,
};

/// Invalid invocation or configuration; exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameters of one run. Precedence: flags over the config file over these defaults.
struct RunConfig {
  std::string command;
  double alpha = 2.0;
  std::string gamma_file;  // domain JSON; replaces alpha when set
  double tip_cutoff = 1e-4;
  double p = 2.0;
  int k = 6;
  int levels = 0;  // 0: command default (1, or 3 for convergence)
  double hmax = 0.2;
  std::string problem = "harmonic";
  bool constrained = false;
  bool weighted = true;
  bool oracle_disk = false;
  double radius = 1.0;
  std::string w0 = "const";  // const | random | file:PATH
  std::optional<double> outer_tol;
  int max_outer = 500;  // principal: outer step budget
  std::uint64_t seed = 1;
  int threads = 1;
  std::string out;  // file for mesh, directory otherwise
  std::string log_level = "warn";  // quiet | warn | info
  bool perturb_weight = false;
  int pairs = 200;  // check: operator property pairs
  int trials = 20;  // check: min-max samples per eigenpair
};

/// Parses argv (argv[0] is the program name) and the optional --config file.
/// Throws UsageError on bad flags, unknown config keys or out-of-range values.
RunConfig resolve_config(const std::vector<std::string>& args);

/// Runs one command; returns the exit code. Results go to files, summaries to `out`,
/// diagnostics (one JSON line on failure) to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cusp::cli
