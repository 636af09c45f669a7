#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "cuspsteklov/assembly.hpp"
#include "cuspsteklov/errors.hpp"

namespace cusp::psolve {

using fem::FemFunction;
using fem::FemSpace;

struct InnerSolveConfig {
  double epsilon = 1e-8;  // tangent regularization only
  double grad_tol = 1e-9;
  int max_newton = 100;
  double c1 = 1e-4;
  double backtrack = 0.5;

  void check() const;
};

struct InnerSolveResult {
  FemFunction u;
  int newton_steps = 0;
  int picard_steps = 0;
  double residual = 0.0;   // ||A(u) - B(f)||_inf / ||B(f)||_inf
  // max_j |A(u) - B(f)|_j / (grad_tol ||B(f)||_inf + rounding floor_j) when the loop stopped
  double scaled_residual = 0.0;
  bool zero_rhs = false;   // f had zero boundary trace; u = 0
  std::vector<double> energies;  // J after each line-searched step, starting at the initial guess
};

/// J(u) = (1/p) sobolev_pnorm(u) - <B(f), u>.
double energy_J(const FemSpace& V, const FemFunction& f, const FemFunction& u, double p);

/// Minimizer of J, i.e. A(u) = B(f). Line-searched Newton steps on the regularized tangent
/// and frozen-coefficient (Picard) steps, Picard first for p < 2, then a few polishing
/// Newton steps. Converged when every residual component is within grad_tol ||B(f)||_inf
/// plus the rounding floor of A at that node. `start` warm-starts the iteration.
/// Throws NonConvergenceError after max_newton steps.
InnerSolveResult solve_A_eq_Bf(const FemSpace& V, const FemFunction& f, double p,
                               const InnerSolveConfig& cfg = {},
                               const FemFunction* start = nullptr);

struct IterationStep {
  int n = 0;
  double mu = 0.0;                  // mu_n
  double sobolev_p = 0.0;           // ||w_{n+1}||^p_{W^{1,p}}
  double boundary_norm_check = 0.0; // ||w_{n+1}||^p_{L^p_w}, should be 1
  double pairing = 0.0;             // <B(w_n), w_{n+1}>
  int inner_iterations = 0;
  double step_diff = 0.0;           // min over signs of ||w_{n+1} -+ w_n||_{L^p_w}
};

struct IterationTrace {
  double p = 2.0;
  double outer_tol = 0.0;
  std::vector<IterationStep> steps;
  double mu = std::numeric_limits<double>::quiet_NaN();
  FemFunction w_limit;
  bool converged = false;
  double residual = std::numeric_limits<double>::quiet_NaN();
};

/// Inner-solve failure inside the outer loop, with the steps completed so far.
class IterationError : public NonConvergenceError {
 public:
  IterationError(const std::string& what, double residual, IterationTrace trace)
      : NonConvergenceError(what, residual), trace_(std::move(trace)) {}
  const IterationTrace& trace() const { return trace_; }

 private:
  IterationTrace trace_;
};

/// Default outer tolerance: 1e-8 for p = 2, 1e-6 otherwise.
double default_outer_tol(double p);

/// u_{n+1} = A^{-1} B(w_n), mu_n = ||u_{n+1}||^{1-p}, w_{n+1} = u_{n+1}/||u_{n+1}|| with the
/// sign locked to <B(w_{n+1}), w_n> >= 0. Stops when mu and w both settle to outer_tol,
/// or returns unconverged after max_outer steps.
IterationTrace inverse_iteration(const FemSpace& V, double p, const FemFunction& w0,
                                 const InnerSolveConfig& cfg, double outer_tol,
                                 int max_outer = 500);

/// ||A(u) - lambda B(u)||_inf / ||A(u)||_inf.
double eigen_residual(const FemSpace& V, double lambda, const FemFunction& u, double p);

/// Chain and monotonicity checks on a trace, measured against its final mu.
struct TraceAudit {
  double max_mu_increase = 0.0;       // max(mu_n - mu_{n-1}), want <= 1e-12
  double max_sobolev_increase = 0.0;  // same for sobolev_p
  double max_sobolev_over_mu = 0.0;   // max(sobolev_p - mu_n), want <= 0
  double min_mu_minus_limit = 0.0;    // min(mu_n - mu), want >= -1e-10
  double max_step_ratio = 0.0;        // max(mu_n - mu_n^{(p-1)/p} mu_{n-1}^{1/p})
  double final_gap = 0.0;             // |mu - sobolev_p| / mu at termination
};
TraceAudit audit_trace(const IterationTrace& trace);

struct RayleighReport {
  double min_perturbed = std::numeric_limits<double>::infinity();
  double min_random = std::numeric_limits<double>::infinity();
  double self_quotient = 0.0;  // R(w_limit)
  double constant_quotient = 0.0;
  std::size_t samples = 0;
  bool ok = true;  // no sample below mu - 1e-8
};

/// Schrodinger quotient on w_limit + delta r (delta cycling over 1e-1, 1e-2, 1e-3) and on
/// independent random functions (nodal noise and random quadratics), all seeded.
RayleighReport rayleigh_minimize_check(const FemSpace& V, const IterationTrace& trace,
                                       int trials, std::uint64_t seed);

struct TraceConstantReport {
  double S = 0.0;
  double max_ratio = 0.0;      // max of S^{1/p}||u||_{L^p_w} / ||u||_{W^{1,p}} over samples
  double equality_gap = 0.0;   // |ratio - 1| at w_limit
  std::size_t samples = 0;
  bool ok = true;              // max_ratio <= 1 + 1e-8
};

/// S = mu and its sampled certification. Throws ParameterError on an unconverged trace.
TraceConstantReport trace_constant(const FemSpace& V, const IterationTrace& trace,
                                   int samples = 100, std::uint64_t seed = 1);

/// Seeded random test functions shared by the checks above: even k nodal N(0,1) noise,
/// odd k a random quadratic in (x1, x2).
FemFunction random_function(const FemSpace& V, std::uint64_t seed, int k);

}  // namespace cusp::psolve
