#include "cuspsteklov/p_solver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "cuspsteklov/laplacian.hpp"

namespace cusp::psolve {

using geometry::Point;

void InnerSolveConfig::check() const {
  if (!(epsilon > 0.0)) throw ParameterError("epsilon must be positive");
  if (!(grad_tol > 0.0)) throw ParameterError("grad_tol must be positive");
  if (max_newton < 1) throw ParameterError("max_newton must be at least 1");
  if (!(c1 > 0.0 && c1 < 1.0)) throw ParameterError("Armijo c1 must lie in (0,1)");
  if (!(backtrack > 0.0 && backtrack < 1.0)) throw ParameterError("backtrack must lie in (0,1)");
}

namespace {

void require_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("p must be finite and > 1");
}

double dotv(const FemFunction& a, const FemFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_norm(const FemFunction& a) {
  double s = 0.0;
  for (double x : a) s = std::max(s, std::abs(x));
  return s;
}

// Frozen-coefficient operator: (|grad u|^2+eps^2)^{(p-2)/2} stiffness plus the matching
// mid-edge mass, so that Picard(u) u = A(u) up to the regularization.
SparseSym picard_matrix(const FemSpace& V, const FemFunction& u, double p, double eps) {
  std::vector<Triplet> t;
  t.reserve(6 * V.mesh().triangles.size());
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const auto& gr = V.grads(e);
    const Point g = fem::element_gradient(V, e, u);
    const auto reg = fem::tangent_regularization(V, e, u, p, eps);
    const double c = std::pow(geometry::dot(g, g) + reg.grad * reg.grad, 0.5 * (p - 2.0));
    const double m[3] = {0.5 * (u[T[1]] + u[T[2]]), 0.5 * (u[T[2]] + u[T[0]]),
                         0.5 * (u[T[0]] + u[T[1]])};
    double wm[3];
    for (int k = 0; k < 3; ++k)
      wm[k] = std::pow(m[k] * m[k] + reg.value * reg.value, 0.5 * (p - 2.0));
    const double A = V.area(e);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        double mij = 0.0;
        for (int k = 0; k < 3; ++k)
          if (k != i && k != j) mij += 0.25 * wm[k];
        t.push_back({T[i], T[j], A * c * geometry::dot(gr[i], gr[j]) + A / 3.0 * mij});
      }
  }
  return SparseSym::from_triplets(V.size(), std::move(t));
}

// Row sums of the mid-edge mass with weights scale * (m^2+eps^2)^{(p-2)/2}: the excess of
// the Picard (scale 1) and Newton (scale p-1) matrices, whose stiffness rows sum to zero.
FemFunction mass_excess(const FemSpace& V, const FemFunction& u, double p, double eps,
                        double scale) {
  FemFunction ex(V.size(), 0.0);
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const double ev = fem::tangent_regularization(V, e, u, p, eps).value;
    double wm[3];
    for (int k = 0; k < 3; ++k) {
      const double m = 0.5 * (u[T[(k + 1) % 3]] + u[T[(k + 2) % 3]]);
      wm[k] = p == 2.0 ? 1.0 : scale * std::pow(m * m + ev * ev, 0.5 * (p - 2.0));
    }
    for (int i = 0; i < 3; ++i)
      ex[T[i]] += V.area(e) / 6.0 * (wm[(i + 1) % 3] + wm[(i + 2) % 3]);
  }
  return ex;
}

FemFunction residual(const FemSpace& V, const FemFunction& u, const FemFunction& b, double p) {
  FemFunction r = fem::apply_A(V, u, p);
  for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
  return r;
}

// Componentwise size of the rounding error in A(u): flux magnitude plus the flux
// sensitivity (p-1)|g|^{p-2} times the gradient error eps * sum_k |u_k||grad phi_k|.
FemFunction rounding_floor(const FemSpace& V, const FemFunction& u, double p) {
  const double eps = std::numeric_limits<double>::epsilon();
  FemFunction fl(V.size(), 0.0);
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const auto& gr = V.grads(e);
    const Point g = fem::element_gradient(V, e, u);
    const double gn = std::sqrt(geometry::dot(g, g));
    double dg = 0.0;
    for (int k = 0; k < 3; ++k) dg += std::abs(u[T[k]]) * std::sqrt(geometry::dot(gr[k], gr[k]));
    dg *= eps;
    const double sens = dg > 0.0 ? (p - 1.0) * std::pow(std::max(gn, dg), p - 2.0) * dg : 0.0;
    const double flux = eps * std::pow(gn, p - 1.0) + sens;
    const double ms = std::pow(std::max({std::abs(u[T[0]]), std::abs(u[T[1]]), std::abs(u[T[2]])}),
                               p - 1.0) * eps;
    for (int i = 0; i < 3; ++i)
      fl[T[i]] += 16.0 * (V.area(e) * std::sqrt(geometry::dot(gr[i], gr[i])) * flux +
                          V.area(e) * ms);
  }
  return fl;
}

// Largest residual component in units of tol * ||b|| + its rounding floor; <= 1 means done.
double scaled_residual(const FemFunction& r, const FemFunction& floor, double tolb) {
  double s = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) s = std::max(s, std::abs(r[i]) / (tolb + floor[i]));
  return s;
}

// J along t v is minimized at t = sign(<b,v>) (|<b,v>|/N(v))^{1/(p-1)}; zero when v is
// orthogonal to b or null.
FemFunction line_minimize_ray(const FemSpace& V, const FemFunction& v, const FemFunction& b,
                              double p) {
  const double bv = dotv(b, v), nv = fem::sobolev_pnorm(V, v, p);
  FemFunction u = v;
  const double t = nv > 0.0 ? std::copysign(std::pow(std::abs(bv) / nv, 1.0 / (p - 1.0)), bv) : 0.0;
  for (double& x : u) x *= t;
  return u;
}

}  // namespace

double energy_J(const FemSpace& V, const FemFunction& f, const FemFunction& u, double p) {
  require_p(p);
  const FemFunction b = fem::apply_B(V, f, p);
  return fem::sobolev_pnorm(V, u, p) / p - dotv(b, u);
}

InnerSolveResult solve_A_eq_Bf(const FemSpace& V, const FemFunction& f, double p,
                               const InnerSolveConfig& cfg, const FemFunction* start) {
  require_p(p);
  cfg.check();
  if (f.size() != V.size()) throw SizeError("right-hand side has the wrong length");
  InnerSolveResult out;
  const FemFunction b = fem::apply_B(V, f, p);
  const double bnorm = inf_norm(b);
  if (bnorm == 0.0) {
    out.u.assign(V.size(), 0.0);
    out.zero_rhs = true;
    return out;
  }
  auto J = [&](const FemFunction& u) { return fem::sobolev_pnorm(V, u, p) / p - dotv(b, u); };

  // Every system is solved in Laplacian form: near a sharp tip the couplings reach 1e8 times
  // the energies that balance there. The symbolic analysis is reused while the stiff set
  // stays the same.
  std::shared_ptr<const CholeskySymbolic> symbolic;
  auto solve_with = [&](const SparseSym& T, FemFunction excess, const FemFunction& rhs) {
    const LaplacianSolver S(T, std::move(excess), symbolic);
    symbolic = S.symbolic_ptr();
    return S.solve(rhs);
  };

  FemFunction u;
  if (start) {
    if (start->size() != V.size()) throw SizeError("start vector has the wrong length");
    u = line_minimize_ray(V, *start, b, p);
  }
  if (!start || inf_norm(u) == 0.0) {
    const SparseSym KM = fem::stiffness(V).combine(1.0, fem::mass(V), 1.0);
    u = line_minimize_ray(V, solve_with(KM, mass_excess(V, b, 2.0, 1.0, 1.0), b), b, p);
  }
  double Ju = J(u);
  out.energies.push_back(Ju);
  FemFunction r = residual(V, u, b, p);
  double res = inf_norm(r) / bnorm;
  const double tolb = cfg.grad_tol * bnorm;
  double scaled = scaled_residual(r, rounding_floor(V, u, p), tolb);
  const double eps = std::numeric_limits<double>::epsilon();
  // Below p = 2 Newton overshoots by a factor 1/(p-1) on elements whose gradient passes near
  // zero; the frozen-coefficient step majorizes J there and goes first.
  const bool picard_first = p < 2.0;
  int steps = 0;
  while (!(scaled <= 1.0)) {
    if (steps >= cfg.max_newton)
      throw NonConvergenceError("inner Newton solve did not converge in " +
                                    std::to_string(cfg.max_newton) + " steps",
                                res);
    ++steps;
    bool accepted = false;
    for (int attempt = 0; attempt < 2 && !accepted; ++attempt) {
      const bool picard = (attempt == 0) == picard_first;
      FemFunction d;
      try {
        if (!picard) {
          d = solve_with(fem::tangent_A(V, u, p, cfg.epsilon),
                         mass_excess(V, u, p, cfg.epsilon, p - 1.0), r);
          for (double& x : d) x = -x;
        } else {
          // Correction form: with the regularization P(u) u != A(u) where the gradient is
          // flat, so P^{-1} b - u would aim at the regularized solution.
          d = solve_with(picard_matrix(V, u, p, cfg.epsilon),
                         mass_excess(V, u, p, cfg.epsilon, 1.0), r);
          for (double& x : d) x = -x;
        }
      } catch (const NotSpdError&) {
        continue;
      }
      const double slope = dotv(r, d);
      if (!(slope < 0.0)) continue;
      if (-slope <= 64.0 * eps * (std::abs(Ju) + 1e-300)) {
        // Decrement at rounding level: J cannot resolve the step, take it whole.
        for (std::size_t i = 0; i < u.size(); ++i) u[i] += d[i];
        Ju = J(u);
        accepted = true;
      }
      for (double t = 1.0; !accepted && t > 1e-12; t *= cfg.backtrack) {
        FemFunction trial = u;
        for (std::size_t i = 0; i < u.size(); ++i) trial[i] += t * d[i];
        const double Jt = J(trial);
        if (Jt <= Ju + cfg.c1 * t * slope) {
          u = std::move(trial);
          Ju = Jt;
          out.energies.push_back(Ju);
          accepted = true;
        }
      }
      if (accepted && picard) ++out.picard_steps;
    }
    if (!accepted)
      throw NonConvergenceError("inner solve stalled: no descent step found", res);
    r = residual(V, u, b, p);
    res = inf_norm(r) / bnorm;
    scaled = scaled_residual(r, rounding_floor(V, u, p), tolb);
  }

  // Polishing: full Newton steps while they still shrink the residual.
  for (int k = 0; k < 3 && res > 0.0; ++k) {
    FemFunction d;
    try {
      d = solve_with(fem::tangent_A(V, u, p, cfg.epsilon),
                     mass_excess(V, u, p, cfg.epsilon, p - 1.0), r);
    } catch (const NotSpdError&) {
      break;
    }
    FemFunction trial = u;
    for (std::size_t i = 0; i < u.size(); ++i) trial[i] -= d[i];
    const FemFunction rt = residual(V, trial, b, p);
    const double rest = inf_norm(rt) / bnorm;
    if (!(rest < 0.5 * res)) break;
    u = std::move(trial);
    r = rt;
    res = rest;
    ++steps;
  }
  out.u = std::move(u);
  out.newton_steps = steps - out.picard_steps;
  out.residual = res;
  out.scaled_residual = scaled;
  return out;
}

double default_outer_tol(double p) { return p == 2.0 ? 1e-8 : 1e-6; }

namespace {

double boundary_distance(const FemSpace& V, const FemFunction& a, const FemFunction& b, double p,
                         double sign) {
  FemFunction d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - sign * b[i];
  return std::pow(fem::boundary_weighted_pnorm(V, d, p), 1.0 / p);
}

}  // namespace

IterationTrace inverse_iteration(const FemSpace& V, double p, const FemFunction& w0,
                                 const InnerSolveConfig& cfg, double outer_tol, int max_outer) {
  require_p(p);
  if (!(outer_tol > 0.0)) throw ParameterError("outer tolerance must be positive");
  if (max_outer < 1) throw ParameterError("max_outer must be at least 1");
  if (w0.size() != V.size()) throw SizeError("initial iterate has the wrong length");
  const double n0 = fem::boundary_weighted_pnorm(V, w0, p);
  if (!(n0 > 0.0)) throw ParameterError("initial iterate has zero boundary norm");

  IterationTrace tr;
  tr.p = p;
  tr.outer_tol = outer_tol;
  FemFunction w = w0;
  for (double& x : w) x /= std::pow(n0, 1.0 / p);
  FemFunction u_prev;
  double mu_prev = 0.0;
  for (int n = 0; n < max_outer; ++n) {
    InnerSolveResult inner;
    try {
      inner = solve_A_eq_Bf(V, w, p, cfg, u_prev.empty() ? nullptr : &u_prev);
    } catch (const NonConvergenceError& e) {
      throw IterationError(std::string("inverse iteration step ") + std::to_string(n) + ": " +
                               e.what(),
                           e.residual(), tr);
    }
    FemFunction u = std::move(inner.u);
    const double unorm = std::pow(fem::boundary_weighted_pnorm(V, u, p), 1.0 / p);
    if (!(unorm > 0.0)) throw IterationError("inner solution has zero boundary norm", 0.0, tr);
    IterationStep st;
    st.n = n;
    st.mu = std::pow(unorm, 1.0 - p);
    FemFunction wn = u;
    for (double& x : wn) x /= unorm;
    const FemFunction Bw = fem::apply_B(V, w, p);
    st.pairing = dotv(Bw, wn);
    if (st.pairing < 0.0) {
      for (double& x : wn) x = -x;
      for (double& x : u) x = -x;
      st.pairing = -st.pairing;
    }
    st.sobolev_p = fem::sobolev_pnorm(V, wn, p);
    st.boundary_norm_check = fem::boundary_weighted_pnorm(V, wn, p);
    st.inner_iterations = inner.newton_steps + inner.picard_steps;
    st.step_diff = std::min(boundary_distance(V, wn, w, p, 1.0), boundary_distance(V, wn, w, p, -1.0));
    tr.steps.push_back(st);
    const bool settled = n > 0 && std::abs(st.mu - mu_prev) <= outer_tol * st.mu &&
                         st.step_diff <= outer_tol;
    mu_prev = st.mu;
    w = std::move(wn);
    u_prev = std::move(u);
    if (settled) {
      tr.converged = true;
      break;
    }
  }
  tr.mu = tr.steps.back().mu;
  tr.w_limit = w;
  tr.residual = eigen_residual(V, tr.mu, tr.w_limit, p);
  return tr;
}

double eigen_residual(const FemSpace& V, double lambda, const FemFunction& u, double p) {
  require_p(p);
  const FemFunction a = fem::apply_A(V, u, p);
  const FemFunction b = fem::apply_B(V, u, p);
  const double an = inf_norm(a);
  if (an == 0.0) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - lambda * b[i]));
  return s / an;
}

TraceAudit audit_trace(const IterationTrace& tr) {
  TraceAudit a;
  const double p = tr.p;
  a.max_sobolev_over_mu = -std::numeric_limits<double>::infinity();
  a.min_mu_minus_limit = std::numeric_limits<double>::infinity();
  a.max_step_ratio = -std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < tr.steps.size(); ++k) {
    const auto& s = tr.steps[k];
    a.max_sobolev_over_mu = std::max(a.max_sobolev_over_mu, s.sobolev_p - s.mu);
    a.min_mu_minus_limit = std::min(a.min_mu_minus_limit, s.mu - tr.mu);
    if (k > 0) {
      const auto& q = tr.steps[k - 1];
      a.max_mu_increase = std::max(a.max_mu_increase, s.mu - q.mu);
      a.max_sobolev_increase = std::max(a.max_sobolev_increase, s.sobolev_p - q.sobolev_p);
      a.max_step_ratio = std::max(
          a.max_step_ratio, s.mu - std::pow(s.mu, (p - 1.0) / p) * std::pow(q.mu, 1.0 / p));
    }
  }
  if (!tr.steps.empty())
    a.final_gap = std::abs(tr.mu - tr.steps.back().sobolev_p) / tr.mu;
  if (tr.steps.size() < 2) a.max_step_ratio = 0.0;
  return a;
}

FemFunction random_function(const FemSpace& V, std::uint64_t seed, int k) {
  std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(k + 1));
  std::normal_distribution<double> normal(0.0, 1.0);
  FemFunction u(V.size());
  if (k % 2 == 0) {
    for (double& x : u) x = normal(rng);
  } else {
    double c[6];
    for (double& x : c) x = normal(rng);
    const auto& P = V.mesh().vertices;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double x = P[i].x, y = P[i].y;
      u[i] = c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y;
    }
  }
  return u;
}

RayleighReport rayleigh_minimize_check(const FemSpace& V, const IterationTrace& tr, int trials,
                                       std::uint64_t seed) {
  if (tr.w_limit.size() != V.size()) throw SizeError("trace does not match the space");
  const double p = tr.p;
  RayleighReport rep;
  auto R = [&](const FemFunction& u) {
    return fem::rayleigh_quotient(V, u, p, fem::Problem::Schrodinger);
  };
  rep.self_quotient = R(tr.w_limit);
  rep.constant_quotient = R(V.constant(1.0));
  const double deltas[3] = {1e-1, 1e-2, 1e-3};
  for (int k = 0; k < trials; ++k) {
    FemFunction r = random_function(V, seed, 2 * k);
    const double rn = std::pow(fem::boundary_weighted_pnorm(V, r, p), 1.0 / p);
    FemFunction u = tr.w_limit;
    const double delta = deltas[k % 3] / (rn > 0.0 ? rn : 1.0);
    for (std::size_t i = 0; i < u.size(); ++i) u[i] += delta * r[i];
    rep.min_perturbed = std::min(rep.min_perturbed, R(u));
    try {
      rep.min_random = std::min(rep.min_random, R(random_function(V, seed, 2 * k + 1)));
    } catch (const QuotientUndefined&) {
    }
    rep.samples += 2;
  }
  const double floor = tr.mu - 1e-8;
  rep.ok = rep.min_perturbed >= floor && rep.min_random >= floor &&
           rep.constant_quotient >= floor;
  return rep;
}

TraceConstantReport trace_constant(const FemSpace& V, const IterationTrace& tr, int samples,
                                   std::uint64_t seed) {
  if (!tr.converged) throw ParameterError("trace constant needs a converged iteration");
  const double p = tr.p;
  TraceConstantReport rep;
  rep.S = tr.mu;
  const double s = std::pow(rep.S, 1.0 / p);
  auto ratio = [&](const FemFunction& u) {
    const double bn = std::pow(fem::boundary_weighted_pnorm(V, u, p), 1.0 / p);
    const double sn = std::pow(fem::sobolev_pnorm(V, u, p), 1.0 / p);
    return s * bn / sn;
  };
  rep.equality_gap = std::abs(ratio(tr.w_limit) - 1.0);
  for (int k = 0; k < samples; ++k) {
    rep.max_ratio = std::max(rep.max_ratio, ratio(random_function(V, seed, k)));
    ++rep.samples;
  }
  rep.ok = rep.max_ratio <= 1.0 + 1e-8;
  return rep;
}

}  // namespace cusp::psolve
