#include "cuspsteklov/linear_eigen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <thread>

#include "cuspsteklov/errors.hpp"

namespace cusp::linear {

DtnReduction::DtnReduction(const SparseSym& A, std::vector<int> boundary, int threads,
                           std::vector<double> excess)
    : n_(A.size()), boundary_(std::move(boundary)) {
  const std::size_t n = A.size();
  std::vector<int> bpos(n, -1), ipos(n, -1);
  for (std::size_t k = 0; k < boundary_.size(); ++k) {
    const int v = boundary_[k];
    if (v < 0 || static_cast<std::size_t>(v) >= n || bpos[v] >= 0)
      throw SizeError("invalid boundary DOF list");
    bpos[v] = static_cast<int>(k);
  }
  std::vector<char> eligible(n, 0);
  for (std::size_t i = 0; i < n; ++i) eligible[i] = bpos[i] < 0;
  StiffElimination el;
  try {
    el = eliminate_stiff(A, std::move(excess), eligible);
  } catch (const NotSpdError& ex) {
    throw GeometryError(std::string("interior block is not positive definite: ") + ex.what());
  }
  stiff_ = std::move(el.steps);
  const auto& adj = el.adj;
  const auto& e = el.excess;
  const auto& gone = el.gone;

  for (std::size_t v = 0; v < n; ++v)
    if (bpos[v] < 0 && !gone[v]) {
      ipos[v] = static_cast<int>(interior_.size());
      interior_.push_back(static_cast<int>(v));
    }
  const std::size_t nb = boundary_.size(), ni = interior_.size();
  L_.weights = DenseSym(nb);
  L_.excess.assign(nb, 0.0);
  coupling_.assign(nb, {});
  std::vector<Triplet> aii;
  std::vector<double> ei(ni, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (gone[i]) continue;
    if (bpos[i] >= 0) L_.excess[static_cast<std::size_t>(bpos[i])] = e[i];
    double diag = e[i];
    for (const auto& [jj, w] : adj[i]) {
      diag += w;
      const auto j = static_cast<std::size_t>(jj);
      if (j < i) continue;
      if (bpos[i] >= 0 && bpos[j] >= 0)
        L_.weights.set(static_cast<std::size_t>(bpos[i]), static_cast<std::size_t>(bpos[j]), w);
      else if (ipos[i] >= 0 && ipos[j] >= 0)
        aii.push_back({ipos[i], ipos[j], -w});
      else if (bpos[i] >= 0)
        coupling_[static_cast<std::size_t>(bpos[i])].push_back({ipos[j], -w});
      else
        coupling_[static_cast<std::size_t>(bpos[j])].push_back({ipos[i], -w});
    }
    if (ipos[i] >= 0) {
      aii.push_back({ipos[i], ipos[i], diag});
      ei[static_cast<std::size_t>(ipos[i])] = e[i];
    }
  }

  if (ni > 0) {
    try {
      factor_ = std::make_unique<CholeskyFactor>(SparseSym::from_triplets(ni, std::move(aii)));
    } catch (const NotSpdError& ex) {
      throw GeometryError(std::string("interior block is not positive definite: ") + ex.what());
    }

    // Column j of A_II^{-1} A_IG, then the weights gain A_GI x.
    DenseMatrix correction(nb, nb);
    auto work = [&](std::size_t begin, std::size_t end) {
      std::vector<double> x(ni), scratch;
      for (std::size_t j = begin; j < end; ++j) {
        std::fill(x.begin(), x.end(), 0.0);
        for (const auto& [k, v] : coupling_[j]) x[static_cast<std::size_t>(k)] += v;
        factor_->solve_in_place(x, scratch);
        double* c = correction.col(j);
        for (std::size_t i = 0; i < nb; ++i) {
          double s = 0.0;
          for (const auto& [k, v] : coupling_[i]) s += v * x[static_cast<std::size_t>(k)];
          c[i] = s;
        }
      }
    };
    const std::size_t nt =
        std::clamp<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), 1, nb);
    if (nt <= 1) {
      work(0, nb);
    } else {
      std::vector<std::thread> pool;
      for (std::size_t t = 0; t < nt; ++t)
        pool.emplace_back(work, nb * t / nt, nb * (t + 1) / nt);
      for (auto& th : pool) th.join();
    }
    for (std::size_t i = 0; i < nb; ++i)
      for (std::size_t j = i + 1; j < nb; ++j)
        L_.weights.set(i, j, L_.weights(i, j) + 0.5 * (correction(i, j) + correction(j, i)));

    // S 1 = e_G - A_GI A_II^{-1} e_I, a sum of nonnegative terms for M-matrices.
    std::vector<double> z = ei, scratch;
    factor_->solve_in_place(z, scratch);
    for (std::size_t i = 0; i < nb; ++i)
      for (const auto& [k, v] : coupling_[i]) L_.excess[i] -= v * z[static_cast<std::size_t>(k)];
  }

  S_ = DenseSym(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    double diag = L_.excess[i];
    for (std::size_t j = 0; j < nb; ++j)
      if (j != i) {
        diag += L_.weights(i, j);
        if (j > i) S_.set(i, j, -L_.weights(i, j));
      }
    S_.set(i, i, diag);
  }
}

FemFunction DtnReduction::extend(const std::vector<double>& g) const {
  if (g.size() != boundary_.size()) throw SizeError("trace has the wrong length");
  FemFunction u(n_, 0.0);
  for (std::size_t k = 0; k < boundary_.size(); ++k) u[static_cast<std::size_t>(boundary_[k])] = g[k];
  if (!interior_.empty()) {
    std::vector<double> x(interior_.size(), 0.0), scratch;
    for (std::size_t j = 0; j < boundary_.size(); ++j)
      for (const auto& [k, v] : coupling_[j]) x[static_cast<std::size_t>(k)] -= v * g[j];
    factor_->solve_in_place(x, scratch);
    for (std::size_t k = 0; k < interior_.size(); ++k) u[static_cast<std::size_t>(interior_[k])] = x[k];
  }
  for (auto it = stiff_.rbegin(); it != stiff_.rend(); ++it) {
    double s = 0.0;
    for (const auto& [j, w] : it->weights) s += w * u[static_cast<std::size_t>(j)];
    u[static_cast<std::size_t>(it->v)] = s / it->pivot;
  }
  return u;
}

DenseSym dtn_reduce(const SparseSym& A, const std::vector<int>& boundary, int threads) {
  return DtnReduction(A, boundary, threads).schur();
}

std::vector<double> system_excess(const fem::FemSpace& V, Problem problem) {
  std::vector<double> e(V.size(), 0.0);
  if (problem == Problem::Harmonic) return e;
  const SparseSym M = fem::mass(V);
  for (std::size_t i = 0; i < M.size(); ++i)
    for (std::size_t p = M.row_ptr()[i]; p < M.row_ptr()[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(M.col_idx()[p]);
      e[i] += M.values()[p];
      if (j != i) e[j] += M.values()[p];
    }
  return e;
}

SparseSym system_matrix(const fem::FemSpace& V, Problem problem) {
  SparseSym K = fem::stiffness(V);
  if (problem == Problem::Harmonic) return K;
  return K.combine(1.0, fem::mass(V), 1.0);
}

namespace {

double row_sum_norm(const SparseSym& A) {
  std::vector<double> s(A.size(), 0.0);
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t p = A.row_ptr()[i]; p < A.row_ptr()[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(A.col_idx()[p]);
      s[i] += std::abs(A.values()[p]);
      if (j != i) s[j] += std::abs(A.values()[p]);
    }
  return norm_inf(s);
}

DenseSym restrict_dense(const SparseSym& B, const std::vector<int>& idx) {
  std::vector<int> pos(B.size(), -1);
  for (std::size_t k = 0; k < idx.size(); ++k) pos[static_cast<std::size_t>(idx[k])] = static_cast<int>(k);
  DenseSym D(idx.size());
  for (std::size_t i = 0; i < B.size(); ++i)
    for (std::size_t p = B.row_ptr()[i]; p < B.row_ptr()[i + 1]; ++p) {
      const auto j = static_cast<std::size_t>(B.col_idx()[p]);
      if (pos[i] >= 0 && pos[j] >= 0)
        D.add(static_cast<std::size_t>(pos[i]), static_cast<std::size_t>(pos[j]), B.values()[p]);
    }
  return D;
}

}  // namespace

SpectrumResult steklov_spectrum(const fem::FemSpace& V, Problem problem, int k, bool constrained,
                                const SpectrumOptions& options) {
  const SparseSym A = system_matrix(V, problem);
  const SparseSym Bw = fem::boundary_weighted_mass(V);
  const std::vector<int>& bnd = V.boundary_vertices();
  const std::size_t nb = bnd.size();
  const std::size_t available = constrained ? nb - 1 : nb;
  if (k < 1 || static_cast<std::size_t>(k) > available)
    throw ParameterError("requested " + std::to_string(k) + " eigenpairs but only " +
                         std::to_string(available) + " boundary modes exist");
  if (nb > options.dense_cap)
    throw SizeError("boundary has " + std::to_string(nb) + " DOFs, above the dense cap of " +
                    std::to_string(options.dense_cap));

  const DtnReduction red(A, bnd, options.threads, system_excess(V, problem));
  const DenseSym MG = restrict_dense(Bw, bnd);
  const std::vector<double> m = MG.multiply(std::vector<double>(nb, 1.0));
  JacobiOptions jo;
  jo.dense_cap = options.dense_cap;

  EigenResult eig;
  try {
    const bool project = problem == Problem::Harmonic || constrained;
    eig = laplacian_pencil_eigen(red.laplacian(), MG, project ? &m : nullptr, jo);
  } catch (const NotSpdError& e) {
    throw WeightError(std::string("boundary mass is not positive definite: ") + e.what());
  }

  SpectrumResult res;
  res.problem = problem;
  res.constrained = constrained;
  res.weight_mode = V.options().weight_mode;
  res.boundary = bnd;
  res.vertices = V.size();
  res.triangles = V.mesh().triangles.size();

  std::vector<std::pair<double, std::vector<double>>> picked;
  if (problem == Problem::Harmonic && !constrained) {
    double mass1 = 0.0;
    for (double v : m) mass1 += v;
    picked.push_back({0.0, std::vector<double>(nb, 1.0 / std::sqrt(mass1))});
  }
  for (std::size_t j = 0; picked.size() < static_cast<std::size_t>(k); ++j)
    picked.push_back({eig.values[j], eig.vectors.column(j)});

  const double anorm = row_sum_norm(A), bnorm = row_sum_norm(Bw);
  const FemFunction ones(V.size(), 1.0);
  const FemFunction m_full = Bw.multiply(ones);
  const double mm = dot(m_full, m_full);
  for (auto& [lambda, g] : picked) {
    EigenPair pr;
    pr.lambda = lambda;
    pr.trace = g;
    pr.volume = red.extend(g);
    const FemFunction Au = A.multiply(pr.volume), Bu = Bw.multiply(pr.volume);
    FemFunction r(Au.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = Au[i] - lambda * Bu[i];
    if (constrained) {
      // Residuals along the constraint direction are Lagrange multipliers.
      const double c = dot(m_full, r) / mm;
      for (std::size_t i = 0; i < r.size(); ++i) r[i] -= c * m_full[i];
    }
    const double scale = (anorm + std::abs(lambda) * bnorm) * norm2(pr.volume);
    pr.residual = scale > 0.0 ? norm2(r) / scale : 0.0;
    pr.rayleigh = dot(pr.volume, Au) / dot(pr.volume, Bu);
    res.pairs.push_back(std::move(pr));
  }
  return res;
}

MinMaxReport minmax_check(const SpectrumResult& result, const SparseSym& A, const SparseSym& Bw,
                          int trials, std::uint64_t seed, std::size_t max_n) {
  MinMaxReport rep;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t N = max_n == 0 ? result.pairs.size() : std::min(max_n, result.pairs.size());
  std::vector<FemFunction> Av, Bv;
  for (std::size_t i = 0; i < N; ++i) {
    Av.push_back(A.multiply(result.pairs[i].volume));
    Bv.push_back(Bw.multiply(result.pairs[i].volume));
  }
  // Gram matrices of the forms on the eigenvectors.
  std::vector<std::vector<double>> GA(N, std::vector<double>(N)), GB = GA;
  for (std::size_t i = 0; i < N; ++i)
    for (std::size_t j = 0; j < N; ++j) {
      GA[i][j] = dot(result.pairs[i].volume, Av[j]);
      GB[i][j] = dot(result.pairs[i].volume, Bv[j]);
    }
  for (std::size_t n = 0; n < N; ++n) {
    const double lam = result.pairs[n].lambda;
    const double self = GA[n][n] / GB[n][n];
    rep.max_self_error = std::max(rep.max_self_error, std::abs(self - lam) / std::max(1.0, std::abs(lam)));
    for (int t = 0; t < trials; ++t) {
      std::vector<double> c(n + 1);
      for (double& x : c) x = normal(rng);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i <= n; ++i)
        for (std::size_t j = 0; j <= n; ++j) {
          num += c[i] * c[j] * GA[i][j];
          den += c[i] * c[j] * GB[i][j];
        }
      rep.max_violation = std::max(rep.max_violation, num / den - lam);
      ++rep.samples;
    }
  }
  rep.ok = rep.max_violation <= 1e-9 && rep.max_self_error <= 1e-10;
  return rep;
}

std::vector<mesh::TriMesh> build_ladder(const LadderSpec& spec) {
  if (spec.levels < 1) throw ParameterError("ladder needs at least one level");
  std::vector<mesh::TriMesh> out;
  if (spec.disk) {
    out.push_back(mesh::disk_mesh(spec.radius, spec.h));
  } else {
    mesh::SizeField size;
    size.h_max = spec.h;
    out.push_back(mesh::generate(spec.domain, size));
  }
  std::shared_ptr<geometry::BoundaryShape> shape;
  if (spec.disk)
    shape = std::make_shared<geometry::DiskShape>(spec.radius);
  else
    shape = std::make_shared<geometry::CuspShape>(spec.domain);
  for (int l = 1; l < spec.levels; ++l) out.push_back(mesh::refine_uniform(out.back(), *shape));
  return out;
}

fem::FemSpace make_space(const LadderSpec& spec, mesh::TriMesh m) {
  return spec.disk ? fem::disk_space(std::move(m), spec.radius, spec.space)
                   : fem::cusp_space(std::move(m), spec.domain, spec.space);
}

ConvergenceResult convergence_study(const LadderSpec& spec, Problem problem, int k,
                                    bool constrained, const SpectrumOptions& options) {
  if (spec.levels < 2) throw ParameterError("a convergence study needs at least two levels");
  ConvergenceResult out;
  for (auto& m : build_ladder(spec)) {
    const fem::FemSpace V = make_space(spec, std::move(m));
    const SpectrumResult r = steklov_spectrum(V, problem, k, constrained, options);
    out.vertices.push_back(V.size());
    std::vector<double> lam;
    for (const auto& p : r.pairs) lam.push_back(p.lambda);
    out.lambda.push_back(std::move(lam));
  }
  const std::size_t L = out.lambda.size();
  out.rel_delta.assign(L, std::vector<double>(static_cast<std::size_t>(k), 0.0));
  for (std::size_t l = 1; l < L; ++l)
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
      const double a = out.lambda[l - 1][j], b = out.lambda[l][j];
      out.rel_delta[l][j] = std::abs(a) > 1e-12 ? (b - a) / std::abs(a) : 0.0;
    }
  for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
    const double a = out.lambda[L - 2][j], b = out.lambda[L - 1][j];
    out.extrapolated.push_back((4.0 * b - a) / 3.0);
    double order = std::numeric_limits<double>::quiet_NaN();
    if (L >= 3) {
      const double z = out.lambda[L - 3][j];
      const double ratio = (a - z) / (b - a);
      if (ratio > 0.0 && std::isfinite(ratio)) order = std::log2(ratio);
    }
    out.observed_order.push_back(order);
  }
  return out;
}

}  // namespace cusp::linear
