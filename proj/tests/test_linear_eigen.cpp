#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/linear_eigen.hpp"

using namespace cusp;
using namespace cusp::linear;

namespace {

geometry::DomainSpec power_domain(double alpha) {
  geometry::DomainSpec s;
  s.gamma = geometry::CuspProfile::power(alpha);
  return s;
}

fem::FemSpace cusp_at(double alpha, fem::SpaceOptions opt = {}, double h = 0.25) {
  const auto spec = power_domain(alpha);
  return fem::cusp_space(mesh::generate(spec, mesh::SizeField{h}), spec, opt);
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

// Dense Schur complement in long double, the oracle for the boundary reduction.
std::vector<std::vector<long double>> dense_schur(const SparseSym& A, const std::vector<int>& G) {
  const std::size_t n = A.size();
  std::vector<char> isb(n, 0);
  for (int g : G) isb[static_cast<std::size_t>(g)] = 1;
  std::vector<std::size_t> I;
  for (std::size_t i = 0; i < n; ++i)
    if (!isb[i]) I.push_back(i);
  const std::size_t ni = I.size(), nb = G.size();
  // [A_II | A_IG] reduced by Gauss-Jordan
  std::vector<std::vector<long double>> M(ni, std::vector<long double>(ni + nb));
  for (std::size_t r = 0; r < ni; ++r) {
    for (std::size_t c = 0; c < ni; ++c) M[r][c] = A.at(I[r], I[c]);
    for (std::size_t c = 0; c < nb; ++c) M[r][ni + c] = A.at(I[r], static_cast<std::size_t>(G[c]));
  }
  for (std::size_t c = 0; c < ni; ++c) {
    for (std::size_t r = 0; r < ni; ++r) {
      if (r == c || M[r][c] == 0.0L) continue;
      const long double f = M[r][c] / M[c][c];
      for (std::size_t j = c; j < ni + nb; ++j) M[r][j] -= f * M[c][j];
    }
  }
  std::vector<std::vector<long double>> S(nb, std::vector<long double>(nb));
  for (std::size_t a = 0; a < nb; ++a)
    for (std::size_t b = 0; b < nb; ++b) {
      long double s = A.at(static_cast<std::size_t>(G[a]), static_cast<std::size_t>(G[b]));
      for (std::size_t r = 0; r < ni; ++r) s -= A.at(static_cast<std::size_t>(G[a]), I[r]) * M[r][ni + b] / M[r][r];
      S[a][b] = s;
    }
  return S;
}

}  // namespace

TEST_CASE("boundary reduction matches the dense Schur complement") {
  const fem::FemSpace V = fem::disk_space(mesh::disk_mesh(1.0, 0.3), 1.0);
  const SparseSym A = system_matrix(V, Problem::Schrodinger);
  const auto& G = V.boundary_vertices();
  const DtnReduction R(A, G);
  const auto S = dense_schur(A, G);
  double err = 0.0, scale = 0.0;
  for (std::size_t a = 0; a < G.size(); ++a)
    for (std::size_t b = 0; b < G.size(); ++b) {
      err = std::max(err, static_cast<double>(std::abs(R.schur()(a, b) - S[a][b])));
      scale = std::max(scale, static_cast<double>(std::abs(S[a][b])));
    }
  CHECK(err <= 1e-12 * scale);
  // the extension is discretely harmonic: A u vanishes at interior nodes
  std::vector<double> g(G.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::cos(static_cast<double>(i));
  const auto u = R.extend(g);
  const auto Au = A.multiply(u);
  std::vector<char> isb(V.size(), 0);
  for (int b : G) isb[static_cast<std::size_t>(b)] = 1;
  for (std::size_t i = 0; i < V.size(); ++i)
    if (!isb[i]) CHECK(std::abs(Au[i]) <= 1e-12 * norm_inf(Au));
  for (std::size_t i = 0; i < G.size(); ++i) CHECK(u[static_cast<std::size_t>(G[i])] == g[i]);
  CHECK_THROWS_AS(R.extend(std::vector<double>(3)), SizeError);
}

TEST_CASE("boundary reduction does not depend on the thread count") {
  const fem::FemSpace V = cusp_at(2.0);
  const SparseSym A = system_matrix(V, Problem::Harmonic);
  const DenseSym S1 = dtn_reduce(A, V.boundary_vertices(), 1);
  const DenseSym S3 = dtn_reduce(A, V.boundary_vertices(), 3);
  CHECK(std::equal(S1.data(), S1.data() + S1.size() * S1.size(), S3.data()));
}

TEST_CASE("disk Steklov spectrum") {
  const fem::FemSpace V = fem::disk_space(mesh::disk_mesh(1.0, 0.1), 1.0);
  const auto r = steklov_spectrum(V, Problem::Harmonic, 7, false);
  REQUIRE(r.pairs.size() == 7);
  const double want[] = {0, 1, 1, 2, 2, 3, 3};
  CHECK(std::abs(r.pairs[0].lambda) <= 1e-10);
  for (int j = 1; j < 7; ++j) CHECK(r.pairs[j].lambda == doctest::Approx(want[j]).epsilon(0.03));
  for (int j = 1; j < 7; ++j) CHECK(r.pairs[j].lambda >= r.pairs[j - 1].lambda);
  const auto s = steklov_spectrum(V, Problem::Schrodinger, 2, false);
  const double bessel = std::cyl_bessel_i(1.0, 1.0) / std::cyl_bessel_i(0.0, 1.0);
  CHECK(s.pairs[0].lambda == doctest::Approx(bessel).epsilon(0.02));
}

TEST_CASE("Rayleigh identity and boundary orthonormality") {
  const fem::FemSpace V = cusp_at(2.0);
  for (Problem pr : {Problem::Harmonic, Problem::Schrodinger}) {
    const auto r = steklov_spectrum(V, pr, 5, false);
    const SparseSym A = system_matrix(V, pr), B = fem::boundary_weighted_mass(V);
    for (std::size_t i = 0; i < r.pairs.size(); ++i) {
      const auto& v = r.pairs[i].volume;
      const double num = A.quad(v), den = B.quad(v);
      if (r.pairs[i].lambda > 1e-8) CHECK(rel(num / den, r.pairs[i].lambda) <= 1e-10);
      CHECK(std::abs(r.pairs[i].lambda - r.pairs[i].rayleigh) <= 1e-10 * std::max(1.0, r.pairs[i].lambda));
      CHECK(r.pairs[i].residual <= 1e-10);
      for (std::size_t j = 0; j < r.pairs.size(); ++j) {
        const double bij = dot(r.pairs[j].volume, B.multiply(v));
        CHECK(std::abs(bij - (i == j ? 1.0 : 0.0)) <= 1e-8);
      }
    }
  }
}

TEST_CASE("harmonic lambda_0 is zero with a constant eigenfunction") {
  for (double a : {1.5, 2.0, 3.0}) {
    const auto r = steklov_spectrum(cusp_at(a), Problem::Harmonic, 3, false);
    CHECK(r.pairs[0].lambda <= 1e-9 * r.pairs[1].lambda);
    const auto& v = r.pairs[0].volume;
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    CHECK(*hi - *lo <= 1e-10 * std::abs(*hi));
  }
}

TEST_CASE("eigenvalues are invariant under vertex renumbering") {
  const auto spec = power_domain(2.0);
  const mesh::TriMesh m = mesh::generate(spec, mesh::SizeField{0.3});
  std::vector<int> perm(m.num_vertices());
  std::iota(perm.begin(), perm.end(), 0);
  std::mt19937_64 rng(9);
  std::shuffle(perm.begin(), perm.end(), rng);
  mesh::TriMesh p = m;
  for (std::size_t v = 0; v < m.num_vertices(); ++v) p.vertices[static_cast<std::size_t>(perm[v])] = m.vertices[v];
  for (auto& t : p.triangles)
    for (int& k : t) k = perm[static_cast<std::size_t>(k)];
  for (auto& e : p.boundary_edges)
    for (int& k : e.v) k = perm[static_cast<std::size_t>(k)];
  mesh::update_boundary_flags(p);
  const auto a = steklov_spectrum(fem::cusp_space(m, spec), Problem::Schrodinger, 5, false);
  const auto b = steklov_spectrum(fem::cusp_space(p, spec), Problem::Schrodinger, 5, false);
  for (int j = 0; j < 5; ++j) CHECK(rel(b.pairs[j].lambda, a.pairs[j].lambda) <= 1e-12);
}

TEST_CASE("doubling the weight halves every eigenvalue") {
  fem::SpaceOptions two;
  two.weight_scale = 2.0;
  for (Problem pr : {Problem::Harmonic, Problem::Schrodinger}) {
    const auto a = steklov_spectrum(cusp_at(3.0), pr, 5, false);
    const auto b = steklov_spectrum(cusp_at(3.0, two), pr, 5, false);
    for (int j = 0; j < 5; ++j) {
      if (a.pairs[j].lambda < 1e-8) continue;
      CHECK(rel(b.pairs[j].lambda, a.pairs[j].lambda / 2.0) <= 1e-12);
    }
  }
}

TEST_CASE("constrained spectrum interlaces the unconstrained one") {
  for (double a : {1.5, 3.0}) {
    const fem::FemSpace V = cusp_at(a);
    const auto u = steklov_spectrum(V, Problem::Schrodinger, 7, false);
    const auto c = steklov_spectrum(V, Problem::Schrodinger, 6, true);
    const SparseSym B = fem::boundary_weighted_mass(V);
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(c.pairs[j].lambda >= u.pairs[j].lambda - 1e-9);
      CHECK(c.pairs[j].lambda <= u.pairs[j + 1].lambda + 1e-9);
      // the constraint: boundary integral of w v vanishes
      CHECK(std::abs(dot(V.constant(1.0), B.multiply(c.pairs[j].volume))) <= 1e-10);
    }
  }
}

TEST_CASE("min-max characterization") {
  const fem::FemSpace V = cusp_at(2.0);
  const auto r = steklov_spectrum(V, Problem::Harmonic, 5, false);
  const auto mm = minmax_check(r, system_matrix(V, Problem::Harmonic), fem::boundary_weighted_mass(V), 10, 3);
  CHECK(mm.ok);
  CHECK(mm.max_violation <= 1e-9);
  CHECK(mm.max_self_error <= 1e-10);
  CHECK(mm.samples > 0);
}

TEST_CASE("spectra are deterministic") {
  const fem::FemSpace V = cusp_at(3.0);
  const auto a = steklov_spectrum(V, Problem::Schrodinger, 4, false);
  const auto b = steklov_spectrum(V, Problem::Schrodinger, 4, false, SpectrumOptions{2});
  for (int j = 0; j < 4; ++j) {
    CHECK(a.pairs[j].lambda == b.pairs[j].lambda);
    CHECK(a.pairs[j].volume == b.pairs[j].volume);
  }
}

TEST_CASE("bad requests") {
  const fem::FemSpace V = cusp_at(2.0);
  CHECK_THROWS_AS(steklov_spectrum(V, Problem::Harmonic, 100000, false), ParameterError);
  SpectrumOptions tiny;
  tiny.dense_cap = 10;
  CHECK_THROWS_AS(steklov_spectrum(V, Problem::Harmonic, 3, false, tiny), SizeError);
  LadderSpec spec;
  spec.levels = 1;
  CHECK_THROWS_AS(convergence_study(spec, Problem::Harmonic, 3), ParameterError);
  spec.levels = 0;
  CHECK_THROWS_AS(build_ladder(spec), ParameterError);
}

TEST_CASE("refinement ladder and convergence table") {
  LadderSpec spec;
  spec.domain = power_domain(2.0);
  spec.h = 0.3;
  spec.levels = 3;
  const auto ladder = build_ladder(spec);
  REQUIRE(ladder.size() == 3);
  for (std::size_t l = 1; l < 3; ++l) {
    CHECK(ladder[l].num_triangles() == 4 * ladder[l - 1].num_triangles());
    for (std::size_t v = 0; v < ladder[l - 1].num_vertices(); ++v)
      CHECK(ladder[l].vertices[v] == ladder[l - 1].vertices[v]);
  }
  const auto c = convergence_study(spec, Problem::Schrodinger, 3);
  REQUIRE(c.lambda.size() == 3);
  CHECK(c.vertices[0] == ladder[0].num_vertices());
  for (std::size_t l = 1; l < 3; ++l)
    for (std::size_t j = 0; j < 3; ++j)
      CHECK(c.rel_delta[l][j] == doctest::Approx((c.lambda[l][j] - c.lambda[l - 1][j]) / c.lambda[l - 1][j]).epsilon(1e-14));
  // successive differences shrink
  CHECK(std::abs(c.rel_delta[2][0]) < std::abs(c.rel_delta[1][0]));
  CHECK(c.extrapolated.size() == 3);
}
