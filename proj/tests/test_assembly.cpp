#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cuspsteklov/assembly.hpp"
#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/mesh.hpp"

using namespace cusp;
using namespace cusp::fem;

namespace {

geometry::DomainSpec power_domain(double alpha) {
  geometry::DomainSpec s;
  s.gamma = geometry::CuspProfile::power(alpha);
  return s;
}

FemSpace cusp_at(double alpha, SpaceOptions opt = {}) {
  const auto spec = power_domain(alpha);
  return cusp_space(mesh::generate(spec, mesh::SizeField{0.2}), spec, opt);
}

FemSpace disk(double h = 0.2) { return disk_space(mesh::disk_mesh(1.0, h), 1.0); }

FemFunction coord(const FemSpace& V, int axis) {
  FemFunction u(V.size());
  for (std::size_t v = 0; v < V.size(); ++v) u[v] = axis == 0 ? V.mesh().vertices[v].x : V.mesh().vertices[v].y;
  return u;
}

FemFunction noise(const FemSpace& V, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  FemFunction u(V.size());
  for (auto& x : u) x = g(rng);
  return u;
}

double perimeter(const mesh::TriMesh& m) {
  double s = 0.0;
  for (const auto& e : m.boundary_edges) s += geometry::norm(m.vertices[e.v[1]] - m.vertices[e.v[0]]);
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("reference element stiffness") {
  const auto k = element_stiffness({0, 0}, {1, 0}, {0, 1});
  const double want[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) CHECK(k[i][j] == doctest::Approx(want[i][j]).epsilon(1e-15));
}

TEST_CASE("stiffness and mass reproduce exact integrals") {
  const FemSpace spaces[] = {disk(), cusp_at(2.0)};
  for (const FemSpace& V : spaces) {
    const SparseSym K = stiffness(V), M = mass(V);
    const double area = mesh::total_area(V.mesh());
    const FemFunction one = V.constant(1.0), x = coord(V, 0), y = coord(V, 1);
    double kmax = 0.0;
    for (double v : K.values()) kmax = std::max(kmax, std::abs(v));
    CHECK(norm_inf(K.multiply(one)) <= 1e-12 * kmax);
    CHECK(rel(M.quad(one), area) < 1e-13);
    CHECK(rel(K.quad(x), area) < 1e-12);   // |grad x|^2 = 1
    CHECK(rel(K.quad(y), area) < 1e-12);
    // first moment: 1^T M y = integral of y, from the centroid formula
    double iy = 0.0;
    for (std::size_t t = 0; t < V.mesh().num_triangles(); ++t) {
      const auto& T = V.mesh().triangles[t];
      iy += mesh::signed_area(V.mesh(), t) *
            (V.mesh().vertices[T[0]].y + V.mesh().vertices[T[1]].y + V.mesh().vertices[T[2]].y) / 3.0;
    }
    CHECK(rel(dot(one, M.multiply(y)), iy) < 1e-12);
    for (unsigned s = 0; s < 5; ++s) {
      const FemFunction u = noise(V, s);
      CHECK(K.quad(u) >= 0.0);
      CHECK(M.quad(u) > 0.0);
      CHECK(boundary_weighted_mass(V).quad(u) > 0.0);
    }
  }
}

TEST_CASE("boundary mass integrates the weight") {
  const FemSpace D = disk();
  CHECK(rel(boundary_weighted_mass(D).quad(D.constant(1.0)), perimeter(D.mesh())) < 1e-13);
  // cusp: integral of w over the polygonal boundary, with w from the curve parameter at Gauss points
  const FemSpace V = cusp_at(2.0);
  double want = 0.0;
  const double g = 0.5 / std::sqrt(3.0);
  for (const auto& e : V.mesh().boundary_edges) {
    const double len = geometry::norm(V.mesh().vertices[e.v[1]] - V.mesh().vertices[e.v[0]]);
    for (double s : {0.5 - g, 0.5 + g})
      want += 0.5 * len * V.weight(e.tag, e.param[0] + s * (e.param[1] - e.param[0]));
  }
  CHECK(rel(boundary_weighted_mass(V).quad(V.constant(1.0)), want) < 1e-12);
  // weight scale and the unweighted mode
  SpaceOptions twice;
  twice.weight_scale = 2.0;
  CHECK(rel(boundary_weighted_mass(cusp_at(2.0, twice)).quad(V.constant(1.0)), 2.0 * want) < 1e-14);
  SpaceOptions flat;
  flat.weight_mode = WeightMode::Unweighted;
  CHECK(rel(boundary_weighted_mass(cusp_at(2.0, flat)).quad(V.constant(1.0)), perimeter(V.mesh())) < 1e-13);
}

TEST_CASE("p = 2 norms and operators are the quadratic forms") {
  const FemSpace V = disk();
  const SparseSym KM = stiffness(V).combine(1.0, mass(V), 1.0), B = boundary_weighted_mass(V);
  for (unsigned s = 0; s < 3; ++s) {
    const FemFunction u = noise(V, s);
    CHECK(rel(sobolev_pnorm(V, u, 2.0), KM.quad(u)) < 1e-12);
    CHECK(rel(boundary_weighted_pnorm(V, u, 2.0), B.quad(u)) < 1e-12);
    const auto a = apply_A(V, u, 2.0), ka = KM.multiply(u);
    const auto b = apply_B(V, u, 2.0), kb = B.multiply(u);
    for (std::size_t i = 0; i < V.size(); ++i) {
      CHECK(std::abs(a[i] - ka[i]) <= 1e-12 * norm_inf(ka));
      CHECK(std::abs(b[i] - kb[i]) <= 1e-12 * norm_inf(kb));
    }
  }
}

TEST_CASE("constant functions have closed-form p-norms") {
  const FemSpace V = cusp_at(3.0);
  const double area = mesh::total_area(V.mesh());
  const double bw = boundary_weighted_mass(V).quad(V.constant(1.0));
  for (double p : {1.5, 2.0, 3.0}) {
    CHECK(rel(sobolev_pnorm(V, V.constant(2.0), p), std::pow(2.0, p) * area) < 1e-13);
    CHECK(rel(boundary_weighted_pnorm(V, V.constant(-2.0), p), std::pow(2.0, p) * bw) < 1e-6);
  }
}

TEST_CASE("element gradient of a linear function") {
  const FemSpace V = cusp_at(3.0);
  FemFunction u(V.size());
  for (std::size_t v = 0; v < V.size(); ++v) u[v] = 3.0 * V.mesh().vertices[v].x - 2.0 * V.mesh().vertices[v].y + 1.0;
  for (std::size_t e = 0; e < V.mesh().num_triangles(); ++e) {
    const auto g = element_gradient(V, e, u);
    // nodal values carry rounding of eps |u_k|; in a needle it is amplified by |grad phi_k|
    double tol = 0.0;
    for (int k = 0; k < 3; ++k)
      tol += 8.0 * 2.2e-16 * std::abs(u[V.mesh().triangles[e][k]]) * geometry::norm(V.grads(e)[k]);
    CHECK(std::abs(g.x - 3.0) <= std::max(tol, 1e-13));
    CHECK(std::abs(g.y + 2.0) <= std::max(tol, 1e-13));
  }
}

TEST_CASE("Rayleigh quotient") {
  const FemSpace V = disk();
  const FemFunction x = coord(V, 0);
  // harmonic x on the unit disk: R = |grad|^2 area / boundary integral of x^2 ~ 1
  CHECK(rayleigh_quotient(V, x, 2.0, Problem::Harmonic) == doctest::Approx(1.0).epsilon(0.02));
  CHECK_THROWS_AS(rayleigh_quotient(V, x, 3.0, Problem::Harmonic), ParameterError);
  FemFunction interior(V.size(), 0.0);
  for (std::size_t v = 0; v < V.size(); ++v)
    if (!V.mesh().boundary_vertex[v]) interior[v] = 1.0;
  CHECK_THROWS_AS(rayleigh_quotient(V, interior, 2.0, Problem::Schrodinger), QuotientUndefined);
}

TEST_CASE("tangent matrix is the derivative of A") {
  const FemSpace V = cusp_at(2.0);
  FemFunction u = noise(V, 11);
  for (auto& x : u) x += 3.0;  // keep away from the kink of |u|^{p-2}
  const FemFunction d = noise(V, 12);
  for (double p : {2.0, 3.0, 4.0}) {
    const SparseSym T = tangent_A(V, u, p, 1e-12);
    const double h = 1e-6;
    FemFunction up = u, um = u;
    for (std::size_t i = 0; i < u.size(); ++i) up[i] += h * d[i], um[i] -= h * d[i];
    const auto ap = apply_A(V, up, p), am = apply_A(V, um, p), td = T.multiply(d);
    double err = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) err = std::max(err, std::abs((ap[i] - am[i]) / (2 * h) - td[i]));
    CHECK(err <= 1e-5 * norm_inf(td));
  }
  const SparseSym T2 = tangent_A(V, u, 2.0, 1e-8), KM = stiffness(V).combine(1.0, mass(V), 1.0);
  for (unsigned s = 0; s < 3; ++s) {
    const auto w = noise(V, 20 + s);
    CHECK(rel(T2.quad(w), KM.quad(w)) < 1e-12);
  }
}

TEST_CASE("tangent regularization is capped at rounding level below p = 2") {
  const FemSpace V = cusp_at(3.0);
  const FemFunction u = noise(V, 5);
  for (std::size_t e = 0; e < V.mesh().num_triangles(); e += 17) {
    const auto r = tangent_regularization(V, e, u, 1.5, 1e-8);
    CHECK(r.grad <= 1e-8);
    CHECK(r.value <= 1e-8);
    CHECK(r.grad >= 0.0);
    const auto q = tangent_regularization(V, e, u, 3.0, 1e-8);
    CHECK(q.grad == 1e-8);
  }
}

TEST_CASE("operator properties hold on cusp spaces") {
  for (double a : {1.5, 2.0, 3.0}) {
    const FemSpace V = cusp_at(a);
    for (double p : {1.5, 2.0, 3.0}) {
      const auto r = operator_properties(V, p, 40, 7);
      CHECK(r.pairs == 40);
      CHECK(r.h1_homogeneity <= 1e-13);
      CHECK(r.h2_homogeneity <= 1e-13);
      CHECK(r.h3_holder <= 1e-10);
      CHECK(r.h4_holder <= 1e-10);
      CHECK(r.monotonicity <= 1e-10);
      CHECK(r.h3_equality <= 1e-10);
      CHECK(r.h4_equality <= 1e-10);
      CHECK(r.coercivity_identity <= 1e-12);
      CHECK(r.pairing_identity <= 1e-12);
    }
  }
}

TEST_CASE("fault injection breaks the boundary pairing") {
  SpaceOptions opt;
  opt.perturb_weight = true;
  const FemSpace V = cusp_at(2.0, opt);
  const auto r = operator_properties(V, 2.0, 20, 7);
  CHECK(r.pairing_identity > 1e-6);
  CHECK(r.h1_homogeneity <= 1e-13);
}

TEST_CASE("orthogonality functional is the boundary integral of |u|^{p-2} u w") {
  const FemSpace V = cusp_at(2.0);
  const SparseSym B = boundary_weighted_mass(V);
  const double bw = B.quad(V.constant(1.0));
  for (double p : {1.5, 2.0, 3.0})
    CHECK(rel(orthogonality_functional(V, V.constant(2.0), p), std::pow(2.0, p - 1.0) * bw) < 1e-6);
  const FemFunction u = noise(V, 3);
  CHECK(rel(orthogonality_functional(V, u, 2.0), dot(V.constant(1.0), B.multiply(u))) < 1e-10);
}
