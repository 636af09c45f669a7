#include "cuspsteklov/assembly.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>

#include "cuspsteklov/errors.hpp"

namespace cusp::fem {

using geometry::Point;

const char* to_string(Problem p) { return p == Problem::Harmonic ? "harmonic" : "schrodinger"; }
const char* to_string(WeightMode m) { return m == WeightMode::Weighted ? "weighted" : "unweighted"; }

namespace {

void require_p(double p) {
  if (!(p > 1.0) || !std::isfinite(p)) throw ParameterError("exponent p must satisfy p > 1");
}

void require_size(const FemSpace& V, const FemFunction& u) {
  if (u.size() != V.size())
    throw SizeError("FEM function has " + std::to_string(u.size()) + " entries, mesh has " +
                    std::to_string(V.size()) + " vertices");
}

struct GaussRule {
  std::vector<double> x;  // on [0,1]
  std::vector<double> w;  // summing to 1
};

GaussRule gauss(int points) {
  if (points == 2) {
    const double d = 0.5 / std::sqrt(3.0);
    return {{0.5 - d, 0.5 + d}, {0.5, 0.5}};
  }
  if (points == 4) {
    const double a = std::sqrt(3.0 / 7.0 - 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double b = std::sqrt(3.0 / 7.0 + 2.0 / 7.0 * std::sqrt(6.0 / 5.0));
    const double wa = (18.0 + std::sqrt(30.0)) / 36.0;
    const double wb = (18.0 - std::sqrt(30.0)) / 36.0;
    return {{0.5 * (1 - b), 0.5 * (1 - a), 0.5 * (1 + a), 0.5 * (1 + b)},
            {0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb}};
  }
  throw ParameterError("boundary quadrature supports 2 or 4 Gauss points");
}

}  // namespace

FemSpace::FemSpace(mesh::TriMesh m, std::shared_ptr<const geometry::BoundaryShape> shape,
                   SpaceOptions options)
    : mesh_(std::move(m)), shape_(std::move(shape)), options_(options) {
  if (!shape_) throw ParameterError("FEM space needs a boundary shape");
  if (!(options_.weight_scale > 0.0)) throw ParameterError("weight scale must be positive");
  mesh::validate(mesh_);
  const std::size_t nt = mesh_.triangles.size();
  area_.resize(nt);
  grad_.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    const auto& T = mesh_.triangles[t];
    const Point a = mesh_.vertices[T[0]], b = mesh_.vertices[T[1]], c = mesh_.vertices[T[2]];
    const double A = mesh::signed_area(mesh_, t);
    area_[t] = A;
    const double s = 1.0 / (2.0 * A);
    grad_[t] = {Point{(b.y - c.y) * s, (c.x - b.x) * s}, Point{(c.y - a.y) * s, (a.x - c.x) * s},
                Point{(a.y - b.y) * s, (b.x - a.x) * s}};
  }
  rule4_ = make_rule(4);
  rule_mass_ = make_rule(options_.boundary_mass_points);
  rule_norm_ = rule4_;
  if (options_.perturb_weight && !rule_norm_.empty()) {
    // Perturb the heaviest node so the fault is visible at any resolution.
    std::size_t be = 0, bg = 0;
    for (std::size_t e = 0; e < rule_norm_.size(); ++e)
      for (std::size_t g = 0; g < rule_norm_[e].weight.size(); ++g)
        if (rule_norm_[e].weight[g] > rule_norm_[be].weight[bg]) {
          be = e;
          bg = g;
        }
    rule_norm_[be].weight[bg] *= 1.1;
  }
  for (std::size_t v = 0; v < mesh_.boundary_vertex.size(); ++v)
    if (mesh_.boundary_vertex[v]) boundary_vertices_.push_back(static_cast<int>(v));
}

double FemSpace::weight(geometry::Segment seg, double param) const {
  if (options_.weight_mode == WeightMode::Unweighted) return options_.weight_scale;
  return options_.weight_scale * shape_->weight_at(seg, param);
}

std::vector<FemSpace::EdgeRule> FemSpace::make_rule(int points) const {
  const GaussRule g = gauss(points);
  std::vector<EdgeRule> rules;
  rules.reserve(mesh_.boundary_edges.size());
  for (const auto& e : mesh_.boundary_edges) {
    EdgeRule r;
    r.v = e.v;
    const double len = geometry::norm(mesh_.vertices[e.v[1]] - mesh_.vertices[e.v[0]]);
    for (std::size_t k = 0; k < g.x.size(); ++k) {
      const double param = e.param[0] + g.x[k] * (e.param[1] - e.param[0]);
      r.s.push_back(g.x[k]);
      r.weight.push_back(g.w[k] * len * weight(e.tag, param));
    }
    rules.push_back(std::move(r));
  }
  return rules;
}

FemSpace cusp_space(mesh::TriMesh mesh, const geometry::DomainSpec& spec, SpaceOptions options) {
  return FemSpace(std::move(mesh), std::make_shared<geometry::CuspShape>(spec), options);
}

FemSpace disk_space(mesh::TriMesh mesh, double radius, SpaceOptions options) {
  return FemSpace(std::move(mesh), std::make_shared<geometry::DiskShape>(radius), options);
}

std::array<std::array<double, 3>, 3> element_stiffness(Point a, Point b, Point c) {
  const double A = 0.5 * geometry::cross(b - a, c - a);
  if (!(A > 0.0)) throw GeometryError("element must have positive area");
  const double s = 1.0 / (2.0 * A);
  const std::array<Point, 3> g{Point{(b.y - c.y) * s, (c.x - b.x) * s},
                               Point{(c.y - a.y) * s, (a.x - c.x) * s},
                               Point{(a.y - b.y) * s, (b.x - a.x) * s}};
  std::array<std::array<double, 3>, 3> k{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) k[i][j] = A * geometry::dot(g[i], g[j]);
  return k;
}

SparseSym stiffness(const FemSpace& V) {
  std::vector<Triplet> t;
  t.reserve(9 * V.mesh().triangles.size());
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const auto& g = V.grads(e);
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) t.push_back({T[i], T[j], V.area(e) * geometry::dot(g[i], g[j])});
  }
  return SparseSym::from_triplets(V.size(), std::move(t));
}

SparseSym mass(const FemSpace& V) {
  std::vector<Triplet> t;
  t.reserve(6 * V.mesh().triangles.size());
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const double a = V.area(e) / 12.0;
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) t.push_back({T[i], T[j], i == j ? 2.0 * a : a});
  }
  return SparseSym::from_triplets(V.size(), std::move(t));
}

SparseSym boundary_weighted_mass(const FemSpace& V) {
  std::vector<Triplet> t;
  for (const auto& r : V.boundary_rule_mass()) {
    double m00 = 0.0, m01 = 0.0, m11 = 0.0;
    for (std::size_t k = 0; k < r.s.size(); ++k) {
      const double p0 = 1.0 - r.s[k], p1 = r.s[k];
      m00 += r.weight[k] * p0 * p0;
      m01 += r.weight[k] * p0 * p1;
      m11 += r.weight[k] * p1 * p1;
    }
    t.push_back({r.v[0], r.v[0], m00});
    t.push_back({r.v[0], r.v[1], m01});
    t.push_back({r.v[1], r.v[1], m11});
  }
  return SparseSym::from_triplets(V.size(), std::move(t));
}

namespace {

// Mid-edge values of u on triangle e: edge k opposite vertex k.
std::array<double, 3> midvalues(const std::array<int, 3>& T, const FemFunction& u) {
  return {0.5 * (u[T[1]] + u[T[2]]), 0.5 * (u[T[2]] + u[T[0]]), 0.5 * (u[T[0]] + u[T[1]])};
}

}  // namespace

Point element_gradient(const FemSpace& V, std::size_t e, const FemFunction& u) {
  const auto& T = V.mesh().triangles[e];
  const auto& g = V.grads(e);
  int a = 0;
  for (int i = 1; i < 3; ++i)
    if (geometry::dot(g[i], g[i]) > geometry::dot(g[a], g[a])) a = i;
  const int b = (a + 1) % 3, c = (a + 2) % 3;
  return (u[T[b]] - u[T[a]]) * g[b] + (u[T[c]] - u[T[a]]) * g[c];
}

TangentRegularization tangent_regularization(const FemSpace& V, std::size_t e,
                                             const FemFunction& u, double p, double epsilon) {
  TangentRegularization r{epsilon, epsilon};
  if (p >= 2.0) return r;
  const double em = std::numeric_limits<double>::epsilon();
  const auto& T = V.mesh().triangles[e];
  const auto& gr = V.grads(e);
  double dg = 0.0, du = 0.0;
  for (int k = 0; k < 3; ++k) {
    dg += std::abs(u[T[k]]) * std::sqrt(geometry::dot(gr[k], gr[k]));
    du = std::max(du, std::abs(u[T[k]]));
  }
  if (em * dg > 0.0) r.grad = std::min(epsilon, em * dg);
  if (em * du > 0.0) r.value = std::min(epsilon, em * du);
  return r;
}

double sobolev_pnorm(const FemSpace& V, const FemFunction& u, double p) {
  require_p(p);
  require_size(V, u);
  double grad_part = 0.0, value_part = 0.0;
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const Point g = element_gradient(V, e, u);
    const double gg = geometry::dot(g, g);
    grad_part += V.area(e) * (p == 2.0 ? gg : std::pow(gg, 0.5 * p));
    const auto m = midvalues(V.mesh().triangles[e], u);
    double s = 0.0;
    for (double x : m) s += p == 2.0 ? x * x : std::pow(std::abs(x), p);
    value_part += V.area(e) / 3.0 * s;
  }
  return grad_part + value_part;
}

double boundary_weighted_pnorm(const FemSpace& V, const FemFunction& u, double p) {
  require_p(p);
  require_size(V, u);
  double s = 0.0;
  for (const auto& r : V.boundary_rule_norm())
    for (std::size_t k = 0; k < r.s.size(); ++k) {
      const double x = (1.0 - r.s[k]) * u[r.v[0]] + r.s[k] * u[r.v[1]];
      s += r.weight[k] * (p == 2.0 ? x * x : std::pow(std::abs(x), p));
    }
  return s;
}

double rayleigh_quotient(const FemSpace& V, const FemFunction& u, double p, Problem problem) {
  if (problem == Problem::Harmonic) {
    if (p != 2.0) throw ParameterError("the harmonic quotient is defined for p = 2 only");
    require_size(V, u);
    const double den = boundary_weighted_mass(V).quad(u);
    if (!(den > 0.0)) throw QuotientUndefined("boundary norm vanishes; quotient undefined");
    return stiffness(V).quad(u) / den;
  }
  const double den = boundary_weighted_pnorm(V, u, p);
  if (!(den > 0.0)) throw QuotientUndefined("boundary norm vanishes; quotient undefined");
  return sobolev_pnorm(V, u, p) / den;
}

FemFunction apply_A(const FemSpace& V, const FemFunction& u, double p) {
  require_p(p);
  require_size(V, u);
  FemFunction r(V.size(), 0.0);
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const auto& gr = V.grads(e);
    const Point g = element_gradient(V, e, u);
    const double gg = geometry::dot(g, g);
    const double coef = gg == 0.0 ? 0.0 : (p == 2.0 ? 1.0 : std::pow(gg, 0.5 * (p - 2.0)));
    const double A = V.area(e);
    const auto m = midvalues(T, u);
    double sm[3];
    for (int k = 0; k < 3; ++k) sm[k] = p == 2.0 ? m[k] : spow(m[k], p);
    for (int i = 0; i < 3; ++i) {
      // vertex i touches the two mid-edge nodes not opposite to it, with value 1/2
      const double value = A / 3.0 * 0.5 * (sm[(i + 1) % 3] + sm[(i + 2) % 3]);
      r[T[i]] += A * coef * geometry::dot(g, gr[i]) + value;
    }
  }
  return r;
}

FemFunction apply_B(const FemSpace& V, const FemFunction& f, double p) {
  require_p(p);
  require_size(V, f);
  FemFunction r(V.size(), 0.0);
  for (const auto& rule : V.boundary_rule4())
    for (std::size_t k = 0; k < rule.s.size(); ++k) {
      const double p0 = 1.0 - rule.s[k], p1 = rule.s[k];
      const double x = p0 * f[rule.v[0]] + p1 * f[rule.v[1]];
      const double v = rule.weight[k] * (p == 2.0 ? x : spow(x, p));
      r[rule.v[0]] += v * p0;
      r[rule.v[1]] += v * p1;
    }
  return r;
}

double orthogonality_functional(const FemSpace& V, const FemFunction& u, double p) {
  const FemFunction b = apply_B(V, u, p);
  double s = 0.0;
  for (double x : b) s += x;
  return s;
}

SparseSym tangent_A(const FemSpace& V, const FemFunction& u, double p, double eps) {
  require_p(p);
  require_size(V, u);
  if (!(eps > 0.0)) throw ParameterError("regularization epsilon must be positive");
  std::vector<Triplet> t;
  t.reserve(6 * V.mesh().triangles.size());
  for (std::size_t e = 0; e < V.mesh().triangles.size(); ++e) {
    const auto& T = V.mesh().triangles[e];
    const auto& gr = V.grads(e);
    const Point g = element_gradient(V, e, u);
    const auto reg = tangent_regularization(V, e, u, p, eps);
    const double q = geometry::dot(g, g) + reg.grad * reg.grad;
    const double c1 = p == 2.0 ? 1.0 : std::pow(q, 0.5 * (p - 2.0));
    const double c2 = p == 2.0 ? 0.0 : (p - 2.0) * std::pow(q, 0.5 * (p - 4.0));
    const double A = V.area(e);
    const auto m = midvalues(T, u);
    double wm[3];
    for (int k = 0; k < 3; ++k)
      wm[k] = p == 2.0 ? 1.0
                       : (p - 1.0) * std::pow(m[k] * m[k] + reg.value * reg.value, 0.5 * (p - 2.0));
    for (int i = 0; i < 3; ++i)
      for (int j = i; j < 3; ++j) {
        const double kij =
            A * (c1 * geometry::dot(gr[i], gr[j]) + c2 * geometry::dot(g, gr[i]) * geometry::dot(g, gr[j]));
        // mid-edge node k contributes phi_i phi_j = 1/4 when neither i nor j equals k
        double mij = 0.0;
        for (int k = 0; k < 3; ++k)
          if (k != i && k != j) mij += 0.25 * wm[k];
        t.push_back({T[i], T[j], kij + A / 3.0 * mij});
      }
  }
  return SparseSym::from_triplets(V.size(), std::move(t));
}

namespace {

double dotf(const FemFunction& a, const FemFunction& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double inf_normf(const FemFunction& a) {
  double s = 0.0;
  for (double x : a) s = std::max(s, std::abs(x));
  return s;
}

// Largest |a - s b| relative to |s| ||b||_inf.
double homogeneity_defect(const FemFunction& a, const FemFunction& b, double s) {
  const double scale = std::abs(s) * inf_normf(b);
  if (scale == 0.0) return inf_normf(a) == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - s * b[i]));
  return d / scale;
}

// Samples and scalings carry few significant bits so that t * f is exact in double: a
// rounded t * f differs from the scaled function by eps |f|, which needle gradients
// (|grad phi| ~ 1e8 near a sharp tip) blow up far beyond any homogeneity defect of A.
double quantize(double x, int bits) { return std::ldexp(std::round(std::ldexp(x, bits)), -bits); }

FemFunction sample_function(const FemSpace& V, std::mt19937_64& rng, bool smooth) {
  std::normal_distribution<double> normal(0.0, 1.0);
  FemFunction u(V.size());
  if (!smooth) {
    for (double& x : u) x = quantize(normal(rng), 24);
    return u;
  }
  double c[6];
  for (double& x : c) x = normal(rng);
  const auto& P = V.mesh().vertices;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double x = P[i].x, y = P[i].y;
    u[i] = quantize(c[0] + c[1] * x + c[2] * y + c[3] * x * x + c[4] * x * y + c[5] * y * y, 24);
  }
  return u;
}

}  // namespace

OperatorPropertyReport operator_properties(const FemSpace& V, double p, int pairs,
                                           std::uint64_t seed) {
  require_p(p);
  if (pairs < 1) throw ParameterError("property sampling needs at least one pair");
  OperatorPropertyReport rep;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> tdist(-3.0, 3.0), tpos(0.0, 3.0);
  for (int k = 0; k < pairs; ++k) {
    const FemFunction f = sample_function(V, rng, k % 2 == 1);
    const FemFunction v = sample_function(V, rng, k % 4 >= 2);
    const FemFunction Af = apply_A(V, f, p), Bf = apply_B(V, f, p);
    const double Nf = sobolev_pnorm(V, f, p), Nv = sobolev_pnorm(V, v, p);
    const double bf = boundary_weighted_pnorm(V, f, p), bv = boundary_weighted_pnorm(V, v, p);

    double t = quantize(tdist(rng), 20);
    if (t == 0.0) t = 1.0;
    FemFunction tf = f;
    for (double& x : tf) x *= t;
    const double s = spow(t, p);
    rep.h1_homogeneity = std::max(rep.h1_homogeneity, homogeneity_defect(apply_A(V, tf, p), Af, s));
    rep.h2_homogeneity = std::max(rep.h2_homogeneity, homogeneity_defect(apply_B(V, tf, p), Bf, s));

    const double h3_bound = std::pow(Nf, (p - 1.0) / p) * std::pow(Nv, 1.0 / p);
    if (h3_bound > 0.0)
      rep.h3_holder = std::max(rep.h3_holder, (dotf(Af, v) - h3_bound) / h3_bound);
    const double h4_bound = std::pow(bf, (p - 1.0) / p) * std::pow(bv, 1.0 / p);
    if (h4_bound > 0.0)
      rep.h4_holder = std::max(rep.h4_holder, (dotf(Bf, v) - h4_bound) / h4_bound);

    const FemFunction Av = apply_A(V, v, p);
    double mono = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) mono += (Af[i] - Av[i]) * (f[i] - v[i]);
    const double mscale = std::abs(dotf(Af, f)) + std::abs(dotf(Av, v));
    if (mscale > 0.0) rep.monotonicity = std::max(rep.monotonicity, -mono / mscale);

    double te = quantize(tpos(rng), 20);
    if (te == 0.0) te = 1.0;
    FemFunction ef = f;
    for (double& x : ef) x *= te;
    const double Ne = sobolev_pnorm(V, ef, p), be = boundary_weighted_pnorm(V, ef, p);
    const double e3 = std::pow(Nf, (p - 1.0) / p) * std::pow(Ne, 1.0 / p);
    if (e3 > 0.0) rep.h3_equality = std::max(rep.h3_equality, std::abs(dotf(Af, ef) - e3) / e3);
    const double e4 = std::pow(bf, (p - 1.0) / p) * std::pow(be, 1.0 / p);
    if (e4 > 0.0) rep.h4_equality = std::max(rep.h4_equality, std::abs(dotf(Bf, ef) - e4) / e4);

    if (Nf > 0.0)
      rep.coercivity_identity = std::max(rep.coercivity_identity, std::abs(dotf(Af, f) - Nf) / Nf);
    if (bf > 0.0)
      rep.pairing_identity = std::max(rep.pairing_identity, std::abs(dotf(Bf, f) - bf) / bf);
    ++rep.pairs;
  }
  return rep;
}

}  // namespace cusp::fem
