#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <vector>

#include "cuspsteklov/geometry.hpp"
#include "cuspsteklov/mesh.hpp"
#include "cuspsteklov/sparse.hpp"

namespace cusp::fem {

using FemFunction = std::vector<double>;

enum class Problem { Harmonic, Schrodinger };
enum class WeightMode { Weighted, Unweighted };

const char* to_string(Problem p);
const char* to_string(WeightMode m);

struct SpaceOptions {
  WeightMode weight_mode = WeightMode::Weighted;
  double weight_scale = 1.0;      // w -> scale * w
  int boundary_mass_points = 2;   // Gauss points per edge for B_w (2 or 4)
  bool perturb_weight = false;    // fault injection: one pnorm quadrature weight * 1.1
};

/// P1 space on a mesh with cached element geometry and boundary quadrature. The boundary
/// weight is evaluated at the curve parameter of each quadrature node.
class FemSpace {
 public:
  FemSpace(mesh::TriMesh mesh, std::shared_ptr<const geometry::BoundaryShape> shape,
           SpaceOptions options = {});

  const mesh::TriMesh& mesh() const { return mesh_; }
  const geometry::BoundaryShape& shape() const { return *shape_; }
  std::shared_ptr<const geometry::BoundaryShape> shape_ptr() const { return shape_; }
  const SpaceOptions& options() const { return options_; }
  std::size_t size() const { return mesh_.vertices.size(); }

  double area(std::size_t t) const { return area_[t]; }
  const std::array<geometry::Point, 3>& grads(std::size_t t) const { return grad_[t]; }

  /// Boundary quadrature for one edge: node weights already include length and w.
  struct EdgeRule {
    std::array<int, 2> v{};
    std::vector<double> s;       // local coordinate in [0,1] from v[0]
    std::vector<double> weight;  // gauss weight * length * w(node)
  };
  const std::vector<EdgeRule>& boundary_rule4() const { return rule4_; }
  const std::vector<EdgeRule>& boundary_rule_mass() const { return rule_mass_; }
  /// The pnorm rule; differs from boundary_rule4 only under fault injection.
  const std::vector<EdgeRule>& boundary_rule_norm() const { return rule_norm_; }

  /// Weight at a boundary curve parameter under the configured mode and scale.
  double weight(geometry::Segment seg, double param) const;

  /// Boundary vertex ids, ascending.
  const std::vector<int>& boundary_vertices() const { return boundary_vertices_; }
  FemFunction constant(double c) const { return FemFunction(size(), c); }

 private:
  std::vector<EdgeRule> make_rule(int points) const;

  mesh::TriMesh mesh_;
  std::shared_ptr<const geometry::BoundaryShape> shape_;
  SpaceOptions options_;
  std::vector<double> area_;
  std::vector<std::array<geometry::Point, 3>> grad_;
  std::vector<EdgeRule> rule4_, rule_mass_, rule_norm_;
  std::vector<int> boundary_vertices_;
};

/// Space over a cusp mesh with the cusp weight.
FemSpace cusp_space(mesh::TriMesh mesh, const geometry::DomainSpec& spec, SpaceOptions options = {});
/// Space over a disk mesh centred at the origin (weight one).
FemSpace disk_space(mesh::TriMesh mesh, double radius, SpaceOptions options = {});

SparseSym stiffness(const FemSpace& V);
SparseSym mass(const FemSpace& V);
SparseSym boundary_weighted_mass(const FemSpace& V);

/// Element matrices, exposed for hand-checkable tests.
std::array<std::array<double, 3>, 3> element_stiffness(geometry::Point a, geometry::Point b,
                                                       geometry::Point c);

/// Gradient of u on triangle e, in difference form around the vertex with the largest
/// basis gradient: in a needle the two huge gradients nearly cancel, while u_i - u_a is
/// exact where it matters.
geometry::Point element_gradient(const FemSpace& V, std::size_t e, const FemFunction& u);

/// p-th powers of the norms (no root).
double sobolev_pnorm(const FemSpace& V, const FemFunction& u, double p);
double boundary_weighted_pnorm(const FemSpace& V, const FemFunction& u, double p);

/// Throws QuotientUndefined on a vanishing boundary norm; Harmonic requires p = 2.
double rayleigh_quotient(const FemSpace& V, const FemFunction& u, double p, Problem problem);

FemFunction apply_A(const FemSpace& V, const FemFunction& u, double p);
FemFunction apply_B(const FemSpace& V, const FemFunction& f, double p);
double orthogonality_functional(const FemSpace& V, const FemFunction& u, double p);

/// Regularization of |grad u| and of the mid-edge values |u| on triangle e. It is
/// `epsilon` for p >= 2. For p < 2 it is capped by the rounding level of the quantity
/// (eps_mach sum_k |u_k||grad phi_k| and eps_mach max_k |u_k|): a fixed epsilon above a
/// true gradient understates |g|^{p-2}, and linearized steps then overshoot there.
struct TangentRegularization {
  double grad = 0.0;
  double value = 0.0;
};
TangentRegularization tangent_regularization(const FemSpace& V, std::size_t e,
                                             const FemFunction& u, double p, double epsilon);

/// Regularized Hessian of (1/p) * sobolev_pnorm at u.
SparseSym tangent_A(const FemSpace& V, const FemFunction& u, double p, double epsilon);

/// Sampled operator properties. Each entry is the worst relative defect over the pairs:
/// homogeneity of A and B, excess over the Holder bounds <A f, v> <= N(f)^{(p-1)/p} N(v)^{1/p}
/// (Sobolev and boundary norms), negativity of <A f - A g, f - g>, the gap at v = t f, and
/// the identities <A f, f> = sobolev_pnorm(f), <B f, f> = boundary_weighted_pnorm(f).
struct OperatorPropertyReport {
  double h1_homogeneity = 0.0;
  double h2_homogeneity = 0.0;
  double h3_holder = 0.0;
  double h4_holder = 0.0;
  double monotonicity = 0.0;
  double h3_equality = 0.0;
  double h4_equality = 0.0;
  double coercivity_identity = 0.0;
  double pairing_identity = 0.0;
  std::size_t pairs = 0;
};

/// Pairs alternate nodal N(0,1) noise and random quadratics, rounded to 24 fractional bits;
/// t is uniform in [-3,3] for homogeneity and in (0,3] for the equality cases, rounded to
/// 20 bits, so t f is exact. Seeded and deterministic.
OperatorPropertyReport operator_properties(const FemSpace& V, double p, int pairs,
                                           std::uint64_t seed);

/// Signed power |x|^{p-2} x.
inline double spow(double x, double p) {
  if (x == 0.0) return 0.0;
  const double a = std::pow(std::abs(x), p - 1.0);
  return x < 0.0 ? -a : a;
}

}  // namespace cusp::fem
