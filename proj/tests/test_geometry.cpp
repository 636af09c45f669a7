#include <doctest.h>

#include <cmath>

#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/geometry.hpp"

using namespace cusp;
using namespace cusp::geometry;

namespace {

// t^k by repeated squaring, the independent oracle for integer exponents.
double ipow(double t, int k) {
  double r = 1.0, b = t;
  while (k > 0) {
    if (k & 1) r *= b;
    b *= b;
    k >>= 1;
  }
  return r;
}

DomainSpec power_domain(double alpha) {
  DomainSpec s;
  s.gamma = CuspProfile::power(alpha);
  return s;
}

}  // namespace

TEST_CASE("power profile matches repeated squaring") {
  for (int k : {2, 3, 5}) {
    const CuspProfile g = CuspProfile::power(k);
    for (double t = 1e-6; t <= 1.0; t *= 1.37) {
      const double want = ipow(t, k);
      CHECK(std::abs(g(t) - want) <= 1e-14 * want);
    }
    CHECK(g(1.0) == 1.0);
    CHECK(g(0.0) == 0.0);
  }
  const CuspProfile g = CuspProfile::power(1.5);
  for (double t = 1e-6; t <= 1.0; t *= 1.37) CHECK(std::abs(g(t) - t * std::sqrt(t)) <= 1e-14 * g(t));
}

TEST_CASE("profile derivative and inverse") {
  const CuspProfile g = CuspProfile::power(3.0);
  CHECK(g.derivative(0.5) == doctest::Approx(0.75).epsilon(1e-14));
  CHECK(g.derivative(0.0) == 0.0);
  CHECK(g(g.inverse(0.3)) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(g.is_power());
  CHECK(g.alpha() == 3.0);
}

TEST_CASE("invalid exponents and arguments are rejected") {
  CHECK_THROWS_AS(CuspProfile::power(1.0), DomainError);
  CHECK_THROWS_AS(CuspProfile::power(0.5), DomainError);
  CHECK_THROWS_AS(CuspProfile::power(INFINITY), DomainError);
  CHECK_THROWS_AS(CuspProfile::power(NAN), DomainError);
  const CuspProfile g = CuspProfile::power(2.0);
  CHECK_THROWS_AS(g(1.5), DomainError);
  CHECK_THROWS_AS(g(-0.1), DomainError);
}

TEST_CASE("tabulated profile interpolates and validates") {
  const CuspProfile g = CuspProfile::tabulated({{0.0, 0.0}, {0.5, 0.2}, {1.0, 1.0}});
  CHECK(g(0.25) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(g(0.75) == doctest::Approx(0.6).epsilon(1e-15));
  CHECK(gamma_validate(g, 100).ok);
  // slopes 1.4 then 0.6: the difference quotients decrease
  const CuspProfile concave = CuspProfile::tabulated({{0.0, 0.0}, {0.5, 0.7}, {1.0, 1.0}});
  const auto r = gamma_validate(concave, 100);
  CHECK_FALSE(r.ok);
  CHECK_FALSE(r.violation.empty());
  CHECK_THROWS_AS(CuspProfile::tabulated({{0.0, 0.0}, {1.0, 0.9}}), DomainError);
  CHECK_THROWS_AS(CuspProfile::tabulated({{0.1, 0.0}, {1.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(CuspProfile::tabulated({{0.0, 0.0}, {0.5, 0.5}, {0.5, 0.6}, {1.0, 1.0}}), DomainError);
  CHECK_THROWS_AS(gamma_validate(g, 2), ParameterError);
}

TEST_CASE("power profiles pass validation") {
  for (double a : {1.5, 2.0, 3.0, 7.0}) CHECK(gamma_validate(CuspProfile::power(a), 1000).ok);
}

TEST_CASE("point membership") {
  const DomainSpec s = power_domain(2.0);
  CHECK(point_in_domain(s, {0.0, 0.5}));
  CHECK(point_in_domain(s, {0.0, 2.0}));
  CHECK(point_in_domain(s, {0.2, 0.5}));   // gamma(0.5) = 0.25
  CHECK_FALSE(point_in_domain(s, {0.3, 0.5}));
  CHECK_FALSE(point_in_domain(s, {0.0, -0.1}));
  CHECK_FALSE(point_in_domain(s, {0.0, 3.5}));
  CHECK(on_boundary(s, {0.25, 0.5}));
  CHECK(on_boundary(s, {-0.25, 0.5}));
  CHECK(on_boundary(s, {0.0, 2.0 + std::sqrt(2.0)}));
  CHECK_FALSE(on_boundary(s, {0.0, 1.0}));
}

TEST_CASE("polyline is simple, counter-clockwise and on the boundary") {
  for (double a : {1.5, 2.0, 3.0}) {
    const DomainSpec s = power_domain(a);
    const double res = 0.05;
    const auto poly = boundary_polyline(s, res);
    REQUIRE(poly.size() > 20);
    std::vector<Point> pts;
    for (const auto& p : poly) pts.push_back(p.position);
    CHECK_FALSE(check_simple_ccw(pts).has_value());
    for (const auto& p : poly) {
      if (is_wall(p.segment)) {
        CHECK(std::abs(std::abs(p.position.x) - s.gamma(p.position.y)) <= res * res);
      } else if (p.segment == Segment::Arc) {
        const double r = norm(p.position - s.disk_center);
        CHECK(std::abs(r - s.disk_radius) <= res * res);
      }
    }
  }
}

TEST_CASE("polyline and weight are mirror symmetric") {
  const DomainSpec s = power_domain(2.0);
  const auto poly = boundary_polyline(s, 0.05);
  const double tol = s.tolerance();
  for (const auto& p : poly) {
    double best = INFINITY;
    double wbest = 0.0;
    for (const auto& q : poly) {
      const double d = norm(q.position - Point{-p.position.x, p.position.y});
      if (d < best) best = d, wbest = q.weight;
    }
    CHECK(best <= tol);
    CHECK(std::abs(wbest - p.weight) <= tol);
  }
}

TEST_CASE("weight on the wall is gamma and one on the arc") {
  const DomainSpec s = power_domain(2.0);
  for (const auto& p : boundary_polyline(s, 0.05)) {
    const double w = weight_eval(s, p);
    if (is_wall(p.segment))
      CHECK(w == doctest::Approx(std::min(1.0, s.gamma(p.position.y))).epsilon(1e-12));
    else if (p.segment == Segment::Arc)
      CHECK(w == 1.0);
    CHECK(w == doctest::Approx(p.weight).epsilon(1e-12));
  }
  BoundarySample off;
  off.position = {0.0, 1.0};
  off.segment = Segment::WallRight;
  off.param = 1.0;
  CHECK_THROWS_AS(weight_eval(s, off), GeometryError);
}

TEST_CASE("weight is Lipschitz along the polyline away from the tip") {
  for (double a : {1.5, 2.0, 3.0}) {
    const DomainSpec s = power_domain(a);
    double L = 0.0;
    for (double t = s.tip_cutoff; t <= 1.0; t += 1e-3) L = std::max(L, s.gamma.derivative(t));
    L = std::max(L, s.gamma.derivative(1.0));
    const auto poly = boundary_polyline(s, 0.05);
    for (std::size_t i = 0; i < poly.size(); ++i) {
      const auto& p = poly[i];
      const auto& q = poly[(i + 1) % poly.size()];
      // w jumps from gamma(t*) to 1 where the wall enters the disk; compare within one segment kind
      if (std::min(p.position.y, q.position.y) < 0.1 || is_wall(p.segment) != is_wall(q.segment)) continue;
      const double ds = norm(q.position - p.position);
      CHECK(std::abs(q.weight - p.weight) <= L * ds * (1.0 + 1e-12));
    }
  }
}

TEST_CASE("wall enters the circle at the junction height") {
  for (double a : {1.5, 2.0, 3.0}) {
    const DomainSpec s = power_domain(a);
    const double t = wall_circle_junction(s);
    CHECK(t > 0.0);
    CHECK(t <= 1.0 + 1e-12);
    const Point q{s.gamma(std::min(t, 1.0)), std::min(t, 1.0)};
    CHECK(std::abs(norm(q - s.disk_center) - s.disk_radius) <= 1e-9);
  }
}

TEST_CASE("bad loop parameters") {
  const DomainSpec s = power_domain(2.0);
  CHECK_THROWS_AS(boundary_polyline(s, 0.0), ParameterError);
  CHECK_THROWS_AS(boundary_polyline(s, 0.05, 1.5), ParameterError);
}

TEST_CASE("segment tags round-trip") {
  for (Segment g : {Segment::WallLeft, Segment::WallRight, Segment::Arc, Segment::Tip, Segment::Straight})
    CHECK(segment_from_string(to_string(g)) == g);
  CHECK_THROWS_AS(segment_from_string("nope"), ParameterError);
}

TEST_CASE("disk shape") {
  const DiskShape d(2.0);
  const Point p = d.point_at(Segment::Arc, 0.3);
  CHECK(norm(p) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(d.weight_at(Segment::Arc, 0.3) == 1.0);
  CHECK_THROWS_AS(DiskShape(0.0), ParameterError);
  CHECK_THROWS_AS(d.point_at(Segment::WallLeft, 0.3), GeometryError);
}
