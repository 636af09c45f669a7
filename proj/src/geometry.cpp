#include "cuspsteklov/geometry.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "cuspsteklov/errors.hpp"

namespace cusp::geometry {

std::string to_string(Segment s) {
  switch (s) {
    case Segment::WallLeft:
      return "WallLeft";
    case Segment::WallRight:
      return "WallRight";
    case Segment::Arc:
      return "Arc";
    case Segment::Tip:
      return "Tip";
    case Segment::Straight:
      return "Straight";
  }
  return "?";
}

Segment segment_from_string(const std::string& s) {
  if (s == "WallLeft") return Segment::WallLeft;
  if (s == "WallRight") return Segment::WallRight;
  if (s == "Arc") return Segment::Arc;
  if (s == "Tip") return Segment::Tip;
  if (s == "Straight") return Segment::Straight;
  throw ParameterError("unknown boundary segment tag '" + s + "'");
}

// ---------------------------------------------------------------------------
// CuspProfile

CuspProfile CuspProfile::power(double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) {
    std::ostringstream os;
    os << "cusp exponent must satisfy 1 < alpha < inf (got alpha = " << alpha << ")";
    throw DomainError(os.str());
  }
  return CuspProfile(Power{alpha});
}

CuspProfile CuspProfile::tabulated(std::vector<std::pair<double, double>> samples) {
  if (samples.size() < 2) throw DomainError("tabulated cusp profile needs at least 2 samples");
  if (samples.front().first != 0.0 || samples.front().second != 0.0)
    throw DomainError("tabulated cusp profile must start at (0, 0)");
  if (samples.back().first != 1.0 || samples.back().second != 1.0)
    throw DomainError("tabulated cusp profile must end at (1, 1)");
  for (std::size_t i = 1; i < samples.size(); ++i) {
    if (!(samples[i].first > samples[i - 1].first))
      throw DomainError("tabulated cusp profile: t values must be strictly increasing");
    if (!(samples[i].second > samples[i - 1].second))
      throw DomainError("tabulated cusp profile: gamma values must be strictly increasing");
  }
  return CuspProfile(Table{std::move(samples)});
}

double CuspProfile::alpha() const {
  if (const auto* p = std::get_if<Power>(&kind_)) return p->alpha;
  throw ParameterError("tabulated cusp profile has no exponent");
}

const std::vector<std::pair<double, double>>& CuspProfile::samples() const {
  if (const auto* t = std::get_if<Table>(&kind_)) return t->samples;
  throw ParameterError("power cusp profile has no samples");
}

namespace {

void require_unit(double t) {
  if (!(t >= 0.0 && t <= 1.0)) {
    std::ostringstream os;
    os << "cusp profile evaluated outside [0,1] (t = " << t << ")";
    throw DomainError(os.str());
  }
}

// Index i of the table piece [t_i, t_{i+1}] containing t (right piece at knots).
std::size_t piece(const std::vector<std::pair<double, double>>& s, double t) {
  auto it = std::upper_bound(s.begin(), s.end(), t,
                             [](double v, const auto& e) { return v < e.first; });
  auto i = static_cast<std::size_t>(std::distance(s.begin(), it));
  if (i == 0) return 0;
  return std::min(i - 1, s.size() - 2);
}

}  // namespace

double CuspProfile::operator()(double t) const {
  require_unit(t);
  if (const auto* p = std::get_if<Power>(&kind_)) return std::pow(t, p->alpha);
  const auto& s = std::get<Table>(kind_).samples;
  const std::size_t i = piece(s, t);
  const auto [t0, g0] = s[i];
  const auto [t1, g1] = s[i + 1];
  if (t == t1) return g1;
  return g0 + (g1 - g0) * (t - t0) / (t1 - t0);
}

double CuspProfile::derivative(double t) const {
  require_unit(t);
  if (const auto* p = std::get_if<Power>(&kind_))
    return t == 0.0 ? 0.0 : p->alpha * std::pow(t, p->alpha - 1.0);
  const auto& s = std::get<Table>(kind_).samples;
  const std::size_t i = piece(s, t);
  return (s[i + 1].second - s[i].second) / (s[i + 1].first - s[i].first);
}

double CuspProfile::inverse(double g) const {
  if (!(g >= 0.0 && g <= 1.0)) throw DomainError("cusp profile inverse outside [0,1]");
  if (const auto* p = std::get_if<Power>(&kind_)) return std::pow(g, 1.0 / p->alpha);
  const auto& s = std::get<Table>(kind_).samples;
  for (std::size_t i = 0; i + 1 < s.size(); ++i) {
    if (g <= s[i + 1].second) {
      const auto [t0, g0] = s[i];
      const auto [t1, g1] = s[i + 1];
      return t0 + (t1 - t0) * (g - g0) / (g1 - g0);
    }
  }
  return 1.0;
}

ValidationReport gamma_validate(const CuspProfile& gamma, int n_samples) {
  if (n_samples < 3) throw ParameterError("gamma_validate needs n_samples >= 3");
  std::vector<double> ts;
  ts.reserve(static_cast<std::size_t>(n_samples));
  for (int i = 0; i < n_samples; ++i) ts.push_back(static_cast<double>(i) / (n_samples - 1));
  if (!gamma.is_power()) {
    for (const auto& [t, g] : gamma.samples()) ts.push_back(t);
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
  }

  ValidationReport report;
  auto fail = [&](std::string msg) {
    report.ok = false;
    report.violation = std::move(msg);
    return report;
  };
  if (gamma(0.0) != 0.0) return fail("gamma(0) != 0");
  if (std::abs(gamma(1.0) - 1.0) > 1e-14) return fail("gamma(1) != 1");

  std::vector<double> gs(ts.size());
  for (std::size_t i = 0; i < ts.size(); ++i) gs[i] = gamma(ts[i]);
  double prev_q = -1.0;
  for (std::size_t i = 0; i + 1 < ts.size(); ++i) {
    if (!(gs[i + 1] > gs[i])) {
      std::ostringstream os;
      os << "gamma not strictly increasing at t = " << ts[i + 1];
      return fail(os.str());
    }
    const double q = (gs[i + 1] - gs[i]) / (ts[i + 1] - ts[i]);
    if (i > 0 && q < prev_q - 1e-12 * std::max(1.0, std::abs(prev_q))) {
      std::ostringstream os;
      os << "difference quotients not increasing (" << prev_q << " then " << q << ")";
      return fail(os.str());
    }
    prev_q = q;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Domain predicates and the weight

bool point_in_domain(const DomainSpec& spec, Point x) {
  if (x.y > 0.0 && x.y <= 1.0 && std::abs(x.x) < spec.gamma(x.y)) return true;
  const Point d = x - spec.disk_center;
  return dot(d, d) < spec.disk_radius * spec.disk_radius;
}

namespace {

bool on_wall(const DomainSpec& spec, Point x, double tol) {
  if (x.y < -tol || x.y > 1.0 + tol) return false;
  const double y = std::clamp(x.y, 0.0, 1.0);
  if (std::abs(std::abs(x.x) - spec.gamma(y)) > tol) return false;
  return norm(x - spec.disk_center) >= spec.disk_radius - tol;
}

bool on_circle(const DomainSpec& spec, Point x, double tol) {
  if (std::abs(norm(x - spec.disk_center) - spec.disk_radius) > tol) return false;
  const bool inside_cusp = x.y > 0.0 && x.y <= 1.0 && std::abs(x.x) < spec.gamma(x.y) - tol;
  return !inside_cusp;
}

}  // namespace

bool on_boundary(const DomainSpec& spec, Point x) {
  const double tol = spec.tolerance();
  return on_wall(spec, x, tol) || on_circle(spec, x, tol);
}

double weight_eval(const DomainSpec& spec, const BoundarySample& sample) {
  const double tol = spec.tolerance();
  const Point x = sample.position;
  if (on_wall(spec, x, tol)) {
    const double g = spec.gamma(std::clamp(x.y, 0.0, 1.0));
    return g < 1.0 ? g : 1.0;
  }
  if (on_circle(spec, x, tol)) return 1.0;
  std::ostringstream os;
  os.precision(17);
  os << "sample (" << x.x << ", " << x.y << ") is not on the domain boundary";
  throw GeometryError(os.str());
}

double weight_at(const DomainSpec& spec, Segment seg, double param) {
  switch (seg) {
    case Segment::WallLeft:
    case Segment::WallRight: {
      const double g = spec.gamma(std::clamp(param, 0.0, 1.0));
      return g < 1.0 ? g : 1.0;
    }
    case Segment::Tip:
      return 0.0;
    case Segment::Arc:
    case Segment::Straight:
      return 1.0;
  }
  return 1.0;
}

double wall_circle_junction(const DomainSpec& spec) {
  const double r2 = spec.disk_radius * spec.disk_radius;
  auto f = [&](double t) {
    const Point d = Point{spec.gamma(t), t} - spec.disk_center;
    return dot(d, d) - r2;
  };
  constexpr int kGrid = 4096;
  constexpr double kInside = -1e-13;
  int first_inside = -1;
  for (int i = 1; i <= kGrid; ++i) {
    const double t = static_cast<double>(i) / kGrid;
    const double v = f(t);
    if (first_inside < 0) {
      if (v < kInside) first_inside = i;
    } else if (v > -kInside) {
      throw GeometryError("cusp wall re-enters the exterior of the disk; unsupported profile");
    }
  }
  if (first_inside < 0) return 1.0;
  double lo = static_cast<double>(first_inside - 1) / kGrid;
  double hi = static_cast<double>(first_inside) / kGrid;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    (f(mid) > 0.0 ? lo : hi) = mid;
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Boundary loop

namespace {

// Wall x2 samples strictly between 0 and top, descending.
std::vector<double> wall_params(const DomainSpec& spec, double top, double res, double grading) {
  const auto& g = spec.gamma;
  std::vector<double> xs;
  double x = top;
  for (int guard = 0; guard < 100000; ++guard) {
    double nx = std::max(x - res, grading * x);
    // Keep the cross-cusp diagonal midpoint inside the snapped wall midpoint so that
    // red refinement with boundary snapping cannot invert cusp triangles.
    for (int k = 0; k < 60; ++k) {
      const double mid = 0.5 * (nx + x);
      if (g(mid) >= 0.625 * (g(x) - g(nx))) break;
      nx = mid;
    }
    if (nx < spec.tip_cutoff) break;
    xs.push_back(nx);
    x = nx;
  }
  return xs;
}

}  // namespace

BoundaryLoop boundary_loop(const DomainSpec& spec, double resolution, double tip_grading) {
  if (!(resolution > 0.0)) throw ParameterError("boundary resolution must be positive");
  if (!(tip_grading > 0.0 && tip_grading < 1.0))
    throw ParameterError("tip grading must lie in (0,1)");

  const double tstar = wall_circle_junction(spec);
  const Point c = spec.disk_center;
  const double R = spec.disk_radius;
  const double r2 = R * R;

  // Right wall, ascending, filtered to points outside the closed disk.
  std::vector<double> wall = wall_params(spec, tstar, resolution, tip_grading);
  std::reverse(wall.begin(), wall.end());
  std::erase_if(wall, [&](double t) {
    const Point d = Point{spec.gamma(t), t} - c;
    return !(dot(d, d) > r2);
  });

  const Point jr{spec.gamma(tstar), tstar};
  const double theta_r = std::atan2(jr.y - c.y, jr.x - c.x);

  // Right half of the arc from the junction to the top, exclusive of the junction.
  struct ArcPt {
    Point pos;
    double angle;
    bool corner;  // the point (1,1), which also lies on the wall
  };
  std::vector<ArcPt> arc;
  const double span = std::numbers::pi / 2 - theta_r;
  const int n_arc = std::max(1, static_cast<int>(std::ceil(span * R / resolution)));
  for (int i = 1; i <= n_arc; ++i) {
    const double a = i == n_arc ? std::numbers::pi / 2 : theta_r + span * i / n_arc;
    Point p{c.x + R * std::cos(a), c.y + R * std::sin(a)};
    if (i == n_arc) p.x = c.x;
    arc.push_back({p, a, false});
  }
  const bool corner_on_arc = tstar < 1.0 && c.x == 0.0 && c.y == 2.0 && R == std::numbers::sqrt2;
  if (corner_on_arc) {
    const double ac = -std::numbers::pi / 4;
    std::erase_if(arc, [&](const ArcPt& q) {
      return !(q.angle == std::numbers::pi / 2) && std::abs(q.angle - ac) * R < 0.25 * resolution;
    });
    auto it = std::find_if(arc.begin(), arc.end(), [&](const ArcPt& q) { return q.angle > ac; });
    arc.insert(it, ArcPt{{1.0, 1.0}, ac, true});
  }
  std::erase_if(arc, [&](const ArcPt& q) {
    return q.pos.y > 0.0 && q.pos.y <= 1.0 && std::abs(q.pos.x) < spec.gamma(q.pos.y);
  });

  BoundaryLoop loop;
  auto& s = loop.samples;
  auto& seg = loop.segments;
  auto wall_sample = [&](double t, Segment side) {
    const double g = spec.gamma(t);
    const double w = g < 1.0 ? g : 1.0;
    return BoundarySample{{side == Segment::WallRight ? g : -g, t}, side, t, w};
  };

  s.push_back({{0.0, 0.0}, Segment::Tip, 0.0, 0.0});
  double prev_param = 0.0;
  for (double t : wall) {
    s.push_back(wall_sample(t, Segment::WallRight));
    seg.push_back({Segment::WallRight, prev_param, t});
    prev_param = t;
  }
  s.push_back(wall_sample(tstar, Segment::WallRight));
  seg.push_back({Segment::WallRight, prev_param, tstar});
  double prev_angle = theta_r;
  for (const auto& q : arc) {
    if (q.corner)
      s.push_back(wall_sample(1.0, Segment::WallRight));
    else
      s.push_back({q.pos, Segment::Arc, q.angle, 1.0});
    seg.push_back({Segment::Arc, prev_angle, q.angle});
    prev_angle = q.angle;
  }
  // Left half: mirror images in reverse order, skipping the top point.
  for (auto it = arc.rbegin(); it != arc.rend(); ++it) {
    if (it == arc.rbegin()) continue;
    const double a = std::numbers::pi - it->angle;
    if (it->corner)
      s.push_back(wall_sample(1.0, Segment::WallLeft));
    else
      s.push_back({{-it->pos.x, it->pos.y}, Segment::Arc, a, 1.0});
    seg.push_back({Segment::Arc, prev_angle, a});
    prev_angle = a;
  }
  s.push_back(wall_sample(tstar, Segment::WallLeft));
  seg.push_back({Segment::Arc, prev_angle, std::numbers::pi - theta_r});
  prev_param = tstar;
  for (auto it = wall.rbegin(); it != wall.rend(); ++it) {
    s.push_back(wall_sample(*it, Segment::WallLeft));
    seg.push_back({Segment::WallLeft, prev_param, *it});
    prev_param = *it;
  }
  seg.push_back({Segment::WallLeft, prev_param, 0.0});

  std::vector<Point> poly;
  poly.reserve(s.size());
  for (const auto& q : s) poly.push_back(q.position);
  if (auto err = check_simple_ccw(poly)) {
    throw GeometryError("boundary polyline is not a simple closed curve (" + *err +
                        "); resolution too coarse for this profile");
  }
  return loop;
}

std::vector<BoundarySample> boundary_polyline(const DomainSpec& spec, double resolution,
                                              double tip_grading) {
  return boundary_loop(spec, resolution, tip_grading).samples;
}

namespace {

int orient_sign(Point a, Point b, Point c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

bool on_segment(Point a, Point b, Point p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

bool segments_touch(Point a, Point b, Point c, Point d) {
  const int o1 = orient_sign(a, b, c), o2 = orient_sign(a, b, d);
  const int o3 = orient_sign(c, d, a), o4 = orient_sign(c, d, b);
  if (o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

}  // namespace

std::optional<std::string> check_simple_ccw(const std::vector<Point>& poly) {
  const std::size_t n = poly.size();
  if (n < 3) return "fewer than 3 vertices";
  double area2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) area2 += cross(poly[i], poly[(i + 1) % n]);
  if (!(area2 > 0.0)) return "orientation is not counter-clockwise";
  for (std::size_t i = 0; i < n; ++i) {
    const Point a = poly[i], b = poly[(i + 1) % n];
    if (a == b) return "repeated vertex " + std::to_string(i);
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      const Point c = poly[j], d = poly[(j + 1) % n];
      if (segments_touch(a, b, c, d))
        return "segments " + std::to_string(i) + " and " + std::to_string(j) + " intersect";
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Shapes

Point CuspShape::point_at(Segment seg, double param) const {
  switch (seg) {
    case Segment::WallRight:
      return {spec_.gamma(std::clamp(param, 0.0, 1.0)), param};
    case Segment::WallLeft:
      return {-spec_.gamma(std::clamp(param, 0.0, 1.0)), param};
    case Segment::Arc:
      return {spec_.disk_center.x + spec_.disk_radius * std::cos(param),
              spec_.disk_center.y + spec_.disk_radius * std::sin(param)};
    case Segment::Tip:
      return {0.0, 0.0};
    case Segment::Straight:
      break;
  }
  throw GeometryError("straight segments have no curve parametrization");
}

double CuspShape::weight_at(Segment seg, double param) const {
  return geometry::weight_at(spec_, seg, param);
}

std::string CuspShape::describe() const {
  std::ostringstream os;
  if (spec_.gamma.is_power())
    os << "cusp(alpha=" << spec_.gamma.alpha() << ")";
  else
    os << "cusp(tabulated, " << spec_.gamma.samples().size() << " samples)";
  return os.str();
}

DiskShape::DiskShape(double radius) : radius_(radius) {
  if (!(radius > 0.0)) throw ParameterError("disk radius must be positive");
}

Point DiskShape::point_at(Segment seg, double param) const {
  if (seg != Segment::Arc) throw GeometryError("disk boundary has only arc segments");
  return {radius_ * std::cos(param), radius_ * std::sin(param)};
}

std::string DiskShape::describe() const {
  std::ostringstream os;
  os << "disk(R=" << radius_ << ")";
  return os.str();
}

Point PolygonShape::point_at(Segment, double) const {
  throw GeometryError("polygon segments have no curve parametrization");
}

}  // namespace cusp::geometry
