#pragma once

#include <cmath>
#include <memory>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace cusp::geometry {

struct Point {
  double x = 0.0;  // x1
  double y = 0.0;  // x2, the cusp axis
};

inline Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
inline Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
inline Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
inline double dot(Point a, Point b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point a, Point b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point a) { return std::hypot(a.x, a.y); }
inline bool operator==(Point a, Point b) { return a.x == b.x && a.y == b.y; }

// Straight is used for generic polygons (test harness input, not part of a cusp domain).
enum class Segment { WallLeft, WallRight, Arc, Tip, Straight };

std::string to_string(Segment s);
Segment segment_from_string(const std::string& s);

inline bool is_wall(Segment s) { return s == Segment::WallLeft || s == Segment::WallRight; }

/// Cusp profile gamma: [0,1] -> [0,1], increasing, gamma(0)=0, gamma(1)=1, with
/// increasing derivative vanishing at 0. Either t^alpha (alpha > 1) or a monotone
/// piecewise-linear table.
class CuspProfile {
 public:
  static CuspProfile power(double alpha);
  static CuspProfile tabulated(std::vector<std::pair<double, double>> samples);

  /// Throws DomainError for t outside [0,1].
  double operator()(double t) const;
  /// One-sided derivative (right derivative at table knots).
  double derivative(double t) const;
  /// Smallest t with gamma(t) >= g, for g in [0,1].
  double inverse(double g) const;

  bool is_power() const { return std::holds_alternative<Power>(kind_); }
  double alpha() const;
  const std::vector<std::pair<double, double>>& samples() const;

 private:
  struct Power {
    double alpha;
  };
  struct Table {
    std::vector<std::pair<double, double>> samples;
  };
  explicit CuspProfile(std::variant<Power, Table> k) : kind_(std::move(k)) {}

  std::variant<Power, Table> kind_;
};

struct ValidationReport {
  bool ok = true;
  std::string violation;
};

/// Checks endpoint values, strict increase of gamma and monotone difference
/// quotients on a uniform grid of n_samples points (plus table knots).
ValidationReport gamma_validate(const CuspProfile& gamma, int n_samples);

struct DomainSpec {
  CuspProfile gamma = CuspProfile::power(2.0);
  Point disk_center{0.0, 2.0};
  double disk_radius = std::numbers::sqrt2;
  double tip_cutoff = 1e-4;

  double diameter() const { return disk_center.y + disk_radius; }
  double tolerance() const { return 1e-10 * diameter(); }
};

struct BoundarySample {
  Point position;
  Segment segment = Segment::Arc;
  double param = 0.0;  // x2 on walls and at the tip, polar angle on the arc
  double weight = 1.0;
};

/// Open cusp region {0 < x2 <= 1, |x1| < gamma(x2)} union the open disk.
bool point_in_domain(const DomainSpec& spec, Point x);

/// Weight from the sample position: gamma(x2) on a cusp wall where gamma < 1, else 1.
/// Throws GeometryError when the point is not on the boundary.
double weight_eval(const DomainSpec& spec, const BoundarySample& sample);

/// Weight on a tagged boundary segment at the given curve parameter (no on-boundary test).
double weight_at(const DomainSpec& spec, Segment seg, double param);

bool on_boundary(const DomainSpec& spec, Point x);

/// x2-coordinate where the right wall meets the circle (the wall lies outside the
/// closed disk on (0, t*)).
double wall_circle_junction(const DomainSpec& spec);

/// Segment i of a loop joins sample i to sample (i+1) mod n. Params are oriented along
/// the loop (arc angles increase monotonically; wall params are x2).
struct LoopSegment {
  Segment tag = Segment::Arc;
  double param_begin = 0.0;
  double param_end = 0.0;
};

struct BoundaryLoop {
  std::vector<BoundarySample> samples;
  std::vector<LoopSegment> segments;
};

/// Boundary of the cusp domain as a closed CCW loop starting at the tip. Walls are
/// sampled every `resolution` in x2, geometrically (ratio tip_grading, tightened where
/// the wall curvature would let a midpoint snap invert a cross-cusp triangle) below
/// x2 = 2*resolution down to tip_cutoff. Throws GeometryError when the loop is not simple.
BoundaryLoop boundary_loop(const DomainSpec& spec, double resolution, double tip_grading = 0.5);

std::vector<BoundarySample> boundary_polyline(const DomainSpec& spec, double resolution,
                                              double tip_grading = 0.5);

/// Simple-closed and CCW test on a polygon; returns an explanation on failure.
std::optional<std::string> check_simple_ccw(const std::vector<Point>& polygon);

/// Parametrized boundary curves used to place split points on the true boundary.
class BoundaryShape {
 public:
  virtual ~BoundaryShape() = default;
  virtual Point point_at(Segment seg, double param) const = 0;
  /// Boundary weight on the segment at the parameter (gamma on cusp walls, 1 elsewhere).
  virtual double weight_at(Segment seg, double param) const = 0;
  virtual std::string describe() const = 0;
};

class CuspShape final : public BoundaryShape {
 public:
  explicit CuspShape(DomainSpec spec) : spec_(std::move(spec)) {}
  Point point_at(Segment seg, double param) const override;
  double weight_at(Segment seg, double param) const override;
  std::string describe() const override;
  const DomainSpec& spec() const { return spec_; }

 private:
  DomainSpec spec_;
};

/// Disk centred at the origin; the weight is identically one.
class DiskShape final : public BoundaryShape {
 public:
  explicit DiskShape(double radius);
  Point point_at(Segment seg, double param) const override;
  double weight_at(Segment, double) const override { return 1.0; }
  std::string describe() const override;
  double radius() const { return radius_; }

 private:
  double radius_;
};

/// Straight-edged polygon; points on segments are chord interpolations only.
class PolygonShape final : public BoundaryShape {
 public:
  Point point_at(Segment seg, double param) const override;
  double weight_at(Segment, double) const override { return 1.0; }
  std::string describe() const override { return "polygon"; }
};

}  // namespace cusp::geometry
