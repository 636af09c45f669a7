#include "cuspsteklov/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <sstream>

#include "cuspsteklov/errors.hpp"

namespace cusp::mesh {

using geometry::BoundaryShape;

double signed_area(const TriMesh& m, std::size_t t) {
  const auto& T = m.triangles[t];
  const Point a = m.vertices[T[0]], b = m.vertices[T[1]], c = m.vertices[T[2]];
  return 0.5 * geometry::cross(b - a, c - a);
}

double total_area(const TriMesh& m) {
  double s = 0.0;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) s += signed_area(m, t);
  return s;
}

void update_boundary_flags(TriMesh& m) {
  m.boundary_vertex.assign(m.vertices.size(), 0);
  for (const auto& e : m.boundary_edges) {
    m.boundary_vertex[static_cast<std::size_t>(e.v[0])] = 1;
    m.boundary_vertex[static_cast<std::size_t>(e.v[1])] = 1;
  }
}

namespace {

std::string tri_str(std::size_t t) { return "triangle " + std::to_string(t); }

}  // namespace

void validate(const TriMesh& m) {
  const auto nv = static_cast<int>(m.vertices.size());
  if (m.triangles.empty()) throw ValidationError("mesh has no triangles");
  for (const Point& p : m.vertices)
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw ValidationError("non-finite vertex");

  // directed edge -> count
  std::map<std::pair<int, int>, int> directed;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& T = m.triangles[t];
    for (int k : T)
      if (k < 0 || k >= nv) throw ValidationError(tri_str(t) + " references a missing vertex");
    if (T[0] == T[1] || T[1] == T[2] || T[0] == T[2])
      throw ValidationError(tri_str(t) + " repeats a vertex");
    if (!(signed_area(m, t) > 0.0))
      throw ValidationError(tri_str(t) + " has non-positive signed area");
    for (int i = 0; i < 3; ++i) {
      if (++directed[{T[i], T[(i + 1) % 3]}] > 1)
        throw ValidationError("edge used twice with the same orientation (non-manifold)");
    }
  }
  std::map<std::pair<int, int>, int> boundary;
  for (const auto& [e, c] : directed) {
    if (!directed.count({e.second, e.first})) boundary[e] = 0;
  }
  if (boundary.size() != m.boundary_edges.size())
    throw ValidationError("boundary edge list has " + std::to_string(m.boundary_edges.size()) +
                          " entries but the mesh has " + std::to_string(boundary.size()) +
                          " one-triangle edges");
  for (const auto& e : m.boundary_edges) {
    auto it = boundary.find({e.v[0], e.v[1]});
    if (it == boundary.end())
      throw ValidationError("boundary edge " + std::to_string(e.v[0]) + "-" +
                            std::to_string(e.v[1]) + " is not a one-triangle edge of matching orientation");
    if (++it->second > 1) throw ValidationError("boundary edge listed twice");
  }
  if (m.boundary_vertex.size() != m.vertices.size())
    throw ValidationError("boundary flag array has the wrong size");
  std::vector<char> flags(m.vertices.size(), 0);
  for (const auto& e : m.boundary_edges) flags[e.v[0]] = flags[e.v[1]] = 1;
  if (flags != m.boundary_vertex) throw ValidationError("boundary flags inconsistent with edges");
  std::vector<char> used(m.vertices.size(), 0);
  for (const auto& T : m.triangles)
    for (int k : T) used[k] = 1;
  if (std::find(used.begin(), used.end(), 0) != used.end())
    throw ValidationError("mesh has an unused vertex");
}

std::vector<int> boundary_loop_vertices(const TriMesh& m, int start) {
  std::map<int, int> next;
  for (const auto& e : m.boundary_edges) next[e.v[0]] = e.v[1];
  if (next.empty()) return {};
  int v = start >= 0 ? start : m.boundary_edges.front().v[0];
  if (!next.count(v)) throw ValidationError("start vertex is not on the boundary");
  std::vector<int> loop;
  for (std::size_t i = 0; i < next.size(); ++i) {
    loop.push_back(v);
    v = next.at(v);
    if (v == loop.front()) break;
  }
  if (loop.size() != next.size()) throw ValidationError("boundary is not a single closed loop");
  return loop;
}

void SizeField::check() const {
  if (!(h_max > 0.0)) throw ParameterError("h_max must be positive");
  if (!(tip_grading > 0.0 && tip_grading < 1.0))
    throw ParameterError("tip_grading must lie in (0,1)");
  if (!(min_angle_target >= 20.0 && min_angle_target <= 30.0))
    throw ParameterError("min_angle_target must lie in [20, 30] degrees");
}

double thin_zone_height(const geometry::DomainSpec& spec, const SizeField& size) {
  const double tstar = geometry::wall_circle_junction(spec);
  const double g = std::min(1.0, 0.25 * size.h_max);
  return std::min(tstar, spec.gamma.inverse(g));
}

bool in_tip_zone(const geometry::DomainSpec& spec, const SizeField& size, Point centroid) {
  return centroid.y < thin_zone_height(spec, size);
}

TriMesh generate(const geometry::DomainSpec& spec, const SizeField& size) {
  size.check();
  const geometry::BoundaryLoop loop = geometry::boundary_loop(spec, size.h_max, size.tip_grading);
  Pslg pslg;
  const int n = static_cast<int>(loop.samples.size());
  for (const auto& s : loop.samples) pslg.vertices.push_back(s.position);
  for (int i = 0; i < n; ++i) {
    const auto& ls = loop.segments[static_cast<std::size_t>(i)];
    pslg.segments.push_back({{i, (i + 1) % n}, ls.tag, {ls.param_begin, ls.param_end}});
  }
  pslg.protected_vertices = {0};

  const double x_thin = thin_zone_height(spec, size);
  const double h_max = size.h_max;
  RefineOptions opt;
  opt.min_angle_deg = size.min_angle_target;
  opt.size = [&spec, h_max](Point p) {
    if (p.y > 1.0) return h_max;
    const double g = spec.gamma(std::clamp(p.y, 0.0, 1.0));
    return std::min(h_max, 2.0 * std::max(g, spec.tip_cutoff));
  };
  opt.exempt_triangle = [x_thin](Point c) { return c.y < x_thin; };
  opt.exempt_segment = [x_thin](const BoundaryEdge& e) {
    return geometry::is_wall(e.tag) && std::max(e.param[0], e.param[1]) <= x_thin;
  };
  const geometry::CuspShape shape(spec);
  return triangulate(pslg, shape, opt);
}

TriMesh refine_uniform(const TriMesh& m, const BoundaryShape& shape) {
  validate(m);
  TriMesh r;
  r.vertices = m.vertices;
  std::map<std::pair<int, int>, int> mid;
  auto key = [](int a, int b) { return a < b ? std::pair{a, b} : std::pair{b, a}; };

  // Boundary midpoints first, snapped onto the curve.
  for (const auto& e : m.boundary_edges) {
    const double pm = 0.5 * (e.param[0] + e.param[1]);
    const Point a = m.vertices[e.v[0]], b = m.vertices[e.v[1]];
    const Point p = e.tag == Segment::Straight ? Point{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}
                                               : shape.point_at(e.tag, pm);
    const int id = static_cast<int>(r.vertices.size());
    r.vertices.push_back(p);
    mid[key(e.v[0], e.v[1])] = id;
    r.boundary_edges.push_back({{e.v[0], id}, e.tag, {e.param[0], pm}});
    r.boundary_edges.push_back({{id, e.v[1]}, e.tag, {pm, e.param[1]}});
  }
  auto midpoint = [&](int a, int b) {
    auto [it, fresh] = mid.try_emplace(key(a, b), static_cast<int>(r.vertices.size()));
    if (fresh) {
      const Point pa = m.vertices[a], pb = m.vertices[b];
      r.vertices.push_back({0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)});
    }
    return it->second;
  };
  r.triangles.reserve(4 * m.triangles.size());
  for (const auto& T : m.triangles) {
    const int a = T[0], b = T[1], c = T[2];
    const int ab = midpoint(a, b), bc = midpoint(b, c), ca = midpoint(c, a);
    r.triangles.push_back({a, ab, ca});
    r.triangles.push_back({ab, b, bc});
    r.triangles.push_back({ca, bc, c});
    r.triangles.push_back({ab, bc, ca});
  }
  for (std::size_t t = 0; t < r.triangles.size(); ++t)
    if (!(signed_area(r, t) > 0.0))
      throw GeometryError("uniform refinement inverted a triangle after boundary snapping");
  update_boundary_flags(r);
  return r;
}

TriMesh disk_mesh(double radius, double h) {
  if (!(radius > 0.0)) throw ParameterError("disk radius must be positive");
  if (!(h > 0.0 && h < radius)) throw ParameterError("disk mesh size must satisfy 0 < h < radius");
  const int n = std::max(8, static_cast<int>(std::ceil(2.0 * std::numbers::pi * radius / h)));
  Pslg pslg;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * std::numbers::pi * i / n;
    pslg.vertices.push_back({radius * std::cos(a), radius * std::sin(a)});
  }
  for (int i = 0; i < n; ++i) {
    const double a0 = 2.0 * std::numbers::pi * i / n;
    const double a1 = 2.0 * std::numbers::pi * (i + 1) / n;
    pslg.segments.push_back({{i, (i + 1) % n}, Segment::Arc, {a0, a1}});
  }
  RefineOptions opt;
  opt.min_angle_deg = 25.0;
  opt.size = [h](Point) { return h; };
  const geometry::DiskShape shape(radius);
  return triangulate(pslg, shape, opt);
}

double min_angle_deg(const TriMesh& m, std::size_t t) {
  const auto& T = m.triangles[t];
  double best = 180.0;
  for (int i = 0; i < 3; ++i) {
    const Point p = m.vertices[T[i]];
    const Point u = m.vertices[T[(i + 1) % 3]] - p;
    const Point v = m.vertices[T[(i + 2) % 3]] - p;
    const double ang = std::atan2(std::abs(geometry::cross(u, v)), geometry::dot(u, v));
    best = std::min(best, ang * 180.0 / std::numbers::pi);
  }
  return best;
}

QualityReport mesh_quality(const TriMesh& m) {
  QualityReport q;
  q.vertices = m.vertices.size();
  q.triangles = m.triangles.size();
  q.boundary_edges = m.boundary_edges.size();
  q.min_angle_deg = 180.0;
  q.h_min = 1e300;
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& T = m.triangles[t];
    double lmax = 0.0, perim = 0.0;
    for (int i = 0; i < 3; ++i) {
      const double l = geometry::norm(m.vertices[T[(i + 1) % 3]] - m.vertices[T[i]]);
      lmax = std::max(lmax, l);
      perim += l;
      q.h_min = std::min(q.h_min, l);
      q.h_max = std::max(q.h_max, l);
    }
    const double inradius = 2.0 * std::abs(signed_area(m, t)) / perim;
    q.max_aspect = std::max(q.max_aspect, lmax / (2.0 * inradius));
    q.min_angle_deg = std::min(q.min_angle_deg, min_angle_deg(m, t));
  }
  if (m.triangles.empty()) q.h_min = 0.0;
  return q;
}

}  // namespace cusp::mesh
