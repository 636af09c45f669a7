#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "cuspsteklov/geometry.hpp"

namespace cusp::mesh {

using geometry::Point;
using geometry::Segment;

/// Boundary edge oriented along the CCW boundary (interior on the left).
struct BoundaryEdge {
  std::array<int, 2> v{};
  Segment tag = Segment::Straight;
  std::array<double, 2> param{};  // curve parameter at v[0], v[1]
};

struct TriMesh {
  std::vector<Point> vertices;
  std::vector<std::array<int, 3>> triangles;  // counter-clockwise
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<char> boundary_vertex;  // per-vertex flag

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_triangles() const { return triangles.size(); }
};

double signed_area(const TriMesh& m, std::size_t t);
double total_area(const TriMesh& m);

/// Throws ValidationError on the first violated invariant: positive areas, index range,
/// edge-manifoldness, boundary edges equal to the single-triangle edges, flags consistent.
void validate(const TriMesh& m);

/// Rebuilds boundary_vertex from boundary_edges.
void update_boundary_flags(TriMesh& m);

/// Boundary vertices in loop order starting at `start` (or the first boundary edge).
std::vector<int> boundary_loop_vertices(const TriMesh& m, int start = -1);

struct SizeField {
  double h_max = 0.2;
  double tip_grading = 0.5;
  double min_angle_target = 25.0;  // degrees

  void check() const;
};

/// Input to the Delaunay refiner: a simple CCW polygon whose segments carry curve tags.
struct Pslg {
  std::vector<Point> vertices;
  std::vector<BoundaryEdge> segments;  // segment i joins vertices i and i+1 (mod n)
  std::vector<int> protected_vertices;  // exempt from angle bounds (the cusp tip)
};

/// Refinement controls. Triangles and segments for which `exempt` reports true are left
/// alone (the thin tip zone of a cusp, where the channel is narrower than any element).
struct RefineOptions {
  double min_angle_deg = 25.0;
  std::function<double(Point)> size;             // target circumradius bound; empty = none
  std::function<bool(Point)> exempt_triangle;    // evaluated at the centroid
  std::function<bool(const BoundaryEdge&)> exempt_segment;
  std::size_t vertex_budget = 200000;
};

/// Ruppert-style constrained Delaunay refinement of a polygon. Split points on curved
/// segments are placed on the true curve of `shape`.
TriMesh triangulate(const Pslg& pslg, const geometry::BoundaryShape& shape,
                    const RefineOptions& options);

/// Graded quality mesh of a cusp domain.
TriMesh generate(const geometry::DomainSpec& spec, const SizeField& size);

/// Upper x2 of the tip zone where cusp elements are exempt from quality refinement.
double thin_zone_height(const geometry::DomainSpec& spec, const SizeField& size);

/// True when a triangle belongs to the exempt tip zone of a cusp mesh.
bool in_tip_zone(const geometry::DomainSpec& spec, const SizeField& size, Point centroid);

/// Red refinement: every triangle split into four; boundary midpoints snapped onto the
/// curve of `shape`. Old vertices keep their indices and positions.
TriMesh refine_uniform(const TriMesh& m, const geometry::BoundaryShape& shape);

/// Quasi-uniform mesh of the disk of the given radius centred at the origin.
TriMesh disk_mesh(double radius, double h);

struct QualityReport {
  double min_angle_deg = 0.0;
  double max_aspect = 0.0;  // longest edge / (2 * inradius)
  double h_min = 0.0;       // shortest edge
  double h_max = 0.0;       // longest edge
  std::size_t vertices = 0;
  std::size_t triangles = 0;
  std::size_t boundary_edges = 0;
};

QualityReport mesh_quality(const TriMesh& m);
double min_angle_deg(const TriMesh& m, std::size_t t);

/// Text format: "trimesh 1", then "V n" + n lines "x y", "T n" + "i j k",
/// "B n" + "i j <tag> <param_i> <param_j>". Coordinates with 17 significant digits.
void write_mesh(const TriMesh& m, const std::filesystem::path& path);
void write_mesh(const TriMesh& m, std::ostream& os);

/// Clockwise triangles are reoriented and reported in `warnings`.
TriMesh read_mesh(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
TriMesh read_mesh(std::istream& is, std::vector<std::string>* warnings = nullptr);

}  // namespace cusp::mesh
