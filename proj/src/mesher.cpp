// Constrained Delaunay triangulation and Ruppert refinement of a tagged polygon.
//
// The triangulation keeps an enclosing super-triangle for its whole life; triangles carry
// an inside flag that is toggled across boundary segments. Segment split points are placed
// on the true boundary curve, so a split may move the boundary slightly off the old chord.

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <numbers>
#include <sstream>

#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/mesh.hpp"

namespace cusp::mesh {
namespace {

using geometry::BoundaryShape;

long double orient(Point a, Point b, Point c) {
  const long double acx = static_cast<long double>(a.x) - c.x;
  const long double bcx = static_cast<long double>(b.x) - c.x;
  const long double acy = static_cast<long double>(a.y) - c.y;
  const long double bcy = static_cast<long double>(b.y) - c.y;
  return acx * bcy - acy * bcx;
}

// > 0 when d lies strictly inside the circumcircle of the CCW triangle abc.
long double incircle(Point a, Point b, Point c, Point d) {
  const long double adx = static_cast<long double>(a.x) - d.x, ady = static_cast<long double>(a.y) - d.y;
  const long double bdx = static_cast<long double>(b.x) - d.x, bdy = static_cast<long double>(b.y) - d.y;
  const long double cdx = static_cast<long double>(c.x) - d.x, cdy = static_cast<long double>(c.y) - d.y;
  const long double ad = adx * adx + ady * ady;
  const long double bd = bdx * bdx + bdy * bdy;
  const long double cd = cdx * cdx + cdy * cdy;
  const long double det =
      adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
  // Cocircular inputs (regular polygons) must compare as ties, not as rounding noise.
  const long double perm = (std::abs(bdx * cdy) + std::abs(bdy * cdx)) * ad +
                           (std::abs(cdx * ady) + std::abs(cdy * adx)) * bd +
                           (std::abs(adx * bdy) + std::abs(ady * bdx)) * cd;
  return std::abs(det) <= 1e-12L * perm ? 0.0L : det;
}

Point circumcenter(Point a, Point b, Point c) {
  const double bx = b.x - a.x, by = b.y - a.y;
  const double cx = c.x - a.x, cy = c.y - a.y;
  const double d = 2.0 * (bx * cy - by * cx);
  const double b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
  return {a.x + (cy * b2 - by * c2) / d, a.y + (bx * c2 - cx * b2) / d};
}

struct Tri {
  std::array<int, 3> v{};
  std::array<int, 3> nb{-1, -1, -1};  // neighbour across edge i (opposite v[i])
  std::array<char, 3> fixed{0, 0, 0};
  bool dead = false;
  bool inside = false;
};

using EdgeKey = std::pair<int, int>;
EdgeKey key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

class Cdt {
 public:
  Cdt(const Pslg& pslg, const BoundaryShape& shape, const RefineOptions& opt)
      : shape_(shape), opt_(opt) {
    build(pslg);
  }

  void refine();
  TriMesh extract() const;

 private:
  void build(const Pslg& pslg);
  int locate(Point p, int start) const;
  int insert(Point p, int start);
  std::vector<int> cavity(Point p, int seed) const;
  int commit(Point p, std::vector<int> cav);
  std::pair<int, int> find_edge(int a, int b) const;
  void flip(int t, int i);
  void recover(int a, int b);
  void legalize();
  void classify();
  void set_fixed(int a, int b, bool on);
  void link(int t, int a, int b, int nt);

  bool encroached(const EdgeKey& k) const;
  void split(const EdgeKey& k);
  bool bad(int t) const;
  bool exempt_segment(const EdgeKey& k) const;
  void check_new_segments(int vertex);
  Point centroid(int t) const {
    const auto& v = tris_[t].v;
    return {(pts_[v[0]].x + pts_[v[1]].x + pts_[v[2]].x) / 3.0,
            (pts_[v[0]].y + pts_[v[1]].y + pts_[v[2]].y) / 3.0};
  }
  void budget_check() const;

  const BoundaryShape& shape_;
  const RefineOptions& opt_;
  std::vector<Point> pts_;
  std::vector<Tri> tris_;
  std::vector<int> vtri_;
  std::vector<char> protected_;
  std::map<EdgeKey, BoundaryEdge> segs_;  // oriented along the CCW boundary
  std::deque<EdgeKey> seg_queue_;
  std::deque<int> tri_queue_;
  mutable int last_ = 0;
  std::size_t n_input_ = 0;
};

constexpr int kSuper = 3;

void Cdt::build(const Pslg& pslg) {
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const Point& p : pslg.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const Point mid{0.5 * (xmin + xmax), 0.5 * (ymin + ymax)};
  const double L = std::max({xmax - xmin, ymax - ymin, 1e-300});
  for (int k = 0; k < 3; ++k) {
    const double a = std::numbers::pi / 2 + 2.0 * std::numbers::pi * k / 3.0;
    pts_.push_back({mid.x + 50.0 * L * std::cos(a), mid.y + 50.0 * L * std::sin(a)});
  }
  Tri t;
  t.v = {0, 1, 2};
  tris_.push_back(t);
  vtri_ = {0, 0, 0};
  protected_.assign(3, 0);

  n_input_ = pslg.vertices.size();
  for (const Point& p : pslg.vertices) insert(p, last_);
  for (int pv : pslg.protected_vertices) protected_[static_cast<std::size_t>(pv + kSuper)] = 1;

  for (const BoundaryEdge& e : pslg.segments) {
    BoundaryEdge s = e;
    s.v = {e.v[0] + kSuper, e.v[1] + kSuper};
    recover(s.v[0], s.v[1]);
    segs_[key(s.v[0], s.v[1])] = s;
  }
  for (const auto& [k, s] : segs_) set_fixed(k.first, k.second, true);
  legalize();
  classify();
}

int Cdt::locate(Point p, int start) const {
  int t = start;
  if (t < 0 || t >= static_cast<int>(tris_.size()) || tris_[t].dead) {
    t = -1;
    for (int i = static_cast<int>(tris_.size()) - 1; i >= 0; --i)
      if (!tris_[i].dead) {
        t = i;
        break;
      }
  }
  const int limit = 4 * static_cast<int>(tris_.size()) + 100;
  for (int step = 0; step < limit; ++step) {
    const Tri& T = tris_[t];
    int next = -2;
    for (int r = 0; r < 3; ++r) {
      const int i = (r + step) % 3;
      if (orient(pts_[T.v[(i + 1) % 3]], pts_[T.v[(i + 2) % 3]], p) < 0) {
        next = T.nb[i];
        break;
      }
    }
    if (next == -2) {
      last_ = t;
      return t;
    }
    if (next < 0) break;
    t = next;
  }
  for (int i = 0; i < static_cast<int>(tris_.size()); ++i) {
    const Tri& T = tris_[i];
    if (T.dead) continue;
    if (orient(pts_[T.v[0]], pts_[T.v[1]], p) >= 0 && orient(pts_[T.v[1]], pts_[T.v[2]], p) >= 0 &&
        orient(pts_[T.v[2]], pts_[T.v[0]], p) >= 0)
      return i;
  }
  return -1;
}

std::vector<int> Cdt::cavity(Point p, int seed) const {
  std::vector<int> cav{seed};
  std::vector<int> stack{seed};
  while (!stack.empty()) {
    const int t = stack.back();
    stack.pop_back();
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const int n = T.nb[i];
      if (n < 0 || T.fixed[i]) continue;
      if (std::find(cav.begin(), cav.end(), n) != cav.end()) continue;
      const Tri& N = tris_[n];
      if (incircle(pts_[N.v[0]], pts_[N.v[1]], pts_[N.v[2]], p) > 0) {
        cav.push_back(n);
        stack.push_back(n);
      }
    }
  }
  return cav;
}

int Cdt::commit(Point p, std::vector<int> cav) {
  struct Face {
    int a, b, outside;
    char fixed;
    int owner;
  };
  std::vector<Face> faces;
  for (int guard = 0;; ++guard) {
    faces.clear();
    int bad_owner = -1;
    for (int t : cav) {
      const Tri& T = tris_[t];
      for (int i = 0; i < 3; ++i) {
        const int n = T.nb[i];
        if (n >= 0 && std::find(cav.begin(), cav.end(), n) != cav.end()) continue;
        const int a = T.v[(i + 1) % 3], b = T.v[(i + 2) % 3];
        if (orient(pts_[a], pts_[b], p) <= 0 && t != cav.front()) bad_owner = t;
        faces.push_back({a, b, n, T.fixed[i], t});
      }
    }
    if (bad_owner < 0) break;
    std::erase(cav, bad_owner);
    if (guard > 1000) throw GeometryError("mesher: cavity repair did not converge");
  }
  for (const Face& f : faces)
    if (orient(pts_[f.a], pts_[f.b], p) <= 0)
      throw GeometryError("mesher: point insertion on a constrained edge or degenerate cavity");

  const int pid = static_cast<int>(pts_.size());
  pts_.push_back(p);
  vtri_.push_back(-1);
  protected_.push_back(0);

  std::vector<int> created;
  created.reserve(faces.size());
  for (const Face& f : faces) {
    Tri T;
    T.v = {f.a, f.b, pid};
    T.nb[2] = f.outside;
    T.fixed[2] = f.fixed;
    if (f.outside < 0)
      T.inside = false;
    else
      T.inside = f.fixed ? !tris_[f.outside].inside : tris_[f.outside].inside;
    const int id = static_cast<int>(tris_.size());
    tris_.push_back(T);
    created.push_back(id);
    if (f.outside >= 0) link(f.outside, f.b, f.a, id);
    vtri_[f.a] = id;
    vtri_[f.b] = id;
    vtri_[pid] = id;
  }
  for (int id : created) {
    Tri& T = tris_[id];
    for (int other : created) {
      if (other == id) continue;
      const Tri& O = tris_[other];
      if (O.v[0] == T.v[1]) T.nb[0] = other;  // shares edge (b, p)
      if (O.v[1] == T.v[0]) T.nb[1] = other;  // shares edge (p, a)
    }
  }
  for (int t : cav) tris_[t].dead = true;
  last_ = created.front();
  for (int id : created) tri_queue_.push_back(id);
  return pid;
}

int Cdt::insert(Point p, int start) {
  const int t = locate(p, start);
  if (t < 0) throw GeometryError("mesher: point outside the triangulation");
  for (int k : tris_[t].v)
    if (pts_[k] == p) throw GeometryError("mesher: duplicate vertex");
  return commit(p, cavity(p, t));
}

// Sets the neighbour of triangle t across edge (a,b) to nt.
void Cdt::link(int t, int a, int b, int nt) {
  Tri& T = tris_[t];
  for (int i = 0; i < 3; ++i) {
    const int u = T.v[(i + 1) % 3], w = T.v[(i + 2) % 3];
    if ((u == a && w == b) || (u == b && w == a)) {
      T.nb[i] = nt;
      return;
    }
  }
}

std::pair<int, int> Cdt::find_edge(int a, int b) const {
  auto check = [&](int t) -> int {
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
      const int u = T.v[(i + 1) % 3], w = T.v[(i + 2) % 3];
      if ((u == a && w == b) || (u == b && w == a)) return i;
    }
    return -1;
  };
  // Rotate around a from its cached triangle.
  int t0 = vtri_[static_cast<std::size_t>(a)];
  if (t0 >= 0 && !tris_[t0].dead &&
      std::find(tris_[t0].v.begin(), tris_[t0].v.end(), a) != tris_[t0].v.end()) {
    for (int dir = 0; dir < 2; ++dir) {
      int t = t0;
      for (int guard = 0; guard < 10000 && t >= 0; ++guard) {
        if (int i = check(t); i >= 0) return {t, i};
        const Tri& T = tris_[t];
        const int k = static_cast<int>(std::find(T.v.begin(), T.v.end(), a) - T.v.begin());
        t = T.nb[dir == 0 ? (k + 2) % 3 : (k + 1) % 3];
        if (t == t0) break;
      }
    }
  }
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
    if (tris_[t].dead) continue;
    if (int i = check(t); i >= 0) return {t, i};
  }
  return {-1, -1};
}

void Cdt::set_fixed(int a, int b, bool on) {
  auto [t, i] = find_edge(a, b);
  if (t < 0) throw GeometryError("mesher: constrained edge missing");
  tris_[t].fixed[i] = on;
  const int n = tris_[t].nb[i];
  if (n >= 0) {
    Tri& N = tris_[n];
    for (int j = 0; j < 3; ++j) {
      const int u = N.v[(j + 1) % 3], w = N.v[(j + 2) % 3];
      if ((u == a && w == b) || (u == b && w == a)) N.fixed[j] = on;
    }
  }
}

void Cdt::flip(int t, int i) {
  Tri T = tris_[t];
  const int n = T.nb[i];
  Tri N = tris_[n];
  const int x = T.v[i], u = T.v[(i + 1) % 3], v = T.v[(i + 2) % 3];
  int j = 0;
  while (N.nb[j] != t) ++j;
  const int y = N.v[j];
  // T = (x,u,v), N = (y,v,u) -> T' = (x,u,y), N' = (y,v,x)
  const int t_vx = T.nb[(i + 1) % 3], t_xu = T.nb[(i + 2) % 3];
  const char f_vx = T.fixed[(i + 1) % 3], f_xu = T.fixed[(i + 2) % 3];
  const int n_uy = N.nb[(j + 1) % 3], n_yv = N.nb[(j + 2) % 3];
  const char f_uy = N.fixed[(j + 1) % 3], f_yv = N.fixed[(j + 2) % 3];

  Tri& A = tris_[t];
  A.v = {x, u, y};
  A.nb = {n_uy, n, t_xu};
  A.fixed = {f_uy, 0, f_xu};
  Tri& B = tris_[n];
  B.v = {y, v, x};
  B.nb = {t_vx, t, n_yv};
  B.fixed = {f_vx, 0, f_yv};
  B.inside = A.inside;
  if (n_uy >= 0) link(n_uy, u, y, t);
  if (t_vx >= 0) link(t_vx, v, x, n);
  vtri_[x] = t;
  vtri_[u] = t;
  vtri_[y] = t;
  vtri_[v] = n;
}

void Cdt::recover(int a, int b) {
  if (find_edge(a, b).first >= 0) return;
  const Point pa = pts_[a], pb = pts_[b];
  auto crosses = [&](int u, int w) {
    if (u == a || u == b || w == a || w == b) return false;
    const long double o1 = orient(pa, pb, pts_[u]), o2 = orient(pa, pb, pts_[w]);
    const long double o3 = orient(pts_[u], pts_[w], pa), o4 = orient(pts_[u], pts_[w], pb);
    return ((o1 > 0 && o2 < 0) || (o1 < 0 && o2 > 0)) && ((o3 > 0 && o4 < 0) || (o3 < 0 && o4 > 0));
  };
  std::deque<EdgeKey> queue;
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
    const Tri& T = tris_[t];
    if (T.dead) continue;
    for (int i = 0; i < 3; ++i) {
      const int u = T.v[(i + 1) % 3], w = T.v[(i + 2) % 3];
      if (u < w && crosses(u, w)) {
        if (T.fixed[i]) throw GeometryError("mesher: input segments intersect");
        queue.push_back({u, w});
      }
    }
    for (int k : T.v) {
      if (k == a || k == b) continue;
      if (orient(pa, pb, pts_[k]) == 0 &&
          geometry::dot(pts_[k] - pa, pts_[k] - pb) < 0)
        throw GeometryError("mesher: vertex lies on an input segment");
    }
  }
  std::size_t guard = 0;
  while (!queue.empty()) {
    if (++guard > 1000000) throw GeometryError("mesher: segment recovery did not terminate");
    const auto [u, w] = queue.front();
    queue.pop_front();
    auto [t, i] = find_edge(u, w);
    if (t < 0) continue;
    const Tri& T = tris_[t];
    const int n = T.nb[i];
    const Tri& N = tris_[n];
    int j = 0;
    while (N.nb[j] != t) ++j;
    const int x = T.v[i], y = N.v[j];
    const long double s1 = orient(pts_[x], pts_[y], pts_[u]);
    const long double s2 = orient(pts_[x], pts_[y], pts_[w]);
    if ((s1 > 0 && s2 < 0) || (s1 < 0 && s2 > 0)) {
      flip(t, i);
      if (crosses(x, y)) queue.push_back({std::min(x, y), std::max(x, y)});
    } else {
      queue.push_back({u, w});
    }
  }
  if (find_edge(a, b).first < 0) throw GeometryError("mesher: failed to recover segment");
}

void Cdt::legalize() {
  std::deque<std::pair<int, int>> stack;
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
    if (!tris_[t].dead)
      for (int i = 0; i < 3; ++i) stack.push_back({t, i});
  std::size_t guard = 0;
  while (!stack.empty()) {
    if (++guard > 50000000) throw GeometryError("mesher: Delaunay legalization did not terminate");
    const auto [t, i] = stack.back();
    stack.pop_back();
    const Tri& T = tris_[t];
    if (T.dead || T.fixed[i] || T.nb[i] < 0) continue;
    const int n = T.nb[i];
    const Tri& N = tris_[n];
    int j = 0;
    while (j < 3 && N.nb[j] != t) ++j;
    if (j == 3) continue;
    const int y = N.v[j];
    if (incircle(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]], pts_[y]) <= 0) continue;
    const int x = T.v[i], u = T.v[(i + 1) % 3], w = T.v[(i + 2) % 3];
    const long double s1 = orient(pts_[x], pts_[y], pts_[u]);
    const long double s2 = orient(pts_[x], pts_[y], pts_[w]);
    if (!((s1 > 0 && s2 < 0) || (s1 < 0 && s2 > 0))) continue;
    flip(t, i);
    for (int k = 0; k < 3; ++k) {
      stack.push_back({t, k});
      stack.push_back({n, k});
    }
  }
}

void Cdt::classify() {
  std::vector<char> seen(tris_.size(), 0);
  std::deque<int> queue;
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
    const Tri& T = tris_[t];
    if (T.dead) continue;
    if (T.nb[0] < 0 || T.nb[1] < 0 || T.nb[2] < 0) {
      tris_[t].inside = false;
      seen[t] = 1;
      queue.push_back(t);
    }
  }
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    for (int i = 0; i < 3; ++i) {
      const int n = tris_[t].nb[i];
      if (n < 0 || seen[n]) continue;
      tris_[n].inside = tris_[t].fixed[i] ? !tris_[t].inside : tris_[t].inside;
      seen[n] = 1;
      queue.push_back(n);
    }
  }
}

// ---------------------------------------------------------------------------
// Refinement

bool Cdt::exempt_segment(const EdgeKey& k) const {
  const BoundaryEdge& s = segs_.at(k);
  if (opt_.exempt_segment) {
    BoundaryEdge e = s;
    e.v = {s.v[0] - kSuper, s.v[1] - kSuper};
    if (opt_.exempt_segment(e)) return true;
  }
  return false;
}

bool Cdt::encroached(const EdgeKey& k) const {
  auto [t, i] = find_edge(k.first, k.second);
  if (t < 0) return false;
  const Point a = pts_[k.first], b = pts_[k.second];
  for (int side = 0; side < 2; ++side) {
    const int tt = side == 0 ? t : tris_[t].nb[i];
    if (tt < 0 || !tris_[tt].inside) continue;
    for (int v : tris_[tt].v) {
      if (v == k.first || v == k.second) continue;
      if (geometry::dot(pts_[v] - a, pts_[v] - b) < 0.0) return true;
    }
  }
  return false;
}

void Cdt::check_new_segments(int vertex) {
  // Segments on triangles incident to the new vertex may now be encroached.
  for (auto it = tri_queue_.rbegin(); it != tri_queue_.rend(); ++it) {
    const Tri& T = tris_[*it];
    if (T.dead) continue;
    if (std::find(T.v.begin(), T.v.end(), vertex) == T.v.end()) break;
    for (int i = 0; i < 3; ++i) {
      if (!T.fixed[i]) continue;
      const EdgeKey k = key(T.v[(i + 1) % 3], T.v[(i + 2) % 3]);
      if (!exempt_segment(k) && encroached(k)) seg_queue_.push_back(k);
    }
  }
}

void Cdt::split(const EdgeKey& k) {
  const BoundaryEdge s = segs_.at(k);
  const double pm = 0.5 * (s.param[0] + s.param[1]);
  const Point a = pts_[s.v[0]], b = pts_[s.v[1]];
  const Point m = s.tag == Segment::Straight ? Point{0.5 * (a.x + b.x), 0.5 * (a.y + b.y)}
                                             : shape_.point_at(s.tag, pm);
  auto [t, i] = find_edge(s.v[0], s.v[1]);
  int seed = tris_[t].inside ? t : tris_[t].nb[i];
  set_fixed(s.v[0], s.v[1], false);
  segs_.erase(k);
  const int loc = locate(m, seed);
  if (loc < 0) throw GeometryError("mesher: split point outside the triangulation");
  const int mid = commit(m, cavity(m, loc));
  recover(s.v[0], mid);
  recover(mid, s.v[1]);
  set_fixed(s.v[0], mid, true);
  set_fixed(mid, s.v[1], true);
  segs_[key(s.v[0], mid)] = BoundaryEdge{{s.v[0], mid}, s.tag, {s.param[0], pm}};
  segs_[key(mid, s.v[1])] = BoundaryEdge{{mid, s.v[1]}, s.tag, {pm, s.param[1]}};
  // Split-point insertion can flip inside flags only along the replaced segment; the
  // flags propagated from cavity faces are already correct.
  for (const EdgeKey& nk : {key(s.v[0], mid), key(mid, s.v[1])})
    if (!exempt_segment(nk) && encroached(nk)) seg_queue_.push_back(nk);
  check_new_segments(mid);
}

bool Cdt::bad(int t) const {
  const Tri& T = tris_[t];
  if (T.dead || !T.inside) return false;
  for (int v : T.v)
    if (protected_[static_cast<std::size_t>(v)]) return false;
  const Point c = centroid(t);
  if (opt_.exempt_triangle && opt_.exempt_triangle(c)) return false;
  const Point a = pts_[T.v[0]], b = pts_[T.v[1]], d = pts_[T.v[2]];
  const double la = geometry::norm(b - d), lb = geometry::norm(d - a), lc = geometry::norm(a - b);
  const double area2 = std::abs(static_cast<double>(orient(a, b, d)));
  const double R = la * lb * lc / (2.0 * area2);
  const double lmin = std::min({la, lb, lc});
  if (lmin / (2.0 * R) < std::sin(opt_.min_angle_deg * std::numbers::pi / 180.0)) return true;
  if (opt_.size && R > opt_.size(c) / std::numbers::sqrt3) return true;
  return false;
}

void Cdt::budget_check() const {
  if (pts_.size() - kSuper > opt_.vertex_budget) {
    std::ostringstream os;
    os << "mesh refinement exceeded the vertex budget (" << opt_.vertex_budget
       << " vertices; " << tri_queue_.size() << " triangles queued, " << seg_queue_.size()
       << " segments queued)";
    throw MeshBudgetError(os.str());
  }
}

void Cdt::refine() {
  tri_queue_.clear();
  for (const auto& [k, s] : segs_)
    if (!exempt_segment(k) && encroached(k)) seg_queue_.push_back(k);
  for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
    if (!tris_[t].dead) tri_queue_.push_back(t);

  std::vector<char> given_up;
  for (;;) {
    while (!seg_queue_.empty()) {
      const EdgeKey k = seg_queue_.front();
      seg_queue_.pop_front();
      if (!segs_.count(k) || !encroached(k)) continue;
      split(k);
      budget_check();
    }
    int t = -1;
    while (!tri_queue_.empty()) {
      const int c = tri_queue_.front();
      tri_queue_.pop_front();
      if (c < static_cast<int>(given_up.size()) && given_up[c]) continue;
      if (bad(c)) {
        t = c;
        break;
      }
    }
    if (t < 0) break;

    const Tri& T = tris_[t];
    const Point cc = circumcenter(pts_[T.v[0]], pts_[T.v[1]], pts_[T.v[2]]);
    // Walk towards the circumcentre; crossing a segment means the segment is encroached.
    int cur = t;
    EdgeKey blocked{-1, -1};
    for (int step = 0; step < 100000; ++step) {
      const Tri& C = tris_[cur];
      int exit = -1;
      for (int r = 0; r < 3; ++r) {
        const int i = (r + step) % 3;
        if (orient(pts_[C.v[(i + 1) % 3]], pts_[C.v[(i + 2) % 3]], cc) < 0) {
          exit = i;
          break;
        }
      }
      if (exit < 0) break;
      if (C.fixed[exit] || C.nb[exit] < 0) {
        blocked = key(C.v[(exit + 1) % 3], C.v[(exit + 2) % 3]);
        break;
      }
      cur = C.nb[exit];
    }
    std::vector<EdgeKey> encroach;
    if (blocked.first >= 0) {
      if (segs_.count(blocked)) encroach.push_back(blocked);
    } else {
      const auto cav = cavity(cc, cur);
      for (int c : cav) {
        const Tri& C = tris_[c];
        for (int i = 0; i < 3; ++i) {
          if (!C.fixed[i]) continue;
          const int a = C.v[(i + 1) % 3], b = C.v[(i + 2) % 3];
          if (geometry::dot(cc - pts_[a], cc - pts_[b]) < 0.0) encroach.push_back(key(a, b));
        }
      }
      if (encroach.empty()) {
        const int pid = commit(cc, cav);
        check_new_segments(pid);
        budget_check();
        continue;
      }
    }
    bool any = false;
    for (const EdgeKey& k : encroach) {
      if (!segs_.count(k) || exempt_segment(k)) continue;
      split(k);
      any = true;
      budget_check();
    }
    if (any) {
      tri_queue_.push_back(t);
    } else {
      if (given_up.size() < tris_.size()) given_up.resize(tris_.size(), 0);
      given_up[t] = 1;
    }
  }
}

TriMesh Cdt::extract() const {
  TriMesh m;
  m.vertices.assign(pts_.begin() + kSuper, pts_.end());
  for (const Tri& T : tris_) {
    if (T.dead || !T.inside) continue;
    for (int v : T.v)
      if (v < kSuper) throw GeometryError("mesher: interior triangle touches the super-triangle");
    m.triangles.push_back({T.v[0] - kSuper, T.v[1] - kSuper, T.v[2] - kSuper});
  }
  // Boundary edges in loop order, starting from input vertex 0.
  std::map<int, const BoundaryEdge*> next;
  for (const auto& [k, s] : segs_) next[s.v[0]] = &s;
  int v = kSuper;
  for (std::size_t i = 0; i < segs_.size(); ++i) {
    auto it = next.find(v);
    if (it == next.end()) throw GeometryError("mesher: boundary loop broken");
    BoundaryEdge e = *it->second;
    e.v = {e.v[0] - kSuper, e.v[1] - kSuper};
    m.boundary_edges.push_back(e);
    v = it->second->v[1];
  }
  update_boundary_flags(m);
  return m;
}

}  // namespace

TriMesh triangulate(const Pslg& pslg, const BoundaryShape& shape, const RefineOptions& options) {
  if (pslg.vertices.size() < 3) throw GeometryError("polygon needs at least 3 vertices");
  if (auto err = geometry::check_simple_ccw(pslg.vertices))
    throw GeometryError("input polygon is not simple and CCW: " + *err);
  Cdt cdt(pslg, shape, options);
  cdt.refine();
  TriMesh m = cdt.extract();
  validate(m);
  return m;
}

}  // namespace cusp::mesh
