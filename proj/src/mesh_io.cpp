#include <fstream>
#include <iomanip>
#include <sstream>

#include "cuspsteklov/errors.hpp"
#include "cuspsteklov/mesh.hpp"

namespace cusp::mesh {

void write_mesh(const TriMesh& m, std::ostream& os) {
  os << std::setprecision(17);
  os << "trimesh 1\n";
  os << "V " << m.vertices.size() << '\n';
  for (const Point& p : m.vertices) os << p.x << ' ' << p.y << '\n';
  os << "T " << m.triangles.size() << '\n';
  for (const auto& t : m.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
  os << "B " << m.boundary_edges.size() << '\n';
  for (const auto& e : m.boundary_edges)
    os << e.v[0] << ' ' << e.v[1] << ' ' << geometry::to_string(e.tag) << ' ' << e.param[0] << ' '
       << e.param[1] << '\n';
}

void write_mesh(const TriMesh& m, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_mesh(m, os);
  if (!os) throw Error("failed writing " + path.string());
}

namespace {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  // Next non-empty line as a token stream.
  std::istringstream next(const char* what) {
    std::string line;
    while (std::getline(is_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) return std::istringstream(line);
    }
    throw ParseError(std::string("unexpected end of file, expected ") + what, line_no_ + 1);
  }
  int line() const { return line_no_; }

 private:
  std::istream& is_;
  int line_no_ = 0;
};

template <typename... Ts>
void fields(std::istringstream& ss, const LineReader& r, const char* what, Ts&... out) {
  ((ss >> out), ...);
  std::string extra;
  if (ss.fail()) throw ParseError(std::string("malformed ") + what, r.line());
  if (ss >> extra) throw ParseError(std::string("trailing data in ") + what, r.line());
}

std::size_t count_line(LineReader& r, const std::string& tag) {
  auto ss = r.next(tag.c_str());
  std::string t;
  long long n = -1;
  ss >> t >> n;
  if (t != tag || ss.fail() || n < 0)
    throw ParseError("expected '" + tag + " <count>'", r.line());
  return static_cast<std::size_t>(n);
}

}  // namespace

TriMesh read_mesh(std::istream& is, std::vector<std::string>* warnings) {
  LineReader r(is);
  {
    auto ss = r.next("header");
    std::string a, b;
    ss >> a >> b;
    if (a != "trimesh" || b != "1") throw ParseError("missing 'trimesh 1' header", r.line());
  }
  TriMesh m;
  const std::size_t nv = count_line(r, "V");
  m.vertices.resize(nv);
  for (auto& p : m.vertices) {
    auto ss = r.next("vertex");
    fields(ss, r, "vertex line", p.x, p.y);
  }
  const std::size_t nt = count_line(r, "T");
  m.triangles.resize(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    auto ss = r.next("triangle");
    auto& T = m.triangles[t];
    fields(ss, r, "triangle line", T[0], T[1], T[2]);
    for (int k : T)
      if (k < 0 || static_cast<std::size_t>(k) >= nv)
        throw ParseError("triangle references vertex " + std::to_string(k) + " out of range",
                         r.line());
  }
  const std::size_t nb = count_line(r, "B");
  m.boundary_edges.resize(nb);
  for (auto& e : m.boundary_edges) {
    auto ss = r.next("boundary edge");
    std::string tag;
    fields(ss, r, "boundary edge line", e.v[0], e.v[1], tag, e.param[0], e.param[1]);
    for (int k : e.v)
      if (k < 0 || static_cast<std::size_t>(k) >= nv)
        throw ParseError("boundary edge references vertex " + std::to_string(k) + " out of range",
                         r.line());
    try {
      e.tag = geometry::segment_from_string(tag);
    } catch (const Error&) {
      throw ParseError("unknown segment tag '" + tag + "'", r.line());
    }
  }
  for (std::size_t t = 0; t < nt; ++t) {
    if (signed_area(m, t) < 0.0) {
      std::swap(m.triangles[t][1], m.triangles[t][2]);
      if (warnings) warnings->push_back("triangle " + std::to_string(t) + " was clockwise; reoriented");
    }
  }
  update_boundary_flags(m);
  validate(m);
  return m;
}

TriMesh read_mesh(const std::filesystem::path& path, std::vector<std::string>* warnings) {
  std::ifstream is(path);
  if (!is) throw ParseError("cannot open " + path.string(), 0);
  return read_mesh(is, warnings);
}

}  // namespace cusp::mesh
