#include "hdgch/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

namespace hdgch {

namespace {

Scalar signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b - a).x() * (c - a).y() - (b - a).y() * (c - a).x());
}

// Local edge i is opposite local vertex i.
std::array<int, 2> local_edge(const std::array<int, 3>& tri, int i) {
  return {tri[(i + 1) % 3], tri[(i + 2) % 3]};
}

}  // namespace

Scalar Mesh::domain_area() const {
  Scalar a = 0;
  for (Scalar ae : areas) a += ae;
  return a;
}

Mat2 Mesh::jacobian(int e) const {
  const auto& t = elements[e];
  Mat2 J;
  J.col(0) = vertices[t[1]] - vertices[t[0]];
  J.col(1) = vertices[t[2]] - vertices[t[0]];
  return J;
}

Vec2 Mesh::map_to_physical(int e, const Vec2& ref) const {
  return vertices[elements[e][0]] + jacobian(e) * ref;
}

Vec2 Mesh::map_to_reference(int e, const Vec2& x) const {
  return jacobian(e).inverse() * (x - vertices[elements[e][0]]);
}

Eigen::Vector3d Mesh::barycentric(int e, const Vec2& x) const {
  const Vec2 r = map_to_reference(e, x);
  return {1.0 - r.x() - r.y(), r.x(), r.y()};
}

bool Mesh::contains(int e, const Vec2& x, Scalar tol) const {
  return (barycentric(e, x).array() >= -tol).all();
}

Vec2 Mesh::outward_normal(int e, int local) const {
  const auto [a, b] = local_edge(elements[e], local);
  const Vec2 d = vertices[b] - vertices[a];
  // counter-clockwise element: outward normal is the edge direction rotated by -90 degrees
  return Vec2(d.y(), -d.x()).normalized();
}

Mesh build_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> elements) {
  Mesh m;
  m.vertices = std::move(vertices);
  m.elements = std::move(elements);
  if (m.elements.empty()) throw InputError("mesh has no elements");

  const int nv = static_cast<int>(m.vertices.size());
  const int ne = static_cast<int>(m.elements.size());
  m.areas.resize(ne);
  m.diameters.resize(ne);
  m.shape_ratios.resize(ne);
  m.element_facets.resize(ne);

  for (int e = 0; e < ne; ++e) {
    const auto& t = m.elements[e];
    for (int v : t) {
      if (v < 0 || v >= nv) throw InputError("element " + std::to_string(e) + " references missing vertex");
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw InputError("element " + std::to_string(e) + " has repeated vertices");
    }
    const Scalar a = signed_area(m.vertices[t[0]], m.vertices[t[1]], m.vertices[t[2]]);
    if (!(a > 0)) throw InputError("element " + std::to_string(e) + " is inverted or degenerate");
    m.areas[e] = a;
    Scalar perim = 0, hmax = 0, prod = 1;
    for (int i = 0; i < 3; ++i) {
      const auto [p, q] = local_edge(t, i);
      const Scalar len = (m.vertices[q] - m.vertices[p]).norm();
      perim += len;
      hmax = std::max(hmax, len);
      prod *= len;
    }
    m.diameters[e] = hmax;
    const Scalar inradius = 2 * a / perim;
    const Scalar circumradius = prod / (4 * a);
    m.shape_ratios[e] = circumradius / inradius;
  }

  std::map<std::array<int, 2>, int> index;
  for (int e = 0; e < ne; ++e) {
    for (int i = 0; i < 3; ++i) {
      auto key = local_edge(m.elements[e], i);
      std::sort(key.begin(), key.end());
      auto [it, inserted] = index.try_emplace(key, static_cast<int>(m.facets.size()));
      if (inserted) {
        FacetRecord f;
        f.vertices = key;
        f.plus = e;
        f.local_in_plus = i;
        m.facets.push_back(f);
      } else {
        FacetRecord& f = m.facets[it->second];
        if (f.minus >= 0) {
          throw InputError("non-conforming mesh: edge (" + std::to_string(key[0]) + "," +
                           std::to_string(key[1]) + ") shared by more than two elements");
        }
        // elements are visited in increasing id, so the earlier one is E_-
        f.minus = f.plus;
        f.local_in_minus = f.local_in_plus;
        f.plus = e;
        f.local_in_plus = i;
      }
      m.element_facets[e][i] = it->second;
    }
  }

  for (auto& f : m.facets) {
    f.length = (m.vertices[f.vertices[1]] - m.vertices[f.vertices[0]]).norm();
    f.normal = f.boundary() ? m.outward_normal(f.plus, f.local_in_plus)
                            : m.outward_normal(f.minus, f.local_in_minus);
  }

  // Hanging vertices show up as a vertex in the relative interior of a boundary facet.
  for (const auto& f : m.facets) {
    if (!f.boundary()) continue;
    const Vec2 a = m.vertices[f.vertices[0]];
    const Vec2 b = m.vertices[f.vertices[1]];
    const Vec2 d = b - a;
    for (int v = 0; v < nv; ++v) {
      if (v == f.vertices[0] || v == f.vertices[1]) continue;
      const Vec2 p = m.vertices[v] - a;
      const Scalar t = p.dot(d) / d.squaredNorm();
      const Scalar dist = std::abs(d.x() * p.y() - d.y() * p.x()) / d.norm();
      if (t > 1e-12 && t < 1 - 1e-12 && dist < 1e-12 * f.length) {
        throw InputError("non-conforming mesh: hanging vertex " + std::to_string(v));
      }
    }
  }

  m.h = *std::max_element(m.diameters.begin(), m.diameters.end());
  m.bbox_min = m.bbox_max = m.vertices.front();
  for (const auto& v : m.vertices) {
    m.bbox_min = m.bbox_min.cwiseMin(v);
    m.bbox_max = m.bbox_max.cwiseMax(v);
  }
  return m;
}

Mesh build_structured_mesh(int n) {
  if (n < 1) throw InputError("structured mesh needs n >= 1");
  std::vector<Vec2> vertices;
  vertices.reserve(static_cast<std::size_t>(n + 1) * (n + 1));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) vertices.emplace_back(Scalar(i) / n, Scalar(j) / n);
  }
  auto vid = [n](int i, int j) { return j * (n + 1) + i; };
  std::vector<std::array<int, 3>> elements;
  elements.reserve(2 * static_cast<std::size_t>(n) * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      elements.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      elements.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  Mesh m = build_mesh(std::move(vertices), std::move(elements));
  m.structured_cells = n;
  return m;
}

ImportResult parse_mesh(std::istream& in) {
  ImportResult result;
  std::string line;
  if (!std::getline(in, line)) throw InputError("empty mesh file");
  {
    std::istringstream hs(line);
    std::string tag, dim;
    hs >> tag >> dim;
    if (tag != "hdgmesh" || dim != "2d") throw InputError("missing 'hdgmesh 2d' header");
  }
  long nv = -1;
  if (!(in >> nv) || nv < 3) throw InputError("bad vertex count");
  std::vector<Vec2> vertices(static_cast<std::size_t>(nv));
  for (auto& v : vertices) {
    if (!(in >> v.x() >> v.y())) throw InputError("truncated vertex list");
    if (!std::isfinite(v.x()) || !std::isfinite(v.y())) throw InputError("non-finite vertex coordinate");
  }
  long ne = -1;
  if (!(in >> ne) || ne < 1) throw InputError("bad element count");
  std::vector<std::array<int, 3>> elements(static_cast<std::size_t>(ne));
  std::map<std::array<int, 3>, long> seen;
  for (long e = 0; e < ne; ++e) {
    auto& t = elements[e];
    if (!(in >> t[0] >> t[1] >> t[2])) throw InputError("truncated element list");
    for (int v : t) {
      if (v < 0 || v >= nv) throw InputError("element " + std::to_string(e) + " references missing vertex");
    }
    auto key = t;
    std::sort(key.begin(), key.end());
    if (auto [it, fresh] = seen.emplace(key, e); !fresh) {
      throw InputError("non-conforming mesh: element " + std::to_string(e) + " duplicates element " +
                       std::to_string(it->second));
    }
    const Scalar a = signed_area(vertices[t[0]], vertices[t[1]], vertices[t[2]]);
    if (a < 0) {
      std::swap(t[1], t[2]);
      result.warnings.push_back("element " + std::to_string(e) + " was clockwise; reoriented");
    }
  }
  result.mesh = build_mesh(std::move(vertices), std::move(elements));
  return result;
}

ImportResult import_mesh(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open mesh file " + path.string());
  return parse_mesh(in);
}

void write_mesh(const Mesh& mesh, std::ostream& out) {
  out << "hdgmesh 2d\n" << mesh.vertices.size() << '\n';
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << '\n';
  out << mesh.elements.size() << '\n';
  for (const auto& t : mesh.elements) out << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void export_mesh(const Mesh& mesh, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write mesh file " + path.string());
  write_mesh(mesh, out);
}

MeshReport validate(const Mesh& mesh) {
  MeshReport r;
  const int ne = static_cast<int>(mesh.num_elements());
  std::vector<int> count(mesh.num_facets(), 0);
  for (int e = 0; e < ne; ++e) {
    const auto& t = mesh.elements[e];
    for (int i = 0; i < 3; ++i) {
      const int f = mesh.element_facets[e][i];
      ++count[f];
      auto key = local_edge(t, i);
      std::sort(key.begin(), key.end());
      if (key != mesh.facets[f].vertices) {
        r.conforming = false;
        r.violations.push_back("element " + std::to_string(e) + " edge does not match facet " + std::to_string(f));
      }
      r.max_diameter_to_facet = std::max(r.max_diameter_to_facet, mesh.diameters[e] / mesh.facets[f].length);
    }
    for (int i = 0; i < 3; ++i) {
      const Vec2 a = mesh.vertices[t[(i + 1) % 3]] - mesh.vertices[t[i]];
      const Vec2 b = mesh.vertices[t[(i + 2) % 3]] - mesh.vertices[t[i]];
      const Scalar ang = std::acos(std::clamp(a.dot(b) / (a.norm() * b.norm()), -1.0, 1.0));
      r.min_angle_deg = std::min(r.min_angle_deg, ang * 180 / std::numbers::pi);
    }
    r.max_shape_ratio = std::max(r.max_shape_ratio, mesh.shape_ratios[e]);
    if (signed_area(mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]) <= 0) {
      r.orientation_ok = false;
      r.violations.push_back("element " + std::to_string(e) + " is not counter-clockwise");
    }
  }
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) {
    const auto& fr = mesh.facets[f];
    const int expected = fr.boundary() ? 1 : 2;
    if (count[f] != expected) {
      r.conforming = false;
      r.violations.push_back("facet " + std::to_string(f) + " has " + std::to_string(count[f]) + " neighbors");
    }
    if (!fr.boundary() && fr.plus < fr.minus) {
      r.orientation_ok = false;
      r.violations.push_back("facet " + std::to_string(f) + " has E+ with smaller id than E-");
    }
    const Vec2 expected_normal = fr.boundary() ? mesh.outward_normal(fr.plus, fr.local_in_plus)
                                               : mesh.outward_normal(fr.minus, fr.local_in_minus);
    if ((expected_normal - fr.normal).norm() > 1e-12 || std::abs(fr.normal.norm() - 1) > 1e-12) {
      r.orientation_ok = false;
      r.violations.push_back("facet " + std::to_string(f) + " normal does not point from E- to E+");
    }
  }
  const Scalar box = (mesh.bbox_max - mesh.bbox_min).prod();
  r.area_defect = std::abs(mesh.domain_area() - box) / box;
  return r;
}

PointLocator::PointLocator(const Mesh& mesh, int buckets_per_side) : mesh_(&mesh) {
  nb_ = buckets_per_side > 0
            ? buckets_per_side
            : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(mesh.num_elements()) / 2)));
  lo_ = mesh.bbox_min;
  step_ = (mesh.bbox_max - mesh.bbox_min) / nb_;
  buckets_.assign(static_cast<std::size_t>(nb_) * nb_, {});
  auto cell = [&](Scalar v, int axis) {
    return std::clamp(static_cast<int>(std::floor((v - lo_[axis]) / step_[axis])), 0, nb_ - 1);
  };
  for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
    Vec2 lo = mesh.vertices[mesh.elements[e][0]], hi = lo;
    for (int v : mesh.elements[e]) {
      lo = lo.cwiseMin(mesh.vertices[v]);
      hi = hi.cwiseMax(mesh.vertices[v]);
    }
    const Scalar pad = 1e-10 * (mesh.bbox_max - mesh.bbox_min).maxCoeff();
    for (int j = cell(lo.y() - pad, 1); j <= cell(hi.y() + pad, 1); ++j) {
      for (int i = cell(lo.x() - pad, 0); i <= cell(hi.x() + pad, 0); ++i) buckets_[j * nb_ + i].push_back(e);
    }
  }
}

std::optional<int> PointLocator::locate(const Vec2& x, Scalar tol) const {
  const int i = static_cast<int>(std::floor((x.x() - lo_.x()) / step_.x()));
  const int j = static_cast<int>(std::floor((x.y() - lo_.y()) / step_.y()));
  if (i < -1 || j < -1 || i > nb_ || j > nb_) return std::nullopt;
  const int ic = std::clamp(i, 0, nb_ - 1), jc = std::clamp(j, 0, nb_ - 1);
  for (int e : buckets_[jc * nb_ + ic]) {
    if (mesh_->contains(e, x, tol)) return e;
  }
  return std::nullopt;
}

bool is_nested(const Mesh& coarse, const Mesh& fine, std::vector<int>* parents) {
  PointLocator loc(coarse);
  std::vector<int> out(fine.num_elements(), -1);
  for (int e = 0; e < static_cast<int>(fine.num_elements()); ++e) {
    const auto& t = fine.elements[e];
    const Vec2 centroid = (fine.vertices[t[0]] + fine.vertices[t[1]] + fine.vertices[t[2]]) / 3;
    auto parent = loc.locate(centroid);
    if (!parent) return false;
    for (int v : t) {
      if (!coarse.contains(*parent, fine.vertices[v], 1e-10)) return false;
    }
    out[e] = *parent;
  }
  if (parents) *parents = std::move(out);
  return true;
}

}  // namespace hdgch
