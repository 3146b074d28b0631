#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hdgch/types.hpp"

namespace hdgch {

/// One edge of the triangulation.
///
/// Interior facets carry two neighbors; `plus` is the neighbor with the larger
/// element id and the normal points from `minus` into `plus`, so the jump is
/// [v] = v|plus - v|minus. Boundary facets only have `plus` set and their
/// normal is the outward normal of the domain.
struct FacetRecord {
  std::array<int, 2> vertices{};   // sorted ascending; fixes the facet parametrization
  int plus = -1;
  int minus = -1;                  // -1 on the boundary
  int local_in_plus = -1;          // local edge index inside `plus`
  int local_in_minus = -1;
  Vec2 normal = Vec2::Zero();
  Scalar length = 0;

  bool boundary() const { return minus < 0; }
};

/// Conforming triangulation of a polygonal domain.
///
/// Element vertices are stored counter-clockwise. Local edge i of an element
/// is the edge opposite local vertex i.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> elements;
  std::vector<FacetRecord> facets;
  std::vector<std::array<int, 3>> element_facets;  // facet id of each local edge
  std::vector<Scalar> diameters;                   // h_E, longest edge
  std::vector<Scalar> areas;
  std::vector<Scalar> shape_ratios;                // circumradius / inradius
  Scalar h = 0;                                    // max h_E
  Vec2 bbox_min = Vec2::Zero();
  Vec2 bbox_max = Vec2::Zero();

  /// Cells per side for the built-in structured family, 0 for imported meshes.
  int structured_cells = 0;

  std::size_t num_elements() const { return elements.size(); }
  std::size_t num_facets() const { return facets.size(); }
  std::size_t num_vertices() const { return vertices.size(); }

  /// Structured cell side 1/n; falls back to `h` for imported meshes.
  Scalar cell_size() const { return structured_cells > 0 ? 1.0 / structured_cells : h; }

  Scalar domain_area() const;

  /// Outward unit normal of local edge `local` of element `e`.
  Vec2 outward_normal(int e, int local) const;

  /// Vertex coordinates of local edge `local` of element `e`, in facet order.
  std::array<Vec2, 2> facet_points(int f) const {
    return {vertices[facets[f].vertices[0]], vertices[facets[f].vertices[1]]};
  }

  /// Affine map x = v0 + J * xi from the reference triangle (0,0),(1,0),(0,1).
  Mat2 jacobian(int e) const;
  Vec2 map_to_physical(int e, const Vec2& ref) const;
  Vec2 map_to_reference(int e, const Vec2& x) const;

  /// Barycentric coordinates of x with respect to element e.
  Eigen::Vector3d barycentric(int e, const Vec2& x) const;
  bool contains(int e, const Vec2& x, Scalar tol = 1e-12) const;
};

/// Builds vertices/elements/topology and all derived geometry. Throws InputError
/// on inverted elements or non-conforming topology.
Mesh build_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> elements);

/// Unit square split into n x n cells, each cell cut along the lower-left to
/// upper-right diagonal. The family is nested across n in {2^j}.
Mesh build_structured_mesh(int n);

struct ImportResult {
  Mesh mesh;
  std::vector<std::string> warnings;
};

/// Reads the `hdgmesh 2d` ASCII format. Clockwise triangles are reoriented and
/// reported as warnings.
ImportResult import_mesh(const std::filesystem::path& path);
ImportResult parse_mesh(std::istream& in);

void export_mesh(const Mesh& mesh, const std::filesystem::path& path);
void write_mesh(const Mesh& mesh, std::ostream& out);

struct MeshReport {
  bool conforming = true;
  bool orientation_ok = true;
  std::vector<std::string> violations;
  Scalar max_diameter_to_facet = 0;  // max h_E / h_e over element-facet pairs
  Scalar min_angle_deg = 180;
  Scalar max_shape_ratio = 0;
  Scalar area_defect = 0;            // |sum |E| - bbox area| / bbox area for rectangles
};

MeshReport validate(const Mesh& mesh);

/// Point location with a uniform bucket grid over element bounding boxes.
class PointLocator {
 public:
  explicit PointLocator(const Mesh& mesh, int buckets_per_side = 0);
  /// Element containing x, or nullopt.
  std::optional<int> locate(const Vec2& x, Scalar tol = 1e-12) const;

 private:
  const Mesh* mesh_;
  int nb_;
  Vec2 lo_, step_;
  std::vector<std::vector<int>> buckets_;
};

/// True when every element of `fine` lies inside one element of `coarse`.
/// `parents` receives the containing coarse element of each fine element.
bool is_nested(const Mesh& coarse, const Mesh& fine, std::vector<int>* parents = nullptr);

}  // namespace hdgch
