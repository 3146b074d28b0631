#include <doctest.h>

#include <cmath>
#include <sstream>

#include "hdgch/mesh.hpp"

using namespace hdgch;

TEST_SUITE("mesh") {

TEST_CASE("smallest structured mesh") {
  const Mesh m = build_structured_mesh(1);
  CHECK(m.num_elements() == 2);
  CHECK(m.num_vertices() == 4);
  CHECK(m.num_facets() == 5);
  int interior = 0;
  for (const FacetRecord& f : m.facets) interior += f.boundary() ? 0 : 1;
  CHECK(interior == 1);
}

TEST_CASE("structured sizes") {
  const Mesh m = build_structured_mesh(8);
  CHECK(m.num_elements() == 128);
  CHECK(m.cell_size() == doctest::Approx(1.0 / 8));
  CHECK(m.h == doctest::Approx(std::sqrt(2.0) / 8));
  CHECK(build_structured_mesh(2).num_elements() == 8);
  CHECK_THROWS_AS(build_structured_mesh(0), InputError);
}

TEST_CASE("children of n=1 lie inside their parent") {
  const Mesh coarse = build_structured_mesh(1);
  const Mesh fine = build_structured_mesh(2);
  std::vector<int> count(coarse.num_elements(), 0);
  for (std::size_t e = 0; e < fine.num_elements(); ++e) {
    Vec2 centre = Vec2::Zero();
    for (int v : fine.elements[e]) centre += fine.vertices[v] / 3.0;
    int owners = 0;
    for (std::size_t p = 0; p < coarse.num_elements(); ++p) {
      if (coarse.contains(static_cast<int>(p), centre)) {
        ++owners;
        ++count[p];
      }
    }
    CHECK(owners == 1);
  }
  CHECK(count[0] == 4);
  CHECK(count[1] == 4);
}

TEST_CASE("nestedness across the family") {
  for (int j = 0; j < 5; ++j) {
    CHECK(is_nested(build_structured_mesh(1 << j), build_structured_mesh(1 << (j + 1))));
  }
  CHECK_FALSE(is_nested(build_structured_mesh(2), build_structured_mesh(3)));
}

TEST_CASE("areas and normals") {
  const Mesh m = build_structured_mesh(8);
  Scalar area = 0;
  for (Scalar a : m.areas) area += a;
  CHECK(std::abs(area - 1.0) <= 1e-13);
  for (const FacetRecord& f : m.facets) {
    if (f.boundary()) continue;
    const Vec2 n = m.outward_normal(f.minus, f.local_in_minus);
    CHECK((n - f.normal).norm() <= 1e-14);
    CHECK(f.plus > f.minus);
  }
}

TEST_CASE("export then import keeps connectivity") {
  const Mesh m = build_structured_mesh(4);
  std::stringstream ss;
  write_mesh(m, ss);
  const ImportResult r = parse_mesh(ss);
  CHECK(r.warnings.empty());
  CHECK(r.mesh.elements == m.elements);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) CHECK(r.mesh.vertices[i] == m.vertices[i]);
}

TEST_CASE("bad mesh files") {
  SUBCASE("duplicated element") {
    std::stringstream ss("hdgmesh 2d\n4\n0 0\n1 0\n1 1\n0 1\n3\n0 1 2\n0 2 3\n0 1 2\n");
    CHECK_THROWS_AS(parse_mesh(ss), InputError);
  }
  SUBCASE("garbage") {
    std::stringstream ss("hdgmesh 2d\n2\n0 zero\n");
    CHECK_THROWS_AS(parse_mesh(ss), InputError);
  }
  SUBCASE("degenerate element") {
    std::stringstream ss("hdgmesh 2d\n3\n0 0\n1 0\n2 0\n1\n0 1 2\n");
    CHECK_THROWS_AS(parse_mesh(ss), InputError);
  }
}

TEST_CASE("clockwise triangle is reoriented with a warning") {
  std::stringstream ss("hdgmesh 2d\n4\n0 0\n1 0\n1 1\n0 1\n2\n0 1 2\n0 3 2\n");
  const ImportResult r = parse_mesh(ss);
  CHECK(r.warnings.size() == 1);
  for (std::size_t e = 0; e < r.mesh.num_elements(); ++e) {
    const auto& t = r.mesh.elements[e];
    const Vec2 a = r.mesh.vertices[t[1]] - r.mesh.vertices[t[0]];
    const Vec2 b = r.mesh.vertices[t[2]] - r.mesh.vertices[t[0]];
    CHECK(a.x() * b.y() - a.y() * b.x() > 0);
  }
}

TEST_CASE("validation report") {
  const MeshReport r8 = validate(build_structured_mesh(8));
  CHECK(r8.conforming);
  CHECK(r8.orientation_ok);
  CHECK(r8.min_angle_deg == doctest::Approx(45.0).epsilon(1e-12));
  CHECK(validate(build_structured_mesh(1)).min_angle_deg == doctest::Approx(validate(build_structured_mesh(64)).min_angle_deg));

  Mesh bad = build_structured_mesh(2);
  for (FacetRecord& f : bad.facets) {
    if (!f.boundary()) {
      f.normal = -f.normal;
      break;
    }
  }
  const MeshReport rb = validate(bad);
  CHECK_FALSE(rb.orientation_ok);
  CHECK_FALSE(rb.violations.empty());
}

TEST_CASE("point location") {
  const Mesh m = build_structured_mesh(8);
  const PointLocator loc(m);
  const auto e = loc.locate(Vec2(0.3, 0.61));
  REQUIRE(e.has_value());
  CHECK(m.contains(*e, Vec2(0.3, 0.61)));
  CHECK_FALSE(loc.locate(Vec2(1.5, 0.5)).has_value());
}

}
