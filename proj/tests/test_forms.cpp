#include <doctest.h>

#include <cmath>

#include "hdgch/forms.hpp"

using namespace hdgch;

namespace {

Scalar form(const SpMat& a, const PairField& u, const PairField& v) { return quadratic_form(a, u.coeffs, v.coeffs); }

// a_D on a one-element mesh, integrated from point evaluations of the basis.
Mat dense_aD_oracle(const Space& s, Scalar sigma) {
  const Mesh& m = s.mesh();
  const Index n = s.dofs().size();
  const Scalar hE = m.diameters[0];
  const QuadratureRule q = triangle_rule(6);
  const LineRule l = line_rule(6);
  const Scalar det = std::abs(m.jacobian(0).determinant());
  std::vector<PairField> unit;
  for (Index i = 0; i < n; ++i) unit.push_back(s.field(Vec::Unit(n, i)));
  Mat a = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      Scalar sum = 0;
      for (std::size_t p = 0; p < q.size(); ++p) {
        const Vec2 x = m.map_to_physical(0, q.points[p]);
        sum += q.weights[p] * det * s.evaluate_gradient(unit[i], 0, x).dot(s.evaluate_gradient(unit[j], 0, x));
      }
      for (int local = 0; local < 3; ++local) {
        const int f = m.element_facets[0][local];
        const Vec2 normal = m.outward_normal(0, local);
        for (std::size_t p = 0; p < l.size(); ++p) {
          const Scalar t = l.points[p];
          const Vec2 x = s.facet_point(f, t);
          const Scalar ui = s.evaluate(unit[i], 0, x) - s.evaluate_facet(unit[i], f, t);
          const Scalar uj = s.evaluate(unit[j], 0, x) - s.evaluate_facet(unit[j], f, t);
          const Scalar gi = s.evaluate_gradient(unit[i], 0, x).dot(normal);
          const Scalar gj = s.evaluate_gradient(unit[j], 0, x).dot(normal);
          sum += l.weights[p] * m.facets[f].length * (-gj * ui - uj * gi + sigma / hE * ui * uj);
        }
      }
      a(i, j) = sum;
    }
  }
  return a;
}

}  // namespace

TEST_SUITE("forms") {

TEST_CASE("constants are in the kernel of a_D") {
  const Mesh m = build_structured_mesh(4);
  for (int k : {1, 2}) {
    const Space s(m, k);
    const SpMat a = assemble_aD(s, default_penalty(k));
    const PairField one = s.constant(1);
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
      const PairField w = random_field(s, seed, false);
      CHECK(std::abs(form(a, one, w)) <= 1e-12 * (1 + w.coeffs.norm()));
    }
  }
}

TEST_CASE("single element matches a dense quadrature oracle") {
  const Mesh m = build_mesh({Vec2(0.1, 0.0), Vec2(1.0, 0.2), Vec2(0.3, 0.8)}, {{0, 1, 2}});
  for (int k : {1, 2}) {
    const Space s(m, k);
    const Mat oracle = dense_aD_oracle(s, 3.0);
    const Mat assembled = Mat(assemble_aD(s, 3.0));
    CHECK((assembled - oracle).cwiseAbs().maxCoeff() <= 1e-12 * (1 + oracle.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("assembled operators are exactly symmetric") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 2);
  for (const SpMat& a : {assemble_aD(s, 8.0), assemble_j(s, PenaltyWeight::h), assemble_j(s, PenaltyWeight::inverse_h),
                         assemble_mass(s), assemble_stiffness(s), assemble_interior_jumps(s)}) {
    CHECK(SpMat(a - SpMat(a.transpose())).norm() <= 1e-15 * a.norm());
  }
  CHECK_THROWS_AS(assemble_aD(s, 0.0), InputError);
}

TEST_CASE("coercivity") {
  const Mesh m = build_structured_mesh(4);
  for (int k : {1, 2}) {
    const Space s(m, k);
    const Scalar s0 = default_penalty(k);
    CHECK(local_coercivity_bound(s, s0) > 0);
    Scalar last = -1e300;
    for (Scalar f : {2.0, 4.0, 8.0}) {
      const Scalar b = local_coercivity_bound(s, f * s0);
      CHECK(b >= last);
      last = b;
    }
    CHECK(local_coercivity_bound(s, 0.01) < 0);
  }
}

TEST_CASE("j1 vanishes on continuous fields") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  const PairField v = project_l2(s, [](const Vec2& x) { return 3 * x.x() - x.y() + 1; });
  const SpMat j1 = assemble_j(s, PenaltyWeight::inverse_h);
  CHECK(std::abs(form(j1, v, v)) <= 1e-14 * j1.norm() * v.coeffs.squaredNorm());
}

TEST_CASE("two-element hand computation of j1") {
  const Mesh m = build_structured_mesh(1);
  const Space s(m, 1);
  PairField u = s.zero();
  u.element_block(0)(0) = 1 / (s.scale(0) * std::sqrt(2.0));  // reference constant member is sqrt(2)
  CHECK(s.evaluate(u, 0, m.map_to_physical(0, Vec2(0.3, 0.3))) == doctest::Approx(1.0));
  const Scalar perimeter = 2 + std::sqrt(2.0);
  const Scalar expected = perimeter / m.diameters[0];
  CHECK(form(assemble_j(s, PenaltyWeight::inverse_h), u, u) == doctest::Approx(expected).epsilon(1e-13));
  CHECK(form(assemble_j(s, PenaltyWeight::h), u, u) == doctest::Approx(perimeter * m.diameters[0]).epsilon(1e-13));
}

TEST_CASE("norms of constants") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  const NormSuite norms(s);
  const PairField c = s.constant(-2.0);
  CHECK(norms.norm_1h(c) * norms.norm_1h(c) <= 1e-12);  // the form is only zero up to roundoff
  CHECK(norms.norm_0h(c) == doctest::Approx(2.0).epsilon(1e-13));
}

TEST_CASE("norm relations on random fields") {
  const Mesh m = build_structured_mesh(8);
  const Space s(m, 1);
  const NormSuite norms(s);
  const Scalar h = m.h;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const PairField u = random_field(s, seed, false);
    const PairField v = random_field(s, seed + 1000, false);
    const Scalar u1 = norms.norm_1h(u), v1 = norms.norm_1h(v), u0 = norms.norm_0h(u), v0 = norms.norm_0h(v);
    CHECK(norms.j0_value(u, u) <= h * h * u1 * u1 * (1 + 1e-12));
    CHECK(norms.norm_1h_star(u) >= u1 * (1 - 1e-12));
    CHECK(norms.inner_0h(u, u) == doctest::Approx(u0 * u0).epsilon(1e-13));
    CHECK(std::abs(norms.inner_0h(u, v)) <= u0 * v0 * (1 + 1e-12));
    CHECK(std::abs(norms.j0_value(u, v)) <= h * u0 * v1 * (1 + 1e-12));
    CHECK(norms.norm_dg(u) <= 3 * u1);
  }
}

TEST_CASE("1,h norm equals the element-wise sum") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 2);
  const NormSuite norms(s);
  const PairField v = random_field(s, 11, false);
  Scalar direct = 0;
  for (int e = 0; e < static_cast<int>(m.num_elements()); ++e) {
    const std::vector<Index> dofs = local_dofs(s, e);
    Vec local(static_cast<Index>(dofs.size()));
    for (std::size_t i = 0; i < dofs.size(); ++i) local(Index(i)) = v.coeffs(dofs[i]);
    const Vec ue = local.head(s.dofs().element_block);
    direct += ue.dot(local_stiffness(s, e) * ue) + local.dot(local_penalty(s, e, 1 / m.diameters[e]) * local);
  }
  CHECK(norms.norm_1h(v) * norms.norm_1h(v) == doctest::Approx(direct).epsilon(1e-12));
}

}
