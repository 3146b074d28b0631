#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "hdgch/analysis.hpp"

using namespace hdgch;

namespace {

Scalar factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

Scalar facet_error(const Space& s, const ScalarFunction& f, int face, const std::function<Scalar(Scalar)>& v) {
  const LineRule& q = s.facet_rule();
  Scalar sum = 0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Scalar d = f(s.facet_point(face, q.points[i])) - v(q.points[i]);
    sum += q.weights[i] * d * d;
  }
  return std::sqrt(sum * s.mesh().facets[face].length);
}

}  // namespace

TEST_SUITE("space") {

TEST_CASE("quadrature exactness") {
  for (int d : {2, 4, 7, 10}) {
    const QuadratureRule q = triangle_rule(d);
    CHECK(q.degree >= d);
    Scalar wsum = 0;
    for (Scalar w : q.weights) {
      CHECK(w > 0);
      wsum += w;
    }
    CHECK(wsum == doctest::Approx(0.5).epsilon(1e-14));
    for (int a = 0; a <= d; ++a) {
      for (int b = 0; a + b <= d; ++b) {
        Scalar sum = 0;
        for (std::size_t i = 0; i < q.size(); ++i) sum += q.weights[i] * std::pow(q.points[i].x(), a) * std::pow(q.points[i].y(), b);
        CHECK(std::abs(sum - factorial(a) * factorial(b) / factorial(a + b + 2)) <= 1e-13);
      }
    }
  }
  const LineRule l = line_rule(7);
  Scalar sum = 0;
  for (std::size_t i = 0; i < l.size(); ++i) sum += l.weights[i] * std::pow(l.points[i], 7);
  CHECK(sum == doctest::Approx(1.0 / 8).epsilon(1e-14));
}

TEST_CASE("reference basis") {
  for (int k = 1; k <= 3; ++k) {
    const ReferenceBasis b(k);
    CHECK(b.size() == (k + 1) * (k + 2) / 2);
    CHECK(b.values(Vec2(1.0 / 3, 1.0 / 3))(0) == doctest::Approx(std::sqrt(2.0)));
    CHECK(b.gradients(Vec2(0.2, 0.3)).row(0).norm() <= 1e-14);
    const QuadratureRule q = triangle_rule(2 * k);
    Mat gram = Mat::Zero(b.size(), b.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      const Vec v = b.values(q.points[i]);
      gram += q.weights[i] * v * v.transpose();
    }
    CHECK((gram - Mat::Identity(b.size(), b.size())).norm() <= 1e-12);
  }
}

TEST_CASE("dof map layout") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 2);
  const DofMap& d = s.dofs();
  CHECK(d.element_block == 6);
  CHECK(d.facet_block == 3);
  CHECK(d.facet_offset(0) == d.element_dofs());
  CHECK(d.element_offset(1) == 6);
  CHECK(d.size() == 6 * 32 + 3 * Index(m.num_facets()));
}

TEST_CASE("projection reproduces polynomials") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 2);
  const ScalarFunction p = [](const Vec2& x) { return 1 + 2 * x.x() - x.y() + 3 * x.x() * x.y() - x.y() * x.y(); };
  const PairField v = project_l2(s, p);
  const PairField w = project_l2(s, p, {2});
  CHECK((v.coeffs - w.coeffs).norm() <= 1e-12);
  for (int e = 0; e < 32; e += 5) {
    const Vec2 x = m.map_to_physical(e, Vec2(0.2, 0.3));
    CHECK(s.evaluate(v, e, x) == doctest::Approx(p(x)).epsilon(1e-12));
  }
  for (int f = 0; f < static_cast<int>(m.num_facets()); f += 7) {
    CHECK(s.evaluate_facet(v, f, 0.3) == doctest::Approx(p(s.facet_point(f, 0.3))).epsilon(1e-12));
  }
}

TEST_CASE("projection rate for a smooth function") {
  const Scalar pi = std::numbers::pi;
  const ScalarFunction f = [pi](const Vec2& x) { return std::sin(pi * x.x()) * std::cos(pi * x.y()); };
  std::vector<Scalar> errors;
  for (int n : {4, 8, 16}) {
    const Mesh m = build_structured_mesh(n);
    const Space s(m, 1);
    errors.push_back(l2_error(project_l2(s, f), f));
  }
  for (const auto& r : convergence_rates(errors)) {
    if (r) CHECK(std::abs(*r - 2) <= 0.1);
  }
}

TEST_CASE("facet projection is the best approximation on each facet") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  const ScalarFunction f = [](const Vec2& x) { return std::exp(x.x()) * std::sin(3 * x.y()); };
  const PairField v = project_l2(s, f);
  for (int face = 0; face < static_cast<int>(m.num_facets()); ++face) {
    const FacetRecord& rec = m.facets[face];
    const Scalar hat = facet_error(s, f, face, [&](Scalar t) { return s.evaluate_facet(v, face, t); });
    for (int e : {rec.plus, rec.minus}) {
      if (e < 0) continue;
      const Scalar trace = facet_error(s, f, face, [&](Scalar t) { return s.evaluate(v, e, s.facet_point(face, t)); });
      CHECK(hat <= trace + 1e-14);
    }
  }
}

TEST_CASE("mean values") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  CHECK(mean_value(s.constant(2.5)) == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(mean_value(project_l2(s, [](const Vec2& x) { return x.x(); })) == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(std::abs(mean_value(random_field(s, 3, true))) <= 1e-13);
}

TEST_CASE("evaluation") {
  const Mesh m = build_structured_mesh(2);
  const Space s(m, 1);
  const PairField v = project_l2(s, [](const Vec2& x) { return 2 - x.x() + 4 * x.y(); });
  for (int e = 0; e < 8; ++e) {
    for (int vtx : m.elements[e]) {
      const Vec2 x = m.vertices[vtx];
      CHECK(s.evaluate(v, e, x) == doctest::Approx(2 - x.x() + 4 * x.y()).epsilon(1e-13));
      CHECK((s.evaluate_gradient(v, e, x) - Vec2(-1, 4)).norm() <= 1e-12);
    }
  }
  const Vec values = s.quadrature_values(v, 3);
  const QuadratureRule& q = s.element_rule();
  for (std::size_t i = 0; i < q.size(); ++i) {
    CHECK(values(Index(i)) == doctest::Approx(s.evaluate(v, 3, m.map_to_physical(3, q.points[i]))).epsilon(1e-13));
  }
  CHECK_THROWS_AS(s.evaluate(v, 0, Vec2(5, 5)), InputError);
}

TEST_CASE("projection is idempotent on element parts") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 2);
  const PointLocator loc(m);
  const PairField v = project_l2(s, [](const Vec2& x) { return std::cos(4 * x.x()) * x.y(); });
  const PairField w = project_l2(s, [&](const Vec2& x) { return s.evaluate(v, *loc.locate(x), x); });
  CHECK((v.element_part() - w.element_part()).norm() <= 1e-12);
}

TEST_CASE("projection is L2 stable") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<Scalar> u(-3, 3);
  for (int trial = 0; trial < 50; ++trial) {
    const Scalar a = u(rng), b = u(rng), c = u(rng), d = u(rng);
    const ScalarFunction f = [=](const Vec2& x) { return a * std::sin(b * x.x() + c) + d * x.y() * x.y(); };
    const PairField v = project_l2(s, f);
    const Scalar norm_f = l2_error(s.zero(), f);
    CHECK(v.element_part().norm() <= norm_f + 1e-10);
  }
}

TEST_CASE("non-finite data is rejected") {
  const Mesh m = build_structured_mesh(2);
  const Space s(m, 1);
  CHECK_THROWS_AS(project_l2(s, [](const Vec2&) { return std::nan(""); }), InputError);
}

}
