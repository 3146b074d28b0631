#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hdgch/analysis.hpp"

using namespace hdgch;

namespace {

const Scalar kPi = std::numbers::pi;

Scalar cosine(const Vec2& x) { return std::cos(kPi * x.x()) * std::cos(kPi * x.y()); }
Vec2 cosine_grad(const Vec2& x) {
  return Vec2(-kPi * std::sin(kPi * x.x()) * std::cos(kPi * x.y()), -kPi * std::cos(kPi * x.x()) * std::sin(kPi * x.y()));
}

// Removes the component along the mean functional; what remains must vanish
// when the variational equation holds on M_h.
Scalar off_constraint(const Vec& r, const Vec& m) { return (r - (r.dot(m) / m.dot(m)) * m).norm(); }

Vec dense_constrained_solve(const SpMat& a, const Vec& m, const Vec& rhs) {
  const Index n = a.rows();
  Mat k = Mat::Zero(n + 1, n + 1);
  k.topLeftCorner(n, n) = Mat(a);
  k.block(0, n, n, 1) = m;
  k.block(n, 0, 1, n) = m.transpose();
  Vec b = Vec::Zero(n + 1);
  b.head(n) = rhs;
  return k.fullPivLu().solve(b).head(n);
}

}  // namespace

TEST_SUITE("operators") {

TEST_CASE("laplacian and green operator") {
  for (int n : {2, 4}) {
    for (int k : {1, 2}) {
      const Mesh m = build_structured_mesh(n);
      const Space s(m, k);
      const DiscreteOperators ops(s, default_penalty(k));
      const Vec& mv = ops.mean_vector();
      const SpMat& g0 = ops.norms().gram_0h();
      CHECK(ops.laplacian(s.constant(3.0)).coeffs.norm() <= 1e-10);
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const PairField w = random_field(s, seed, true);
        const PairField lap = ops.laplacian(w);
        const PairField gw = ops.green(w);
        CHECK(std::abs(mean_value(lap)) <= 1e-12);
        CHECK(std::abs(mean_value(gw)) <= 1e-12);
        const Vec r_lap = g0 * lap.coeffs + ops.aD() * w.coeffs;
        CHECK(off_constraint(r_lap, mv) <= 1e-11 * (1 + (ops.aD() * w.coeffs).norm()));
        const Vec r_g = ops.aD() * gw.coeffs - g0 * w.coeffs;
        CHECK(off_constraint(r_g, mv) <= 1e-11 * (1 + (g0 * w.coeffs).norm()));
        CHECK((w + ops.green(lap)).coeffs.norm() <= 1e-10 * w.coeffs.norm());
      }
      const ConstrainedSolver::Stats& st = ops.energy_solver().last_stats();
      CHECK(st.constraint_violation <= 1e-12);
      CHECK(st.residual <= 1e-11);
    }
  }
}

TEST_CASE("green operator accepts pure facet data") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  const DiscreteOperators ops(s, default_penalty(1));
  PairField w = random_field(s, 5, false);
  w.element_part().setZero();
  const PairField gw = ops.green(w);
  CHECK(gw.coeffs.allFinite());
  CHECK(gw.coeffs.norm() > 0);
}

TEST_CASE("J operator") {
  const Mesh m = build_structured_mesh(2);
  const Space s(m, 1);
  const DiscreteOperators ops(s, default_penalty(1));
  CHECK(ops.j_operator(s.zero()).coeffs.norm() == 0.0);
  CHECK_THROWS_AS(ops.j_operator(s.constant(1.0)), InputError);

  PairField w = random_field(s, 9, true);
  w.facet_part().setZero();
  w = w - s.constant(mean_value(w));
  w.facet_part().setZero();
  const PairField jw = ops.j_operator(w);
  const PairField gw = ops.green(w);
  const Vec expected = dense_constrained_solve(ops.aD(), ops.mean_vector(), -(ops.norms().j0() * w.coeffs));
  CHECK((jw.coeffs - gw.coeffs - expected).norm() <= 1e-10 * (1 + jw.coeffs.norm()));
}

TEST_CASE("elliptic projection") {
  const Mesh m = build_structured_mesh(4);
  const Space s(m, 1);
  const DiscreteOperators ops(s, default_penalty(1));
  const PairField lin = ops.elliptic_projection([](const Vec2& x) { return 1 + 2 * x.x() - 3 * x.y(); },
                                                [](const Vec2&) { return Vec2(2, -3); });
  const PairField exact = project_l2(s, [](const Vec2& x) { return 1 + 2 * x.x() - 3 * x.y(); });
  CHECK((lin.coeffs - exact.coeffs).norm() <= 1e-10);

  const PairField p = ops.elliptic_projection(cosine, cosine_grad);
  CHECK(std::abs(integral(p)) <= 1e-12);
  const Vec r = ops.aD() * p.coeffs - ops.consistent_rhs(cosine_grad);
  CHECK(r.norm() <= 1e-11 * (1 + ops.consistent_rhs(cosine_grad).norm()));
}

TEST_CASE("initial projection modes") {
  const Mesh m = build_structured_mesh(8);
  const Space s(m, 1);
  const DiscreteOperators ops(s, default_penalty(1));
  const ScalarFunction shifted = [](const Vec2& x) { return 0.3 + cosine(x); };
  for (InitialProjection mode : {InitialProjection::elliptic, InitialProjection::l2}) {
    const PairField c = initial_projection(ops, shifted, GradientFunction(cosine_grad), mode);
    CHECK(integral(c) == doctest::Approx(0.3).epsilon(1e-12));
  }
  CHECK_THROWS_AS(initial_projection(ops, droplet_indicator, std::nullopt, InitialProjection::elliptic), InputError);
  CHECK(parse_projection_mode("l2") == InitialProjection::l2);
  CHECK(to_string(InitialProjection::elliptic) == "elliptic");
  CHECK_THROWS_AS(parse_projection_mode("h1"), InputError);

  const PairField drop = initial_projection(ops, droplet_indicator, std::nullopt, InitialProjection::l2, {1});
  const Scalar overshoot = sup_norm(drop) - 1;
  MESSAGE("droplet l2 overshoot on n=8: " << overshoot);
  CHECK(overshoot <= 0.35);
}

TEST_CASE("discrete laplacian approximates the Neumann laplacian") {
  std::vector<Scalar> errors;
  for (int n : {8, 16, 32}) {
    const Mesh m = build_structured_mesh(n);
    const Space s(m, 1);
    const DiscreteOperators ops(s, default_penalty(1));
    const PairField lap = ops.laplacian(ops.elliptic_projection(cosine, cosine_grad));
    errors.push_back(l2_error(lap, [](const Vec2& x) { return -2 * kPi * kPi * cosine(x); }));
  }
  const auto rates = convergence_rates(errors);
  MESSAGE("laplacian errors " << errors[0] << " " << errors[1] << " " << errors[2]);
  CHECK(*rates.back() >= 1.0);
}

}
