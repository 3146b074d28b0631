#include "hdgch/quadrature.hpp"

#include <array>

namespace hdgch {

LineRule line_rule(int degree) {
  const int n = std::max(1, (degree + 2) / 2);
  Vec x, w;
  gauss_legendre<Scalar>(n, x, w);
  LineRule r;
  r.degree = 2 * n - 1;
  for (int i = 0; i < n; ++i) {
    r.points.push_back(0.5 * (x[i] + 1));
    r.weights.push_back(0.5 * w[i]);
  }
  return r;
}

QuadratureRule triangle_rule(int degree) {
  // x = u, y = v (1 - u) on [0,1]^2 with Jacobian (1 - u): the u-direction sees
  // one extra degree.
  const int n = std::max(1, (degree + 3) / 2);
  Vec x, w;
  gauss_legendre<Scalar>(n, x, w);
  QuadratureRule r;
  r.degree = 2 * n - 2;
  for (int i = 0; i < n; ++i) {
    const Scalar u = 0.5 * (x[i] + 1), wu = 0.5 * w[i];
    for (int j = 0; j < n; ++j) {
      const Scalar v = 0.5 * (x[j] + 1), wv = 0.5 * w[j];
      r.points.emplace_back(u, v * (1 - u));
      r.weights.push_back(wu * wv * (1 - u));
    }
  }
  return r;
}

QuadratureRule subdivided(const QuadratureRule& rule, int levels) {
  if (levels <= 0) return rule;
  // children of the reference triangle: three corner copies scaled by 1/2 and
  // the inverted middle one
  const std::array<Vec2, 4> origin = {Vec2(0, 0), Vec2(0.5, 0), Vec2(0, 0.5), Vec2(0.5, 0.5)};
  const std::array<Scalar, 4> sign = {0.5, 0.5, 0.5, -0.5};
  QuadratureRule child;
  child.degree = rule.degree;
  for (int c = 0; c < 4; ++c) {
    for (std::size_t q = 0; q < rule.size(); ++q) {
      child.points.push_back(origin[c] + sign[c] * rule.points[q]);
      child.weights.push_back(0.25 * rule.weights[q]);
    }
  }
  return subdivided(child, levels - 1);
}

}  // namespace hdgch
