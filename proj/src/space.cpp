#include "hdgch/space.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <random>

namespace hdgch {

namespace {

const std::array<Vec2, 3> kRefVertices = {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)};

Scalar ipow(Scalar x, int p) {
  Scalar r = 1;
  for (int i = 0; i < p; ++i) r *= x;
  return r;
}

}  // namespace

ReferenceBasis::ReferenceBasis(int k) : k_(k) {
  if (k < 1) throw InputError("polynomial degree must be >= 1");
  for (int d = 0; d <= k; ++d) {
    for (int j = 0; j <= d; ++j) exponents_.push_back({d - j, j});
  }
  const int n = size();
  // Gram matrix of monomials, then basis = L^{-1} * monomials with G = L L^T.
  const QuadratureRule rule = triangle_rule(2 * k);
  Mat gram = Mat::Zero(n, n);
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const Vec m = monomials(rule.points[q]);
    gram.noalias() += rule.weights[q] * m * m.transpose();
  }
  Eigen::LLT<Mat> llt(gram);
  coeffs_ = llt.matrixL().solve(Mat::Identity(n, n));
}

Vec ReferenceBasis::monomials(const Vec2& xi) const {
  Vec m(size());
  for (int i = 0; i < size(); ++i) m[i] = ipow(xi.x(), exponents_[i][0]) * ipow(xi.y(), exponents_[i][1]);
  return m;
}

Mat ReferenceBasis::monomial_gradients(const Vec2& xi) const {
  Mat g(size(), 2);
  for (int i = 0; i < size(); ++i) {
    const auto [a, b] = exponents_[i];
    g(i, 0) = a > 0 ? a * ipow(xi.x(), a - 1) * ipow(xi.y(), b) : 0.0;
    g(i, 1) = b > 0 ? b * ipow(xi.x(), a) * ipow(xi.y(), b - 1) : 0.0;
  }
  return g;
}

Vec ReferenceBasis::values(const Vec2& xi) const { return coeffs_ * monomials(xi); }

Mat ReferenceBasis::gradients(const Vec2& xi) const { return coeffs_ * monomial_gradients(xi); }

Vec facet_basis_values(int k, Scalar t) {
  // Legendre recurrence in s = 2t - 1, scaled to unit L2 norm on [0, 1]
  const Scalar s = 2 * t - 1;
  Vec p(k + 1);
  p[0] = 1;
  if (k >= 1) p[1] = s;
  for (int n = 1; n < k; ++n) p[n + 1] = ((2 * n + 1) * s * p[n] - n * p[n - 1]) / (n + 1);
  for (int n = 0; n <= k; ++n) p[n] *= std::sqrt(2.0 * n + 1);
  return p;
}

DofMap::DofMap(int degree, int elements, int facets)
    : k(degree),
      element_block((degree + 1) * (degree + 2) / 2),
      facet_block(degree + 1),
      num_elements(elements),
      num_facets(facets) {}

const DofMap& PairField::dofs() const { return space->dofs(); }

PairField operator+(const PairField& a, const PairField& b) { return {a.space, a.coeffs + b.coeffs}; }
PairField operator-(const PairField& a, const PairField& b) { return {a.space, a.coeffs - b.coeffs}; }
PairField operator*(Scalar s, const PairField& a) { return {a.space, s * a.coeffs}; }

Space::Space(const Mesh& mesh, int k)
    : mesh_(&mesh),
      dofs_(k, static_cast<int>(mesh.num_elements()), static_cast<int>(mesh.num_facets())),
      basis_(k),
      element_rule_(triangle_rule(std::max(4 * k, 2 * k + 2))),
      facet_rule_(line_rule(2 * k + 2)) {
  const int nb = basis_.size();
  const int nq = static_cast<int>(element_rule_.size());
  ref_values_.resize(nq, nb);
  ref_grad_x_.resize(nq, nb);
  ref_grad_y_.resize(nq, nb);
  for (int q = 0; q < nq; ++q) {
    ref_values_.row(q) = basis_.values(element_rule_.points[q]).transpose();
    const Mat g = basis_.gradients(element_rule_.points[q]);
    ref_grad_x_.row(q) = g.col(0).transpose();
    ref_grad_y_.row(q) = g.col(1).transpose();
  }

  const int nqf = static_cast<int>(facet_rule_.size());
  facet_values_.resize(nqf, k + 1);
  for (int q = 0; q < nqf; ++q) facet_values_.row(q) = facet_basis_values(k, facet_rule_.points[q]).transpose();

  for (int local = 0; local < 3; ++local) {
    const Vec2 a = kRefVertices[(local + 1) % 3];
    const Vec2 b = kRefVertices[(local + 2) % 3];
    for (int rev = 0; rev < 2; ++rev) {
      TraceTable& tt = traces_[local][rev];
      tt.values.resize(nqf, nb);
      tt.grad_x.resize(nqf, nb);
      tt.grad_y.resize(nqf, nb);
      for (int q = 0; q < nqf; ++q) {
        const Scalar s = rev ? 1 - facet_rule_.points[q] : facet_rule_.points[q];
        const Vec2 xi = a + s * (b - a);
        tt.values.row(q) = basis_.values(xi).transpose();
        const Mat g = basis_.gradients(xi);
        tt.grad_x.row(q) = g.col(0).transpose();
        tt.grad_y.row(q) = g.col(1).transpose();
      }
    }
  }

  constant_value_ = basis_.values(Vec2(1.0 / 3, 1.0 / 3))[0];
  const int ne = static_cast<int>(mesh.num_elements());
  scales_.resize(ne);
  inv_jac_t_.resize(ne);
  for (int e = 0; e < ne; ++e) {
    const Mat2 J = mesh.jacobian(e);
    scales_[e] = 1.0 / std::sqrt(std::abs(J.determinant()));
    inv_jac_t_[e] = J.inverse().transpose();
  }
  facet_scales_.resize(mesh.num_facets());
  for (std::size_t f = 0; f < mesh.num_facets(); ++f) facet_scales_[f] = 1.0 / std::sqrt(mesh.facets[f].length);
}

bool Space::reversed(int e, int local) const {
  const int f = mesh_->element_facets[e][local];
  return mesh_->elements[e][(local + 1) % 3] != mesh_->facets[f].vertices[0];
}

const TraceTable& Space::trace(int e, int local) const { return traces_[local][reversed(e, local) ? 1 : 0]; }

PairField Space::zero() const { return {this, Vec::Zero(dofs_.size())}; }

PairField Space::constant(Scalar value) const {
  PairField v = zero();
  // the first element basis function is the constant 1/sqrt|E|, the first facet one 1/sqrt(h_e)
  for (int e = 0; e < dofs_.num_elements; ++e) v.element_block(e)[0] = value / (scales_[e] * constant_value_);
  for (int f = 0; f < dofs_.num_facets; ++f) v.facet_block(f)[0] = value / facet_scales_[f];
  return v;
}

PairField Space::field(Vec coeffs) const {
  if (coeffs.size() != dofs_.size()) throw InputError("coefficient vector does not match the DOF map");
  return {this, std::move(coeffs)};
}

Vec2 Space::facet_point(int f, Scalar t) const {
  const auto [a, b] = mesh_->facet_points(f);
  return a + t * (b - a);
}

void Space::check_inside(int e, const Vec2& x) const {
  const Eigen::Vector3d bc = mesh_->barycentric(e, x);
  if ((bc.array() < -1e-12).any() || (bc.array() > 1 + 1e-12).any()) {
    throw InputError("point outside element " + std::to_string(e));
  }
}

Scalar Space::evaluate(const PairField& v, int e, const Vec2& x) const {
  check_inside(e, x);
  return scales_[e] * basis_.values(mesh_->map_to_reference(e, x)).dot(v.element_block(e));
}

Vec2 Space::evaluate_gradient(const PairField& v, int e, const Vec2& x) const {
  check_inside(e, x);
  const Mat g = basis_.gradients(mesh_->map_to_reference(e, x));
  const Vec2 ref = g.transpose() * v.element_block(e);
  return scales_[e] * (inv_jac_t_[e] * ref);
}

Scalar Space::evaluate_facet(const PairField& v, int f, Scalar t) const {
  return facet_scales_[f] * facet_basis_values(dofs_.k, t).dot(v.facet_block(f));
}

Vec Space::quadrature_values(const PairField& v, int e) const {
  return scales_[e] * (ref_values_ * v.element_block(e));
}

PairField project_l2(const Space& space, const ScalarFunction& f, ProjectionOptions opts) {
  const Mesh& mesh = space.mesh();
  const int k = space.degree();
  PairField out = space.zero();

  // data is not polynomial, so it gets a richer rule than the forms
  const QuadratureRule erule = subdivided(triangle_rule(space.element_rule().degree + 8), opts.subdivisions);
  Mat ev(erule.size(), space.basis().size());
  for (std::size_t q = 0; q < erule.size(); ++q) ev.row(q) = space.basis().values(erule.points[q]).transpose();

  auto sample = [&](const Vec2& x) {
    const Scalar val = f(x);
    if (!std::isfinite(val)) throw InputError("projected function is not finite at a quadrature point");
    return val;
  };

  for (int e = 0; e < static_cast<int>(mesh.num_elements()); ++e) {
    const Scalar detJ = 1.0 / (space.scale(e) * space.scale(e));
    Vec acc = Vec::Zero(ev.cols());
    for (std::size_t q = 0; q < erule.size(); ++q) {
      acc += erule.weights[q] * sample(mesh.map_to_physical(e, erule.points[q])) * ev.row(q).transpose();
    }
    // physical basis is orthonormal: coefficient = integral of f * phi
    out.element_block(e) = detJ * space.scale(e) * acc;
  }

  // facet rule split into 2^s equal pieces
  const LineRule base = line_rule(space.facet_rule().degree + 8);
  const int pieces = 1 << opts.subdivisions;
  for (int f = 0; f < static_cast<int>(mesh.num_facets()); ++f) {
    const Scalar len = mesh.facets[f].length;
    Vec acc = Vec::Zero(k + 1);
    for (int p = 0; p < pieces; ++p) {
      for (std::size_t q = 0; q < base.size(); ++q) {
        const Scalar t = (p + base.points[q]) / pieces;
        acc += (base.weights[q] / pieces) * sample(space.facet_point(f, t)) * facet_basis_values(k, t);
      }
    }
    out.facet_block(f) = len * space.facet_scale(f) * acc;
  }
  return out;
}

Scalar integral(const PairField& v) {
  const Space& space = *v.space;
  Scalar sum = 0;
  // only the constant basis member has a nonzero integral
  for (int e = 0; e < space.dofs().num_elements; ++e) sum += v.element_block(e)[0] * space.constant_integral(e);
  return sum;
}

Scalar mean_value(const PairField& v) { return integral(v) / v.space->mesh().domain_area(); }

PairField random_field(const Space& space, std::uint64_t seed, bool zero_mean) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Scalar> unif(-1.0, 1.0);
  PairField v = space.zero();
  const DofMap& d = space.dofs();
  for (int e = 0; e < d.num_elements; ++e) {
    // reference-orthonormal coefficient u corresponds to physical u / scale * sqrt(1/2)
    for (int i = 0; i < d.element_block; ++i) v.element_block(e)[i] = unif(rng) / space.scale(e) * std::sqrt(0.5);
  }
  for (int f = 0; f < d.num_facets; ++f) {
    for (int i = 0; i < d.facet_block; ++i) v.facet_block(f)[i] = unif(rng) / space.facet_scale(f);
  }
  if (zero_mean) v = v - space.constant(mean_value(v));
  return v;
}

}  // namespace hdgch
