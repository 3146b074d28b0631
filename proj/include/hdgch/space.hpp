#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>

#include "hdgch/mesh.hpp"
#include "hdgch/quadrature.hpp"

namespace hdgch {

using ScalarFunction = std::function<Scalar(const Vec2&)>;
using GradientFunction = std::function<Vec2(const Vec2&)>;

/// Orthonormal basis of P_k on the reference triangle, obtained by
/// orthonormalizing the monomials x^i y^j (i + j <= k). The constant member is
/// sqrt(2) = 1 / sqrt(|reference triangle|).
class ReferenceBasis {
 public:
  explicit ReferenceBasis(int k);

  int degree() const { return k_; }
  int size() const { return static_cast<int>(exponents_.size()); }

  Vec values(const Vec2& xi) const;
  /// size() x 2 matrix of reference gradients.
  Mat gradients(const Vec2& xi) const;

 private:
  Vec monomials(const Vec2& xi) const;
  Mat monomial_gradients(const Vec2& xi) const;

  int k_;
  std::vector<std::array<int, 2>> exponents_;
  Mat coeffs_;  // basis_i = sum_j coeffs_(i, j) * monomial_j
};

/// Orthonormal Legendre polynomials on [0, 1].
Vec facet_basis_values(int k, Scalar t);

/// Degree-k element DOFs followed by degree-k facet DOFs.
struct DofMap {
  int k = 1;
  int element_block = 0;  // (k+1)(k+2)/2
  int facet_block = 0;    // k+1
  int num_elements = 0;
  int num_facets = 0;

  DofMap() = default;
  DofMap(int degree, int elements, int facets);

  Index element_dofs() const { return Index(element_block) * num_elements; }
  Index facet_dofs() const { return Index(facet_block) * num_facets; }
  Index size() const { return element_dofs() + facet_dofs(); }
  Index element_offset(int e) const { return Index(e) * element_block; }
  Index facet_offset(int f) const { return element_dofs() + Index(f) * facet_block; }
};

class Space;

/// Coefficients of a pair (v, v^) in S_h x S^_h.
struct PairField {
  const Space* space = nullptr;
  Vec coeffs;

  auto element_part() { return coeffs.head(dofs().element_dofs()); }
  auto element_part() const { return coeffs.head(dofs().element_dofs()); }
  auto facet_part() { return coeffs.tail(dofs().facet_dofs()); }
  auto facet_part() const { return coeffs.tail(dofs().facet_dofs()); }
  auto element_block(int e) { return coeffs.segment(dofs().element_offset(e), dofs().element_block); }
  auto element_block(int e) const { return coeffs.segment(dofs().element_offset(e), dofs().element_block); }
  auto facet_block(int f) { return coeffs.segment(dofs().facet_offset(f), dofs().facet_block); }
  auto facet_block(int f) const { return coeffs.segment(dofs().facet_offset(f), dofs().facet_block); }

  const DofMap& dofs() const;
};

PairField operator+(const PairField& a, const PairField& b);
PairField operator-(const PairField& a, const PairField& b);
PairField operator*(Scalar s, const PairField& a);

/// Tabulated basis data on one local edge. `reversed` edges traverse the
/// facet parameter opposite to the element's counter-clockwise edge direction.
struct TraceTable {
  Mat values;     // nq x nb
  Mat grad_x;     // reference gradients
  Mat grad_y;
};

/// The discrete spaces on a mesh: element basis is orthonormal on every
/// physical element (element mass matrices are the identity), facet basis is
/// orthonormal on every facet.
class Space {
 public:
  Space(const Mesh& mesh, int k);
  // fields keep a pointer to their space
  Space(const Space&) = delete;
  Space& operator=(const Space&) = delete;

  const Mesh& mesh() const { return *mesh_; }
  const DofMap& dofs() const { return dofs_; }
  int degree() const { return dofs_.k; }
  const ReferenceBasis& basis() const { return basis_; }

  const QuadratureRule& element_rule() const { return element_rule_; }
  const LineRule& facet_rule() const { return facet_rule_; }

  /// Reference basis values (nq x nb) at element_rule() points.
  const Mat& ref_values() const { return ref_values_; }
  const Mat& ref_grad_x() const { return ref_grad_x_; }
  const Mat& ref_grad_y() const { return ref_grad_y_; }

  /// Element basis traces at facet_rule() points of local edge `local`,
  /// ordered along the facet parameter.
  const TraceTable& trace(int e, int local) const;
  /// Facet basis values (nqf x nf) at facet_rule() points.
  const Mat& facet_values() const { return facet_values_; }

  /// Physical basis = reference basis * scale(e).
  Scalar scale(int e) const { return scales_[e]; }
  /// Maps reference gradients to physical ones (times scale(e)).
  const Mat2& inv_jac_t(int e) const { return inv_jac_t_[e]; }
  Scalar facet_scale(int f) const { return facet_scales_[f]; }
  /// Integral over element e of its constant basis function (= sqrt|E|).
  Scalar constant_integral(int e) const { return scales_[e] * constant_value_ * mesh_->areas[e]; }
  /// Whether local edge `local` of `e` runs against the facet parameter.
  bool reversed(int e, int local) const;

  PairField zero() const;
  PairField constant(Scalar value) const;
  /// Wraps a coefficient vector; the size must match dofs().size().
  PairField field(Vec coeffs) const;

  /// Physical point of facet f at parameter t.
  Vec2 facet_point(int f, Scalar t) const;

  Scalar evaluate(const PairField& v, int e, const Vec2& x) const;
  Vec2 evaluate_gradient(const PairField& v, int e, const Vec2& x) const;
  Scalar evaluate_facet(const PairField& v, int f, Scalar t) const;

  /// Values of the element part at element_rule() points of e.
  Vec quadrature_values(const PairField& v, int e) const;

 private:
  void check_inside(int e, const Vec2& x) const;

  const Mesh* mesh_;
  DofMap dofs_;
  ReferenceBasis basis_;
  QuadratureRule element_rule_;
  LineRule facet_rule_;
  Mat ref_values_, ref_grad_x_, ref_grad_y_;
  std::array<std::array<TraceTable, 2>, 3> traces_;
  Mat facet_values_;
  Scalar constant_value_ = 0;
  std::vector<Scalar> scales_;
  std::vector<Mat2> inv_jac_t_;
  std::vector<Scalar> facet_scales_;
};

struct ProjectionOptions {
  /// Midpoint refinement levels applied to the quadrature of the projected
  /// data. One level splits each element into 4 and each facet into 2.
  int subdivisions = 0;
};

/// Element part pi_h f and facet part pi^_h f. Throws InputError on a
/// non-finite sample.
PairField project_l2(const Space& space, const ScalarFunction& f, ProjectionOptions opts = {});

/// Integral of the element part over the domain.
Scalar integral(const PairField& v);
/// |Omega|^-1 times integral(v).
Scalar mean_value(const PairField& v);

/// Random pair field: every coefficient of the reference-orthonormal element
/// and facet bases is uniform on [-1, 1], so values stay O(1) under refinement.
/// With `zero_mean` the pair constant (v-bar, v-bar) is subtracted.
PairField random_field(const Space& space, std::uint64_t seed, bool zero_mean);

}  // namespace hdgch
