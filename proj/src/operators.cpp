#include "hdgch/operators.hpp"

#include <cmath>

namespace hdgch {

ConstrainedSolver::ConstrainedSolver(const SpMat& a, const Vec& constraint) : a_(a), m_(constraint) {
  const auto n = static_cast<int>(a.rows());
  std::vector<Triplet> trips;
  trips.reserve(static_cast<std::size_t>(a.nonZeros()) + 2 * static_cast<std::size_t>(n));
  for (int j = 0; j < a.outerSize(); ++j) {
    for (SpMat::InnerIterator it(a, j); it; ++it) trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  }
  for (int i = 0; i < n; ++i) {
    if (m_[i] != 0.0) {
      trips.emplace_back(i, n, m_[i]);
      trips.emplace_back(n, i, m_[i]);
    }
  }
  saddle_.resize(n + 1, n + 1);
  saddle_.setFromTriplets(trips.begin(), trips.end());
  saddle_.makeCompressed();
  lu_.analyzePattern(saddle_);
  lu_.factorize(saddle_);
  if (lu_.info() != Eigen::Success) {
    throw SolverError("singular constrained system: " + lu_.lastErrorMessage());
  }
}

Vec ConstrainedSolver::solve(const Vec& rhs, Scalar g, Scalar* multiplier) const {
  const Index n = a_.rows();
  Vec b(n + 1);
  b.head(n) = rhs;
  b[n] = g;
  Vec x = lu_.solve(b);
  if (lu_.info() != Eigen::Success) throw SolverError("constrained solve failed");
  const Scalar scale = std::max(b.norm(), std::numeric_limits<Scalar>::min());
  Vec r = b - saddle_ * x;
  stats_ = {};
  while (r.norm() > 1e-13 * scale && stats_.refinements < 3) {
    x += lu_.solve(r);
    r = b - saddle_ * x;
    ++stats_.refinements;
  }
  stats_.residual = r.head(n).norm() / scale;
  stats_.constraint_violation = std::abs(m_.dot(x.head(n)) - g);
  if (multiplier) *multiplier = x[n];
  return x.head(n);
}

DiscreteOperators::DiscreteOperators(const Space& space, Scalar sigma)
    : space_(&space), sigma_(sigma), norms_(space), ad_(assemble_aD(space, sigma)), mean_(mean_functional(space)) {}

const ConstrainedSolver& DiscreteOperators::energy_solver() const {
  if (!energy_) energy_ = std::make_unique<ConstrainedSolver>(ad_, mean_);
  return *energy_;
}

const ConstrainedSolver& DiscreteOperators::gram_solver() const {
  if (!gram_) gram_ = std::make_unique<ConstrainedSolver>(norms_.gram_0h(), mean_);
  return *gram_;
}

PairField DiscreteOperators::laplacian(const PairField& w) const {
  return space_->field(gram_solver().solve(-(ad_ * w.coeffs)));
}

PairField DiscreteOperators::green(const PairField& w) const {
  return space_->field(energy_solver().solve(norms_.gram_0h() * w.coeffs));
}

PairField DiscreteOperators::j_operator(const PairField& w) const {
  if (std::abs(mean_value(w)) > 1e-10) throw InputError("j_operator needs a zero-mean element field");
  return space_->field(energy_solver().solve(norms_.mass() * w.coeffs));
}

Vec DiscreteOperators::consistent_rhs(const GradientFunction& grad) const {
  // With u = (w, w|Gamma) the jump u - u^ vanishes, leaving
  //   (grad w, grad phi)_E - (grad w . n_E, phi - phi^)_dE.
  const Space& s = *space_;
  const Mesh& mesh = s.mesh();
  const DofMap& d = s.dofs();
  const int nb = d.element_block, nf = d.facet_block;
  Vec rhs = Vec::Zero(d.size());
  const QuadratureRule& rule = s.element_rule();
  for (int e = 0; e < d.num_elements; ++e) {
    const Mat2& it = s.inv_jac_t(e);
    const Scalar detJ = 1.0 / (s.scale(e) * s.scale(e));
    auto block = rhs.segment(d.element_offset(e), nb);
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 g = grad(mesh.map_to_physical(e, rule.points[q]));
      const Vec2 m = it.transpose() * g;  // grad phi . g = s * (J^-T grad_ref) . g
      block += rule.weights[q] * detJ * s.scale(e) *
               (m.x() * s.ref_grad_x().row(q).transpose() + m.y() * s.ref_grad_y().row(q).transpose());
    }
    for (int local = 0; local < 3; ++local) {
      const int f = mesh.element_facets[e][local];
      const Vec2 n = mesh.outward_normal(e, local);
      const TraceTable& tt = s.trace(e, local);
      const Scalar len = mesh.facets[f].length;
      auto fblock = rhs.segment(d.facet_offset(f), nf);
      for (std::size_t q = 0; q < s.facet_rule().size(); ++q) {
        const Scalar t = s.facet_rule().points[q];
        const Scalar flux = grad(s.facet_point(f, t)).dot(n);
        const Scalar w = len * s.facet_rule().weights[q] * flux;
        block -= w * s.scale(e) * tt.values.row(static_cast<Index>(q)).transpose();
        fblock += w * s.facet_scale(f) * s.facet_values().row(static_cast<Index>(q)).transpose();
      }
    }
  }
  return rhs;
}

PairField DiscreteOperators::elliptic_projection(const ScalarFunction& w, const GradientFunction& grad) const {
  const Scalar target = integral(project_l2(*space_, w));
  return space_->field(energy_solver().solve(consistent_rhs(grad), target));
}

InitialProjection parse_projection_mode(const std::string& name) {
  if (name == "elliptic") return InitialProjection::elliptic;
  if (name == "l2") return InitialProjection::l2;
  throw InputError("unknown projection mode '" + name + "'");
}

std::string to_string(InitialProjection mode) { return mode == InitialProjection::elliptic ? "elliptic" : "l2"; }

PairField initial_projection(const DiscreteOperators& ops, const ScalarFunction& c0,
                             const std::optional<GradientFunction>& grad, InitialProjection mode,
                             ProjectionOptions opts) {
  if (mode == InitialProjection::l2) return project_l2(ops.space(), c0, opts);
  if (!grad) throw InputError("elliptic initial projection needs a differentiable c0");
  return ops.elliptic_projection(c0, *grad);
}

}  // namespace hdgch
