#include "hdgch/forms.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/QR>
#include <fstream>
#include <iomanip>
#include <limits>

namespace hdgch {

namespace {

// Physical basis gradients at the element quadrature points.
void element_gradients(const Space& space, int e, Mat& gx, Mat& gy) {
  const Mat2& it = space.inv_jac_t(e);
  const Scalar s = space.scale(e);
  gx = s * (it(0, 0) * space.ref_grad_x() + it(0, 1) * space.ref_grad_y());
  gy = s * (it(1, 0) * space.ref_grad_x() + it(1, 1) * space.ref_grad_y());
}

struct EdgeData {
  Mat trace;     // nqf x L : u - u^ for every local DOF
  Mat flux;      // nqf x L : grad u . n_E (element DOFs only)
  Vec weights;   // h_e * w_q
};

EdgeData edge_data(const Space& space, int e, int local) {
  const Mesh& mesh = space.mesh();
  const int nb = space.dofs().element_block;
  const int nf = space.dofs().facet_block;
  const int L = nb + 3 * nf;
  const int f = mesh.element_facets[e][local];
  const TraceTable& tt = space.trace(e, local);
  const Vec2 n = mesh.outward_normal(e, local);
  const Mat2& it = space.inv_jac_t(e);
  const Scalar s = space.scale(e);
  const int nq = static_cast<int>(space.facet_rule().size());

  EdgeData d;
  d.trace = Mat::Zero(nq, L);
  d.flux = Mat::Zero(nq, L);
  d.trace.leftCols(nb) = s * tt.values;
  d.trace.middleCols(nb + local * nf, nf) = -space.facet_scale(f) * space.facet_values();
  // n . (J^-T grad_ref)
  const Vec2 m = it.transpose() * n;
  d.flux.leftCols(nb) = s * (m.x() * tt.grad_x + m.y() * tt.grad_y);
  d.weights.resize(nq);
  for (int q = 0; q < nq; ++q) d.weights[q] = mesh.facets[f].length * space.facet_rule().weights[q];
  return d;
}

SpMat assemble_local(const Space& space, const std::function<Mat(int)>& kernel) {
  std::vector<Triplet> trips;
  const int ne = space.dofs().num_elements;
  for (int e = 0; e < ne; ++e) {
    const Mat k = kernel(e);
    const std::vector<Index> dofs = local_dofs(space, e);
    const auto n = static_cast<Index>(k.rows());
    for (Index j = 0; j < n; ++j) {
      for (Index i = 0; i < n; ++i) {
        if (k(i, j) != 0.0) trips.emplace_back(static_cast<int>(dofs[i]), static_cast<int>(dofs[j]), k(i, j));
      }
    }
  }
  const auto n = static_cast<int>(space.dofs().size());
  SpMat a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Mat padded(const Mat& block, Index size) {
  Mat out = Mat::Zero(size, size);
  out.topLeftCorner(block.rows(), block.cols()) = block;
  return out;
}

}  // namespace

Scalar default_penalty(int k) { return 8.0 * k * k; }

std::vector<Index> local_dofs(const Space& space, int e) {
  const DofMap& d = space.dofs();
  std::vector<Index> dofs;
  dofs.reserve(d.element_block + 3 * d.facet_block);
  for (int i = 0; i < d.element_block; ++i) dofs.push_back(d.element_offset(e) + i);
  for (int local = 0; local < 3; ++local) {
    const int f = space.mesh().element_facets[e][local];
    for (int i = 0; i < d.facet_block; ++i) dofs.push_back(d.facet_offset(f) + i);
  }
  return dofs;
}

Mat local_stiffness(const Space& space, int e) {
  Mat gx, gy;
  element_gradients(space, e, gx, gy);
  const Scalar detJ = 1.0 / (space.scale(e) * space.scale(e));
  Vec w(space.element_rule().size());
  for (Index q = 0; q < w.size(); ++q) w[q] = detJ * space.element_rule().weights[q];
  Mat k = gx.transpose() * w.asDiagonal() * gx + gy.transpose() * w.asDiagonal() * gy;
  return 0.5 * (k + k.transpose());
}

Mat local_penalty(const Space& space, int e, Scalar weight) {
  const int L = space.dofs().element_block + 3 * space.dofs().facet_block;
  Mat k = Mat::Zero(L, L);
  for (int local = 0; local < 3; ++local) {
    const EdgeData d = edge_data(space, e, local);
    k.noalias() += weight * d.trace.transpose() * d.weights.asDiagonal() * d.trace;
  }
  return 0.5 * (k + k.transpose());
}

Mat local_normal_flux(const Space& space, int e) {
  const int nb = space.dofs().element_block;
  Mat k = Mat::Zero(nb, nb);
  for (int local = 0; local < 3; ++local) {
    const EdgeData d = edge_data(space, e, local);
    const Mat g = d.flux.leftCols(nb);
    k.noalias() += space.mesh().diameters[e] * g.transpose() * d.weights.asDiagonal() * g;
  }
  return 0.5 * (k + k.transpose());
}

Mat local_aD(const Space& space, int e, Scalar sigma) {
  const int nb = space.dofs().element_block;
  const int L = nb + 3 * space.dofs().facet_block;
  Mat k = Mat::Zero(L, L);
  k.topLeftCorner(nb, nb) = local_stiffness(space, e);
  const Scalar pen = sigma / space.mesh().diameters[e];
  for (int local = 0; local < 3; ++local) {
    const EdgeData d = edge_data(space, e, local);
    const Mat consistency = d.flux.transpose() * d.weights.asDiagonal() * d.trace;
    k.noalias() -= consistency + consistency.transpose();
    k.noalias() += pen * d.trace.transpose() * d.weights.asDiagonal() * d.trace;
  }
  return 0.5 * (k + k.transpose());
}

SpMat assemble_aD(const Space& space, Scalar sigma) {
  if (!(sigma > 0)) throw InputError("penalty sigma must be positive");
  return assemble_local(space, [&](int e) { return local_aD(space, e, sigma); });
}

SpMat assemble_j(const Space& space, PenaltyWeight weight) {
  return assemble_local(space, [&](int e) {
    const Scalar h = space.mesh().diameters[e];
    return local_penalty(space, e, weight == PenaltyWeight::h ? h : 1.0 / h);
  });
}

SpMat assemble_mass(const Space& space) {
  const auto n = static_cast<int>(space.dofs().size());
  SpMat m(n, n);
  std::vector<Triplet> trips;
  for (Index i = 0; i < space.dofs().element_dofs(); ++i) trips.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
  m.setFromTriplets(trips.begin(), trips.end());
  return m;
}

SpMat assemble_stiffness(const Space& space) {
  const Index L = space.dofs().element_block + 3 * space.dofs().facet_block;
  return assemble_local(space, [&](int e) { return padded(local_stiffness(space, e), L); });
}

SpMat assemble_normal_flux(const Space& space) {
  const Index L = space.dofs().element_block + 3 * space.dofs().facet_block;
  return assemble_local(space, [&](int e) { return padded(local_normal_flux(space, e), L); });
}

SpMat assemble_interior_jumps(const Space& space) {
  const Mesh& mesh = space.mesh();
  const DofMap& d = space.dofs();
  const int nb = d.element_block;
  std::vector<Triplet> trips;
  for (int f = 0; f < static_cast<int>(mesh.num_facets()); ++f) {
    const FacetRecord& fr = mesh.facets[f];
    if (fr.boundary()) continue;
    // [v] = v|E+ - v|E-, both traces ordered along the facet parameter
    const TraceTable& tp = space.trace(fr.plus, fr.local_in_plus);
    const TraceTable& tm = space.trace(fr.minus, fr.local_in_minus);
    Mat jump(tp.values.rows(), 2 * nb);
    jump.leftCols(nb) = space.scale(fr.plus) * tp.values;
    jump.rightCols(nb) = -space.scale(fr.minus) * tm.values;
    Vec w(jump.rows());
    for (Index q = 0; q < w.size(); ++q) w[q] = space.facet_rule().weights[q];  // h_e * w_q / h_e
    Mat k = jump.transpose() * w.asDiagonal() * jump;
    k = 0.5 * (k + k.transpose());
    const Index offs[2] = {d.element_offset(fr.plus), d.element_offset(fr.minus)};
    for (int j = 0; j < 2 * nb; ++j) {
      for (int i = 0; i < 2 * nb; ++i) {
        trips.emplace_back(static_cast<int>(offs[i / nb] + i % nb), static_cast<int>(offs[j / nb] + j % nb), k(i, j));
      }
    }
  }
  const auto n = static_cast<int>(d.size());
  SpMat a(n, n);
  a.setFromTriplets(trips.begin(), trips.end());
  return a;
}

Vec mean_functional(const Space& space) {
  Vec m = Vec::Zero(space.dofs().size());
  for (int e = 0; e < space.dofs().num_elements; ++e) m[space.dofs().element_offset(e)] = space.constant_integral(e);
  return m;
}

Scalar local_coercivity_bound(const Space& space, Scalar sigma) {
  const DofMap& d = space.dofs();
  const int nb = d.element_block;
  const Index L = nb + 3 * d.facet_block;
  Scalar bound = std::numeric_limits<Scalar>::infinity();
  for (int e = 0; e < d.num_elements; ++e) {
    const Mat a = local_aD(space, e, sigma);
    const Mat n = padded(local_stiffness(space, e), L) + local_penalty(space, e, 1.0 / space.mesh().diameters[e]);
    // the common kernel is the local constant pair
    Vec z = Vec::Zero(L);
    z[0] = space.mesh().areas[e] / space.constant_integral(e);
    for (int local = 0; local < 3; ++local) {
      z[nb + local * d.facet_block] = 1.0 / space.facet_scale(space.mesh().element_facets[e][local]);
    }
    Eigen::HouseholderQR<Mat> qr(z);
    const Mat q = qr.householderQ();
    const Mat basis = q.rightCols(L - 1);
    const Mat ar = basis.transpose() * a * basis;
    const Mat nr = basis.transpose() * n * basis;
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> eig(0.5 * (ar + ar.transpose()), 0.5 * (nr + nr.transpose()));
    bound = std::min(bound, eig.eigenvalues().minCoeff());
  }
  return bound;
}

Scalar quadratic_form(const SpMat& a, const Vec& u, const Vec& v) { return u.dot(a * v); }

NormSuite::NormSuite(const Space& space)
    : space_(&space),
      j0_(assemble_j(space, PenaltyWeight::h)),
      j1_(assemble_j(space, PenaltyWeight::inverse_h)),
      mass_(assemble_mass(space)),
      stiffness_(assemble_stiffness(space)),
      flux_(assemble_normal_flux(space)),
      jumps_(assemble_interior_jumps(space)) {
  gram0_ = mass_ + j0_;
  gram1_ = stiffness_ + j1_;
}

Scalar NormSuite::inner_0h(const PairField& u, const PairField& v) const {
  return quadratic_form(gram0_, u.coeffs, v.coeffs);
}

Scalar NormSuite::inner_1h(const PairField& u, const PairField& v) const {
  return quadratic_form(gram1_, u.coeffs, v.coeffs);
}

Scalar NormSuite::norm_l2(const PairField& v) const { return v.element_part().norm(); }

Scalar NormSuite::norm_0h(const PairField& v) const { return std::sqrt(std::max(0.0, inner_0h(v, v))); }

Scalar NormSuite::norm_1h(const PairField& v) const { return std::sqrt(std::max(0.0, inner_1h(v, v))); }

Scalar NormSuite::norm_1h_star(const PairField& v) const {
  return std::sqrt(std::max(0.0, inner_1h(v, v) + quadratic_form(flux_, v.coeffs, v.coeffs)));
}

Scalar NormSuite::norm_dg(const PairField& v) const {
  const Scalar s = quadratic_form(stiffness_, v.coeffs, v.coeffs) + quadratic_form(jumps_, v.coeffs, v.coeffs);
  return std::sqrt(std::max(0.0, s));
}

Scalar NormSuite::j0_value(const PairField& u, const PairField& v) const {
  return quadratic_form(j0_, u.coeffs, v.coeffs);
}

void write_matrix_market(const SpMat& a, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << a.rows() << ' ' << a.cols() << ' ' << a.nonZeros() << '\n' << std::setprecision(17);
  for (int j = 0; j < a.outerSize(); ++j) {
    for (SpMat::InnerIterator it(a, j); it; ++it) out << it.row() + 1 << ' ' << it.col() + 1 << ' ' << it.value() << '\n';
  }
}

}  // namespace hdgch
