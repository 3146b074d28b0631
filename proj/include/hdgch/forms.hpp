#pragma once

#include <filesystem>
#include <vector>

#include "hdgch/space.hpp"

namespace hdgch {

/// Default interior penalty for degree k.
Scalar default_penalty(int k);

/// Global DOFs seen by one element: its element block followed by the facet
/// blocks of local edges 0, 1, 2.
std::vector<Index> local_dofs(const Space& space, int e);

/// Element kernel of a_D on the local_dofs() layout:
///   (grad u, grad v)_E - (grad u.n, v - v^)_dE - (u - u^, grad v.n)_dE
///   + sigma/h_E (u - u^, v - v^)_dE
Mat local_aD(const Space& space, int e, Scalar sigma);

/// weight * (u - u^, v - v^)_dE on the local_dofs() layout.
Mat local_penalty(const Space& space, int e, Scalar weight);

/// h_E (grad u.n_E, grad v.n_E)_dE on the element block.
Mat local_normal_flux(const Space& space, int e);

/// Broken H1 stiffness (grad u, grad v)_E on the element block.
Mat local_stiffness(const Space& space, int e);

SpMat assemble_aD(const Space& space, Scalar sigma);

enum class PenaltyWeight { h, inverse_h };

/// j0 (weight h_E) or j1 (weight 1/h_E).
SpMat assemble_j(const Space& space, PenaltyWeight weight);

/// (u, v)_Omega on element parts; the identity on element DOFs.
SpMat assemble_mass(const Space& space);

SpMat assemble_stiffness(const Space& space);
SpMat assemble_normal_flux(const Space& space);

/// Sum over interior facets of 1/h_e ([u], [v])_e.
SpMat assemble_interior_jumps(const Space& space);

/// The element-mean functional v -> (v, 1)_Omega as a DOF vector.
Vec mean_functional(const Space& space);

/// Smallest nonzero generalized eigenvalue of a_D against (.,.)_{1,h} over
/// single-element kernels. A positive value certifies coercivity.
Scalar local_coercivity_bound(const Space& space, Scalar sigma);

/// Assembled forms for the mesh-dependent norms.
class NormSuite {
 public:
  explicit NormSuite(const Space& space);

  const Space& space() const { return *space_; }
  const SpMat& j0() const { return j0_; }
  const SpMat& j1() const { return j1_; }
  const SpMat& mass() const { return mass_; }
  const SpMat& stiffness() const { return stiffness_; }
  /// (.,.)_{0,h} = mass + j0
  const SpMat& gram_0h() const { return gram0_; }
  /// (.,.)_{1,h} = stiffness + j1
  const SpMat& gram_1h() const { return gram1_; }

  Scalar inner_0h(const PairField& u, const PairField& v) const;
  Scalar inner_1h(const PairField& u, const PairField& v) const;
  Scalar norm_l2(const PairField& v) const;
  Scalar norm_0h(const PairField& v) const;
  Scalar norm_1h(const PairField& v) const;
  Scalar norm_1h_star(const PairField& v) const;
  /// Broken gradient plus interior-facet jumps of the element part.
  Scalar norm_dg(const PairField& v) const;
  Scalar j0_value(const PairField& u, const PairField& v) const;

 private:
  const Space* space_;
  SpMat j0_, j1_, mass_, stiffness_, flux_, jumps_, gram0_, gram1_;
};

Scalar quadratic_form(const SpMat& a, const Vec& u, const Vec& v);

/// MatrixMarket coordinate dump (general, real).
void write_matrix_market(const SpMat& a, const std::filesystem::path& path);

}  // namespace hdgch
