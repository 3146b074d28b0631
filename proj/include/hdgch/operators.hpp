#pragma once

#include <memory>
#include <optional>

#include <Eigen/SparseLU>

#include "hdgch/forms.hpp"

namespace hdgch {

/// Factorized saddle system
///
///   [ A   m ] [x]   [b]
///   [ m^T 0 ] [l] = [g]
///
/// used to impose one linear constraint (the element mean) exactly.
class ConstrainedSolver {
 public:
  ConstrainedSolver(const SpMat& a, const Vec& constraint);

  struct Stats {
    Scalar residual = 0;            // ||A x + m l - b|| / ||b||
    Scalar constraint_violation = 0;
    int refinements = 0;
  };

  /// Solves with constraint value `g`; one step of iterative refinement is
  /// applied when the relative residual exceeds 1e-13.
  Vec solve(const Vec& rhs, Scalar g = 0, Scalar* multiplier = nullptr) const;
  const Stats& last_stats() const { return stats_; }
  Index size() const { return a_.rows(); }

 private:
  SpMat a_;
  Vec m_;
  SpMat saddle_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  mutable Stats stats_;
};

/// The discrete operators built from a_D and (.,.)_{0,h}, all mapping into
/// the zero-mean pair space M_h x S^_h.
class DiscreteOperators {
 public:
  DiscreteOperators(const Space& space, Scalar sigma);

  const Space& space() const { return *space_; }
  const NormSuite& norms() const { return norms_; }
  Scalar sigma() const { return sigma_; }
  const SpMat& aD() const { return ad_; }
  const Vec& mean_vector() const { return mean_; }

  Scalar a(const PairField& u, const PairField& v) const { return quadratic_form(ad_, u.coeffs, v.coeffs); }

  /// -(Lap w, v)_{0,h} = a_D(w, v) for all v in M_h.
  PairField laplacian(const PairField& w) const;
  /// a_D(G w, v) = (w, v)_{0,h} for all v in M_h.
  PairField green(const PairField& w) const;
  /// a_D(J w, v) = (w, v)_Omega for all v in M_h; the facet part of w is
  /// ignored. Throws InputError unless |mean(w)| <= 1e-10.
  PairField j_operator(const PairField& w) const;
  /// a_D(P w, v) = a_D((w, w|_Gamma), v) for all v and (P w, 1) = (w, 1).
  PairField elliptic_projection(const ScalarFunction& w, const GradientFunction& grad) const;

  /// Right side a_D((w, w|_Gamma), phi_i) for every basis pair.
  Vec consistent_rhs(const GradientFunction& grad) const;

  const ConstrainedSolver& energy_solver() const;
  const ConstrainedSolver& gram_solver() const;

 private:
  const Space* space_;
  Scalar sigma_;
  NormSuite norms_;
  SpMat ad_;
  Vec mean_;
  mutable std::unique_ptr<ConstrainedSolver> energy_;  // [a_D, m]
  mutable std::unique_ptr<ConstrainedSolver> gram_;    // [(.,.)_{0,h}, m]
};

enum class InitialProjection { elliptic, l2 };

InitialProjection parse_projection_mode(const std::string& name);
std::string to_string(InitialProjection mode);

/// c_h^0. The elliptic mode needs the gradient of c0 and rejects a missing
/// one; the l2 mode is project_l2 with the given options.
PairField initial_projection(const DiscreteOperators& ops, const ScalarFunction& c0,
                             const std::optional<GradientFunction>& grad, InitialProjection mode,
                             ProjectionOptions opts = {});

}  // namespace hdgch
