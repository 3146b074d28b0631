#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "hdgch/operators.hpp"

namespace hdgch {

/// Ginzburg-Landau double well with its convex/concave split
///   Phi = Phi_+ + Phi_-,  Phi_+(c) = (1 + c^4)/4,  Phi_-(c) = -c^2/2.
struct Potential {
  static Scalar value(Scalar c) { return 0.25 * (1 + c) * (1 + c) * (1 - c) * (1 - c); }
  static Scalar convex(Scalar c) { return 0.25 * (1 + c * c * c * c); }
  static Scalar concave(Scalar c) { return -0.5 * c * c; }
  static Scalar convex_derivative(Scalar c) { return c * c * c; }
  static Scalar concave_derivative(Scalar c) { return -c; }
  static Scalar convex_second(Scalar c) { return 3 * c * c; }
  static Scalar derivative(Scalar c) { return convex_derivative(c) + concave_derivative(c); }
};

enum class LinearSolve { condensed, monolithic };

struct SchemeParameters {
  Scalar kappa = 1.0 / 256;
  Scalar tau = 0.1 / 64;
  int max_iterations = 50;
  Scalar tolerance = 1e-10;
  int max_halvings = 8;
  LinearSolve linear = LinearSolve::condensed;
};

struct NewtonReport {
  int iterations = 0;
  int halvings = 0;
  Scalar initial_residual = 0;
  Scalar final_residual = 0;
  bool converged = false;
  std::vector<Scalar> history;
};

struct SchemeState {
  long step = 0;
  Scalar tau = 0;
  Scalar kappa = 0;
  PairField c, mu, c_prev;
  std::vector<Scalar> mass;     // (c^n, 1), one entry per n including n = 0
  std::vector<Scalar> energy;   // E^n
  std::vector<int> newton;      // iterations of step n (0 for n = 0)

  Scalar time() const { return static_cast<Scalar>(step) * tau; }
};

/// Linearized step system eliminated element by element onto facet unknowns.
/// Local layout per element: [c_E, mu_E | c_F0 c_F1 c_F2, mu_F0 mu_F1 mu_F2].
class CondensedSystem {
 public:
  explicit CondensedSystem(const Space& space);

  /// kernels[e] is the 2L x 2L element Jacobian in the local layout above.
  void factorize(const std::vector<Mat>& kernels);
  /// Solves J x = r with r, x in the global [c; mu] ordering.
  Vec solve(const Vec& rhs) const;

  Index facet_unknowns() const { return schur_.rows(); }

 private:
  Index global_index(int e, int local) const;

  const Space* space_;
  int nb_, nf_;
  std::vector<std::vector<Index>> maps_;  // local -> global per element
  std::vector<Eigen::PartialPivLU<Mat>> interior_;
  std::vector<Mat> coupling_;             // K_EE^{-1} K_EF
  std::vector<Mat> k_fe_;
  SpMat schur_;
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  bool analyzed_ = false;
};

/// Implicit Euler with Eyre splitting for the mixed HDG system
///   (c - c_prev, chi) + tau a_D(mu, chi) = 0
///   (c^3 - c_prev, phi) + kappa a_D(c, phi) - (mu, phi) = 0.
class CahnHilliardScheme {
 public:
  CahnHilliardScheme(const DiscreteOperators& ops, SchemeParameters params);

  const DiscreteOperators& operators() const { return *ops_; }
  const Space& space() const { return ops_->space(); }
  const SchemeParameters& parameters() const { return params_; }

  /// Stacked [component a; component b]; component a is multiplied by tau.
  Vec residual(const PairField& c, const PairField& mu, const PairField& c_prev) const;
  /// (f(c), phi_i)_Omega for the element parts.
  Vec nonlinear_load(const PairField& c, Scalar (*f)(Scalar)) const;

  SpMat jacobian(const PairField& c) const;
  std::vector<Mat> local_jacobians(const PairField& c) const;
  /// Solves jacobian(c) x = rhs.
  Vec solve_linear(const PairField& c, const Vec& rhs, LinearSolve kind) const;

  /// Newton with backtracking; (c, mu) carry the initial guess in and the
  /// solution out. Throws SolverError when the tolerance is not met.
  NewtonReport solve_step(const PairField& c_prev, PairField& c, PairField& mu) const;

  /// (mu0, phi)_{0,h} = (Phi'(c0), phi) + kappa a_D(c0, phi).
  PairField init_mu0(const PairField& c0) const;

  Scalar energy(const PairField& c) const;
  Scalar mass(const PairField& c) const { return integral(c); }

  SchemeState initial_state(const PairField& c0) const;
  /// Advances one step; the initial guess is 2 c^n - c^{n-1} and mu^n.
  NewtonReport advance(SchemeState& state) const;

 private:
  const DiscreteOperators* ops_;
  SchemeParameters params_;
  std::vector<Mat> local_ad_;
  SpMat mass_;
  mutable std::unique_ptr<CondensedSystem> condensed_;
};

/// Advances `steps` times, calling `observer` after each accepted step.
void advance(const CahnHilliardScheme& scheme, SchemeState& state, long steps,
             const std::function<void(const SchemeState&, const NewtonReport&)>& observer = {});

void write_checkpoint(const std::filesystem::path& path, const SchemeState& state, const std::string& mesh_ref);
/// Restores a state onto `space`; the stored mesh reference is returned in
/// `mesh_ref` when non-null. Throws InputError on a malformed file.
SchemeState read_checkpoint(const std::filesystem::path& path, const Space& space, std::string* mesh_ref = nullptr);

}  // namespace hdgch
