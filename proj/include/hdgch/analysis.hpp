#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hdgch/scheme.hpp"

namespace hdgch {

// ---------------------------------------------------------------------------
// Field measurements

/// log2(coarse / fine).
Scalar convergence_rate(Scalar coarse_error, Scalar fine_error);
/// Rates between consecutive entries; the first entry has none.
std::vector<std::optional<Scalar>> convergence_rates(const std::vector<Scalar>& errors);

/// ||a - b||_{L2} for fields on nested meshes, integrated on the finer mesh
/// with a rule of exactness 2k+2. Throws InputError for non-nested meshes.
Scalar cross_mesh_l2_error(const PairField& a, const PairField& b);

/// max |v - shift| over a degree-(k+3) lattice of every element.
Scalar sup_norm(const PairField& v, Scalar shift = 0);
/// ||grad_h v||_{L^p}.
Scalar gradient_lp_norm(const PairField& v, Scalar p);
/// ||f - v||_{L2(Omega)} with the element rule.
Scalar l2_error(const PairField& v, const ScalarFunction& f);
/// ||(f, f|Gamma) - v||_{1,h,*}.
Scalar star_error(const PairField& v, const ScalarFunction& f, const GradientFunction& grad);

/// Connected components (4-neighbour) of {c > 0} sampled at the centres of a
/// grid x grid pixel raster over the mesh bounding box.
int count_positive_components(const PairField& c, int grid = 256);

/// Two overlapping-corner squares: 1 on [1/8,1/2]^2 and [1/2,7/8]^2, -1 elsewhere.
Scalar droplet_indicator(const Vec2& x);

/// Dual norm sup{(f, v) : v in H1 n L2_0, ||v||_{H1} = 1} of the element part,
/// through the Neumann cosine eigenbasis of (0,1)^2 truncated at modes x modes.
class CosineDualNorm {
 public:
  CosineDualNorm(const Space& space, int modes);
  Scalar operator()(const PairField& f) const;
  /// Same norm with half the modes in each direction.
  Scalar coarse(const PairField& f) const;
  int modes() const { return modes_; }

 private:
  Scalar evaluate(const PairField& f, int modes) const;

  const Space* space_;
  int modes_;
  Mat cos_x_, cos_y_;  // quadrature points x modes, normalized eigenfunction factors
  Vec weights_;        // physical quadrature weights
  Mat table_;          // reference basis at the per-element points
};

// ---------------------------------------------------------------------------
// Runs

/// Owns a mesh and the discretization built on it.
struct Discretization {
  std::unique_ptr<Mesh> mesh;
  std::unique_ptr<Space> space;
  std::unique_ptr<DiscreteOperators> ops;

  Discretization(Mesh m, int k, Scalar sigma);
};

/// round(T / tau); throws InputError unless T/tau is an integer to 1e-9.
long step_count(Scalar T, Scalar tau);

/// Per-step CSV `n,t,mass,energy,mu_l2,c_inf,newton_iterations`, flushed on
/// every row.
class LedgerWriter {
 public:
  explicit LedgerWriter(const std::filesystem::path& path);
  void write(const SchemeState& state, const NormSuite& norms);

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

/// VTK unstructured grid with per-vertex averages of c and mu, raw appended data.
void write_vtu(const std::filesystem::path& path, const PairField& c, const PairField& mu);

// ---------------------------------------------------------------------------
// Convergence study

struct StudyConfig {
  int j_min = 2;
  int j_max = 4;
  int j_fine = 5;
  std::vector<Scalar> kappas{1.0 / 256};
  int k = 1;
  Scalar T = 0.1;
  Scalar tau_base = 0.1;  // tau_j = tau_base / 4^j
  Scalar sigma = 0;       // 0 selects default_penalty(k)
  InitialProjection projection = InitialProjection::l2;
  int subdivisions = 1;
  int threads = 1;
};

struct LevelRecord {
  int j = 0;
  Scalar h = 0;
  Scalar tau = 0;
  Scalar kappa = 0;
  Scalar error = 0;
  std::optional<Scalar> rate;
  double seconds = 0;
  int newton_max = 0;
  double newton_mean = 0;
};

struct StudyReport {
  std::vector<LevelRecord> rows;
  std::string error_rule;
  std::string failure;  // empty unless a run failed
};

struct FinalField {
  std::unique_ptr<Discretization> disc;
  SchemeState state;
  double seconds = 0;
};

/// Droplet run on the structured mesh with 2^j cells per side.
FinalField run_droplet(int j, int k, Scalar sigma, Scalar kappa, Scalar tau, Scalar T, InitialProjection projection,
                       int subdivisions);

StudyReport convergence_study(const StudyConfig& config,
                              const std::function<void(const std::string&)>& log = {});
/// Columns j,h,tau,kappa,error,rate.
void write_table1(const std::filesystem::path& path, const StudyReport& report);

// ---------------------------------------------------------------------------
// Inequality probes

struct ProbeConfig {
  std::vector<int> levels{4, 8, 16, 32};
  int k = 1;
  int samples = 100;
  std::uint64_t seed = 20240611;
  Scalar sigma = 0;
  int modes = 64;
};

struct ProbeRow {
  std::string family;
  std::string probe;
  int n = 0;
  Scalar h = 0;
  Scalar value = 0;
  std::optional<Scalar> growth;  // value / value at the previous level
  std::string note;
};

/// One probe table per mesh; `n` labels the rows.
std::vector<ProbeRow> probe_mesh(const Mesh& mesh, int n, const ProbeConfig& config);
/// All levels of the structured family with growth factors filled in.
std::vector<ProbeRow> probe_inequalities(const ProbeConfig& config);
void write_probes(const std::filesystem::path& path, const std::vector<ProbeRow>& rows);

// ---------------------------------------------------------------------------
// Projection rates

struct ProjectionRow {
  int n = 0;
  Scalar h = 0;
  Scalar elliptic_l2 = 0;
  Scalar elliptic_star = 0;
  Scalar l2_l2 = 0;
  std::optional<Scalar> rate_elliptic_l2, rate_elliptic_star, rate_l2_l2;
};

/// Pi_h and pi_h of cos(pi x) cos(pi y) on the structured meshes `levels`.
std::vector<ProjectionRow> projection_study(const std::vector<int>& levels, int k, Scalar sigma);
void write_projection_table(const std::filesystem::path& path, const std::vector<ProjectionRow>& rows);

/// Shortest round-trip decimal (17 significant digits).
std::string format_real(Scalar v);

}  // namespace hdgch
