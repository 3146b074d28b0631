#include "hdgch/scheme.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <Eigen/SparseCholesky>

namespace hdgch {

namespace {

constexpr char kMagic[6] = {'H', 'D', 'G', 'C', 'H', '1'};
constexpr std::uint32_t kCheckpointVersion = 1;

Scalar cube(Scalar c) { return Potential::convex_derivative(c); }
Scalar dphi(Scalar c) { return Potential::derivative(c); }

}  // namespace

CondensedSystem::CondensedSystem(const Space& space)
    : space_(&space), nb_(space.dofs().element_block), nf_(space.dofs().facet_block) {
  const DofMap& d = space.dofs();
  const int ne = d.num_elements;
  maps_.resize(ne);
  for (int e = 0; e < ne; ++e) {
    for (int p = 0; p < 2 * nb_ + 6 * nf_; ++p) maps_[e].push_back(global_index(e, p));
  }
  interior_.resize(ne);
  coupling_.resize(ne);
  k_fe_.resize(ne);
  const auto nfacet = static_cast<int>(2 * d.facet_dofs());
  schur_.resize(nfacet, nfacet);
}

Index CondensedSystem::global_index(int e, int p) const {
  const DofMap& d = space_->dofs();
  const Index n = d.size();
  if (p < nb_) return d.element_offset(e) + p;
  if (p < 2 * nb_) return n + d.element_offset(e) + (p - nb_);
  p -= 2 * nb_;
  const bool mu = p >= 3 * nf_;
  if (mu) p -= 3 * nf_;
  const int f = space_->mesh().element_facets[e][p / nf_];
  return (mu ? n : 0) + d.facet_offset(f) + p % nf_;
}

namespace {

// Position of a global [c; mu] index within the stacked facet unknowns.
Index facet_position(const DofMap& d, Index g) {
  const Index n = d.size();
  if (g >= n) return d.facet_dofs() + (g - n - d.element_dofs());
  return g - d.element_dofs();
}

}  // namespace

void CondensedSystem::factorize(const std::vector<Mat>& kernels) {
  const DofMap& d = space_->dofs();
  const int ni = 2 * nb_, nfl = 6 * nf_;
  std::vector<Triplet> trips;
  trips.reserve(kernels.size() * static_cast<std::size_t>(nfl * nfl));
  for (std::size_t e = 0; e < kernels.size(); ++e) {
    const Mat& k = kernels[e];
    interior_[e].compute(k.topLeftCorner(ni, ni));
    const Scalar rc = interior_[e].rcond();
    if (!(rc > 1e-14)) {
      throw SolverError("singular element block in condensation: element " + std::to_string(e) +
                        ", rcond " + std::to_string(rc));
    }
    coupling_[e] = interior_[e].solve(k.topRightCorner(ni, nfl));
    k_fe_[e] = k.bottomLeftCorner(nfl, ni);
    const Mat s = k.bottomRightCorner(nfl, nfl) - k_fe_[e] * coupling_[e];
    for (int j = 0; j < nfl; ++j) {
      const auto col = static_cast<int>(facet_position(d, maps_[e][ni + j]));
      for (int i = 0; i < nfl; ++i) {
        trips.emplace_back(static_cast<int>(facet_position(d, maps_[e][ni + i])), col, s(i, j));
      }
    }
  }
  schur_.setFromTriplets(trips.begin(), trips.end());
  schur_.makeCompressed();
  if (!analyzed_) {
    lu_.analyzePattern(schur_);
    analyzed_ = true;
  }
  lu_.factorize(schur_);
  if (lu_.info() != Eigen::Success) throw SolverError("facet Schur complement is singular: " + lu_.lastErrorMessage());
}

Vec CondensedSystem::solve(const Vec& rhs) const {
  const DofMap& d = space_->dofs();
  const Index n = d.size();
  const int ni = 2 * nb_, nfl = 6 * nf_;
  Vec rf(2 * d.facet_dofs());
  rf.head(d.facet_dofs()) = rhs.segment(d.element_dofs(), d.facet_dofs());
  rf.tail(d.facet_dofs()) = rhs.segment(n + d.element_dofs(), d.facet_dofs());
  std::vector<Vec> y(maps_.size());
  for (std::size_t e = 0; e < maps_.size(); ++e) {
    Vec re(ni);
    for (int i = 0; i < ni; ++i) re[i] = rhs[maps_[e][i]];
    y[e] = interior_[e].solve(re);
    const Vec t = k_fe_[e] * y[e];
    for (int i = 0; i < nfl; ++i) rf[facet_position(d, maps_[e][ni + i])] -= t[i];
  }
  const Vec xf = lu_.solve(rf);
  Vec x(2 * n);
  x.segment(d.element_dofs(), d.facet_dofs()) = xf.head(d.facet_dofs());
  x.segment(n + d.element_dofs(), d.facet_dofs()) = xf.tail(d.facet_dofs());
  for (std::size_t e = 0; e < maps_.size(); ++e) {
    Vec xl(nfl);
    for (int i = 0; i < nfl; ++i) xl[i] = xf[facet_position(d, maps_[e][ni + i])];
    const Vec xe = y[e] - coupling_[e] * xl;
    for (int i = 0; i < ni; ++i) x[maps_[e][i]] = xe[i];
  }
  return x;
}

CahnHilliardScheme::CahnHilliardScheme(const DiscreteOperators& ops, SchemeParameters params)
    : ops_(&ops), params_(params), mass_(ops.norms().mass()) {
  if (!(params.tau > 0) || !(params.kappa > 0)) throw InputError("tau and kappa must be positive");
  const Space& s = ops.space();
  local_ad_.reserve(static_cast<std::size_t>(s.dofs().num_elements));
  for (int e = 0; e < s.dofs().num_elements; ++e) local_ad_.push_back(local_aD(s, e, ops.sigma()));
}

Vec CahnHilliardScheme::nonlinear_load(const PairField& c, Scalar (*f)(Scalar)) const {
  const Space& s = space();
  const DofMap& d = s.dofs();
  const QuadratureRule& rule = s.element_rule();
  Vec load = Vec::Zero(d.size());
  for (int e = 0; e < d.num_elements; ++e) {
    const Vec vals = s.quadrature_values(c, e);
    const Scalar weight = 1.0 / s.scale(e);  // detJ * scale
    Vec fw(vals.size());
    for (Index q = 0; q < vals.size(); ++q) fw[q] = rule.weights[static_cast<std::size_t>(q)] * f(vals[q]);
    load.segment(d.element_offset(e), d.element_block) = weight * (s.ref_values().transpose() * fw);
  }
  return load;
}

Vec CahnHilliardScheme::residual(const PairField& c, const PairField& mu, const PairField& c_prev) const {
  const SpMat& a = ops_->aD();
  const Index n = space().dofs().size();
  Vec r(2 * n);
  r.head(n) = mass_ * (c.coeffs - c_prev.coeffs) + params_.tau * (a * mu.coeffs);
  r.tail(n) = nonlinear_load(c, cube) - mass_ * c_prev.coeffs + params_.kappa * (a * c.coeffs) - mass_ * mu.coeffs;
  return r;
}

std::vector<Mat> CahnHilliardScheme::local_jacobians(const PairField& c) const {
  const Space& s = space();
  const int nb = s.dofs().element_block, nf = s.dofs().facet_block;
  const int L = nb + 3 * nf;
  const QuadratureRule& rule = s.element_rule();
  const auto pc = [&](int i) { return i < nb ? i : 2 * nb + (i - nb); };
  const auto pm = [&](int i) { return i < nb ? nb + i : 2 * nb + 3 * nf + (i - nb); };
  std::vector<Mat> out(local_ad_.size());
  for (int e = 0; e < static_cast<int>(local_ad_.size()); ++e) {
    const Vec vals = s.quadrature_values(c, e);
    Vec w(vals.size());
    for (Index q = 0; q < vals.size(); ++q) w[q] = rule.weights[static_cast<std::size_t>(q)] * Potential::convex_second(vals[q]);
    const Mat nl = s.ref_values().transpose() * w.asDiagonal() * s.ref_values();
    const Mat& a = local_ad_[e];
    Mat k = Mat::Zero(2 * L, 2 * L);
    for (int j = 0; j < L; ++j) {
      for (int i = 0; i < L; ++i) {
        k(pc(i), pm(j)) = params_.tau * a(i, j);
        k(pm(i), pc(j)) = params_.kappa * a(i, j);
      }
    }
    for (int j = 0; j < nb; ++j) {
      for (int i = 0; i < nb; ++i) k(pm(i), pc(j)) += nl(i, j);
      k(pc(j), pc(j)) += 1.0;
      k(pm(j), pm(j)) -= 1.0;
    }
    out[e] = std::move(k);
  }
  return out;
}

SpMat CahnHilliardScheme::jacobian(const PairField& c) const {
  const Space& s = space();
  const DofMap& d = s.dofs();
  const auto n = static_cast<int>(d.size());
  const std::vector<Mat> kernels = local_jacobians(c);
  std::vector<Triplet> trips;
  const int L2 = 2 * (d.element_block + 3 * d.facet_block);
  trips.reserve(kernels.size() * static_cast<std::size_t>(L2 * L2));
  // local layout [c_E, mu_E | c_F, mu_F] as in CondensedSystem
  for (int e = 0; e < d.num_elements; ++e) {
    const std::vector<Index> loc = local_dofs(s, e);
    const int nb = d.element_block;
    std::vector<Index> map(static_cast<std::size_t>(L2));
    const int L = static_cast<int>(loc.size());
    for (int i = 0; i < L; ++i) {
      const int pc = i < nb ? i : 2 * nb + (i - nb);
      const int pm = i < nb ? nb + i : 2 * nb + L - nb + (i - nb);
      map[static_cast<std::size_t>(pc)] = loc[static_cast<std::size_t>(i)];
      map[static_cast<std::size_t>(pm)] = n + loc[static_cast<std::size_t>(i)];
    }
    const Mat& k = kernels[static_cast<std::size_t>(e)];
    for (int j = 0; j < L2; ++j) {
      for (int i = 0; i < L2; ++i) {
        if (k(i, j) != 0.0) {
          trips.emplace_back(static_cast<int>(map[static_cast<std::size_t>(i)]), static_cast<int>(map[static_cast<std::size_t>(j)]), k(i, j));
        }
      }
    }
  }
  SpMat jac(2 * n, 2 * n);
  jac.setFromTriplets(trips.begin(), trips.end());
  return jac;
}

Vec CahnHilliardScheme::solve_linear(const PairField& c, const Vec& rhs, LinearSolve kind) const {
  if (kind == LinearSolve::monolithic) {
    const SpMat jac = jacobian(c);
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(jac);
    if (lu.info() != Eigen::Success) throw SolverError("monolithic Jacobian is singular: " + lu.lastErrorMessage());
    return lu.solve(rhs);
  }
  if (!condensed_) condensed_ = std::make_unique<CondensedSystem>(space());
  condensed_->factorize(local_jacobians(c));
  return condensed_->solve(rhs);
}

NewtonReport CahnHilliardScheme::solve_step(const PairField& c_prev, PairField& c, PairField& mu) const {
  const Index n = space().dofs().size();
  NewtonReport report;
  Vec r = residual(c, mu, c_prev);
  Scalar rn = r.norm();
  report.initial_residual = rn;
  report.history.push_back(rn);
  const Scalar tol = params_.tolerance * (1 + rn);
  while (rn > tol) {
    if (report.iterations == params_.max_iterations) {
      report.final_residual = rn;
      throw SolverError("Newton did not converge in " + std::to_string(params_.max_iterations) +
                        " iterations: residual " + std::to_string(rn) + " (initial " +
                        std::to_string(report.initial_residual) + ")");
    }
    const Vec delta = solve_linear(c, -r, params_.linear);
    Scalar step = 1.0;
    PairField ct = c, mt = mu;
    for (int h = 0;; ++h) {
      ct.coeffs = c.coeffs + step * delta.head(n);
      mt.coeffs = mu.coeffs + step * delta.tail(n);
      const Vec rt = residual(ct, mt, c_prev);
      const Scalar rtn = rt.norm();
      if (rtn < rn || h == params_.max_halvings) {
        r = rt;
        rn = rtn;
        break;
      }
      step *= 0.5;
      ++report.halvings;
    }
    c = std::move(ct);
    mu = std::move(mt);
    ++report.iterations;
    report.history.push_back(rn);
  }
  // met only through the relative part: one more full step, kept if it helps
  if (rn > params_.tolerance && report.iterations < params_.max_iterations) {
    const Vec delta = solve_linear(c, -r, params_.linear);
    PairField ct = c, mt = mu;
    ct.coeffs += delta.head(n);
    mt.coeffs += delta.tail(n);
    const Scalar rtn = residual(ct, mt, c_prev).norm();
    if (rtn < rn) {
      c = std::move(ct);
      mu = std::move(mt);
      rn = rtn;
      ++report.iterations;
      report.history.push_back(rn);
    }
  }
  report.final_residual = rn;
  report.converged = true;
  return report;
}

PairField CahnHilliardScheme::init_mu0(const PairField& c0) const {
  const Vec rhs = nonlinear_load(c0, dphi) + params_.kappa * (ops_->aD() * c0.coeffs);
  Eigen::SimplicialLDLT<SpMat> ldlt(ops_->norms().gram_0h());
  if (ldlt.info() != Eigen::Success) throw SolverError("(.,.)_{0,h} Gram matrix is not positive definite");
  return space().field(ldlt.solve(rhs));
}

Scalar CahnHilliardScheme::energy(const PairField& c) const {
  const Space& s = space();
  const QuadratureRule& rule = s.element_rule();
  Scalar bulk = 0;
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    const Vec vals = s.quadrature_values(c, e);
    const Scalar detJ = 1.0 / (s.scale(e) * s.scale(e));
    Scalar sum = 0;
    for (Index q = 0; q < vals.size(); ++q) sum += rule.weights[static_cast<std::size_t>(q)] * Potential::value(vals[q]);
    bulk += detJ * sum;
  }
  return bulk + 0.5 * params_.kappa * ops_->a(c, c);
}

SchemeState CahnHilliardScheme::initial_state(const PairField& c0) const {
  SchemeState st;
  st.tau = params_.tau;
  st.kappa = params_.kappa;
  st.c = c0;
  st.c_prev = c0;
  st.mu = init_mu0(c0);
  st.mass.push_back(mass(c0));
  st.energy.push_back(energy(c0));
  st.newton.push_back(0);
  return st;
}

NewtonReport CahnHilliardScheme::advance(SchemeState& state) const {
  // linear extrapolation in time as the initial guess
  PairField c = state.c, mu = state.mu;
  c.coeffs = 2 * state.c.coeffs - state.c_prev.coeffs;
  NewtonReport rep = solve_step(state.c, c, mu);
  state.c_prev = std::move(state.c);
  state.c = std::move(c);
  state.mu = std::move(mu);
  ++state.step;
  state.mass.push_back(mass(state.c));
  state.energy.push_back(energy(state.c));
  state.newton.push_back(rep.iterations);
  return rep;
}

void advance(const CahnHilliardScheme& scheme, SchemeState& state, long steps,
             const std::function<void(const SchemeState&, const NewtonReport&)>& observer) {
  for (long i = 0; i < steps; ++i) {
    const NewtonReport rep = scheme.advance(state);
    if (observer) observer(state, rep);
  }
}

namespace {

template <typename T>
void put(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw InputError("truncated checkpoint");
  return v;
}

template <typename T>
void put_array(std::ostream& os, const T* data, std::uint64_t n) {
  put(os, n);
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(T)));
}

template <typename T>
std::vector<T> get_array(std::istream& is, std::uint64_t limit) {
  const auto n = get<std::uint64_t>(is);
  if (n > limit) throw InputError("corrupt checkpoint array length");
  std::vector<T> v(n);
  is.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(T)));
  if (!is) throw InputError("truncated checkpoint");
  return v;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const SchemeState& state, const std::string& mesh_ref) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write checkpoint " + path.string());
  os.write(kMagic, sizeof kMagic);
  put(os, kCheckpointVersion);
  put_array(os, mesh_ref.data(), mesh_ref.size());
  put(os, static_cast<std::int32_t>(state.c.dofs().k));
  put(os, static_cast<std::int64_t>(state.step));
  put(os, state.tau);
  put(os, state.kappa);
  for (const PairField* f : {&state.c, &state.mu, &state.c_prev}) {
    put_array(os, f->coeffs.data(), static_cast<std::uint64_t>(f->coeffs.size()));
  }
  put_array(os, state.mass.data(), state.mass.size());
  put_array(os, state.energy.data(), state.energy.size());
  put_array(os, state.newton.data(), state.newton.size());
  if (!os) throw InputError("failed writing checkpoint " + path.string());
}

SchemeState read_checkpoint(const std::filesystem::path& path, const Space& space, std::string* mesh_ref) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InputError("cannot open checkpoint " + path.string());
  char magic[sizeof kMagic];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw InputError("not an HDGCH1 checkpoint");
  if (get<std::uint32_t>(is) != kCheckpointVersion) throw InputError("unsupported checkpoint version");
  const std::vector<char> ref = get_array<char>(is, 1 << 20);
  if (mesh_ref) mesh_ref->assign(ref.begin(), ref.end());
  if (get<std::int32_t>(is) != space.degree()) throw InputError("checkpoint degree does not match the space");
  SchemeState st;
  st.step = get<std::int64_t>(is);
  st.tau = get<Scalar>(is);
  st.kappa = get<Scalar>(is);
  const auto n = static_cast<std::uint64_t>(space.dofs().size());
  for (PairField* f : {&st.c, &st.mu, &st.c_prev}) {
    const std::vector<Scalar> v = get_array<Scalar>(is, n);
    if (v.size() != n) throw InputError("checkpoint field size does not match the space");
    *f = space.field(Eigen::Map<const Vec>(v.data(), static_cast<Index>(v.size())));
  }
  const std::uint64_t limit = 1ull << 32;
  st.mass = get_array<Scalar>(is, limit);
  st.energy = get_array<Scalar>(is, limit);
  st.newton = get_array<int>(is, limit);
  return st;
}

}  // namespace hdgch
