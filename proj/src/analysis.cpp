#include "hdgch/analysis.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <deque>
#include <exception>
#include <map>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

namespace hdgch {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Reference lattice {(i/m, j/m) : i + j <= m}; contains the vertices.
std::vector<Vec2> lattice(int m) {
  std::vector<Vec2> pts;
  for (int j = 0; j <= m; ++j) {
    for (int i = 0; i + j <= m; ++i) pts.emplace_back(Scalar(i) / m, Scalar(j) / m);
  }
  return pts;
}

Mat basis_table(const ReferenceBasis& basis, const std::vector<Vec2>& pts) {
  Mat t(static_cast<Index>(pts.size()), basis.size());
  for (std::size_t q = 0; q < pts.size(); ++q) t.row(static_cast<Index>(q)) = basis.values(pts[q]).transpose();
  return t;
}

}  // namespace

std::string format_real(Scalar v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Scalar convergence_rate(Scalar coarse_error, Scalar fine_error) { return std::log2(coarse_error / fine_error); }

std::vector<std::optional<Scalar>> convergence_rates(const std::vector<Scalar>& errors) {
  std::vector<std::optional<Scalar>> r(errors.size());
  for (std::size_t i = 1; i < errors.size(); ++i) r[i] = convergence_rate(errors[i - 1], errors[i]);
  return r;
}

Scalar cross_mesh_l2_error(const PairField& a, const PairField& b) {
  const Space& sa = *a.space;
  const Space& sb = *b.space;
  const bool a_coarse = sa.mesh().num_elements() <= sb.mesh().num_elements();
  const PairField& coarse = a_coarse ? a : b;
  const PairField& fine = a_coarse ? b : a;
  const Space& sc = *coarse.space;
  const Space& sf = *fine.space;
  std::vector<int> parents;
  if (!is_nested(sc.mesh(), sf.mesh(), &parents)) throw InputError("cross-mesh error needs nested meshes");
  const int k = std::max(sc.degree(), sf.degree());
  const QuadratureRule rule = triangle_rule(2 * k + 2);
  const Mesh& mf = sf.mesh();
  Scalar sum = 0;
  for (int e = 0; e < static_cast<int>(mf.num_elements()); ++e) {
    const Scalar detJ = 2 * mf.areas[e];
    Scalar local = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = mf.map_to_physical(e, rule.points[q]);
      const Scalar d = sc.evaluate(coarse, parents[e], x) - sf.evaluate(fine, e, x);
      local += rule.weights[q] * d * d;
    }
    sum += detJ * local;
  }
  return std::sqrt(sum);
}

Scalar sup_norm(const PairField& v, Scalar shift) {
  const Space& s = *v.space;
  const Mat table = basis_table(s.basis(), lattice(s.degree() + 3));
  Scalar m = 0;
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    const Vec vals = s.scale(e) * (table * v.element_block(e));
    m = std::max(m, (vals.array() - shift).abs().maxCoeff());
  }
  return m;
}

Scalar gradient_lp_norm(const PairField& v, Scalar p) {
  const Space& s = *v.space;
  const QuadratureRule& rule = s.element_rule();
  Scalar sum = 0;
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    const Vec gx = s.ref_grad_x() * v.element_block(e);
    const Vec gy = s.ref_grad_y() * v.element_block(e);
    const Scalar detJ = 1.0 / (s.scale(e) * s.scale(e));
    Scalar local = 0;
    for (Index q = 0; q < gx.size(); ++q) {
      const Vec2 g = s.scale(e) * (s.inv_jac_t(e) * Vec2(gx[q], gy[q]));
      local += rule.weights[static_cast<std::size_t>(q)] * std::pow(g.norm(), p);
    }
    sum += detJ * local;
  }
  return std::pow(sum, 1.0 / p);
}

Scalar l2_error(const PairField& v, const ScalarFunction& f) {
  const Space& s = *v.space;
  const Mesh& mesh = s.mesh();
  const QuadratureRule& rule = s.element_rule();
  Scalar sum = 0;
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    const Vec vals = s.quadrature_values(v, e);
    Scalar local = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Scalar d = f(mesh.map_to_physical(e, rule.points[q])) - vals[static_cast<Index>(q)];
      local += rule.weights[q] * d * d;
    }
    sum += 2 * mesh.areas[e] * local;
  }
  return std::sqrt(sum);
}

Scalar star_error(const PairField& v, const ScalarFunction& /*f*/, const GradientFunction& grad) {
  const Space& s = *v.space;
  const Mesh& mesh = s.mesh();
  const QuadratureRule& rule = s.element_rule();
  const LineRule& frule = s.facet_rule();
  // (f - v) - (f - v^) = v^ - v on every facet: the j1 part is j1(v, v)
  const Scalar jump = quadratic_form(assemble_j(s, PenaltyWeight::inverse_h), v.coeffs, v.coeffs);
  Scalar grad_part = 0, flux_part = 0;
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    Scalar local = 0;
    for (std::size_t q = 0; q < rule.size(); ++q) {
      const Vec2 x = mesh.map_to_physical(e, rule.points[q]);
      local += rule.weights[q] * (grad(x) - s.evaluate_gradient(v, e, x)).squaredNorm();
    }
    grad_part += 2 * mesh.areas[e] * local;
    for (int l = 0; l < 3; ++l) {
      const int fct = mesh.element_facets[e][l];
      const Vec2 n = mesh.outward_normal(e, l);
      Scalar edge = 0;
      for (std::size_t q = 0; q < frule.size(); ++q) {
        const Vec2 x = s.facet_point(fct, frule.points[q]);
        const Scalar d = (grad(x) - s.evaluate_gradient(v, e, x)).dot(n);
        edge += frule.weights[q] * d * d;
      }
      flux_part += mesh.diameters[e] * mesh.facets[fct].length * edge;
    }
  }
  return std::sqrt(grad_part + jump + flux_part);
}

int count_positive_components(const PairField& c, int grid) {
  const Space& s = *c.space;
  const Mesh& mesh = s.mesh();
  const PointLocator locator(mesh);
  const Vec2 lo = mesh.bbox_min, ext = mesh.bbox_max - mesh.bbox_min;
  std::vector<char> positive(static_cast<std::size_t>(grid) * grid, 0);
  for (int j = 0; j < grid; ++j) {
    for (int i = 0; i < grid; ++i) {
      const Vec2 x = lo + Vec2((i + 0.5) / grid * ext.x(), (j + 0.5) / grid * ext.y());
      const std::optional<int> e = locator.locate(x);
      if (e) positive[static_cast<std::size_t>(j) * grid + i] = s.evaluate(c, *e, x) > 0;
    }
  }
  std::vector<int> label(positive.size(), -1);
  int count = 0;
  std::deque<int> queue;
  for (int start = 0; start < grid * grid; ++start) {
    if (!positive[start] || label[start] >= 0) continue;
    label[start] = count;
    queue.push_back(start);
    while (!queue.empty()) {
      const int p = queue.front();
      queue.pop_front();
      const int i = p % grid, j = p / grid;
      const int nbr[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
      for (const auto& q : nbr) {
        if (q[0] < 0 || q[1] < 0 || q[0] >= grid || q[1] >= grid) continue;
        const int idx = q[1] * grid + q[0];
        if (positive[idx] && label[idx] < 0) {
          label[idx] = count;
          queue.push_back(idx);
        }
      }
    }
    ++count;
  }
  return count;
}

Scalar droplet_indicator(const Vec2& x) {
  const auto in = [&](Scalar a, Scalar b) { return x.x() >= a && x.x() <= b && x.y() >= a && x.y() <= b; };
  return in(0.125, 0.5) || in(0.5, 0.875) ? 1.0 : -1.0;
}

CosineDualNorm::CosineDualNorm(const Space& space, int modes) : space_(&space), modes_(modes) {
  const Mesh& mesh = space.mesh();
  // resolve the highest mode: sub-elements no wider than 1/32 with a degree-8 rule
  int levels = 0;
  for (Scalar w = mesh.h; w > 1.0 / 32 * std::sqrt(2.0) + 1e-12; w *= 0.5) ++levels;
  const QuadratureRule rule = subdivided(triangle_rule(8), levels);
  const Index nq = static_cast<Index>(rule.size());
  const Index ne = static_cast<Index>(mesh.num_elements());
  cos_x_.resize(ne * nq, modes);
  cos_y_.resize(ne * nq, modes);
  weights_.resize(ne * nq);
  for (Index e = 0; e < ne; ++e) {
    for (Index q = 0; q < nq; ++q) {
      const Vec2 x = mesh.map_to_physical(static_cast<int>(e), rule.points[static_cast<std::size_t>(q)]);
      const Index row = e * nq + q;
      weights_[row] = 2 * mesh.areas[static_cast<std::size_t>(e)] * rule.weights[static_cast<std::size_t>(q)];
      for (int m = 0; m < modes; ++m) {
        const Scalar c = m == 0 ? 1.0 : std::numbers::sqrt2;
        cos_x_(row, m) = c * std::cos(m * std::numbers::pi * x.x());
        cos_y_(row, m) = c * std::cos(m * std::numbers::pi * x.y());
      }
    }
  }
  table_ = basis_table(space.basis(), rule.points);
}

Scalar CosineDualNorm::evaluate(const PairField& f, int modes) const {
  const Space& s = *space_;
  const Index nq = table_.rows();
  Vec g(weights_.size());
  for (int e = 0; e < s.dofs().num_elements; ++e) {
    g.segment(e * nq, nq) = s.scale(e) * (table_ * f.element_block(e));
  }
  g.array() *= weights_.array();
  const Mat coeffs = cos_x_.leftCols(modes).transpose() * (g.asDiagonal() * cos_y_.leftCols(modes));
  Scalar sum = 0;
  for (int q = 0; q < modes; ++q) {
    for (int p = 0; p < modes; ++p) {
      if (p == 0 && q == 0) continue;
      const Scalar lambda = std::numbers::pi * std::numbers::pi * (p * p + q * q);
      sum += coeffs(p, q) * coeffs(p, q) / (1 + lambda);
    }
  }
  return std::sqrt(sum);
}

Scalar CosineDualNorm::operator()(const PairField& f) const { return evaluate(f, modes_); }
Scalar CosineDualNorm::coarse(const PairField& f) const { return evaluate(f, modes_ / 2); }

Discretization::Discretization(Mesh m, int k, Scalar sigma)
    : mesh(std::make_unique<Mesh>(std::move(m))),
      space(std::make_unique<Space>(*mesh, k)),
      ops(std::make_unique<DiscreteOperators>(*space, sigma > 0 ? sigma : default_penalty(k))) {}

long step_count(Scalar T, Scalar tau) {
  if (!(T > 0) || !(tau > 0)) throw InputError("T and tau must be positive");
  const Scalar ratio = T / tau;
  const long n = std::lround(ratio);
  if (n < 1 || std::abs(ratio - static_cast<Scalar>(n)) > 1e-9 * std::max<Scalar>(1, ratio)) {
    throw InputError("T / tau = " + format_real(ratio) + " is not an integer step count");
  }
  return n;
}

LedgerWriter::LedgerWriter(const std::filesystem::path& path) : out_(path), path_(path) {
  if (!out_) throw InputError("cannot open " + path.string());
  out_ << "n,t,mass,energy,mu_l2,c_inf,newton_iterations\n";
  out_.flush();
}

void LedgerWriter::write(const SchemeState& state, const NormSuite& norms) {
  out_ << state.step << ',' << format_real(state.time()) << ',' << format_real(state.mass.back()) << ','
       << format_real(state.energy.back()) << ',' << format_real(norms.norm_l2(state.mu)) << ','
       << format_real(sup_norm(state.c)) << ',' << state.newton.back() << '\n';
  out_.flush();
  if (!out_) throw InputError("write failed on " + path_.string());
}

void write_vtu(const std::filesystem::path& path, const PairField& c, const PairField& mu) {
  const Space& s = *c.space;
  const Mesh& mesh = s.mesh();
  const std::size_t nv = mesh.num_vertices(), ne = mesh.num_elements();
  std::vector<double> cv(nv, 0.0), mv(nv, 0.0), count(nv, 0.0);
  const Mat table = basis_table(s.basis(), {Vec2(0, 0), Vec2(1, 0), Vec2(0, 1)});
  for (std::size_t e = 0; e < ne; ++e) {
    const int ei = static_cast<int>(e);
    const Vec vc = s.scale(ei) * (table * c.element_block(ei));
    const Vec vm = s.scale(ei) * (table * mu.element_block(ei));
    for (int i = 0; i < 3; ++i) {
      const auto v = static_cast<std::size_t>(mesh.elements[e][i]);
      cv[v] += vc[i];
      mv[v] += vm[i];
      count[v] += 1;
    }
  }
  for (std::size_t v = 0; v < nv; ++v) {
    if (count[v] > 0) {
      cv[v] /= count[v];
      mv[v] /= count[v];
    }
  }
  std::vector<double> points;
  for (const Vec2& p : mesh.vertices) points.insert(points.end(), {p.x(), p.y(), 0.0});
  std::vector<std::int64_t> conn, offsets;
  for (std::size_t e = 0; e < ne; ++e) {
    for (int i = 0; i < 3; ++i) conn.push_back(mesh.elements[e][i]);
    offsets.push_back(static_cast<std::int64_t>(3 * (e + 1)));
  }
  const std::vector<std::uint8_t> types(ne, 5);  // VTK_TRIANGLE

  struct Block {
    const char* data;
    std::uint64_t bytes;
  };
  const std::vector<Block> blocks = {
      {reinterpret_cast<const char*>(cv.data()), cv.size() * sizeof(double)},
      {reinterpret_cast<const char*>(mv.data()), mv.size() * sizeof(double)},
      {reinterpret_cast<const char*>(points.data()), points.size() * sizeof(double)},
      {reinterpret_cast<const char*>(conn.data()), conn.size() * sizeof(std::int64_t)},
      {reinterpret_cast<const char*>(offsets.data()), offsets.size() * sizeof(std::int64_t)},
      {reinterpret_cast<const char*>(types.data()), types.size()},
  };
  std::vector<std::uint64_t> off(blocks.size(), 0);
  for (std::size_t i = 1; i < blocks.size(); ++i) off[i] = off[i - 1] + sizeof(std::uint64_t) + blocks[i - 1].bytes;

  std::ofstream os(path, std::ios::binary);
  if (!os) throw InputError("cannot write " + path.string());
  os << "<?xml version=\"1.0\"?>\n"
     << "<VTKFile type=\"UnstructuredGrid\" version=\"1.0\" byte_order=\"LittleEndian\" header_type=\"UInt64\">\n"
     << "  <UnstructuredGrid>\n"
     << "    <Piece NumberOfPoints=\"" << nv << "\" NumberOfCells=\"" << ne << "\">\n"
     << "      <PointData Scalars=\"c\">\n"
     << "        <DataArray type=\"Float64\" Name=\"c\" format=\"appended\" offset=\"" << off[0] << "\"/>\n"
     << "        <DataArray type=\"Float64\" Name=\"mu\" format=\"appended\" offset=\"" << off[1] << "\"/>\n"
     << "      </PointData>\n"
     << "      <Points>\n"
     << "        <DataArray type=\"Float64\" NumberOfComponents=\"3\" format=\"appended\" offset=\"" << off[2] << "\"/>\n"
     << "      </Points>\n"
     << "      <Cells>\n"
     << "        <DataArray type=\"Int64\" Name=\"connectivity\" format=\"appended\" offset=\"" << off[3] << "\"/>\n"
     << "        <DataArray type=\"Int64\" Name=\"offsets\" format=\"appended\" offset=\"" << off[4] << "\"/>\n"
     << "        <DataArray type=\"UInt8\" Name=\"types\" format=\"appended\" offset=\"" << off[5] << "\"/>\n"
     << "      </Cells>\n"
     << "    </Piece>\n"
     << "  </UnstructuredGrid>\n"
     << "  <AppendedData encoding=\"raw\">\n_";
  for (const Block& b : blocks) {
    os.write(reinterpret_cast<const char*>(&b.bytes), sizeof b.bytes);
    os.write(b.data, static_cast<std::streamsize>(b.bytes));
  }
  os << "\n  </AppendedData>\n</VTKFile>\n";
  if (!os) throw InputError("failed writing " + path.string());
}

FinalField run_droplet(int j, int k, Scalar sigma, Scalar kappa, Scalar tau, Scalar T, InitialProjection projection,
                       int subdivisions) {
  const auto t0 = Clock::now();
  FinalField out;
  out.disc = std::make_unique<Discretization>(build_structured_mesh(1 << j), k, sigma);
  const long steps = step_count(T, tau);
  const PairField c0 = initial_projection(*out.disc->ops, droplet_indicator, std::nullopt, projection, {subdivisions});
  SchemeParameters params;
  params.kappa = kappa;
  params.tau = tau;
  const CahnHilliardScheme scheme(*out.disc->ops, params);
  out.state = scheme.initial_state(c0);
  advance(scheme, out.state, steps);
  out.seconds = seconds_since(t0);
  return out;
}

StudyReport convergence_study(const StudyConfig& cfg, const std::function<void(const std::string&)>& log) {
  if (cfg.j_min < 0 || cfg.j_max < cfg.j_min) throw InputError("need 0 <= j_min <= j_max");
  if (cfg.j_fine <= cfg.j_max) throw InputError("J_fine must exceed j_max");
  if (cfg.kappas.empty()) throw InputError("no kappa values");
  StudyReport report;
  report.error_rule = "L2 on the fine mesh, coarse field restricted to nested children, triangle rule exactness " +
                      std::to_string(2 * cfg.k + 2);

  struct Job {
    int j;
    Scalar kappa;
  };
  std::vector<Job> jobs;
  for (Scalar kappa : cfg.kappas) {
    jobs.push_back({cfg.j_fine, kappa});
    for (int j = cfg.j_min; j <= cfg.j_max; ++j) jobs.push_back({j, kappa});
  }
  // largest runs first so the pool drains evenly
  std::stable_sort(jobs.begin(), jobs.end(), [](const Job& a, const Job& b) { return a.j > b.j; });
  const auto tau_of = [&](int j) { return cfg.tau_base / std::pow(4.0, j); };

  std::vector<FinalField> results(jobs.size());
  std::vector<std::string> errors(jobs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  const auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        results[i] = run_droplet(jobs[i].j, cfg.k, cfg.sigma, jobs[i].kappa, tau_of(jobs[i].j), cfg.T, cfg.projection,
                                 cfg.subdivisions);
        if (log) {
          std::lock_guard lock(log_mutex);
          log("run j=" + std::to_string(jobs[i].j) + " kappa=" + format_real(jobs[i].kappa) + " done in " +
              std::to_string(results[i].seconds) + " s");
        }
      } catch (const std::exception& ex) {
        errors[i] = ex.what();
      }
    }
  };
  const int nthreads = std::clamp(cfg.threads, 1, static_cast<int>(jobs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
  worker();
  for (std::thread& t : pool) t.join();

  const auto find = [&](int j, Scalar kappa) -> std::size_t {
    for (std::size_t i = 0; i < jobs.size(); ++i) {
      if (jobs[i].j == j && jobs[i].kappa == kappa) return i;
    }
    return jobs.size();
  };
  for (Scalar kappa : cfg.kappas) {
    const std::size_t fine = find(cfg.j_fine, kappa);
    if (!errors[fine].empty()) {
      report.failure = "fine run kappa=" + format_real(kappa) + ": " + errors[fine];
      return report;
    }
    std::optional<Scalar> prev;
    for (int j = cfg.j_min; j <= cfg.j_max; ++j) {
      const std::size_t i = find(j, kappa);
      if (!errors[i].empty()) {
        report.failure = "run j=" + std::to_string(j) + " kappa=" + format_real(kappa) + ": " + errors[i];
        return report;
      }
      LevelRecord rec;
      rec.j = j;
      rec.h = 1.0 / (1 << j);
      rec.tau = tau_of(j);
      rec.kappa = kappa;
      rec.error = cross_mesh_l2_error(results[i].state.c, results[fine].state.c);
      if (prev) rec.rate = convergence_rate(*prev, rec.error);
      prev = rec.error;
      rec.seconds = results[i].seconds;
      const std::vector<int>& it = results[i].state.newton;
      rec.newton_max = *std::max_element(it.begin(), it.end());
      rec.newton_mean = it.size() > 1 ? double(std::accumulate(it.begin() + 1, it.end(), 0L)) / double(it.size() - 1) : 0.0;
      report.rows.push_back(rec);
    }
  }
  return report;
}

void write_table1(const std::filesystem::path& path, const StudyReport& report) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << "j,h,tau,kappa,error,rate\n";
  for (const LevelRecord& r : report.rows) {
    os << r.j << ',' << format_real(r.h) << ',' << format_real(r.tau) << ',' << format_real(r.kappa) << ','
       << format_real(r.error) << ',' << (r.rate ? format_real(*r.rate) : "") << '\n';
  }
  if (!os) throw InputError("failed writing " + path.string());
}

std::vector<ProbeRow> probe_mesh(const Mesh& mesh, int n, const ProbeConfig& cfg) {
  const Space s(mesh, cfg.k);
  const DiscreteOperators ops(s, cfg.sigma > 0 ? cfg.sigma : default_penalty(cfg.k));
  const NormSuite& N = ops.norms();
  const Scalar h = mesh.h;
  const bool unit_square = (mesh.bbox_min - Vec2(0, 0)).norm() < 1e-12 && (mesh.bbox_max - Vec2(1, 1)).norm() < 1e-12;

  std::map<std::string, Scalar> worst;
  const auto take = [&](const std::string& name, Scalar v) {
    if (!std::isfinite(v)) return;
    auto [it, fresh] = worst.emplace(name, v);
    if (!fresh) it->second = std::max(it->second, v);
  };
  std::unique_ptr<CosineDualNorm> dual;
  if (unit_square) dual = std::make_unique<CosineDualNorm>(s, cfg.modes);
  Scalar truncation = 0;
  const int gn_p[3] = {3, 4, 6};

  for (int i = 0; i < cfg.samples; ++i) {
    const std::uint64_t base = cfg.seed + 3 * static_cast<std::uint64_t>(i);
    const PairField v = random_field(s, base, false);
    const PairField u = random_field(s, base + 1, false);
    const PairField w = random_field(s, base + 2, true);
    const Scalar v1 = N.norm_1h(v), v0 = N.norm_0h(v), vl2 = N.norm_l2(v);
    const Scalar vbar = mean_value(v);

    take("poincare", vl2 / std::sqrt(v1 * v1 + vbar * vbar));
    take("dg_over_1h", N.norm_dg(v) / v1);
    take("star_over_1h", N.norm_1h_star(v) / v1);
    take("j0_over_h2_1h", N.j0_value(v, v) / (h * h * v1 * v1));
    take("j0_mixed", std::abs(N.j0_value(u, v)) / (h * N.norm_0h(u) * v1));
    take("linf_over_l2", sup_norm(v) * h / vl2);
    take("grad_over_l2", std::sqrt(quadratic_form(N.stiffness(), v.coeffs, v.coeffs)) * h / vl2);
    take("1h_over_0h", v1 * h / v0);
    take("continuity", std::abs(ops.a(u, v)) / (N.norm_1h(u) * v1));

    const PairField lv = ops.laplacian(v);
    take("laplacian_0h", N.norm_0h(lv) * h / v1);
    if (dual) {
      const Scalar dn = (*dual)(lv);
      truncation = std::max(truncation, std::abs(dn - dual->coarse(lv)) / dn);
      take("laplacian_dual", dn / v1);
    }

    const Scalar w1 = N.norm_1h(w);
    if (w1 >= 1e-12) {
      const Scalar lw = N.norm_0h(ops.laplacian(w));
      take("agmon", sup_norm(w, mean_value(w)) / std::sqrt(w1 * lw));
      for (int p : gn_p) {
        const Scalar alpha = 1.0 - 1.0 / p;  // 1/2 + (d/2)(1/2 - 1/p), d = 2
        take("gn_p" + std::to_string(p), gradient_lp_norm(w, p) / (std::pow(w1, 1 - alpha) * std::pow(lw, alpha)));
      }
      PairField welem = w;
      welem.facet_part().setZero();
      const PairField jw = ops.j_operator(welem);
      take("j_operator_dual",
           std::abs(quadratic_form(N.mass(), w.coeffs, v.coeffs)) / (N.norm_1h(jw) * N.norm_dg(v)));
    }
  }

  std::vector<ProbeRow> rows;
  const auto row = [&](const std::string& family, const std::string& probe, Scalar value, std::string note = {}) {
    ProbeRow r;
    r.family = family;
    r.probe = probe;
    r.n = n;
    r.h = h;
    r.value = value;
    r.note = std::move(note);
    rows.push_back(std::move(r));
  };
  const auto emit = [&](const std::string& family, const std::string& probe, std::string note = {}) {
    const auto it = worst.find(probe);
    if (it != worst.end()) row(family, probe, it->second, std::move(note));
  };
  emit("poincare", "poincare");
  emit("dg", "dg_over_1h");
  emit("equivalence", "star_over_1h");
  emit("j0", "j0_over_h2_1h");
  emit("j0", "j0_mixed");
  emit("inverse", "linf_over_l2", "lattice degree " + std::to_string(cfg.k + 3));
  emit("inverse", "grad_over_l2");
  emit("inverse", "1h_over_0h");
  emit("agmon", "agmon");
  for (int p : gn_p) emit("gagliardo_nirenberg", "gn_p" + std::to_string(p));
  emit("laplacian", "laplacian_0h");
  if (dual) {
    emit("laplacian", "laplacian_dual", "relative change from " + std::to_string(cfg.modes / 2) + " to " +
                                            std::to_string(cfg.modes) + " modes " + format_real(truncation));
  }
  emit("continuity", "continuity");

  // G_h against the manufactured Neumann solution of f = cos(pi x) cos(pi y)
  if (unit_square) {
    const Scalar pi = std::numbers::pi;
    const auto f = [pi](const Vec2& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()); };
    const auto gf = [pi](const Vec2& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()) / (2 * pi * pi); };
    const PairField wh = project_l2(s, f);
    const PairField diff = ops.green(wh) - project_l2(s, gf);
    const Scalar w0 = N.norm_0h(wh);
    row("green", "green_1h_over_h", N.norm_1h(diff) / (h * w0), "G applied to f rather than pi_h f");
    row("green", "green_l2_over_h2", N.norm_l2(diff) / (h * h * w0), "G applied to f rather than pi_h f");
  }
  emit("green", "j_operator_dual");
  return rows;
}

std::vector<ProbeRow> probe_inequalities(const ProbeConfig& cfg) {
  std::vector<ProbeRow> all;
  std::map<std::string, Scalar> previous;
  for (int n : cfg.levels) {
    if (n < 1) throw InputError("probe level must be >= 1");
    std::vector<ProbeRow> rows = probe_mesh(build_structured_mesh(n), n, cfg);
    for (ProbeRow& r : rows) {
      const auto it = previous.find(r.probe);
      if (it != previous.end()) r.growth = r.value / it->second;
      previous[r.probe] = r.value;
      all.push_back(std::move(r));
    }
  }
  return all;
}

namespace {

std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

void write_probes(const std::filesystem::path& path, const std::vector<ProbeRow>& rows) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  std::vector<int> levels;
  for (const ProbeRow& r : rows) {
    if (std::find(levels.begin(), levels.end(), r.n) == levels.end()) levels.push_back(r.n);
  }
  const bool growth = levels.size() > 1;
  os << "family,probe,n,h,value" << (growth ? ",growth" : "") << ",note\n";
  for (const ProbeRow& r : rows) {
    os << r.family << ',' << r.probe << ',' << r.n << ',' << format_real(r.h) << ',' << format_real(r.value);
    if (growth) os << ',' << (r.growth ? format_real(*r.growth) : "");
    os << ',' << csv_quote(r.note) << '\n';
  }
  if (!os) throw InputError("failed writing " + path.string());
}

std::vector<ProjectionRow> projection_study(const std::vector<int>& levels, int k, Scalar sigma) {
  const Scalar pi = std::numbers::pi;
  const auto f = [pi](const Vec2& x) { return std::cos(pi * x.x()) * std::cos(pi * x.y()); };
  const auto g = [pi](const Vec2& x) {
    return Vec2(-pi * std::sin(pi * x.x()) * std::cos(pi * x.y()), -pi * std::cos(pi * x.x()) * std::sin(pi * x.y()));
  };
  std::vector<ProjectionRow> rows;
  for (int n : levels) {
    const Discretization d(build_structured_mesh(n), k, sigma);
    const PairField ell = d.ops->elliptic_projection(f, g);
    const PairField l2 = project_l2(*d.space, f);
    ProjectionRow r;
    r.n = n;
    r.h = 1.0 / n;
    r.elliptic_l2 = l2_error(ell, f);
    r.elliptic_star = star_error(ell, f, g);
    r.l2_l2 = l2_error(l2, f);
    if (!rows.empty()) {
      const ProjectionRow& p = rows.back();
      const Scalar steps = std::log2(Scalar(n) / p.n);
      r.rate_elliptic_l2 = convergence_rate(p.elliptic_l2, r.elliptic_l2) / steps;
      r.rate_elliptic_star = convergence_rate(p.elliptic_star, r.elliptic_star) / steps;
      r.rate_l2_l2 = convergence_rate(p.l2_l2, r.l2_l2) / steps;
    }
    rows.push_back(r);
  }
  return rows;
}

void write_projection_table(const std::filesystem::path& path, const std::vector<ProjectionRow>& rows) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  const auto opt = [](const std::optional<Scalar>& v) { return v ? format_real(*v) : std::string(); };
  os << "n,h,elliptic_l2,rate_elliptic_l2,elliptic_star,rate_elliptic_star,l2_l2,rate_l2_l2\n";
  for (const ProjectionRow& r : rows) {
    os << r.n << ',' << format_real(r.h) << ',' << format_real(r.elliptic_l2) << ',' << opt(r.rate_elliptic_l2) << ','
       << format_real(r.elliptic_star) << ',' << opt(r.rate_elliptic_star) << ',' << format_real(r.l2_l2) << ','
       << opt(r.rate_l2_l2) << '\n';
  }
  if (!os) throw InputError("failed writing " + path.string());
}

}  // namespace hdgch
