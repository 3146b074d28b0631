#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include "hdgch/analysis.hpp"

using namespace hdgch;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hdgch_analysis_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_SUITE("analysis") {

TEST_CASE("rate formula") {
  std::vector<Scalar> e;
  for (int j = 2; j <= 6; ++j) e.push_back(0.7 * std::pow(2.0, -2 * j));
  const auto rates = convergence_rates(e);
  CHECK_FALSE(rates.front().has_value());
  for (std::size_t i = 1; i < rates.size(); ++i) CHECK(std::abs(*rates[i] - 2.0) <= 1e-12);
  CHECK(convergence_rate(5.652e-2, 1.206e-2) == doctest::Approx(std::log2(5.652e-2 / 1.206e-2)));
}

TEST_CASE("cross-mesh error") {
  const Mesh coarse = build_structured_mesh(4), fine = build_structured_mesh(16), other = build_structured_mesh(6);
  const Space sc(coarse, 1), sf(fine, 1), so(other, 1);
  const ScalarFunction f = [](const Vec2& x) { return std::sin(3 * x.x()) * x.y(); };
  const PairField a = project_l2(sc, f), b = project_l2(sf, f);
  CHECK(cross_mesh_l2_error(a, a) == 0.0);
  CHECK(cross_mesh_l2_error(a, b) == cross_mesh_l2_error(b, a));
  CHECK(cross_mesh_l2_error(a, b) > 0);
  CHECK_THROWS_AS(cross_mesh_l2_error(a, project_l2(so, f)), InputError);
  const ScalarFunction lin = [](const Vec2& x) { return 2 * x.x() - x.y(); };
  CHECK(cross_mesh_l2_error(project_l2(sc, lin), project_l2(sf, lin)) <= 1e-13);
}

TEST_CASE("field measurements") {
  const Mesh m = build_structured_mesh(8);
  const Space s(m, 1);
  CHECK(sup_norm(s.constant(-1.5)) == doctest::Approx(1.5));
  CHECK(sup_norm(s.constant(-1.5), -1.5) == 0.0);
  const PairField lin = project_l2(s, [](const Vec2& x) { return 3 * x.x(); });
  CHECK(sup_norm(lin) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(gradient_lp_norm(lin, 4) == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(l2_error(lin, [](const Vec2& x) { return 3 * x.x(); }) <= 1e-12);

  const PairField two = project_l2(s, [](const Vec2& x) {
    const bool a = x.x() < 0.4 && x.y() < 0.4, b = x.x() > 0.6 && x.y() > 0.6;
    return a || b ? 1.0 : -1.0;
  });
  CHECK(count_positive_components(two) == 2);
  CHECK(count_positive_components(s.constant(1.0)) == 1);
  CHECK(count_positive_components(s.constant(-1.0)) == 0);
  CHECK(droplet_indicator(Vec2(0.3, 0.3)) == 1.0);
  CHECK(droplet_indicator(Vec2(0.7, 0.7)) == 1.0);
  CHECK(droplet_indicator(Vec2(0.2, 0.8)) == -1.0);
}

TEST_CASE("cosine dual norm of a single mode") {
  const Mesh m = build_structured_mesh(16);
  const Space s(m, 2);
  const Scalar pi = std::numbers::pi;
  const PairField f = project_l2(s, [pi](const Vec2& x) { return std::cos(pi * x.x()); });
  const CosineDualNorm dual(s, 16);
  const Scalar expected = std::sqrt(0.5 / (1 + pi * pi));
  CHECK(dual(f) == doctest::Approx(expected).epsilon(1e-3));
  CHECK(dual.coarse(f) == doctest::Approx(expected).epsilon(1e-3));
}

TEST_CASE("step count") {
  CHECK(step_count(0.1, 0.1 / 64) == 64);
  CHECK_THROWS_AS(step_count(0.1, 0.03), InputError);
  CHECK_THROWS_AS(step_count(0.1, 0.0), InputError);
}

TEST_CASE("ledger and vtu output") {
  const auto dir = scratch_dir("io");
  const Discretization d(build_structured_mesh(4), 1, 0);
  SchemeParameters p;
  p.tau = 0.01;
  const CahnHilliardScheme scheme(*d.ops, p);
  SchemeState st = scheme.initial_state(d.space->constant(0.2));
  {
    LedgerWriter ledger(dir / "ledger.csv");
    ledger.write(st, d.ops->norms());
    advance(scheme, st, 3, [&](const SchemeState& s, const NewtonReport&) { ledger.write(s, d.ops->norms()); });
  }
  std::ifstream in(dir / "ledger.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "n,t,mass,energy,mu_l2,c_inf,newton_iterations");
  std::set<std::string> bodies;
  int rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    std::stringstream ss(line);
    std::string n, t, rest;
    std::getline(ss, n, ',');
    std::getline(ss, t, ',');
    std::getline(ss, rest);
    bodies.insert(rest.substr(0, rest.rfind(',')));
  }
  CHECK(rows == 4);
  CHECK(bodies.size() == 1);  // quiescent: identical mass, energy, norms

  write_vtu(dir / "c.vtu", st.c, st.mu);
  const std::string vtu = slurp(dir / "c.vtu");
  CHECK(vtu.find("<VTKFile type=\"UnstructuredGrid\"") != std::string::npos);
  CHECK(vtu.find("format=\"appended\"") != std::string::npos);
  CHECK(vtu.find("NumberOfPoints=\"25\"") != std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST_CASE("single-level study has no rates") {
  StudyConfig cfg;
  cfg.j_min = cfg.j_max = 2;
  cfg.j_fine = 3;
  const StudyReport rep = convergence_study(cfg);
  REQUIRE(rep.rows.size() == 1);
  CHECK(rep.failure.empty());
  CHECK_FALSE(rep.rows[0].rate.has_value());
  CHECK(rep.rows[0].error > 0);
  CHECK(rep.rows[0].h == 0.25);
  CHECK_FALSE(rep.error_rule.empty());
  const auto dir = scratch_dir("study");
  write_table1(dir / "t.csv", rep);
  const std::string text = slurp(dir / "t.csv");
  CHECK(text.substr(0, text.find('\n')) == "j,h,tau,kappa,error,rate");
  CHECK(text.back() == '\n');
  CHECK(text[text.size() - 2] == ',');
  std::filesystem::remove_all(dir);

  StudyConfig bad = cfg;
  bad.j_fine = 2;
  CHECK_THROWS_AS(convergence_study(bad), InputError);
}

TEST_CASE("probe suite") {
  ProbeConfig cfg;
  cfg.levels = {4};
  cfg.samples = 6;
  const std::vector<ProbeRow> a = probe_inequalities(cfg);
  const std::vector<ProbeRow> b = probe_inequalities(cfg);
  REQUIRE(a.size() == b.size());
  std::set<std::string> families;
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].probe == b[i].probe);
    CHECK(a[i].value == b[i].value);
    CHECK_FALSE(a[i].growth.has_value());
    families.insert(a[i].family);
  }
  CHECK(families.size() == 10);

  const auto dir = scratch_dir("probe");
  write_probes(dir / "p.csv", a);
  const std::string text = slurp(dir / "p.csv");
  CHECK(text.substr(0, text.find('\n')) == "family,probe,n,h,value,note");
  CHECK(text.find("\"relative change") == std::string::npos);  // no commas, so no quoting
  std::filesystem::remove_all(dir);
}

TEST_CASE("projection study shape") {
  const auto rows = projection_study({4, 8}, 1, 0);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].rate_l2_l2.has_value());
  CHECK(*rows[1].rate_l2_l2 == doctest::Approx(2).epsilon(0.1));
}

TEST_CASE("number formatting round-trips") {
  for (Scalar v : {0.1, 1.0 / 3, -2.5e-17, 6.02214076e23}) CHECK(std::stod(format_real(v)) == v);
}

}
