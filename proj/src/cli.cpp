#include "hdgch/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include <json.hpp>

namespace hdgch::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

Scalar parse_number(const std::string& text) {
  const std::string t = trim(text);
  std::size_t used = 0;
  Scalar v = 0;
  try {
    v = std::stod(t, &used);
  } catch (const std::exception&) {
    throw InputError("not a number: '" + text + "'");
  }
  if (used != t.size()) throw InputError("not a number: '" + text + "'");
  return v;
}

Scalar parse_power(const std::string& text) {
  const auto caret = text.find('^');
  if (caret == std::string::npos) return parse_number(text);
  return std::pow(parse_number(text.substr(0, caret)), parse_power(text.substr(caret + 1)));
}

std::string padded(long n) {
  std::ostringstream os;
  os << std::setw(6) << std::setfill('0') << n;
  return os.str();
}

const std::vector<std::string> kCommon = {"out", "threads"};

std::vector<std::string> with_common(std::vector<std::string> keys) {
  keys.insert(keys.end(), kCommon.begin(), kCommon.end());
  return keys;
}

}  // namespace

Scalar parse_real(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) throw InputError("empty number");
  const auto slash = t.find('/');
  const Scalar v = slash == std::string::npos ? parse_power(t) : parse_power(t.substr(0, slash)) / parse_power(t.substr(slash + 1));
  if (!std::isfinite(v)) throw InputError("non-finite number: '" + text + "'");
  return v;
}

std::vector<Scalar> parse_real_list(const std::string& text) {
  std::vector<Scalar> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!trim(item).empty()) out.push_back(parse_real(item));
  }
  if (out.empty()) throw InputError("empty list: '" + text + "'");
  return out;
}

std::string Config::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

Scalar Config::real(const std::string& key, Scalar fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    return parse_real(it->second);
  } catch (const InputError& e) {
    throw InputError("key '" + key + "': " + e.what());
  }
}

long Config::integer(const std::string& key, long fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const std::string t = trim(it->second);
  std::size_t used = 0;
  long v = 0;
  try {
    v = std::stol(t, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (t.empty() || used != t.size()) throw InputError("key '" + key + "': not an integer: '" + it->second + "'");
  return v;
}

void Config::merge(const Config& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

void Config::require_known(const std::vector<std::string>& allowed) const {
  for (const auto& [k, v] : values_) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) throw InputError("unknown config key '" + k + "'");
  }
}

Config Config::parse(std::istream& in, const std::string& origin) {
  Config c;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    std::string key, value;
    const auto eq = line.find('=');
    if (eq != std::string::npos) {
      key = trim(line.substr(0, eq));
      value = trim(line.substr(eq + 1));
    } else {
      const auto sp = line.find_first_of(" \t");
      if (sp == std::string::npos) throw InputError(origin + ":" + std::to_string(lineno) + ": missing value");
      key = trim(line.substr(0, sp));
      value = trim(line.substr(sp + 1));
    }
    if (key.empty()) throw InputError(origin + ":" + std::to_string(lineno) + ": missing key");
    c.set(key, value);
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  return parse(in, path.string());
}

void Config::write(const std::filesystem::path& path) const {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
}

const std::vector<std::string>& known_keys(const std::string& command) {
  static const std::map<std::string, std::vector<std::string>> keys = {
      {"run", with_common({"j", "mesh", "k", "sigma", "kappa", "tau", "T", "potential", "initial", "projection",
                           "subdivisions", "checkpoint_stride", "vtu_stride", "seed", "restart", "linear"})},
      {"convergence", with_common({"j_min", "j_max", "j_fine", "kappa", "k", "T", "tau_base", "sigma", "projection",
                                   "subdivisions"})},
      {"probe", with_common({"levels", "n_min", "k", "samples", "seed", "sigma", "modes", "mesh"})},
      {"project", with_common({"levels", "n_min", "k", "sigma"})},
  };
  const auto it = keys.find(command);
  if (it == keys.end()) throw InputError("unknown command '" + command + "'");
  return it->second;
}

Config preset(const std::string& command, const std::string& name) {
  Config c;
  if (command == "run" && name == "table1") {
    c.set("k", "1");
    c.set("T", "0.1");
    c.set("tau", "table1");
    c.set("kappa", "2^-8");
    c.set("initial", "droplet");
    c.set("projection", "l2");
    c.set("subdivisions", "1");
    return c;
  }
  if (command == "convergence" && (name == "desk" || name == "paper")) {
    const bool desk = name == "desk";
    c.set("j_min", desk ? "2" : "3");
    c.set("j_max", desk ? "4" : "5");
    c.set("j_fine", desk ? "5" : "6");
    c.set("kappa", desk ? "2^-8" : "2^-8,2^-10,2^-12");
    c.set("k", "1");
    c.set("T", "0.1");
    c.set("tau_base", "0.1");
    c.set("projection", "l2");
    c.set("subdivisions", "1");
    return c;
  }
  throw InputError("unknown preset '" + name + "' for " + command);
}

std::filesystem::path output_dir(const Config& config, const std::string& command) {
  const std::filesystem::path out = config.get("out", command);
  if (out.is_absolute()) return out;
  const char* root = std::getenv("HDGCH_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "output") / out;
}

RunConfig RunConfig::from(const Config& c) {
  RunConfig r;
  r.j = static_cast<int>(c.integer("j", r.j));
  if (r.j < 0 || r.j > 12) throw InputError("j must be in [0, 12]");
  r.mesh_file = c.get("mesh", "");
  r.k = static_cast<int>(c.integer("k", r.k));
  if (r.k < 1) throw InputError("k must be >= 1");
  if (c.has("sigma")) r.sigma = c.real("sigma", 0);
  r.kappa = c.real("kappa", r.kappa);
  r.tau = c.get("tau", "") == "table1" ? 0.1 / std::pow(4.0, r.j) : c.real("tau", r.tau);
  r.T = c.real("T", r.T);
  if (!(r.kappa > 0) || !(r.tau > 0) || !(r.T > 0)) throw InputError("kappa, tau and T must be positive");
  if (c.get("potential", "ginzburg-landau") != "ginzburg-landau") throw InputError("only the ginzburg-landau potential is available");
  r.initial = c.get("initial", r.initial);
  r.projection = parse_projection_mode(c.get("projection", to_string(r.projection)));
  r.subdivisions = static_cast<int>(c.integer("subdivisions", r.subdivisions));
  if (r.subdivisions < 0 || r.subdivisions > 6) throw InputError("subdivisions must be in [0, 6]");
  r.checkpoint_stride = c.integer("checkpoint_stride", 0);
  r.vtu_stride = c.integer("vtu_stride", 0);
  r.seed = static_cast<std::uint64_t>(c.integer("seed", 1));
  r.restart = c.get("restart", "");
  const std::string lin = c.get("linear", "condensed");
  if (lin != "condensed" && lin != "monolithic") throw InputError("linear must be condensed or monolithic");
  r.linear = lin == "condensed" ? LinearSolve::condensed : LinearSolve::monolithic;
  return r;
}

StudyConfig study_config(const Config& c) {
  StudyConfig s;
  s.j_min = static_cast<int>(c.integer("j_min", s.j_min));
  s.j_max = static_cast<int>(c.integer("j_max", s.j_max));
  s.j_fine = static_cast<int>(c.integer("j_fine", s.j_fine));
  if (c.has("kappa")) s.kappas = parse_real_list(c.get("kappa", ""));
  s.k = static_cast<int>(c.integer("k", s.k));
  s.T = c.real("T", s.T);
  s.tau_base = c.real("tau_base", s.tau_base);
  s.sigma = c.real("sigma", 0);
  s.projection = parse_projection_mode(c.get("projection", "l2"));
  s.subdivisions = static_cast<int>(c.integer("subdivisions", s.subdivisions));
  s.threads = static_cast<int>(c.integer("threads", 1));
  if (s.j_fine > 8) throw InputError("j_fine must be <= 8");
  for (Scalar kappa : s.kappas) {
    if (!(kappa > 0)) throw InputError("kappa must be positive");
  }
  for (int j = s.j_min; j <= s.j_fine; ++j) step_count(s.T, s.tau_base / std::pow(4.0, j));
  return s;
}

ProbeConfig probe_config(const Config& c) {
  ProbeConfig p;
  const long levels = c.integer("levels", 4);
  const long n_min = c.integer("n_min", 4);
  if (levels < 1 || levels > 8 || n_min < 1) throw InputError("need levels in [1, 8] and n_min >= 1");
  p.levels.clear();
  for (long i = 0; i < levels; ++i) p.levels.push_back(static_cast<int>(n_min << i));
  p.k = static_cast<int>(c.integer("k", p.k));
  p.samples = static_cast<int>(c.integer("samples", p.samples));
  p.seed = static_cast<std::uint64_t>(c.integer("seed", static_cast<long>(p.seed)));
  p.sigma = c.real("sigma", 0);
  p.modes = static_cast<int>(c.integer("modes", p.modes));
  if (p.samples < 1 || p.modes < 2) throw InputError("samples must be >= 1 and modes >= 2");
  return p;
}

namespace {

struct InitialData {
  ScalarFunction f;
  std::optional<GradientFunction> grad;
  std::optional<Scalar> random_amplitude;
};

InitialData initial_data(const std::string& text) {
  const auto colon = text.find(':');
  const std::string kind = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  const Scalar pi = std::numbers::pi;
  if (kind == "droplet" && arg.empty()) return {droplet_indicator, std::nullopt, std::nullopt};
  if (kind == "constant" && !arg.empty()) {
    const Scalar m = parse_real(arg);
    return {[m](const Vec2&) { return m; }, GradientFunction([](const Vec2&) { return Vec2(0, 0); }), std::nullopt};
  }
  if (kind == "cosine" && !arg.empty()) {
    const Scalar a = parse_real(arg);
    return {[a, pi](const Vec2& x) { return a * std::cos(pi * x.x()) * std::cos(pi * x.y()); },
            GradientFunction([a, pi](const Vec2& x) {
              return Vec2(-a * pi * std::sin(pi * x.x()) * std::cos(pi * x.y()),
                          -a * pi * std::cos(pi * x.x()) * std::sin(pi * x.y()));
            }),
            std::nullopt};
  }
  if (kind == "random" && !arg.empty()) return {{}, std::nullopt, parse_real(arg)};
  throw InputError("unknown initial condition '" + text + "'");
}

int median(std::vector<int> v) {
  if (v.empty()) return 0;
  std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
  return v[v.size() / 2];
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  std::ofstream os(path);
  if (!os) throw InputError("cannot write " + path.string());
  os << j.dump(2) << '\n';
}

int guarded(const std::function<int()>& body, std::ostream& log) {
  try {
    return body();
  } catch (const InputError& e) {
    log << "error: " << e.what() << '\n';
  } catch (const SolverError& e) {
    log << "solver error: " << e.what() << '\n';
  }
  return kFailure;
}

}  // namespace

int cmd_run(const Config& config, std::ostream& log) {
  return guarded([&] {
    config.require_known(known_keys("run"));
    const RunConfig rc = RunConfig::from(config);
    const long steps = step_count(rc.T, rc.tau);
    const std::filesystem::path out = output_dir(config, "run");
    std::filesystem::create_directories(out);
    config.write(out / "config.txt");

    Mesh mesh;
    std::string mesh_ref;
    if (!rc.mesh_file.empty()) {
      ImportResult imported = import_mesh(rc.mesh_file);
      for (const std::string& w : imported.warnings) log << "warning: " << w << '\n';
      mesh = std::move(imported.mesh);
      mesh_ref = "file:" + rc.mesh_file;
    } else {
      mesh = build_structured_mesh(1 << rc.j);
      mesh_ref = "structured:" + std::to_string(1 << rc.j);
    }
    const Scalar sigma = rc.sigma.value_or(default_penalty(rc.k));
    const Discretization disc(std::move(mesh), rc.k, sigma);
    const Scalar coercivity = local_coercivity_bound(*disc.space, sigma);
    if (rc.sigma && coercivity < 1e-8) {
      throw InputError("sigma = " + format_real(sigma) + " fails the coercivity probe (bound " + format_real(coercivity) + ")");
    }

    SchemeParameters params;
    params.kappa = rc.kappa;
    params.tau = rc.tau;
    params.linear = rc.linear;
    const CahnHilliardScheme scheme(*disc.ops, params);
    SchemeState state;
    if (!rc.restart.empty()) {
      std::string stored;
      state = read_checkpoint(rc.restart, *disc.space, &stored);
      if (stored != mesh_ref) throw InputError("checkpoint mesh '" + stored + "' does not match '" + mesh_ref + "'");
      if (state.tau != rc.tau || state.kappa != rc.kappa) throw InputError("checkpoint tau/kappa differ from the config");
      if (state.step > steps) throw InputError("checkpoint is past the final time");
      log << "restart from step " << state.step << '\n';
    } else {
      const InitialData data = initial_data(rc.initial);
      PairField c0 = disc.space->zero();
      if (data.random_amplitude) {
        c0 = *data.random_amplitude * random_field(*disc.space, rc.seed, true);
      } else {
        c0 = initial_projection(*disc.ops, data.f, data.grad, rc.projection, {rc.subdivisions});
      }
      state = scheme.initial_state(c0);
    }

    const NormSuite& norms = disc.ops->norms();
    LedgerWriter ledger(out / "ledger.csv");
    ledger.write(state, norms);
    const Scalar area = disc.mesh->domain_area();
    const Scalar m0 = state.mass.front(), e0 = state.energy.front();
    Scalar max_drift = 0, max_increase = -std::numeric_limits<Scalar>::infinity(), c_inf = sup_norm(state.c);
    std::string violation;
    int status = kOk;
    while (state.step < steps) {
      const SchemeState last_good = state;
      try {
        scheme.advance(state);
      } catch (const SolverError& e) {
        write_checkpoint(out / "checkpoint_failed.bin", last_good, mesh_ref);
        log << "step " << last_good.step + 1 << " failed: " << e.what() << "\n";
        status = kFailure;
        state = last_good;
        break;
      }
      ledger.write(state, norms);
      const std::size_t n = state.energy.size();
      max_drift = std::max(max_drift, std::abs(state.mass.back() - m0));
      max_increase = std::max(max_increase, state.energy[n - 1] - state.energy[n - 2]);
      c_inf = std::max(c_inf, sup_norm(state.c));
      if (std::abs(state.mass.back() - m0) > 1e-10 * area) violation = "mass drift at step " + std::to_string(state.step);
      if (state.energy[n - 1] > state.energy[n - 2] + 1e-9 * (1 + std::abs(e0))) {
        violation = "energy increase at step " + std::to_string(state.step);
      }
      if (rc.checkpoint_stride > 0 && state.step % rc.checkpoint_stride == 0) {
        write_checkpoint(out / ("checkpoint_" + padded(state.step) + ".bin"), state, mesh_ref);
      }
      if (rc.vtu_stride > 0 && state.step % rc.vtu_stride == 0) {
        write_vtu(out / ("snapshot_" + padded(state.step) + ".vtu"), state.c, state.mu);
      }
      if (!violation.empty()) {
        log << "invariant violation: " << violation << '\n';
        status = kInvariant;
        break;
      }
    }
    write_checkpoint(out / "final.bin", state, mesh_ref);
    write_vtu(out / "final.vtu", state.c, state.mu);

    std::vector<int> iters(state.newton.begin() + 1, state.newton.end());
    nlohmann::json j;
    j["mesh"] = mesh_ref;
    j["k"] = rc.k;
    j["sigma"] = sigma;
    j["coercivity_bound"] = coercivity;
    j["kappa"] = rc.kappa;
    j["tau"] = rc.tau;
    j["T"] = rc.T;
    j["steps"] = steps;
    j["completed_steps"] = state.step;
    j["initial"] = rc.initial;
    j["projection"] = to_string(rc.projection);
    j["subdivisions"] = rc.subdivisions;
    j["mass_initial"] = m0;
    j["mass_final"] = state.mass.back();
    j["max_mass_drift"] = max_drift;
    j["energy_initial"] = e0;
    j["energy_final"] = state.energy.back();
    j["max_energy_increase"] = iters.empty() ? 0.0 : max_increase;
    j["c_inf_max"] = c_inf;
    j["mu_l2_final"] = norms.norm_l2(state.mu);
    j["newton_max"] = iters.empty() ? 0 : *std::max_element(iters.begin(), iters.end());
    j["newton_median"] = median(iters);
    j["violation"] = violation;
    write_json(out / "run.json", j);
    log << "run: " << state.step << "/" << steps << " steps, mass drift " << format_real(max_drift) << ", energy "
        << format_real(e0) << " -> " << format_real(state.energy.back()) << '\n';
    return status;
  }, log);
}

int cmd_convergence(const Config& config, std::ostream& log) {
  return guarded([&] {
    config.require_known(known_keys("convergence"));
    const StudyConfig sc = study_config(config);
    const std::filesystem::path out = output_dir(config, "convergence");
    std::filesystem::create_directories(out);
    config.write(out / "config.txt");
    const StudyReport report = convergence_study(sc, [&](const std::string& m) { log << m << '\n'; });
    write_table1(out / "table1.csv", report);
    nlohmann::json j;
    j["error_rule"] = report.error_rule;
    j["failure"] = report.failure;
    for (const LevelRecord& r : report.rows) {
      j["levels"].push_back({{"j", r.j},
                             {"kappa", r.kappa},
                             {"error", r.error},
                             {"seconds", r.seconds},
                             {"newton_max", r.newton_max},
                             {"newton_mean", r.newton_mean}});
    }
    write_json(out / "study.json", j);
    for (const LevelRecord& r : report.rows) {
      log << "j=" << r.j << " kappa=" << format_real(r.kappa) << " error=" << format_real(r.error)
          << " rate=" << (r.rate ? format_real(*r.rate) : "-") << '\n';
    }
    if (!report.failure.empty()) {
      log << "study aborted: " << report.failure << '\n';
      return int(kFailure);
    }
    return int(kOk);
  }, log);
}

int cmd_probe(const Config& config, std::ostream& log) {
  return guarded([&] {
    config.require_known(known_keys("probe"));
    const ProbeConfig pc = probe_config(config);
    const std::filesystem::path out = output_dir(config, "probe");
    std::filesystem::create_directories(out);
    config.write(out / "config.txt");
    std::vector<ProbeRow> rows;
    if (config.has("mesh")) {
      ImportResult imported = import_mesh(config.get("mesh", ""));
      for (const std::string& w : imported.warnings) log << "warning: " << w << '\n';
      rows = probe_mesh(imported.mesh, 0, pc);
      for (ProbeRow& r : rows) r.note = r.note.empty() ? "imported mesh" : "imported mesh; " + r.note;
    } else {
      rows = probe_inequalities(pc);
    }
    write_probes(out / "probes.csv", rows);
    log << "probe: " << rows.size() << " rows\n";
    return int(kOk);
  }, log);
}

int cmd_project(const Config& config, std::ostream& log) {
  return guarded([&] {
    config.require_known(known_keys("project"));
    const ProbeConfig pc = probe_config(config);
    const std::filesystem::path out = output_dir(config, "project");
    std::filesystem::create_directories(out);
    config.write(out / "config.txt");
    const std::vector<ProjectionRow> rows = projection_study(pc.levels, pc.k, pc.sigma);
    write_projection_table(out / "projection.csv", rows);
    for (const ProjectionRow& r : rows) {
      log << "n=" << r.n << " elliptic L2 " << format_real(r.elliptic_l2) << " star " << format_real(r.elliptic_star)
          << " l2 " << format_real(r.l2_l2) << '\n';
    }
    return int(kOk);
  }, log);
}

}  // namespace hdgch::cli
