#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hdgch/analysis.hpp"

namespace hdgch::cli {

/// Stable process exit codes.
enum ExitCode : int { kOk = 0, kUsage = 1, kFailure = 2, kInvariant = 3 };

/// Flat key/value configuration. Files hold one `key = value` (or
/// `key value`) per line; `#` starts a comment.
class Config {
 public:
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  bool has(const std::string& key) const { return values_.count(key) > 0; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  Scalar real(const std::string& key, Scalar fallback) const;
  long integer(const std::string& key, long fallback) const;

  /// Entries of `other` replace ours.
  void merge(const Config& other);
  /// Throws InputError naming the first key outside `allowed`.
  void require_known(const std::vector<std::string>& allowed) const;

  static Config parse(std::istream& in, const std::string& origin = "config");
  static Config load(const std::filesystem::path& path);
  void write(const std::filesystem::path& path) const;

 private:
  std::map<std::string, std::string> values_;
};

/// Accepts plain decimals, `a/b` and `a^b` (so `2^-8` and `0.1/64` work).
Scalar parse_real(const std::string& text);
std::vector<Scalar> parse_real_list(const std::string& text);

/// Keys understood by a subcommand.
const std::vector<std::string>& known_keys(const std::string& command);
/// Named presets: run/table1, convergence/desk, convergence/paper.
Config preset(const std::string& command, const std::string& name);

/// Output directory: `out` when absolute, otherwise below $HDGCH_OUTPUT_ROOT
/// (default `output`), defaulting to the command name.
std::filesystem::path output_dir(const Config& config, const std::string& command);

struct RunConfig {
  int j = 3;
  std::string mesh_file;
  int k = 1;
  std::optional<Scalar> sigma;
  Scalar kappa = 1.0 / 256;
  Scalar tau = 0.1 / 64;
  Scalar T = 0.1;
  std::string initial = "droplet";  // droplet | constant:m | cosine:a | random:a
  InitialProjection projection = InitialProjection::l2;
  int subdivisions = 1;
  long checkpoint_stride = 0;
  long vtu_stride = 0;
  std::uint64_t seed = 1;
  std::string restart;
  LinearSolve linear = LinearSolve::condensed;

  static RunConfig from(const Config& config);
};

StudyConfig study_config(const Config& config);
ProbeConfig probe_config(const Config& config);

/// Each command writes its artifacts plus `config.txt` into output_dir() and
/// returns an ExitCode; diagnostics go to `log`.
int cmd_run(const Config& config, std::ostream& log);
int cmd_convergence(const Config& config, std::ostream& log);
int cmd_probe(const Config& config, std::ostream& log);
int cmd_project(const Config& config, std::ostream& log);

}  // namespace hdgch::cli
