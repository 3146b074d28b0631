#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>

#include "hdgch/cli.hpp"

namespace {

struct Options {
  std::string config;
  std::string preset;
  std::string out;
  int threads = 0;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_common(CLI::App* cmd, Options& opt) {
  cmd->add_option("--config", opt.config, "key = value file");
  cmd->add_option("--preset", opt.preset, "named preset");
  cmd->add_option("--out", opt.out, "output directory");
  cmd->add_option("--threads", opt.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->allow_extras();
  cmd->footer("Any other config key is accepted as --key value or key=value and applied last.");
}

// Leftover tokens: `--key value`, `--key=value` or `key=value`.
std::vector<std::pair<std::string, std::string>> split_overrides(const std::vector<std::string>& args) {
  std::vector<std::pair<std::string, std::string>> out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    std::string tok = args[i];
    const bool flag = tok.rfind("--", 0) == 0;
    if (flag) tok = tok.substr(2);
    const auto eq = tok.find('=');
    if (eq != std::string::npos && eq > 0) {
      out.emplace_back(tok.substr(0, eq), tok.substr(eq + 1));
    } else if (flag && !tok.empty() && i + 1 < args.size()) {
      out.emplace_back(tok, args[++i]);
    } else {
      throw hdgch::InputError("cannot parse argument '" + args[i] + "'");
    }
  }
  return out;
}

hdgch::cli::Config assemble(const std::string& command, const Options& opt) {
  using hdgch::cli::Config;
  Config cfg;
  if (!opt.preset.empty()) cfg.merge(hdgch::cli::preset(command, opt.preset));
  if (!opt.config.empty()) cfg.merge(Config::load(opt.config));
  for (const auto& [key, value] : opt.overrides) cfg.set(key, value);
  if (!opt.out.empty()) cfg.set("out", opt.out);
  if (opt.threads > 0) cfg.set("threads", std::to_string(opt.threads));
  cfg.require_known(hdgch::cli::known_keys(command));
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDG Cahn-Hilliard solver"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* run = app.add_subcommand("run", "single time integration");
  CLI::App* conv = app.add_subcommand("convergence", "refinement study against a fine reference");
  CLI::App* probe = app.add_subcommand("probe", "discrete inequality probes");
  CLI::App* project = app.add_subcommand("project", "initial projection rates");
  for (CLI::App* cmd : {run, conv, probe, project}) add_common(cmd, opt);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : hdgch::cli::kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  const std::string command = chosen->get_name();
  hdgch::cli::Config cfg;
  try {
    opt.overrides = split_overrides(chosen->remaining());
    cfg = assemble(command, opt);
  } catch (const hdgch::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hdgch::cli::kUsage;
  }

  if (command == "run") return hdgch::cli::cmd_run(cfg, std::cerr);
  if (command == "convergence") return hdgch::cli::cmd_convergence(cfg, std::cerr);
  if (command == "probe") return hdgch::cli::cmd_probe(cfg, std::cerr);
  return hdgch::cli::cmd_project(cfg, std::cerr);
}
