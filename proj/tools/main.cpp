#include <cstdlib>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "hbt_cli/commands.hpp"

namespace {

int default_threads() {
  if (const char* env = std::getenv("HBT_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end == env || *end != '\0' || v < 1 || v > 4096)
      throw hbt::cli::config_error("HBT_THREADS must be a positive integer");
    return static_cast<int>(v);
  }
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Correlation functions of a trapped ideal Bose gas before and after expansion"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(HBT_CLI_VERSION));

  std::string config_path, out_path;
  int threads = 0;
  bool oracle = false;
  std::optional<double> truncation_tol;
  std::vector<std::string> overrides;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "flat key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_path, "output file (a manifest is written next to it)");
    sub->add_option("--threads", threads, "worker threads (default: HBT_THREADS or 1)")->check(CLI::PositiveNumber);
    sub->add_flag("--oracle", oracle, "cross-check sampled points against brute-force oracles");
    sub->add_option("--truncation-tol", truncation_tol, "relative tolerance of the Bose series");
    sub->add_option("--set", overrides, "override a config value, key=value (repeatable)");
  };
  const char* help[] = {"transition temperature T*",
                        "local g2(r, 0) across T*",
                        "cloud-averaged g2 across T*",
                        "g2(r, r) across T*",
                        "flux correlation in time after ballistic expansion",
                        "finite detector resolution report (JSON)",
                        "closed forms against brute-force mode sums"};
  const auto& names = hbt::cli::command_names();
  for (std::size_t k = 0; k < names.size(); ++k) add_common(app.add_subcommand(names[k], help[k]));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    const std::string name = app.get_subcommands().front()->get_name();
    hbt::cli::run_config cfg = config_path.empty() ? hbt::cli::run_config{} : hbt::cli::run_config::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw hbt::cli::config_error("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    hbt::cli::run_options opt;
    opt.out = out_path;
    opt.threads = threads > 0 ? threads : default_threads();
    opt.oracle = oracle;
    opt.truncation_tol = truncation_tol;
    return hbt::cli::run_command(name, std::move(cfg), opt, std::cout, std::cerr);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return hbt::cli::exit_code_for(e);
  }
}
