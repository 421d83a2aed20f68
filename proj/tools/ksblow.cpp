#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ksblow/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Keller-Segel blow-up verification tools"};
  std::string command, config, out = ".";
  bool verbose = false;
  app.add_option("command", command, "sim | rate | mass-phi | specialfn-check | selftest")
      ->required()
      ->check(CLI::IsMember(ksb::commands()));
  app.add_option("--config", config, "key = value file with [section] headers");
  app.add_option("--out", out, "output directory");
  app.add_flag("--verbose", verbose, "progress on stderr");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ksb::kExitOk : ksb::kExitError;
  }

  std::string text;
  if (!config.empty()) {
    std::ifstream f(config);
    if (!f) return ksb::report_error(command, ksb::Error("cannot read config " + config), out, std::cerr);
    std::ostringstream ss;
    ss << f.rdbuf();
    text = ss.str();
  }
  ksb::ExperimentConfig cfg;
  try {
    cfg = ksb::parse_config(text, command);
  } catch (const ksb::Error& e) {
    return ksb::report_error(command, e, out, std::cerr);
  }
  return ksb::run_experiment(cfg, out, verbose, std::cerr);
}
