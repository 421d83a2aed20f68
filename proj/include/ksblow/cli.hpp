#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "ksblow/errors.hpp"
#include "ksblow/philambda.hpp"
#include "ksblow/rate.hpp"
#include "ksblow/sim.hpp"

namespace ksb {

struct ConfigViolation {
  std::string key;
  std::string value;
  std::string constraint;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<ConfigViolation> v);
  const char* kind() const noexcept override { return "config"; }
  std::vector<ConfigViolation> violations;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
  const char* kind() const noexcept override { return "nonfinite"; }
};

struct MassPhiOptions {
  TimeWindow window{1e-6, 1e-2, 0.1};
  std::vector<double> checkpoints{1e-7, 5e-8, 2e-8, 1e-8};  // values of T - t
  bool stepper = true;
  std::size_t nodes = 2400;
};

struct SpecialfnOptions {
  std::vector<double> a_values{10.0, 30.0, 100.0, 300.0};
  std::vector<double> ei_x{1e-3, 1e-2};
  double cubic_z1 = 1.0;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"sim", "rate", "mass-phi", "specialfn-check", "selftest"};
  return c;
}

struct ExperimentConfig {
  std::string command;
  std::uint64_t seed = 12345;
  SimConfig sim;
  RateSolveOptions rate;
  MassPhiOptions mass_phi;
  SpecialfnOptions specialfn;

  // one line, every key of the active command with its resolved value
  std::string resolved() const;
};

// key = value lines, [section] headers, # comments. Keys before any header
// belong to [general]. Throws ConfigError listing every violation.
ExperimentConfig parse_config(const std::string& text, const std::string& command);

enum ExitCode { kExitOk = 0, kExitError = 1, kExitPhysics = 2 };

// Writes the command's artifacts into `out`; module errors go to out/error.json.
int run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out, bool verbose, std::ostream& log);

// Same with the error JSON for a config that failed to parse.
int report_error(const std::string& command, const Error& e, const std::filesystem::path& out, std::ostream& log);

// "# comment", header, rows in shortest round-trip form; throws NonFiniteError on NaN or Inf.
std::string csv_text(const std::string& comment, const std::vector<std::string>& cols,
                     const std::vector<std::vector<double>>& rows);

struct CheckRow {
  std::string name;
  double argument = 0.0;
  double value = 0.0;
  double reference = 0.0;
  double bound = 0.0;  // pass when |value - reference| <= bound
  bool pass() const;
};

std::vector<CheckRow> specialfn_checks(const SpecialfnOptions& opt);
std::vector<CheckRow> selftest_checks(std::uint64_t seed);

}  // namespace ksb
