#pragma once

#include <nlohmann/json.hpp>

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace stratwave {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfig = 2,
  kExitAssumption = 3,
  kExitSolver = 4,
  kExitIo = 5,
};

inline const std::vector<std::string>& cli_commands() {
  static const std::vector<std::string> c{"laminar",          "thresholds", "symbols", "bifurcate-sigma",
                                          "bifurcate-lambda", "branch",     "validate"};
  return c;
}

// One pipeline run. Keys of the JSON form mirror the command-line flags
// ("m-max", "s-max", ...; underscores are accepted as well).
struct RunConfig {
  std::string command;
  nlohmann::json profile;   // inline profile object
  std::string profile_path; // used when `profile` is null
  std::optional<double> lambda;
  std::optional<double> sigma;
  std::optional<double> lambda_floor;
  int m = 1;
  int k = 1;
  int m_max = 10;
  int k_max = 5;
  int n_nodes = 64;
  int nx = 64;
  int ny = 48;
  int sample_density = 256;
  double tol = 1e-12;
  double lambda_tol = 1e-10;
  double branch_tol = 1e-9;
  double inner_tol = 1e-12;
  double s_max = 0.05;
  int steps = 25;
  std::string mode = "sigma";
  std::vector<double> eta;
  std::string branch_path;
  bool lambda_star = false;
  std::string output = ".";
  bool force = false;

  // Relative paths in a config file resolve against `base_dir`.
  static RunConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
  nlohmann::json to_json() const;
  // Throws InvalidInput on a missing or out-of-range parameter.
  void validate() const;
};

// Executes one command, writing artifacts under cfg.output. Progress goes
// to `log`. Returns an ExitCode.
int run_command(const RunConfig& cfg, std::ostream& log);

// Full front end: argv parsing, --config merging, dispatch.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace stratwave
