#pragma once

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace sddekit::cli {

/// Effective configuration of one CLI invocation. Mirrors the flags one to
/// one; config files are flat JSON documents with the flag names as keys.
struct RunConfig {
  std::string command;
  std::string problem = "example1";
  double a = -2.0;
  double b = 1.0;
  double c = 0.5;
  double d = 0.5;
  double lag = 1.0;
  double psi = 0.5;
  double q = 0.5;
  std::string scheme = "ssbe";
  std::string h;
  std::string ref_h = "2^-12";
  std::size_t samples = 1000;
  std::optional<double> horizon;
  std::optional<double> t_end;
  std::uint64_t seed = 0;
  std::string interp = "linear";
  std::string solver = "auto";
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  int max_iter = 50;
  double blowup_threshold = 1e10;
  unsigned workers = 0;
  std::string out;
  bool json = false;
};

nlohmann::json to_json(const RunConfig& cfg);
/// Applies the keys of a flat config document; throws ConfigError naming the field.
void apply_json(RunConfig& cfg, const nlohmann::json& doc);
/// Reads a config file (flat document or a sidecar with a "config" object).
void load_config_file(RunConfig& cfg, const std::string& path);

/// Parses "0.25", "2^-3", "2^-3..2^-7" and comma-separated lists of these.
std::vector<double> parse_stepsizes(const std::string& text);

enum ExitCode : int { kOk = 0, kNumericalFailure = 1, kUsage = 2 };

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace sddekit::cli
