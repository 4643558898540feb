#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

namespace retire {

struct RunConfig {
  std::string subcommand;  // fit | cv | ci | simulate | bench
  double tau = 0.5;
  std::string gamma = "auto";  // "auto", "inf", or a positive real
  std::string penalty = "l1";  // l1 | scad | mcp
  double scad_a = 3.7;
  double mcp_b = 3.0;
  double lambda = -1.0;  // < 0 means unset
  int nlambda = 50;
  int folds = 10;
  int irw_steps = -1;  // < 0: 1 for l1, 3 otherwise
  std::uint64_t seed = 1;
  double tol = 1e-5;
  int max_iter = 5000;
  std::string model = "hom";          // hom | qhet | ehet
  std::string noise = "gaussian:2";   // gaussian:VAR | t:DF
  int n = 0;
  int d = 0;
  int reps = 0;
  std::string rule = "1se";  // 1se | min
  bool serial = false;
  std::string input;
  std::string response = "y";
  std::string out;  // JSON (fit/cv/ci/bench) or CSV (simulate) destination
};

// Executes a subcommand; emits one JSON document to `out_stream` (or to
// cfg.out when set) and a single-line diagnostic to `err_stream` on error.
// Exit codes: 0 success, 2 input error, 3 non-convergence.
int run(const RunConfig& cfg, std::ostream& out_stream, std::ostream& err_stream);

}  // namespace retire
