#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "retire/cli.hpp"

namespace {

void add_common(CLI::App* sub, retire::RunConfig& cfg) {
  sub->add_option("--tau", cfg.tau, "expectile level in (0,1)");
  sub->add_option("--gamma", cfg.gamma, "robustification parameter: auto, inf, or a positive real");
  sub->add_option("--penalty", cfg.penalty, "penalty kind: l1|scad|mcp");
  sub->add_option("--scad-a", cfg.scad_a, "SCAD shape parameter");
  sub->add_option("--mcp-b", cfg.mcp_b, "MCP shape parameter");
  sub->add_option("--lambda", cfg.lambda, "penalty level (fit only)");
  sub->add_option("--nlambda", cfg.nlambda, "lambda path length");
  sub->add_option("--folds", cfg.folds, "cross-validation folds");
  sub->add_option("--irw-steps", cfg.irw_steps, "reweighting steps (default: 1 for l1, 3 otherwise)");
  sub->add_option("--seed", cfg.seed, "random seed");
  sub->add_option("--tol", cfg.tol, "solver tolerance");
  sub->add_option("--max-iter", cfg.max_iter, "solver iteration cap");
  sub->add_option("--model", cfg.model, "simulation model: hom|qhet|ehet");
  sub->add_option("--noise", cfg.noise, "noise law: gaussian:VAR or t:DF");
  sub->add_option("--n", cfg.n, "observations to simulate");
  sub->add_option("--d", cfg.d, "predictors to simulate");
  sub->add_option("--reps", cfg.reps, "benchmark replications");
  sub->add_option("--rule", cfg.rule, "cross-validation rule: 1se|min");
  sub->add_flag("--serial", cfg.serial, "run benchmark replications sequentially");
  sub->add_option("--input", cfg.input, "input CSV path");
  sub->add_option("--response", cfg.response, "response column name or 0-based index");
  sub->add_option("--out", cfg.out, "output path (JSON, or CSV for simulate)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"retire: robust expectile regression"};
  app.require_subcommand(1);

  retire::RunConfig cfg;
  for (const char* name : {"fit", "cv", "ci", "simulate", "bench"}) {
    add_common(app.add_subcommand(name), cfg);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  cfg.subcommand = app.get_subcommands().front()->get_name();
  return retire::run(cfg, std::cout, std::cerr);
}
