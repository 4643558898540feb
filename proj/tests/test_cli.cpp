#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "oracles.hpp"
#include "retire/cli.hpp"
#include "retire/csv.hpp"
#include "retire/sim.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "retire_cli_tests";
  fs::create_directories(p);
  return p;
}

void write_file(const fs::path& p, const std::string& body) {
  std::ofstream f(p);
  f << body;
}

struct RunOutput {
  int code;
  std::string out;
  std::string err;
};

RunOutput run_cfg(const retire::RunConfig& cfg) {
  std::ostringstream out, err;
  const int code = retire::run(cfg, out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST_CASE("parse_csv: selection by name and by index") {
  const fs::path p = scratch_dir() / "basic.csv";
  write_file(p, "a,y,b\n1,10,2\n3,20,4\n5,30,6\n");
  const retire::CsvData by_name = retire::parse_csv(p.string(), "y");
  CHECK(by_name.data.n() == 3);
  CHECK(by_name.data.d() == 2);
  CHECK(by_name.data.y[1] == 20.0);
  CHECK(by_name.data.x(1, 0) == 3.0);
  CHECK(by_name.data.x(1, 1) == 4.0);
  CHECK(by_name.predictor_names == std::vector<std::string>{"a", "b"});

  const retire::CsvData by_index = retire::parse_csv(p.string(), "2");
  CHECK(by_index.response_name == "b");
  CHECK(by_index.data.y[0] == 2.0);
}

TEST_CASE("parse_csv: each malformed input names its location") {
  const fs::path dir = scratch_dir();
  write_file(dir / "missing.csv", "a,b\n1,2\n");
  CHECK_THROWS_AS(retire::parse_csv((dir / "missing.csv").string(), "y"),
                  retire::missing_column_error);
  CHECK_THROWS_AS(retire::parse_csv((dir / "missing.csv").string(), "7"),
                  retire::missing_column_error);

  write_file(dir / "nan.csv", "y,a\n1,2\nNaN,4\n");
  try {
    retire::parse_csv((dir / "nan.csv").string(), "y");
    CHECK(false);
  } catch (const retire::non_numeric_cell_error& e) {
    CHECK(e.row == 2);
    CHECK(e.col == 0);
  }

  write_file(dir / "ragged.csv", "y,a\n1,2\n3\n");
  try {
    retire::parse_csv((dir / "ragged.csv").string(), "y");
    CHECK(false);
  } catch (const retire::ragged_row_error& e) {
    CHECK(e.row == 2);
  }
}

TEST_CASE("fit with gamma=inf, tau=0.5, lambda=0 reproduces OLS through the CLI surface") {
  const fs::path dir = scratch_dir();
  retire::RunConfig sim;
  sim.subcommand = "simulate";
  sim.model = "hom";
  sim.noise = "gaussian:2";
  sim.tau = 0.5;
  sim.n = 150;
  sim.d = 20;
  sim.seed = 31;
  sim.out = (dir / "ols.csv").string();
  REQUIRE(run_cfg(sim).code == 0);

  retire::RunConfig fit;
  fit.subcommand = "fit";
  fit.input = (dir / "ols.csv").string();
  fit.response = "y";
  fit.tau = 0.5;
  fit.gamma = "inf";
  fit.tol = 1e-9;
  const RunOutput r = run_cfg(fit);
  REQUIRE(r.code == 0);
  const json doc = json::parse(r.out);
  CHECK(doc["lambda"] == 0.0);
  CHECK(doc["converged"] == true);
  CHECK(doc["gamma_used"] == "inf");

  const retire::CsvData csv = retire::parse_csv((dir / "ols.csv").string(), "y");
  const Eigen::VectorXd ols = oracles::ols(csv.data);
  CHECK(std::fabs(doc["intercept"].get<double>() - ols[0]) <= 1e-6);
  for (int j = 0; j < 20; ++j) {
    CHECK(std::fabs(doc["coefficients"][static_cast<std::size_t>(j)].get<double>() - ols[j + 1]) <= 1e-6);
  }
}

TEST_CASE("simulate then re-ingest loses nothing") {
  const fs::path dir = scratch_dir();
  retire::RunConfig sim;
  sim.subcommand = "simulate";
  sim.model = "qhet";
  sim.noise = "t:2.1";
  sim.tau = 0.8;
  sim.n = 60;
  sim.d = 21;
  sim.seed = 77;
  sim.out = (dir / "round.csv").string();
  const RunOutput r = run_cfg(sim);
  REQUIRE(r.code == 0);
  const json meta = json::parse(r.out);
  CHECK(meta["csv"] == sim.out);

  // regenerate in-process and compare against the re-ingested file
  retire::SimSpec spec{retire::SimModel::QuantileHeteroscedastic, 60, 21,
                       retire::NoiseDistribution::student_t(2.1), 0.8, 77};
  const retire::SimData truth = retire::generate(spec);
  const retire::CsvData got = retire::parse_csv(sim.out, "y");
  for (int i = 0; i < 60; ++i) {
    CHECK(got.data.y[i] == truth.data.y[i]);  // shortest round-trip formatting is exact
    for (int j = 0; j < 21; ++j) CHECK(got.data.x(i, j) == truth.data.x(i, j));
  }

  const json truth_doc = json::parse(std::ifstream(meta["truth"].get<std::string>()));
  CHECK(truth_doc["beta_star"].size() == 22);
  CHECK(truth_doc["beta_star"][0] == 2.0);
}

TEST_CASE("JSON schema is pinned and reruns are byte-identical") {
  const fs::path dir = scratch_dir();
  retire::RunConfig sim;
  sim.subcommand = "simulate";
  sim.model = "hom";
  sim.noise = "gaussian:2";
  sim.tau = 0.5;
  sim.n = 80;
  sim.d = 20;
  sim.seed = 5;
  sim.out = (dir / "schema.csv").string();
  REQUIRE(run_cfg(sim).code == 0);

  retire::RunConfig fit;
  fit.subcommand = "fit";
  fit.input = sim.out;
  fit.tau = 0.6;
  fit.gamma = "auto";
  fit.penalty = "l1";
  fit.lambda = 0.2;
  const RunOutput a = run_cfg(fit);
  const RunOutput b = run_cfg(fit);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);  // byte-identical

  const std::vector<std::string> keys = {"intercept",  "coefficients", "gamma_used", "lambda",
                                         "iterations", "kkt_residual", "converged"};
  std::size_t pos = 0;
  for (const auto& k : keys) {
    const std::size_t at = a.out.find("\"" + k + "\"");
    CHECK(at != std::string::npos);
    CHECK(at > pos);
    pos = at;
  }

  retire::RunConfig cv = fit;
  cv.subcommand = "cv";
  cv.lambda = -1.0;
  cv.nlambda = 6;
  cv.folds = 3;
  const RunOutput c = run_cfg(cv);
  REQUIRE(c.code == 0);
  const json cv_doc = json::parse(c.out);
  for (const char* k : {"lambda_grid", "mean_loss", "se_loss", "chosen_lambda"}) {
    CHECK(cv_doc.contains(k));
  }
  CHECK(cv_doc["lambda_grid"].size() == 6);
  CHECK(run_cfg(cv).out == c.out);

  retire::RunConfig ci = fit;
  ci.subcommand = "ci";
  ci.lambda = -1.0;
  ci.gamma = "auto";
  const RunOutput d = run_cfg(ci);
  REQUIRE(d.code == 0);
  const json ci_doc = json::parse(d.out);
  REQUIRE(ci_doc.contains("confidence_intervals"));
  CHECK(ci_doc["confidence_intervals"].size() == 21);
  for (const char* k : {"index", "estimate", "stderr", "lower", "upper"}) {
    CHECK(ci_doc["confidence_intervals"][0].contains(k));
  }
}

TEST_CASE("exit codes: 2 for input errors, 3 for non-convergence") {
  retire::RunConfig missing;
  missing.subcommand = "fit";
  missing.input = "/nonexistent/nowhere.csv";
  CHECK(run_cfg(missing).code == 2);

  retire::RunConfig noinput;
  noinput.subcommand = "fit";
  CHECK(run_cfg(noinput).code == 2);

  const fs::path dir = scratch_dir();
  retire::RunConfig sim;
  sim.subcommand = "simulate";
  sim.model = "hom";
  sim.noise = "gaussian:2";
  sim.n = 50;
  sim.d = 20;
  sim.seed = 9;
  sim.out = (dir / "codes.csv").string();
  REQUIRE(run_cfg(sim).code == 0);

  retire::RunConfig cv_conflict;
  cv_conflict.subcommand = "cv";
  cv_conflict.input = sim.out;
  cv_conflict.lambda = 0.3;  // cv wants a path, not a fixed lambda
  CHECK(run_cfg(cv_conflict).code == 2);

  retire::RunConfig bad_gamma;
  bad_gamma.subcommand = "fit";
  bad_gamma.input = sim.out;
  bad_gamma.gamma = "-2";
  CHECK(run_cfg(bad_gamma).code == 2);

  retire::RunConfig hopeless;
  hopeless.subcommand = "fit";
  hopeless.input = sim.out;
  hopeless.lambda = 0.05;
  hopeless.tol = 1e-15;
  hopeless.max_iter = 2;
  const RunOutput r = run_cfg(hopeless);
  CHECK(r.code == 3);
  CHECK(r.err.find("error:") == 0);
}

TEST_CASE("bench: deterministic modulo the elapsed-seconds fields") {
  retire::RunConfig bench;
  bench.subcommand = "bench";
  bench.model = "hom";
  bench.noise = "gaussian:2";
  bench.tau = 0.5;
  bench.n = 60;
  bench.d = 24;
  bench.reps = 2;
  bench.nlambda = 6;
  bench.folds = 3;
  bench.seed = 13;
  bench.tol = 1e-4;
  bench.serial = true;
  const RunOutput a = run_cfg(bench);
  const RunOutput b = run_cfg(bench);
  REQUIRE(a.code == 0);
  json da = json::parse(a.out);
  json db = json::parse(b.out);
  REQUIRE(da["methods"].size() == 4);
  const std::vector<std::string> names = {"retire-l1", "retire-irw", "huber", "sales"};
  for (std::size_t m = 0; m < 4; ++m) {
    CHECK(da["methods"][m]["method"] == names[m]);
    CHECK(da["methods"][m]["tpr_mean"].get<double>() <= 1.0);
    da["methods"][m].erase("seconds_mean");
    da["methods"][m].erase("seconds_sd");
    db["methods"][m].erase("seconds_mean");
    db["methods"][m].erase("seconds_sd");
  }
  CHECK(da == db);
}

TEST_CASE("the installed binary round-trips end to end") {
  const char* cli = std::getenv("RETIRE_CLI");
  if (cli == nullptr) return;  // only wired up under ctest
  const fs::path dir = scratch_dir();
  const std::string csv = (dir / "proc.csv").string();
  const std::string out_json = (dir / "proc.json").string();
  std::string cmd = std::string(cli) + " simulate --model hom --noise gaussian:2 --n 60 --d 20 --seed 3 --out " +
                    csv + " > /dev/null 2>&1";
  REQUIRE(std::system(cmd.c_str()) == 0);
  cmd = std::string(cli) + " fit --input " + csv + " --tau 0.5 --gamma auto --lambda 0.4 --out " +
        out_json + " 2> /dev/null";
  REQUIRE(std::system(cmd.c_str()) == 0);
  const json doc = json::parse(std::ifstream(out_json));
  CHECK(doc["converged"] == true);

  cmd = std::string(cli) + " fit --input /does/not/exist.csv > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  CHECK(WEXITSTATUS(rc) == 2);
}
