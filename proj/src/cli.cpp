#include "retire/cli.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <future>
#include <iostream>
#include <limits>
#include <thread>
#include <vector>

#include <json.hpp>

#include "retire/csv.hpp"
#include "retire/model.hpp"
#include "retire/rng.hpp"
#include "retire/sim.hpp"

namespace retire {

namespace {

using ordered_json = nlohmann::ordered_json;

struct GammaChoice {
  bool adaptive = false;
  double value = std::numeric_limits<double>::infinity();
};

GammaChoice parse_gamma(const std::string& s) {
  if (s == "auto") return {true, std::numeric_limits<double>::infinity()};
  if (s == "inf") return {false, std::numeric_limits<double>::infinity()};
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size() || !(v > 0.0)) throw std::invalid_argument("--gamma must be 'auto', 'inf', or a positive real");
  return {false, v};
}

PenaltySpec parse_penalty(const RunConfig& cfg, double lambda) {
  if (cfg.penalty == "l1") return PenaltySpec::l1(lambda);
  if (cfg.penalty == "scad") return PenaltySpec::scad(lambda, cfg.scad_a);
  if (cfg.penalty == "mcp") return PenaltySpec::mcp(lambda, cfg.mcp_b);
  throw std::invalid_argument("--penalty must be one of l1|scad|mcp");
}

NoiseDistribution parse_noise(const std::string& s) {
  const auto colon = s.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("--noise must look like gaussian:VAR or t:DF");
  const std::string kind = s.substr(0, colon);
  const double v = std::stod(s.substr(colon + 1));
  if (kind == "gaussian") return NoiseDistribution::gaussian(v);
  if (kind == "t") return NoiseDistribution::student_t(v);
  throw std::invalid_argument("--noise kind must be gaussian or t");
}

SimModel parse_model(const std::string& s) {
  if (s == "hom") return SimModel::Homoscedastic;
  if (s == "qhet") return SimModel::QuantileHeteroscedastic;
  if (s == "ehet") return SimModel::ExpectileHeteroscedastic;
  throw std::invalid_argument("--model must be one of hom|qhet|ehet");
}

CvRule parse_rule(const std::string& s) {
  if (s == "1se") return CvRule::OneSE;
  if (s == "min") return CvRule::Min;
  throw std::invalid_argument("--rule must be 1se or min");
}

int default_steps(const RunConfig& cfg) {
  if (cfg.irw_steps > 0) return cfg.irw_steps;
  return cfg.penalty == "l1" ? 1 : 3;
}

SolveOptions solve_options(const RunConfig& cfg, const GammaChoice& gc) {
  SolveOptions opts;
  opts.tol = cfg.tol;
  opts.max_iter = cfg.max_iter;
  opts.gamma_adaptive = gc.adaptive;
  opts.gamma_floor = 1e-3;
  return opts;
}

std::string gamma_string(double g) {
  return std::isinf(g) ? std::string("inf") : format_double(g);
}

ordered_json fit_fields(const FitResult& fit, double lambda) {
  ordered_json j;
  j["intercept"] = fit.intercept;
  j["coefficients"] = std::vector<double>(fit.slopes.data(), fit.slopes.data() + fit.slopes.size());
  j["gamma_used"] = gamma_string(fit.gamma_used);
  j["lambda"] = lambda;
  j["iterations"] = fit.iterations;
  j["kkt_residual"] = fit.kkt_residual;
  j["converged"] = fit.converged;
  return j;
}

void emit(const RunConfig& cfg, const ordered_json& doc, std::ostream& out_stream) {
  if (!cfg.out.empty() && cfg.subcommand != "simulate") {
    std::ofstream f(cfg.out);
    if (!f) throw std::runtime_error("cannot write '" + cfg.out + "'");
    f << doc.dump(2) << '\n';
  } else {
    out_stream << doc.dump(2) << '\n';
  }
}

int run_fit(const RunConfig& cfg, std::ostream& out_stream) {
  if (cfg.input.empty()) throw std::invalid_argument("fit requires --input");
  const CsvData csv = parse_csv(cfg.input, cfg.response);
  const GammaChoice gc = parse_gamma(cfg.gamma);
  const LossSpec loss{cfg.tau, gc.value};
  const SolveOptions opts = solve_options(cfg, gc);

  FitResult fit;
  double lambda = 0.0;
  if (cfg.lambda > 0.0) {
    lambda = cfg.lambda;
    IrwSpec irw{parse_penalty(cfg, lambda), default_steps(cfg), opts};
    fit = fit_retire_penalized(csv.data, loss, irw).back();
  } else {
    fit = fit_smooth(csv.data, loss, opts);
  }
  emit(cfg, fit_fields(fit, lambda), out_stream);
  return 0;
}

int run_cv(const RunConfig& cfg, std::ostream& out_stream) {
  if (cfg.input.empty()) throw std::invalid_argument("cv requires --input");
  if (cfg.lambda > 0.0) throw std::invalid_argument("cv selects lambda itself; use --nlambda, not --lambda");
  const CsvData csv = parse_csv(cfg.input, cfg.response);
  const GammaChoice gc = parse_gamma(cfg.gamma);
  const LossSpec loss{cfg.tau, gc.value};
  const SolveOptions opts = solve_options(cfg, gc);

  IrwSpec tmpl{parse_penalty(cfg, 1.0), default_steps(cfg), opts};
  const CvResult cv = cross_validate(csv.data, loss, tmpl, cfg.nlambda, cfg.folds, cfg.seed,
                                     parse_rule(cfg.rule));
  IrwSpec chosen{parse_penalty(cfg, cv.chosen_lambda), default_steps(cfg), opts};
  const FitResult fit = fit_retire_penalized(csv.data, loss, chosen).back();

  ordered_json j = fit_fields(fit, cv.chosen_lambda);
  j["lambda_grid"] = std::vector<double>(cv.lambda_grid.data(), cv.lambda_grid.data() + cv.lambda_grid.size());
  j["mean_loss"] = std::vector<double>(cv.mean_loss.data(), cv.mean_loss.data() + cv.mean_loss.size());
  j["se_loss"] = std::vector<double>(cv.se_loss.data(), cv.se_loss.data() + cv.se_loss.size());
  j["chosen_lambda"] = cv.chosen_lambda;
  emit(cfg, j, out_stream);
  return 0;
}

int run_ci(const RunConfig& cfg, std::ostream& out_stream) {
  if (cfg.input.empty()) throw std::invalid_argument("ci requires --input");
  const CsvData csv = parse_csv(cfg.input, cfg.response);
  const GammaChoice gc = parse_gamma(cfg.gamma);
  const LossSpec loss{cfg.tau, gc.value};
  const SolveOptions opts = solve_options(cfg, gc);

  const LowdimFit lf = fit_retire_lowdim(csv.data, loss, opts);
  ordered_json j = fit_fields(lf.fit, 0.0);
  ordered_json cis = ordered_json::array();
  for (const ConfidenceInterval& ci : lf.intervals) {
    ordered_json e;
    e["index"] = ci.index;
    e["estimate"] = ci.estimate;
    e["stderr"] = ci.stderr_value;
    e["lower"] = ci.lower;
    e["upper"] = ci.upper;
    cis.push_back(e);
  }
  j["confidence_intervals"] = cis;
  emit(cfg, j, out_stream);
  return 0;
}

SimSpec sim_spec_from(const RunConfig& cfg, std::uint64_t seed) {
  SimSpec spec;
  spec.model = parse_model(cfg.model);
  spec.n = cfg.n;
  spec.d = cfg.d;
  spec.noise = parse_noise(cfg.noise);
  spec.tau = cfg.tau;
  spec.seed = seed;
  return spec;
}

int run_simulate(const RunConfig& cfg, std::ostream& out_stream) {
  if (cfg.n < 1 || cfg.d < 1) throw std::invalid_argument("simulate requires --n and --d");
  const SimSpec spec = sim_spec_from(cfg, cfg.seed);
  const SimData sim = generate(spec);

  const std::string csv_path = cfg.out.empty() ? "simulated.csv" : cfg.out;
  const std::string truth_path = csv_path + ".truth.json";
  write_csv(csv_path, sim.data);

  ordered_json truth;
  truth["beta_star"] = std::vector<double>(sim.truth.beta_star.data(),
                                           sim.truth.beta_star.data() + sim.truth.beta_star.size());
  truth["model"] = cfg.model;
  truth["noise"] = cfg.noise;
  truth["tau"] = cfg.tau;
  truth["seed"] = cfg.seed;
  truth["n"] = cfg.n;
  truth["d"] = cfg.d;
  {
    std::ofstream f(truth_path);
    if (!f) throw std::runtime_error("cannot write '" + truth_path + "'");
    f << truth.dump(2) << '\n';
  }

  ordered_json j;
  j["csv"] = csv_path;
  j["truth"] = truth_path;
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  out_stream << j.dump(2) << '\n';
  return 0;
}

constexpr int kBenchMethods = 4;  // retire-l1, retire-irw, huber, sales

struct RepOutcome {
  Metrics metrics[kBenchMethods];
  double seconds[kBenchMethods] = {0, 0, 0, 0};
};

// One replication of the Table-1-style comparison: every method tunes its
// lambda by K-fold cross-validation on its own estimator, then refits on the
// full data at the chosen value.
RepOutcome bench_one_rep(const RunConfig& cfg, int rep) {
  const std::uint64_t rep_seed = CounterStream(cfg.seed, static_cast<std::uint64_t>(rep),
                                               StreamPurpose::Generic)
                                     .bits(0);
  const SimData sim = generate(sim_spec_from(cfg, rep_seed));
  const double inf = std::numeric_limits<double>::infinity();
  const CvRule rule = parse_rule(cfg.rule);

  SolveOptions adaptive;
  adaptive.tol = cfg.tol;
  adaptive.max_iter = cfg.max_iter;
  adaptive.gamma_adaptive = true;
  SolveOptions fixed = adaptive;
  fixed.gamma_adaptive = false;

  const int irw_steps = cfg.irw_steps > 0 ? cfg.irw_steps : 3;
  struct MethodSpec {
    LossSpec loss;
    PenaltySpec penalty;
    int steps;
    SolveOptions opts;
  };
  const MethodSpec methods[kBenchMethods] = {
      {LossSpec{cfg.tau, inf}, PenaltySpec::l1(1.0), 1, adaptive},
      {LossSpec{cfg.tau, inf}, PenaltySpec::scad(1.0, cfg.scad_a), irw_steps, adaptive},
      {LossSpec{0.5, inf}, PenaltySpec::l1(1.0), 1, adaptive},
      {LossSpec{cfg.tau, inf}, PenaltySpec::l1(1.0), 1, fixed},
  };

  RepOutcome out;
  for (int m = 0; m < kBenchMethods; ++m) {
    const auto t0 = std::chrono::steady_clock::now();
    IrwSpec tmpl{methods[m].penalty, methods[m].steps, methods[m].opts};
    const CvResult cv =
        cross_validate(sim.data, methods[m].loss, tmpl, cfg.nlambda, cfg.folds, rep_seed, rule);
    tmpl.penalty.lambda = cv.chosen_lambda;
    const FitResult fit = fit_retire_penalized(sim.data, methods[m].loss, tmpl).back();
    const auto t1 = std::chrono::steady_clock::now();
    out.metrics[m] = evaluate(fit, sim.truth);
    out.seconds[m] = std::chrono::duration<double>(t1 - t0).count();
  }
  return out;
}

int run_bench(const RunConfig& cfg, std::ostream& out_stream) {
  if (cfg.n < 1 || cfg.d < 1 || cfg.reps < 1) throw std::invalid_argument("bench requires --n, --d, --reps");
  const char* method_names[kBenchMethods] = {"retire-l1", "retire-irw", "huber", "sales"};

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(cfg.reps));
  if (cfg.serial || cfg.reps == 1) {
    for (int r = 0; r < cfg.reps; ++r) outcomes[static_cast<std::size_t>(r)] = bench_one_rep(cfg, r);
  } else {
    const unsigned workers = std::max(1u, std::thread::hardware_concurrency());
    std::vector<std::future<RepOutcome>> futs(static_cast<std::size_t>(cfg.reps));
    int next = 0;
    while (next < cfg.reps) {
      const int batch = std::min<int>(static_cast<int>(workers), cfg.reps - next);
      for (int b = 0; b < batch; ++b) {
        const int rep = next + b;
        futs[static_cast<std::size_t>(rep)] =
            std::async(std::launch::async, [&cfg, rep] { return bench_one_rep(cfg, rep); });
      }
      for (int b = 0; b < batch; ++b) {
        outcomes[static_cast<std::size_t>(next + b)] = futs[static_cast<std::size_t>(next + b)].get();
      }
      next += batch;
    }
  }

  ordered_json j;
  j["model"] = cfg.model;
  j["noise"] = cfg.noise;
  j["tau"] = cfg.tau;
  j["n"] = cfg.n;
  j["d"] = cfg.d;
  j["reps"] = cfg.reps;
  j["rule"] = cfg.rule;
  ordered_json rows = ordered_json::array();
  for (std::size_t m = 0; m < kBenchMethods; ++m) {
    auto mean_sd = [&](auto getter) {
      double mean = 0.0;
      for (const RepOutcome& o : outcomes) mean += getter(o);
      mean /= cfg.reps;
      double ss = 0.0;
      for (const RepOutcome& o : outcomes) ss += (getter(o) - mean) * (getter(o) - mean);
      const double sd = cfg.reps > 1 ? std::sqrt(ss / (cfg.reps - 1)) : 0.0;
      return std::pair<double, double>(mean, sd);
    };
    const auto l2 = mean_sd([m](const RepOutcome& o) { return o.metrics[m].l2_error; });
    const auto tpr = mean_sd([m](const RepOutcome& o) { return o.metrics[m].tpr; });
    const auto fpr = mean_sd([m](const RepOutcome& o) { return o.metrics[m].fpr; });
    const auto secs = mean_sd([m](const RepOutcome& o) { return o.seconds[m]; });
    ordered_json row;
    row["method"] = method_names[m];
    row["l2_error_mean"] = l2.first;
    row["l2_error_sd"] = l2.second;
    row["tpr_mean"] = tpr.first;
    row["tpr_sd"] = tpr.second;
    row["fpr_mean"] = fpr.first;
    row["fpr_sd"] = fpr.second;
    row["seconds_mean"] = secs.first;
    row["seconds_sd"] = secs.second;
    rows.push_back(row);
  }
  j["methods"] = rows;
  emit(cfg, j, out_stream);
  return 0;
}

}  // namespace

int run(const RunConfig& cfg, std::ostream& out_stream, std::ostream& err_stream) {
  try {
    if (cfg.subcommand == "fit") return run_fit(cfg, out_stream);
    if (cfg.subcommand == "cv") return run_cv(cfg, out_stream);
    if (cfg.subcommand == "ci") return run_ci(cfg, out_stream);
    if (cfg.subcommand == "simulate") return run_simulate(cfg, out_stream);
    if (cfg.subcommand == "bench") return run_bench(cfg, out_stream);
    err_stream << "error: unknown subcommand '" << cfg.subcommand << "'\n";
    return 2;
  } catch (const non_convergence_error& e) {
    err_stream << "error: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err_stream << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace retire
