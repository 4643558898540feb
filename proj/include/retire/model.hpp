#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "retire/dataset.hpp"
#include "retire/loss.hpp"
#include "retire/penalty.hpp"
#include "retire/solver.hpp"

namespace retire {

// MAD-based robustification level: asymmetric residuals r~_i = (1-tau) r_i
// for r_i <= 0 and tau r_i otherwise, then max(floor, mad(r~) * sqrt(n/log(np))).
double gamma_heuristic(const Eigen::VectorXd& residuals, double tau, int n, int p, double floor);

struct singular_hessian_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ConfidenceInterval {
  int index = 0;  // 0 = intercept, 1..d = slopes
  double estimate = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double stderr_value = 0.0;
  double level = 0.95;
};

struct LowdimFit {
  FitResult fit;
  std::vector<ConfidenceInterval> intervals;  // length d+1, intercept first
};

// Unpenalized fit plus normal-approximation confidence intervals from the
// sandwich variance J^-1 [n^-1 sum zeta^2(e_i) x x'] J^-1 with
// J = n^-1 sum |tau - 1(e_i<0)| x x' over intercept-augmented regressors.
LowdimFit fit_retire_lowdim(const Dataset& data, const LossSpec& loss, const SolveOptions& opts,
                            double level = 0.95);

struct IrwSpec {
  PenaltySpec penalty;
  int steps = 3;
  SolveOptions opts;

  void validate() const {
    penalty.validate();
    opts.validate();
    if (steps < 1) throw std::invalid_argument("IrwSpec: steps must be >= 1");
  }
};

// Iteratively reweighted l1 sequence: step 1 uses uniform weights lambda
// (p'_lambda(0) = lambda), step t re-weights by p'_lambda(|beta^(t-1)|) and
// warm-starts from the previous iterate. Returns all T iterates. `warm`
// optionally seeds step 1 (path fits); weights are unaffected by it.
std::vector<FitResult> fit_retire_penalized(const Dataset& data, const LossSpec& loss,
                                            const IrwSpec& irw, const FitResult* warm = nullptr);

enum class CvRule { OneSE, Min };

struct CvResult {
  Eigen::VectorXd lambda_grid;  // descending
  Eigen::VectorXd mean_loss;
  Eigen::VectorXd se_loss;
  double chosen_lambda = 0.0;
  CvRule rule = CvRule::OneSE;
};

// Log-spaced grid from lambda_max down to ratio*lambda_max.
Eigen::VectorXd make_lambda_grid(double lambda_max, int nlambda, double ratio = 0.01);

// Rule application, exposed for tests: OneSE picks the largest lambda whose
// mean loss is within one standard error of the minimum; Min the minimizer.
double choose_lambda(const Eigen::VectorXd& grid, const Eigen::VectorXd& mean_loss,
                     const Eigen::VectorXd& se_loss, CvRule rule);

// K-fold cross-validation over a lambda path for the penalized estimator
// described by `tmpl` (its lambda is replaced by each grid value). Validation
// loss is the asymmetric squared loss at loss.tau on held-out rows.
CvResult cross_validate(const Dataset& data, const LossSpec& loss, const IrwSpec& tmpl,
                        int nlambda, int folds, std::uint64_t seed, CvRule rule);

}  // namespace retire
