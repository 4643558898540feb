#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "retire/dataset.hpp"
#include "retire/loss.hpp"

namespace retire {

struct SolveOptions {
  double tol = 1e-5;        // stopping criterion on the l2 distance between sweeps
  int max_iter = 2000;
  bool gamma_adaptive = false;  // re-tune gamma from residuals at the start of each sweep
  double gamma_floor = 1e-3;

  void validate() const {
    if (!(tol > 0.0)) throw std::invalid_argument("SolveOptions: tol must be positive");
    if (max_iter < 1) throw std::invalid_argument("SolveOptions: max_iter must be >= 1");
    if (!(gamma_floor > 0.0)) throw std::invalid_argument("SolveOptions: gamma_floor must be positive");
  }
};

struct FitResult {
  double intercept = 0.0;
  Eigen::VectorXd slopes;       // length d
  Eigen::VectorXd subgradient;  // length d
  double gamma_used = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  double kkt_residual = 0.0;
  Eigen::VectorXd residuals;    // y - intercept - x * slopes
};

struct non_convergence_error : std::runtime_error {
  FitResult best;
  non_convergence_error(FitResult b, const std::string& msg)
      : std::runtime_error(msg), best(std::move(b)) {}
};

struct degenerate_design_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct invalid_weight_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Raised when every residual is exactly zero (an interpolation fit); the
// solvers catch it and terminate converged.
struct all_zero_residuals : std::runtime_error {
  all_zero_residuals() : std::runtime_error("all residuals are exactly zero") {}
};

// Curvature sum for a Newton denominator. Returns sum_i L''(r_i) unless the
// sum vanishes or the fraction of residuals with |r_i| <= gamma drops below
// max(0.05, 1/n); in that case the continuity approximation
// sum_{|r_i| > gamma} 1/|r_i| is substituted (terms capped at 1/gamma_floor).
double stabilized_denominator(const Eigen::VectorXd& residuals, double gamma, double tau,
                              double gamma_floor = 1e-3);

// One semismooth-Newton coordinate-descent iterate of the weighted-l1 KKT
// system: the intercept, the slope vector, its subgradient, and the running
// residuals. Exposed so the per-coordinate updates can be driven directly.
class SncdState {
 public:
  SncdState(const Dataset& data, const LossSpec& loss, Eigen::VectorXd weights,
            double gamma_floor = 1e-3);

  // Replaces the iterate and recomputes residuals from scratch.
  void set_point(double intercept, const Eigen::VectorXd& slopes, const Eigen::VectorXd& subgrad);

  // Newton step on the intercept; returns the applied increment.
  double update_intercept();

  // Two-branch semismooth Newton update of (beta_j, z_j), 0-based j.
  // Returns the new pair. Coordinates with zero weight take an unconditional
  // Newton step (their KKT line carries no subgradient term).
  std::pair<double, double> update_pair(int j);

  // Max residual of the three KKT lines, from freshly recomputed residuals.
  double kkt_residual();

  void refresh_residuals();

  double intercept() const { return b0_; }
  const Eigen::VectorXd& slopes() const { return beta_; }
  const Eigen::VectorXd& subgradient() const { return z_; }
  const Eigen::VectorXd& residuals() const { return r_; }
  double gamma() const { return loss_.gamma; }
  void set_gamma(double g) { loss_.gamma = g; }
  const LossSpec& loss() const { return loss_; }

 private:
  double slope_denominator(double hsum, int inside) const;

  const Dataset& data_;
  LossSpec loss_;
  Eigen::VectorXd w_;
  double gamma_floor_;
  double b0_ = 0.0;
  Eigen::VectorXd beta_, z_, r_;
};

// Weighted-l1 penalized fit by cyclic semismooth Newton coordinate descent.
// weights[j] >= 0 is the l1 level on slope j; warm (optional) supplies the
// starting iterate, otherwise everything starts at zero.
FitResult fit_sncd(const Dataset& data, const LossSpec& loss, const Eigen::VectorXd& weights,
                   const SolveOptions& opts, const FitResult* warm = nullptr);

// Unpenalized fit (intercept always included) by damped Newton with a
// backtracking line search. init, when given, is (intercept, slopes...) of
// length d+1. Stops when the gradient sup-norm falls below opts.tol.
FitResult fit_smooth(const Dataset& data, const LossSpec& loss, const SolveOptions& opts,
                     const Eigen::VectorXd* init = nullptr);

// Intercept-only minimizer of the empirical loss.
double intercept_only_fit(const Eigen::VectorXd& y, const LossSpec& loss, const SolveOptions& opts);

// Smallest uniform weight for which all slopes are KKT-feasible at zero:
// max_j |n^-1 sum_i L'(y_i - b0) x_ij| at the intercept-only fit b0.
double lambda_max(const Dataset& data, const LossSpec& loss, const SolveOptions& opts);

// Empirical objective n^-1 sum_i L(r_i) + sum_j weights_j |beta_j|.
double penalized_objective(const Dataset& data, const LossSpec& loss,
                           const Eigen::VectorXd& weights, double intercept,
                           const Eigen::VectorXd& slopes);

}  // namespace retire
