#include "retire/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "retire/detail/kahan.hpp"
#include "retire/rng.hpp"

namespace retire {

namespace {

using detail::Kahan;

constexpr double kProbit75 = 0.6744897501960817;  // Phi^-1(0.75)

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double hi = *mid;
  if (n % 2 == 1) return hi;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

double gamma_heuristic(const Eigen::VectorXd& residuals, double tau, int n, int p, double floor) {
  if (residuals.size() == 0) throw std::invalid_argument("gamma_heuristic: empty residual vector");
  if (n < 2 || p < 1 || static_cast<long long>(n) * p < 3) {
    throw std::invalid_argument("gamma_heuristic: requires n >= 2, p >= 1, n*p >= 3");
  }
  std::vector<double> tilde(static_cast<std::size_t>(residuals.size()));
  for (Eigen::Index i = 0; i < residuals.size(); ++i) {
    const double r = residuals[i];
    tilde[static_cast<std::size_t>(i)] = r <= 0.0 ? (1.0 - tau) * r : tau * r;
  }
  const double med = median_of(tilde);
  for (double& v : tilde) v = std::fabs(v - med);
  const double mad = median_of(std::move(tilde)) / kProbit75;
  const double scale = std::sqrt(static_cast<double>(n) / std::log(static_cast<double>(n) * p));
  return std::max(floor, mad * scale);
}

LowdimFit fit_retire_lowdim(const Dataset& data, const LossSpec& loss, const SolveOptions& opts,
                            double level) {
  data.validate();
  if (!(level > 0.0 && level < 1.0)) throw std::invalid_argument("fit_retire_lowdim: level in (0,1)");
  const int n = data.n();
  const int d = data.d();
  if (n <= d + 1) throw std::invalid_argument("fit_retire_lowdim: requires n > d+1");
  const int p = d + 1;

  FitResult fit = fit_smooth(data, loss, opts);
  LossSpec used = loss;
  used.gamma = fit.gamma_used;

  Eigen::MatrixXd jmat = Eigen::MatrixXd::Zero(p, p);
  Eigen::MatrixXd vmat = Eigen::MatrixXd::Zero(p, p);
  Eigen::VectorXd xa(p);
  for (int i = 0; i < n; ++i) {
    xa[0] = 1.0;
    xa.tail(d) = data.x.row(i);
    const double e = fit.residuals[i];
    const double w = weight(used, e);
    const double zt = loss_grad(used, e);
    jmat.selfadjointView<Eigen::Lower>().rankUpdate(xa, w);
    vmat.selfadjointView<Eigen::Lower>().rankUpdate(xa, zt * zt);
  }
  jmat = jmat.selfadjointView<Eigen::Lower>();
  vmat = vmat.selfadjointView<Eigen::Lower>();
  jmat /= static_cast<double>(n);
  vmat /= static_cast<double>(n);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(jmat);
  const Eigen::VectorXd evals = es.eigenvalues();
  if (evals.minCoeff() <= 0.0 || evals.maxCoeff() / evals.minCoeff() > 1e12) {
    throw singular_hessian_error("fit_retire_lowdim: J is numerically rank-deficient");
  }
  const Eigen::MatrixXd jinv =
      es.eigenvectors() * evals.cwiseInverse().asDiagonal() * es.eigenvectors().transpose();
  const Eigen::MatrixXd sandwich = jinv * vmat * jinv;

  const double z = level == 0.95
                       ? 1.96
                       : boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 * (1.0 + level));
  const double root_n = std::sqrt(static_cast<double>(n));

  LowdimFit out;
  out.fit = std::move(fit);
  out.intervals.reserve(static_cast<std::size_t>(p));
  for (int j = 0; j < p; ++j) {
    ConfidenceInterval ci;
    ci.index = j;
    ci.estimate = j == 0 ? out.fit.intercept : out.fit.slopes[j - 1];
    ci.stderr_value = std::sqrt(std::max(sandwich(j, j), 0.0));
    const double half = z * ci.stderr_value / root_n;
    ci.lower = ci.estimate - half;
    ci.upper = ci.estimate + half;
    ci.level = level;
    out.intervals.push_back(ci);
  }
  return out;
}

std::vector<FitResult> fit_retire_penalized(const Dataset& data, const LossSpec& loss,
                                            const IrwSpec& irw, const FitResult* warm) {
  data.validate();
  loss.validate();
  irw.validate();
  if (data.d() < 1) throw std::invalid_argument("fit_retire_penalized: requires d >= 1");

  std::vector<FitResult> seq;
  seq.reserve(static_cast<std::size_t>(irw.steps));
  Eigen::VectorXd w = Eigen::VectorXd::Constant(data.d(), irw.penalty.lambda);
  const FitResult* init = warm;
  for (int t = 1; t <= irw.steps; ++t) {
    if (t > 1) w = weight_vector(irw.penalty, seq.back().slopes);
    try {
      seq.push_back(fit_sncd(data, loss, w, irw.opts, init));
    } catch (const non_convergence_error& e) {
      throw non_convergence_error(e.best, "fit_retire_penalized: step " + std::to_string(t) +
                                              ": " + e.what());
    }
    init = &seq.back();
  }
  return seq;
}

Eigen::VectorXd make_lambda_grid(double lambda_max, int nlambda, double ratio) {
  if (nlambda < 2) throw std::invalid_argument("make_lambda_grid: nlambda must be >= 2");
  if (!(lambda_max > 0.0)) {
    throw std::invalid_argument("make_lambda_grid: lambda_max is zero (response is fit by the intercept alone)");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) throw std::invalid_argument("make_lambda_grid: ratio in (0,1)");
  Eigen::VectorXd grid(nlambda);
  for (int i = 0; i < nlambda; ++i) {
    grid[i] = lambda_max * std::pow(ratio, static_cast<double>(i) / (nlambda - 1));
  }
  for (int i = 1; i < nlambda; ++i) {
    if (!(grid[i] < grid[i - 1])) throw std::invalid_argument("make_lambda_grid: duplicate lambda grid values");
  }
  return grid;
}

double choose_lambda(const Eigen::VectorXd& grid, const Eigen::VectorXd& mean_loss,
                     const Eigen::VectorXd& se_loss, CvRule rule) {
  if (grid.size() == 0 || grid.size() != mean_loss.size() || grid.size() != se_loss.size()) {
    throw std::invalid_argument("choose_lambda: mismatched grid and loss vectors");
  }
  Eigen::Index imin = 0;
  mean_loss.minCoeff(&imin);
  if (rule == CvRule::Min) return grid[imin];
  const double cutoff = mean_loss[imin] + se_loss[imin];
  for (Eigen::Index i = 0; i < grid.size(); ++i) {  // grid descending: first hit is largest lambda
    if (mean_loss[i] <= cutoff) return grid[i];
  }
  return grid[imin];
}

CvResult cross_validate(const Dataset& data, const LossSpec& loss, const IrwSpec& tmpl,
                        int nlambda, int folds, std::uint64_t seed, CvRule rule) {
  data.validate();
  loss.validate();
  tmpl.validate();
  const int n = data.n();
  const int d = data.d();
  if (folds < 2) throw std::invalid_argument("cross_validate: folds must be >= 2");
  if (folds > n) throw std::invalid_argument("cross_validate: folds exceeds sample size");
  if (nlambda < 2) throw std::invalid_argument("cross_validate: nlambda must be >= 2");

  const double lmax = lambda_max(data, loss, tmpl.opts);
  const Eigen::VectorXd grid = make_lambda_grid(lmax, nlambda);

  // Seeded partition: Fisher-Yates shuffle, fold = position mod folds.
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), 0);
  StreamCursor cur{CounterStream(seed, 0, StreamPurpose::FoldShuffle)};
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(cur.next_bits() % static_cast<std::uint64_t>(i + 1));
    std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
  }
  std::vector<int> fold_of(static_cast<std::size_t>(n));
  for (int pos = 0; pos < n; ++pos) fold_of[static_cast<std::size_t>(perm[static_cast<std::size_t>(pos)])] = pos % folds;

  const LossSpec val_loss{loss.tau, std::numeric_limits<double>::infinity(), loss.kind};
  Eigen::MatrixXd fold_loss(folds, nlambda);

  for (int f = 0; f < folds; ++f) {
    int ntr = 0;
    for (int i = 0; i < n; ++i) ntr += fold_of[static_cast<std::size_t>(i)] != f ? 1 : 0;
    const int nval = n - ntr;
    Dataset train{Eigen::MatrixXd(ntr, d), Eigen::VectorXd(ntr)};
    Dataset val{Eigen::MatrixXd(nval, d), Eigen::VectorXd(nval)};
    int it = 0, iv = 0;
    for (int i = 0; i < n; ++i) {
      if (fold_of[static_cast<std::size_t>(i)] != f) {
        train.x.row(it) = data.x.row(i);
        train.y[it++] = data.y[i];
      } else {
        val.x.row(iv) = data.x.row(i);
        val.y[iv++] = data.y[i];
      }
    }

    IrwSpec spec = tmpl;
    FitResult prev;
    bool have_prev = false;
    for (int li = 0; li < nlambda; ++li) {
      spec.penalty.lambda = grid[li];
      const std::vector<FitResult> seq =
          fit_retire_penalized(train, loss, spec, have_prev ? &prev : nullptr);
      prev = seq.back();
      have_prev = true;

      Kahan acc;
      for (int i = 0; i < nval; ++i) {
        const double u = val.y[i] - prev.intercept - val.x.row(i).dot(prev.slopes);
        acc.add(loss_value(val_loss, u));
      }
      fold_loss(f, li) = acc.total() / static_cast<double>(nval);
    }
  }

  CvResult out;
  out.lambda_grid = grid;
  out.mean_loss = fold_loss.colwise().mean();
  out.se_loss.resize(nlambda);
  // Fold-level spread estimated by MAD rather than the sample sd: squared
  // validation losses have no fourth moment under t-type noise, and a single
  // extreme held-out point would otherwise inflate the one-SE band into the
  // flat region of the curve.
  for (int li = 0; li < nlambda; ++li) {
    std::vector<double> per_fold(static_cast<std::size_t>(folds));
    for (int f = 0; f < folds; ++f) per_fold[static_cast<std::size_t>(f)] = fold_loss(f, li);
    const double med = median_of(per_fold);
    for (double& v : per_fold) v = std::fabs(v - med);
    const double sd = median_of(std::move(per_fold)) / kProbit75;
    out.se_loss[li] = sd / std::sqrt(static_cast<double>(folds));
  }
  out.rule = rule;
  out.chosen_lambda = choose_lambda(out.lambda_grid, out.mean_loss, out.se_loss, rule);
  return out;
}

}  // namespace retire
