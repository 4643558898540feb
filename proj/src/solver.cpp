#include "retire/solver.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "retire/detail/kahan.hpp"
#include "retire/model.hpp"

namespace retire {

namespace {

using detail::Kahan;

double sqr(double v) { return v * v; }

}  // namespace

double stabilized_denominator(const Eigen::VectorXd& residuals, double gamma, double tau,
                              double gamma_floor) {
  const Eigen::Index n = residuals.size();
  if (n == 0) throw std::invalid_argument("stabilized_denominator: empty residual vector");
  const LossSpec spec{tau, gamma};

  Kahan curv;
  Eigen::Index inside = 0;
  double maxabs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = residuals[i];
    const double a = std::fabs(u);
    if (a > maxabs) maxabs = a;
    if (a <= gamma) ++inside;
    curv.add(loss_hess(spec, u));
  }
  if (maxabs == 0.0) throw all_zero_residuals{};

  const double ordinary = curv.total();
  const bool trigger =
      ordinary == 0.0 || static_cast<double>(inside) < static_cast<double>(n) * std::max(0.05, 1.0 / static_cast<double>(n));
  if (!trigger) return ordinary;

  Kahan fallback;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::fabs(residuals[i]);
    if (a > gamma) {
      fallback.add(1.0 / std::max(a, gamma_floor));
      any = true;
    }
  }
  return any ? fallback.total() : 1.0 / gamma_floor;
}

SncdState::SncdState(const Dataset& data, const LossSpec& loss, Eigen::VectorXd weights,
                     double gamma_floor)
    : data_(data), loss_(loss), w_(std::move(weights)), gamma_floor_(gamma_floor) {
  data_.validate();
  loss_.validate();
  if (w_.size() != data_.d()) throw invalid_weight_error("SncdState: weights length must equal d");
  if (w_.size() > 0 && w_.minCoeff() < 0.0) throw invalid_weight_error("SncdState: negative penalty weight");
  b0_ = 0.0;
  beta_ = Eigen::VectorXd::Zero(data_.d());
  z_ = Eigen::VectorXd::Zero(data_.d());
  r_ = data_.y;
}

void SncdState::set_point(double intercept, const Eigen::VectorXd& slopes,
                          const Eigen::VectorXd& subgrad) {
  if (slopes.size() != data_.d() || subgrad.size() != data_.d()) {
    throw std::invalid_argument("SncdState::set_point: dimension mismatch");
  }
  b0_ = intercept;
  beta_ = slopes;
  z_ = subgrad;
  refresh_residuals();
}

void SncdState::refresh_residuals() {
  r_ = data_.y;
  if (data_.d() > 0) r_.noalias() -= data_.x * beta_;
  r_.array() -= b0_;
}

double SncdState::update_intercept() {
  const Eigen::Index n = data_.n();
  const double denom = stabilized_denominator(r_, loss_.gamma, loss_.tau, gamma_floor_);
  Kahan num;
  for (Eigen::Index i = 0; i < n; ++i) num.add(loss_grad(loss_, r_[i]));
  const double delta = num.total() / denom;
  b0_ += delta;
  r_.array() -= delta;
  return delta;
}

double SncdState::slope_denominator(double hsum, int inside) const {
  const Eigen::Index n = data_.n();
  const bool trigger =
      hsum == 0.0 || static_cast<double>(inside) < static_cast<double>(n) * std::max(0.05, 1.0 / static_cast<double>(n));
  if (!trigger) return hsum;
  Kahan fallback;
  bool any = false;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = std::fabs(r_[i]);
    if (a > loss_.gamma) {
      fallback.add(1.0 / std::max(a, gamma_floor_));
      any = true;
    }
  }
  return any ? fallback.total() : 1.0 / gamma_floor_;
}

std::pair<double, double> SncdState::update_pair(int j) {
  if (j < 0 || j >= data_.d()) throw std::invalid_argument("SncdState::update_pair: bad index");
  const Eigen::Index n = data_.n();
  const double* xj = data_.x.col(j).data();
  const double tau = loss_.tau;
  const double g = loss_.gamma;

  Kahan gs, hs;
  int inside = 0;
  double maxabs = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = r_[i];
    const double w = u < 0.0 ? 1.0 - tau : tau;
    const double c = u < -g ? -g : (u > g ? g : u);  // L' = w*c, L'' = w on the clip-free set
    maxabs = std::max(maxabs, std::fabs(u));
    gs.add(w * c * xj[i]);
    if (c == u) {
      ++inside;
      hs.add(w * xj[i] * xj[i]);
    }
  }
  if (maxabs == 0.0) throw all_zero_residuals{};
  const double gsum = gs.total();
  const double hsum = hs.total();
  const double lj = w_[j];

  double newb, newz;
  if (lj == 0.0) {
    const double delta = gsum / slope_denominator(hsum, inside);
    newb = beta_[j] + delta;
    newz = 0.0;
    if (delta != 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) r_[i] -= delta * xj[i];
    }
  } else if (std::fabs(beta_[j] + z_[j]) > 1.0) {
    const double s = beta_[j] + z_[j] > 0.0 ? 1.0 : -1.0;
    const double delta = (gsum - static_cast<double>(n) * lj * s) / slope_denominator(hsum, inside);
    newb = beta_[j] + delta;
    // The Newton system of this branch assumes sign(beta_j) = s; a step that
    // crosses zero leaves that orthant and, on correlated designs, can lock
    // neighbouring coordinates into a limit cycle. Truncate at the boundary;
    // the next sweep's inactive branch re-derives z from fresh scores.
    if (newb * s < 0.0) newb = 0.0;
    newz = s;
    const double applied = newb - beta_[j];
    if (applied != 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) r_[i] -= applied * xj[i];
    }
  } else {
    newz = (gsum + beta_[j] * hsum) / (static_cast<double>(n) * lj);
    newb = 0.0;
    if (beta_[j] != 0.0) {
      for (Eigen::Index i = 0; i < n; ++i) r_[i] += beta_[j] * xj[i];
    }
  }
  beta_[j] = newb;
  z_[j] = newz;
  return {newb, newz};
}

double SncdState::kkt_residual() {
  refresh_residuals();
  const Eigen::Index n = data_.n();
  const int d = data_.d();
  const double inv_n = 1.0 / static_cast<double>(n);

  Kahan s0;
  for (Eigen::Index i = 0; i < n; ++i) s0.add(loss_grad(loss_, r_[i]));
  double kkt = std::fabs(s0.total() * inv_n);

  for (int j = 0; j < d; ++j) {
    const double* xj = data_.x.col(j).data();
    Kahan gs;
    for (Eigen::Index i = 0; i < n; ++i) gs.add(loss_grad(loss_, r_[i]) * xj[i]);
    const double score = gs.total() * inv_n;
    const double lj = w_[j];
    if (lj == 0.0) {
      kkt = std::max(kkt, std::fabs(score));
      continue;
    }
    kkt = std::max(kkt, std::fabs(-score + lj * z_[j]));
    const double u = beta_[j] + z_[j];
    const double soft = std::fabs(u) > 1.0 ? std::copysign(std::fabs(u) - 1.0, u) : 0.0;
    kkt = std::max(kkt, std::fabs(beta_[j] - soft));
  }
  return kkt;
}

FitResult fit_sncd(const Dataset& data, const LossSpec& loss, const Eigen::VectorXd& weights,
                   const SolveOptions& opts, const FitResult* warm) {
  opts.validate();
  SncdState st(data, loss, weights, opts.gamma_floor);
  if (warm != nullptr) st.set_point(warm->intercept, warm->slopes, warm->subgradient);

  const int d = data.d();
  const double kkt_tol = 10.0 * opts.tol;
  bool frozen = !opts.gamma_adaptive;
  bool converged = false;
  double kkt = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;

  double prev_b0 = st.intercept();
  Eigen::VectorXd prev_beta = st.slopes();

  const bool cold = warm == nullptr;
  // The heuristic and the iterate can chase each other in a small limit
  // cycle, so gamma adaptation also stops after a fixed number of sweeps.
  constexpr int kMaxAdaptiveSweeps = 25;
  try {
    for (int k = 1; k <= opts.max_iter; ++k) {
      iters = k;
      if (!frozen) {
        if (cold && k == 1) {
          const double np = static_cast<double>(data.n()) * std::max(d, 1);
          st.set_gamma(std::max(opts.gamma_floor,
                                std::sqrt(static_cast<double>(data.n()) / std::log(np))));
        } else {
          st.set_gamma(gamma_heuristic(st.residuals(), loss.tau, data.n(), std::max(d, 1),
                                       opts.gamma_floor));
        }
        if (k >= kMaxAdaptiveSweeps) frozen = true;
      }
      st.update_intercept();
      for (int j = 0; j < d; ++j) st.update_pair(j);
      if (k % 64 == 0) st.refresh_residuals();

      const double dist =
          std::sqrt(sqr(st.intercept() - prev_b0) + (st.slopes() - prev_beta).squaredNorm());
      prev_b0 = st.intercept();
      prev_beta = st.slopes();

      if (!frozen && dist <= 10.0 * opts.tol) frozen = true;
      if (frozen && dist <= opts.tol) {
        kkt = st.kkt_residual();
        if (kkt <= kkt_tol) {
          converged = true;
          break;
        }
      }
    }
  } catch (const all_zero_residuals&) {
    converged = true;  // exact interpolation fit
    kkt = st.kkt_residual();
  }

  if (!converged) kkt = st.kkt_residual();

  FitResult out;
  out.intercept = st.intercept();
  out.slopes = st.slopes();
  out.subgradient = st.subgradient();
  out.gamma_used = st.gamma();
  out.iterations = iters;
  out.converged = converged;
  out.kkt_residual = kkt;
  st.refresh_residuals();
  out.residuals = st.residuals();

  if (!converged) {
    throw non_convergence_error(out, "fit_sncd: no KKT-certified point within max_iter sweeps");
  }
  return out;
}

namespace {

// Gradient (sign convention: gradient of the empirical loss in theta) and
// curvature of n^-1 sum L(y - b0 - x'beta) at theta = (b0, beta).
void smooth_derivatives(const Dataset& data, const LossSpec& loss, const Eigen::VectorXd& r,
                        Eigen::VectorXd& grad, Eigen::MatrixXd& hess) {
  const Eigen::Index n = data.n();
  const int d = data.d();
  const int p = d + 1;
  const double inv_n = 1.0 / static_cast<double>(n);

  std::vector<Kahan> g(static_cast<size_t>(p));
  std::vector<Kahan> h(static_cast<size_t>(p) * p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double zi = loss_grad(loss, r[i]);
    const double hi = loss_hess(loss, r[i]);
    g[0].add(-zi);
    h[0].add(hi);
    for (int a = 0; a < d; ++a) {
      const double xa = data.x(i, a);
      g[static_cast<size_t>(a) + 1].add(-zi * xa);
      h[static_cast<size_t>(a + 1) * p].add(hi * xa);  // row a+1, intercept column
      for (int b = 0; b <= a; ++b) {
        h[static_cast<size_t>(a + 1) * p + b + 1].add(hi * xa * data.x(i, b));
      }
    }
  }
  grad.resize(p);
  hess.resize(p, p);
  for (int a = 0; a < p; ++a) grad[a] = g[static_cast<size_t>(a)].total() * inv_n;
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b <= a; ++b) {
      const double v = h[static_cast<size_t>(a) * p + b].total() * inv_n;
      hess(a, b) = v;
      hess(b, a) = v;
    }
  }
}

double smooth_objective(const LossSpec& loss, const Eigen::VectorXd& r) {
  Kahan s;
  for (Eigen::Index i = 0; i < r.size(); ++i) s.add(loss_value(loss, r[i]));
  return s.total() / static_cast<double>(r.size());
}

}  // namespace

FitResult fit_smooth(const Dataset& data, const LossSpec& loss, const SolveOptions& opts,
                     const Eigen::VectorXd* init) {
  data.validate();
  loss.validate();
  opts.validate();
  const int n = data.n();
  const int d = data.d();
  if (n <= d) throw std::invalid_argument("fit_smooth: requires n > d");
  const int p = d + 1;

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(p);
  if (init != nullptr) {
    if (init->size() != p) throw std::invalid_argument("fit_smooth: init must have length d+1");
    theta = *init;
  }

  auto residuals_at = [&](const Eigen::VectorXd& th) {
    Eigen::VectorXd r = data.y;
    if (d > 0) r.noalias() -= data.x * th.tail(d);
    r.array() -= th[0];
    return r;
  };

  LossSpec ls = loss;
  Eigen::VectorXd r = residuals_at(theta);
  bool frozen = !opts.gamma_adaptive;
  if (opts.gamma_adaptive) {
    if (init == nullptr) {
      const double np = static_cast<double>(n) * std::max(d, 1);
      ls.gamma = std::max(opts.gamma_floor, std::sqrt(static_cast<double>(n) / std::log(np)));
    } else {
      ls.gamma = gamma_heuristic(r, ls.tau, n, std::max(d, 1), opts.gamma_floor);
    }
  }

  Eigen::VectorXd g;
  Eigen::MatrixXd H;
  bool converged = false;
  double gnorm = std::numeric_limits<double>::infinity();
  int it = 0;
  bool stalled = false;
  constexpr int kMaxAdaptiveSteps = 25;

  for (it = 0; it < opts.max_iter; ++it) {
    if (!frozen && it > 0) {
      ls.gamma = gamma_heuristic(r, ls.tau, n, std::max(d, 1), opts.gamma_floor);
    }
    if (!frozen && it >= kMaxAdaptiveSteps) frozen = true;
    smooth_derivatives(data, ls, r, g, H);
    gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= opts.tol && frozen) {
      converged = true;
      break;
    }
    if (gnorm <= opts.tol && !frozen) frozen = true;

    // Damped Newton direction; ramp the ridge until it is a descent direction.
    Eigen::VectorXd dir;
    double mu = 0.0;
    const double base = std::max(H.trace() / p, 1e-12);
    for (int attempt = 0; attempt < 60; ++attempt) {
      Eigen::MatrixXd Hd = H;
      if (mu > 0.0) Hd.diagonal().array() += mu;
      Eigen::LDLT<Eigen::MatrixXd> ldlt(Hd);
      if (ldlt.info() == Eigen::Success) {
        dir = ldlt.solve(-g);
        if (dir.allFinite() && g.dot(dir) < 0.0) break;
      }
      mu = mu == 0.0 ? 1e-8 * base : mu * 10.0;
      dir.setZero();
    }
    if (dir.size() == 0 || !dir.allFinite() || g.dot(dir) >= 0.0) dir = -g;

    const double f0 = smooth_objective(ls, r);
    const double slope = g.dot(dir);
    double step = 1.0;
    bool accepted = false;
    Eigen::VectorXd cand, rc;
    for (int ls_it = 0; ls_it < 60; ++ls_it) {
      cand = theta + step * dir;
      rc = residuals_at(cand);
      if (smooth_objective(ls, rc) <= f0 + 1e-4 * step * slope) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      stalled = true;
      break;
    }
    const double move = step * dir.norm();
    theta = cand;
    r = rc;
    if (!frozen && move <= 10.0 * opts.tol) frozen = true;
  }

  FitResult out;
  out.intercept = theta[0];
  out.slopes = theta.tail(d);
  out.subgradient = Eigen::VectorXd::Zero(d);
  out.gamma_used = ls.gamma;
  out.iterations = it;
  out.converged = converged;
  out.kkt_residual = gnorm;
  out.residuals = r;

  if (converged) return out;
  if (stalled && gnorm > opts.tol) {
    throw degenerate_design_error("fit_smooth: objective decrease stalled with non-vanishing gradient");
  }
  if (!converged && gnorm <= opts.tol) {  // frozen on the last allowed iteration
    out.converged = true;
    return out;
  }
  throw non_convergence_error(out, "fit_smooth: gradient tolerance not reached within max_iter");
}

double intercept_only_fit(const Eigen::VectorXd& y, const LossSpec& loss, const SolveOptions& opts) {
  Dataset d0{Eigen::MatrixXd(y.size(), 0), y};
  return fit_smooth(d0, loss, opts).intercept;
}

double lambda_max(const Dataset& data, const LossSpec& loss, const SolveOptions& opts) {
  data.validate();
  Dataset d0{Eigen::MatrixXd(data.y.size(), 0), data.y};
  const FitResult f0 = fit_smooth(d0, loss, opts);
  LossSpec used = loss;
  used.gamma = f0.gamma_used;

  const Eigen::Index n = data.n();
  const double inv_n = 1.0 / static_cast<double>(n);
  double best = 0.0;
  for (int j = 0; j < data.d(); ++j) {
    const double* xj = data.x.col(j).data();
    Kahan gs;
    for (Eigen::Index i = 0; i < n; ++i) gs.add(loss_grad(used, f0.residuals[i]) * xj[i]);
    best = std::max(best, std::fabs(gs.total() * inv_n));
  }
  return best;
}

double penalized_objective(const Dataset& data, const LossSpec& loss,
                           const Eigen::VectorXd& weights, double intercept,
                           const Eigen::VectorXd& slopes) {
  Eigen::VectorXd r = data.y;
  if (data.d() > 0) r.noalias() -= data.x * slopes;
  r.array() -= intercept;
  Kahan s;
  for (Eigen::Index i = 0; i < r.size(); ++i) s.add(loss_value(loss, r[i]));
  double obj = s.total() / static_cast<double>(data.n());
  for (Eigen::Index j = 0; j < slopes.size(); ++j) obj += weights[j] * std::fabs(slopes[j]);
  return obj;
}

}  // namespace retire
