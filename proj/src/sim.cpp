#include "retire/sim.hpp"

#include <cmath>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "retire/rng.hpp"

namespace retire {

namespace {

double std_normal_quantile(double tau) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), tau);
}

double student_t_quantile(double df, double tau) {
  return boost::math::quantile(boost::math::students_t_distribution<double>(df), tau);
}

// E(Z - e)+ from closed-form truncated first moments: the Mills-ratio form
// for the Gaussian, (nu + e^2)/(nu - 1) f(e) - e(1 - F(e)) for Student-t.
double upper_partial_moment(const NoiseDistribution& dist, double e) {
  if (dist.kind == NoiseDistribution::Kind::Gaussian) {
    const double s = std::sqrt(dist.param);
    const boost::math::normal_distribution<double> nd;
    return s * boost::math::pdf(nd, e / s) - e * (1.0 - boost::math::cdf(nd, e / s));
  }
  const double nu = dist.param;
  const boost::math::students_t_distribution<double> td(nu);
  return (nu + e * e) / (nu - 1.0) * boost::math::pdf(td, e) - e * (1.0 - boost::math::cdf(td, e));
}

}  // namespace

double noise_quantile(const NoiseDistribution& dist, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("noise_quantile: tau in (0,1)");
  if (dist.kind == NoiseDistribution::Kind::Gaussian) {
    return std::sqrt(dist.param) * std_normal_quantile(tau);
  }
  return student_t_quantile(dist.param, tau);
}

double noise_expectile(const NoiseDistribution& dist, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("noise_expectile: tau in (0,1)");
  // Both supported laws have mean zero, so E(Z-e)- = E(Z-e)+ + e.
  const auto condition = [&](double e) {
    const double up = upper_partial_moment(dist, e);
    return tau * up - (1.0 - tau) * (up + e);
  };
  double lo = noise_quantile(dist, 0.001);
  double hi = noise_quantile(dist, 0.999);
  double flo = condition(lo);
  double fhi = condition(hi);
  if (!(flo > 0.0 && fhi < 0.0)) {  // condition is strictly decreasing in e
    throw bracket_failure_error("noise_expectile: initial bracket does not straddle the root");
  }
  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    const double fm = condition(mid);
    if (std::fabs(fm) <= 1e-12 || hi - lo <= 1e-15 * (1.0 + std::fabs(mid))) break;
    if (fm > 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return mid;
}

TruthVector canonical_truth(int d) {
  if (d < 20) throw std::invalid_argument("canonical_truth: requires d >= 20");
  TruthVector t;
  t.beta_star = Eigen::VectorXd::Zero(d + 1);
  t.beta_star[0] = 2.0;
  const double magnitudes[10] = {1.8, 1.6, 1.4, 1.2, 1.0, -1.0, -1.2, -1.4, -1.6, -1.8};
  for (int k = 0; k < 10; ++k) {
    t.beta_star[2 * (k + 1)] = magnitudes[k];  // paper positions j = 2,4,...,20
  }
  return t;
}

SimData generate(const SimSpec& spec) {
  if (spec.d < 20) throw std::invalid_argument("generate: requires d >= 20 for the canonical pattern");
  return generate_given(spec, canonical_truth(spec.d));
}

SimData generate_given(const SimSpec& spec, const TruthVector& truth) {
  if (spec.n < 1 || spec.d < 1) throw std::invalid_argument("generate_given: n, d must be positive");
  if (!(spec.tau > 0.0 && spec.tau < 1.0)) throw std::invalid_argument("generate_given: tau in (0,1)");
  if (truth.beta_star.size() != spec.d + 1) {
    throw std::invalid_argument("generate_given: beta_star must have length d+1");
  }

  const int n = spec.n;
  const int d = spec.d;
  SimData out;
  out.truth = truth;
  out.data.x.resize(n, d);
  out.data.y.resize(n);

  // AR(1) sampling recursion realizes the Cholesky factor of 0.5^|j-k|.
  const CounterStream xs(spec.seed, 0, StreamPurpose::Predictors);
  const double rho = 0.5;
  const double innov = std::sqrt(1.0 - rho * rho);
  for (int i = 0; i < n; ++i) {
    double prev = 0.0;
    for (int j = 0; j < d; ++j) {
      const double u = xs.uniform(static_cast<std::uint64_t>(i) * d + j);
      const double z = std_normal_quantile(u);
      prev = j == 0 ? z : rho * prev + innov * z;
      out.data.x(i, j) = prev;
    }
  }

  const CounterStream es(spec.seed, 0, StreamPurpose::Noise);
  Eigen::VectorXd eps(n);
  for (int i = 0; i < n; ++i) {
    const double u = es.uniform(static_cast<std::uint64_t>(i));
    eps[i] = spec.noise.kind == NoiseDistribution::Kind::Gaussian
                 ? std::sqrt(spec.noise.param) * std_normal_quantile(u)
                 : student_t_quantile(spec.noise.param, u);
  }

  double center = 0.0;
  if (spec.model == SimModel::QuantileHeteroscedastic) center = noise_quantile(spec.noise, spec.tau);
  if (spec.model == SimModel::ExpectileHeteroscedastic) center = noise_expectile(spec.noise, spec.tau);

  for (int i = 0; i < n; ++i) {
    double mean = truth.beta_star[0];
    for (int j = 0; j < d; ++j) mean += out.data.x(i, j) * truth.beta_star[j + 1];
    if (spec.model == SimModel::Homoscedastic) {
      out.data.y[i] = mean + eps[i];
    } else {
      const double scale = 0.5 * std::fabs(out.data.x(i, d - 1)) + 0.5;
      out.data.y[i] = mean + scale * (eps[i] - center);
    }
  }
  return out;
}

Metrics evaluate(const FitResult& fit, const TruthVector& truth, double threshold) {
  const Eigen::Index d = fit.slopes.size();
  if (truth.beta_star.size() != d + 1) throw std::invalid_argument("evaluate: dimension mismatch");
  if (!(threshold >= 0.0)) throw std::invalid_argument("evaluate: threshold must be nonnegative");

  Metrics m;
  double ss = (fit.intercept - truth.beta_star[0]) * (fit.intercept - truth.beta_star[0]);
  int s = 0, tp = 0, fp = 0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double diff = fit.slopes[j] - truth.beta_star[j + 1];
    ss += diff * diff;
    const bool selected = std::fabs(fit.slopes[j]) > threshold;
    if (truth.beta_star[j + 1] != 0.0) {
      ++s;
      tp += selected ? 1 : 0;
    } else {
      fp += selected ? 1 : 0;
    }
  }
  m.l2_error = std::sqrt(ss);
  m.tpr = s > 0 ? static_cast<double>(tp) / s : 0.0;
  m.fpr = d - s > 0 ? static_cast<double>(fp) / static_cast<double>(d - s) : 0.0;
  return m;
}

}  // namespace retire
