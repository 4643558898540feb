#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>

namespace retire {

// Asymmetric robust loss: an asymmetric weight |tau - 1(u<0)| times a
// Huberized quadratic with radius gamma. gamma = +infinity is a first-class
// value and selects the pure asymmetric squared loss, so the expectile-lasso
// special case is an exact code path rather than a large-gamma approximation.
enum class LossKind { Huber };

struct LossSpec {
  double tau = 0.5;
  double gamma = std::numeric_limits<double>::infinity();
  LossKind kind = LossKind::Huber;

  void validate() const {
    if (!(tau > 0.0 && tau < 1.0)) throw std::invalid_argument("LossSpec: tau must lie in (0,1)");
    if (!(gamma > 0.0)) throw std::invalid_argument("LossSpec: gamma must be positive (or +inf)");
  }
};

// |tau - 1(u<0)|; u = 0 is weighted by tau.
inline double weight(const LossSpec& spec, double u) {
  return u < 0.0 ? 1.0 - spec.tau : spec.tau;
}

// All piecewise branches below are written so that gamma = +inf falls through
// to the asymmetric squared loss via ordinary IEEE comparisons.
inline double loss_value(const LossSpec& spec, double u) {
  const double w = weight(spec, u);
  const double g = spec.gamma;
  const double a = std::fabs(u);
  if (a <= g) return w * 0.5 * u * u;
  return w * (g * a - 0.5 * g * g);
}

inline double loss_grad(const LossSpec& spec, double u) {
  const double g = spec.gamma;
  if (u < -g) return -(1.0 - spec.tau) * g;
  if (u < 0.0) return (1.0 - spec.tau) * u;
  if (u <= g) return spec.tau * u;
  return spec.tau * g;
}

inline double loss_hess(const LossSpec& spec, double u) {
  const double g = spec.gamma;
  if (u < -g) return 0.0;
  if (u < 0.0) return 1.0 - spec.tau;
  if (u <= g) return spec.tau;
  return 0.0;
}

}  // namespace retire
