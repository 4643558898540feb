#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace retire {

// Penalty derivative p'_lambda, the per-coordinate weight of the iteratively
// reweighted l1 scheme. Only derivatives are consumed; the primitives are not
// exposed.
enum class PenaltyKind { L1, Scad, Mcp };

struct PenaltySpec {
  PenaltyKind kind = PenaltyKind::L1;
  double lambda = 0.0;
  double shape = 0.0;  // SCAD a / MCP b; unused for L1

  static PenaltySpec l1(double lambda) { return PenaltySpec{PenaltyKind::L1, lambda, 0.0}; }
  static PenaltySpec scad(double lambda, double a = 3.7) { return PenaltySpec{PenaltyKind::Scad, lambda, a}; }
  static PenaltySpec mcp(double lambda, double b = 3.0) { return PenaltySpec{PenaltyKind::Mcp, lambda, b}; }

  void validate() const {
    if (!(lambda > 0.0)) throw std::invalid_argument("PenaltySpec: lambda must be positive");
    if (kind == PenaltyKind::Scad && !(shape > 2.0)) throw std::invalid_argument("PenaltySpec: SCAD shape must exceed 2");
    if (kind == PenaltyKind::Mcp && !(shape > 1.0)) throw std::invalid_argument("PenaltySpec: MCP shape must exceed 1");
  }
};

inline double weight_derivative(const PenaltySpec& pen, double t) {
  pen.validate();
  if (!(t >= 0.0)) throw std::invalid_argument("weight_derivative: t must be nonnegative");
  switch (pen.kind) {
    case PenaltyKind::L1:
      return pen.lambda;
    case PenaltyKind::Scad: {
      if (t <= pen.lambda) return pen.lambda;
      return std::max(pen.shape * pen.lambda - t, 0.0) / (pen.shape - 1.0);
    }
    case PenaltyKind::Mcp:
      if (t >= pen.shape * pen.lambda) return 0.0;
      return std::max(pen.lambda - t / pen.shape, 0.0);
  }
  throw std::logic_error("weight_derivative: unknown penalty kind");
}

// Componentwise p'_lambda(|beta_j|) over the penalized (slope) coordinates.
inline Eigen::VectorXd weight_vector(const PenaltySpec& pen, const Eigen::VectorXd& beta_slopes) {
  Eigen::VectorXd w(beta_slopes.size());
  for (Eigen::Index j = 0; j < beta_slopes.size(); ++j) {
    w[j] = weight_derivative(pen, std::fabs(beta_slopes[j]));
  }
  return w;
}

}  // namespace retire
