#pragma once

#include <cstdint>
#include <stdexcept>

#include <Eigen/Core>

#include "retire/dataset.hpp"
#include "retire/solver.hpp"

namespace retire {

struct bracket_failure_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NoiseDistribution {
  enum class Kind { Gaussian, StudentT };
  Kind kind = Kind::Gaussian;
  double param = 1.0;  // variance (Gaussian) or degrees of freedom (StudentT)

  static NoiseDistribution gaussian(double variance) {
    if (!(variance > 0.0)) throw std::invalid_argument("NoiseDistribution: variance must be positive");
    return {Kind::Gaussian, variance};
  }
  static NoiseDistribution student_t(double df) {
    if (!(df > 2.0)) throw std::invalid_argument("NoiseDistribution: df must exceed 2");
    return {Kind::StudentT, df};
  }
};

// Exact quantile of the noise law.
double noise_quantile(const NoiseDistribution& dist, double tau);

// The unique e with tau E(Z-e)+ = (1-tau) E(Z-e)-, found by bracketed
// root-finding on closed-form partial first moments; |condition| <= 1e-10
// at the returned value.
double noise_expectile(const NoiseDistribution& dist, double tau);

enum class SimModel { Homoscedastic, QuantileHeteroscedastic, ExpectileHeteroscedastic };

struct SimSpec {
  SimModel model = SimModel::Homoscedastic;
  int n = 0;
  int d = 0;
  NoiseDistribution noise;
  double tau = 0.5;
  std::uint64_t seed = 0;
};

struct TruthVector {
  Eigen::VectorXd beta_star;  // length d+1, intercept first
};

// Intercept 2, the ten signature slope magnitudes on predictors 2,4,...,20
// (1-based), zero elsewhere. Requires d >= 20.
TruthVector canonical_truth(int d);

struct SimData {
  Dataset data;
  TruthVector truth;
};

// Draws x_i ~ N(0, Sigma) with Sigma_jk = 0.5^|j-k|, i.i.d. noise, and the
// model-specific response. Deterministic given spec.seed. Rejects d < 20
// (canonical coefficient pattern); use generate_given for other designs.
SimData generate(const SimSpec& spec);
SimData generate_given(const SimSpec& spec, const TruthVector& truth);

struct Metrics {
  double l2_error = 0.0;
  double tpr = 0.0;
  double fpr = 0.0;
};

// l2 error over intercept+slopes; TPR/FPR over slopes only, counting
// |beta_j| > threshold as selected.
Metrics evaluate(const FitResult& fit, const TruthVector& truth, double threshold = 0.0);

}  // namespace retire
