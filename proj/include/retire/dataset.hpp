#pragma once

#include <cmath>
#include <stdexcept>

#include <Eigen/Core>

namespace retire {

// Design matrix (rows = observations, no intercept column) and response.
struct Dataset {
  Eigen::MatrixXd x;  // n x d
  Eigen::VectorXd y;  // n

  int n() const { return static_cast<int>(x.rows()); }
  int d() const { return static_cast<int>(x.cols()); }

  void validate() const {
    if (x.rows() < 1) throw std::invalid_argument("Dataset: needs at least one observation");
    if (y.size() != x.rows()) throw std::invalid_argument("Dataset: response length must equal row count");
    if (!x.allFinite() || !y.allFinite()) throw std::invalid_argument("Dataset: entries must be finite");
  }
};

}  // namespace retire
