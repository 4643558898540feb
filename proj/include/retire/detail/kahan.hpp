#pragma once

#include <cmath>

namespace retire::detail {

// Neumaier-compensated accumulator; callers add terms in index order.
struct Kahan {
  double sum = 0.0, comp = 0.0;
  void add(double v) {
    const double t = sum + v;
    if (std::fabs(sum) >= std::fabs(v)) {
      comp += (sum - t) + v;
    } else {
      comp += (v - t) + sum;
    }
    sum = t;
  }
  double total() const { return sum + comp; }
};

}  // namespace retire::detail
