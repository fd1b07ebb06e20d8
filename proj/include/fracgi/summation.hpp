#pragma once

#include <cmath>

namespace fracgi {

// Neumaier's variant of Kahan summation. The running compensation also
// survives adding terms larger than the current sum.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) noexcept {
    const double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }

  void merge(const CompensatedSum& other) noexcept {
    add(other.sum);
    add(other.comp);
  }

  double value() const noexcept { return sum + comp; }
};

} // namespace fracgi
