#pragma once

#include <cmath>

namespace cstrip {

/// Neumaier-compensated running sum. Long reductions (loss terms, batch
/// statistics) keep their rounding error near one ulp of the result, which
/// keeps finite-difference probes of the loss meaningful.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  CompensatedSum& operator-=(double x) {
    add(-x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

}  // namespace cstrip
