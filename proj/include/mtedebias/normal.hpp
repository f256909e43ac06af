#pragma once

namespace mte::num {

inline constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

double normal_pdf(double x);

// Standard normal CDF, computed as erfc(-x/sqrt(2))/2 so that the lower tail
// keeps full relative precision.
double normal_cdf(double x);

// Standard normal quantile by Wichura's AS241 (PPND16) rational approximations,
// relative accuracy about 1e-16 over (0,1). Returns -inf/+inf at 0/1 and NaN
// outside [0,1].
double normal_quantile(double p);

}  // namespace mte::num
