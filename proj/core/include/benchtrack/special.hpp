#pragma once

#include <cmath>

namespace benchtrack {

inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kSqrt2Pi = 2.5066282746310005024;
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

inline double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

/// Upper tail of the standard normal, accurate far into the tail.
inline double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

/// Scaled complementary error function erfcx(x) = e^{x^2} erfc(x).
double erfcx(double x);

/// e^a * Phi_bar(c) without overflow/underflow when a and c^2/2 nearly cancel.
double exp_mul_norm_sf(double a, double c);

}  // namespace benchtrack
