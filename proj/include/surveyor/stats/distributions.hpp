#pragma once

// CDFs and survival functions for the normal, Student t and F distributions.
// t and F go through the regularized incomplete beta function, evaluated by
// its continued fraction (modified Lentz). Survival functions are computed
// directly rather than as 1 - cdf so small p-values keep their precision.

#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "surveyor/error.hpp"

namespace surveyor::stats {

enum class Distribution { normal, student_t, f };

// normal: (mean, sd); student_t: (df, unused); f: (df1, df2)
struct DistParams {
  double first = 0;
  double second = 1;
};

namespace detail {

inline double beta_continued_fraction(double a, double b, double x) {
  constexpr double kTiny = 1e-300;
  constexpr double kEps = 1e-16;
  constexpr int kMaxIter = 100000;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) return h;
  }
  throw Error("incomplete beta: continued fraction did not converge (a=" + std::to_string(a) +
              ", b=" + std::to_string(b) + ", x=" + std::to_string(x) + ")");
}

// Returns {I_x(a,b), 1 - I_x(a,b)}; y must equal 1 - x (passed separately so
// callers can keep precision near 1).
inline std::pair<double, double> incomplete_beta_pair(double a, double b, double x, double y) {
  if (x <= 0) return {0.0, 1.0};
  if (y <= 0) return {1.0, 0.0};
  const double log_front =
      std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(y);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    const double lower = front * beta_continued_fraction(a, b, x) / a;
    return {lower, 1.0 - lower};
  }
  const double upper = front * beta_continued_fraction(b, a, y) / b;
  return {1.0 - upper, upper};
}

inline void require_positive(double v, const char* what) {
  if (!(v > 0) || !std::isfinite(v)) throw ContractViolation(std::string(what) + " must be positive and finite");
}

}  // namespace detail

/// Regularized incomplete beta I_x(a, b).
inline double incomplete_beta(double a, double b, double x) {
  detail::require_positive(a, "incomplete_beta a");
  detail::require_positive(b, "incomplete_beta b");
  if (!(x >= 0 && x <= 1)) throw ContractViolation("incomplete_beta x must lie in [0,1]");
  return detail::incomplete_beta_pair(a, b, x, 1.0 - x).first;
}

inline double normal_cdf(double x, double mean = 0.0, double sd = 1.0) {
  detail::require_positive(sd, "normal sd");
  return 0.5 * std::erfc(-(x - mean) / (sd * std::sqrt(2.0)));
}

inline double normal_sf(double x, double mean = 0.0, double sd = 1.0) {
  detail::require_positive(sd, "normal sd");
  return 0.5 * std::erfc((x - mean) / (sd * std::sqrt(2.0)));
}

inline double student_t_cdf(double t, double df) {
  detail::require_positive(df, "student_t df");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return t > 0 ? 1.0 : 0.0;
  const double t2 = t * t;
  // Two-sided tail mass P(|T| > |t|) = I_{df/(df+t^2)}(df/2, 1/2).
  const auto [tail2, inner] = detail::incomplete_beta_pair(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2));
  return t > 0 ? 1.0 - 0.5 * tail2 : 0.5 * tail2;
}

inline double student_t_sf(double t, double df) { return student_t_cdf(-t, df); }

/// Two-sided p-value for a t statistic.
inline double student_t_two_sided(double t, double df) {
  detail::require_positive(df, "student_t df");
  if (std::isnan(t)) return std::numeric_limits<double>::quiet_NaN();
  if (std::isinf(t)) return 0.0;
  const double t2 = t * t;
  return detail::incomplete_beta_pair(df / 2.0, 0.5, df / (df + t2), t2 / (df + t2)).first;
}

inline double normal_two_sided(double z) {
  if (std::isnan(z)) return std::numeric_limits<double>::quiet_NaN();
  return std::erfc(std::fabs(z) / std::sqrt(2.0));
}

inline double f_cdf(double x, double df1, double df2) {
  detail::require_positive(df1, "f df1");
  detail::require_positive(df2, "f df2");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0) return 0.0;
  if (std::isinf(x)) return 1.0;
  const double denom = df1 * x + df2;
  return detail::incomplete_beta_pair(df1 / 2.0, df2 / 2.0, df1 * x / denom, df2 / denom).first;
}

inline double f_sf(double x, double df1, double df2) {
  detail::require_positive(df1, "f df1");
  detail::require_positive(df2, "f df2");
  if (std::isnan(x)) return std::numeric_limits<double>::quiet_NaN();
  if (x <= 0) return 1.0;
  if (std::isinf(x)) return 0.0;
  const double denom = df1 * x + df2;
  return detail::incomplete_beta_pair(df1 / 2.0, df2 / 2.0, df1 * x / denom, df2 / denom).second;
}

inline double dist_cdf(Distribution kind, DistParams params, double x) {
  switch (kind) {
    case Distribution::normal:
      return normal_cdf(x, params.first, params.second);
    case Distribution::student_t:
      return student_t_cdf(x, params.first);
    case Distribution::f:
      return f_cdf(x, params.first, params.second);
  }
  throw ContractViolation("dist_cdf: unknown distribution");
}

}  // namespace surveyor::stats
