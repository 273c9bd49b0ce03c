#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <vector>

namespace surveyor::stats {

// NaN marks a missing value (NA) in every numeric input of this namespace.
inline bool is_na(double v) { return std::isnan(v); }
inline constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

struct DescriptiveStats {
  std::size_t n = 0;
  std::optional<double> mean;
  std::optional<double> sd;  // n - 1 denominator; absent when n < 2
  std::optional<double> median;
  std::optional<double> min;
  std::optional<double> max;
};

inline std::vector<double> drop_na(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values)
    if (!is_na(v)) out.push_back(v);
  return out;
}

inline double mean_of(std::span<const double> v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance around a precomputed mean.
inline double variance_of(std::span<const double> v, double mean) {
  double ss = 0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

inline DescriptiveStats describe(std::span<const double> values) {
  DescriptiveStats d;
  auto v = drop_na(values);
  d.n = v.size();
  if (v.empty()) return d;
  d.mean = mean_of(v);
  if (v.size() >= 2) d.sd = std::sqrt(variance_of(v, *d.mean));
  std::sort(v.begin(), v.end());
  d.min = v.front();
  d.max = v.back();
  const std::size_t mid = v.size() / 2;
  d.median = v.size() % 2 ? v[mid] : (v[mid - 1] + v[mid]) / 2.0;
  return d;
}

}  // namespace surveyor::stats
