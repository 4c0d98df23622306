#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <vector>

namespace hybrid {

inline constexpr double kNegativeInfinity = -std::numeric_limits<double>::infinity();

inline bool all_finite(const std::vector<double>& values) {
  return std::all_of(values.begin(), values.end(),
                     [](double v) { return std::isfinite(v); });
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (b == kNegativeInfinity) return a;
  return a + std::log1p(std::exp(b - a));
}

/// log of the sum of exponentials, computed with max subtraction.
inline double log_sum_exp(const double* values, std::size_t count) {
  double max_value = kNegativeInfinity;
  for (std::size_t i = 0; i < count; ++i) max_value = std::max(max_value, values[i]);
  if (max_value == kNegativeInfinity) return kNegativeInfinity;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) sum += std::exp(values[i] - max_value);
  return max_value + std::log(sum);
}

inline double log_sum_exp(const std::vector<double>& values) {
  return log_sum_exp(values.data(), values.size());
}

/// Index of the largest entry; ties go to the lowest index.
inline std::size_t argmax_lowest(const std::vector<double>& values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return best;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double squared_norm(const std::vector<double>& v) { return dot(v, v); }

inline double max_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::fabs(x));
  return m;
}

}  // namespace hybrid
