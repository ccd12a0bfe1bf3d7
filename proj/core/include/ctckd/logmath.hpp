#pragma once

#include <algorithm>
#include <cmath>
#include <span>

namespace ctckd {

// Finite stand-in for log(0). Trellis code adds and compares these values
// freely; keeping the sentinel finite means sums of "impossible" terms stay
// hugely negative instead of turning into inf - inf = NaN.
inline constexpr double kLogZero = -1e30;

// Anything at or below half the sentinel counts as impossible. Genuine
// log-probabilities never get anywhere near this magnitude.
inline constexpr bool is_log_zero(double x) { return x <= kLogZero * 0.5; }

// Clamp drifted sums (e.g. kLogZero + kLogZero) back onto the sentinel.
inline constexpr double saturate_log(double x) {
  return x < kLogZero ? kLogZero : x;
}

// log(exp(a) + exp(b)). log_add(x, kLogZero) == x exactly.
inline double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (is_log_zero(b)) return saturate_log(a);
  return a + std::log1p(std::exp(b - a));
}

inline double log_sum(std::span<const double> xs) {
  double m = kLogZero;
  for (double x : xs) m = std::max(m, x);
  if (is_log_zero(m)) return kLogZero;
  double acc = 0.0;
  for (double x : xs) {
    if (!is_log_zero(x)) acc += std::exp(x - m);
  }
  return m + std::log(acc);
}

inline void log_softmax_inplace(std::span<double> row) {
  double m = *std::max_element(row.begin(), row.end());
  double acc = 0.0;
  for (double x : row) acc += std::exp(x - m);
  const double lse = m + std::log(acc);
  for (double& x : row) x -= lse;
}

}  // namespace ctckd
