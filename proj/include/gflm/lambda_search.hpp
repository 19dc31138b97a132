#pragma once

// One-dimensional maximization over a variance ratio lambda >= 0: the
// boundary lambda = 0 is evaluated explicitly, then a 41-point log grid on
// [1e-8, 1e8] brackets the interior optimum, which golden-section search
// refines to 1e-8 in log(lambda).

#include <algorithm>
#include <array>
#include <cmath>

namespace gflm {

struct LambdaMax {
  double lambda = 0.0;
  double value = 0.0;      // f at the maximizer
  double value_at_zero = 0.0;
};

inline constexpr int kLambdaGridPoints = 41;
inline constexpr double kLogLambdaLo = -18.420680743952367;  // log(1e-8)
inline constexpr double kLogLambdaHi = 18.420680743952367;   // log(1e8)
inline constexpr double kLogLambdaTol = 1e-8;

inline double lambda_grid_point(int i) {
  return std::exp(kLogLambdaLo + (kLogLambdaHi - kLogLambdaLo) * i /
                                     (kLambdaGridPoints - 1));
}

/// `f(lambda)` must be defined for lambda >= 0. The returned maximizer is 0
/// unless some interior value strictly exceeds f(0).
template <class F>
LambdaMax maximize_over_lambda(F&& f) {
  LambdaMax out;
  out.value_at_zero = f(0.0);
  out.value = out.value_at_zero;

  int best = 0;
  double best_val = -INFINITY;
  for (int i = 0; i < kLambdaGridPoints; ++i) {
    const double v = f(lambda_grid_point(i));
    if (v > best_val) {
      best_val = v;
      best = i;
    }
  }
  const double step =
      (kLogLambdaHi - kLogLambdaLo) / (kLambdaGridPoints - 1);
  const double grid_log = kLogLambdaLo + step * best;
  double a = std::max(grid_log - step, kLogLambdaLo);
  double b = std::min(grid_log + step, kLogLambdaHi);
  auto g = [&](double log_lambda) { return f(std::exp(log_lambda)); };
  const double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = g(c);
  double fd = g(d);
  while (b - a > kLogLambdaTol) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = g(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = g(d);
    }
  }
  double cand_log = fc > fd ? c : d;
  double cand_val = std::max(fc, fd);
  if (best_val > cand_val) {
    cand_val = best_val;
    cand_log = grid_log;
  }
  if (cand_val > out.value_at_zero) {
    out.lambda = std::exp(cand_log);
    out.value = cand_val;
  }
  return out;
}

}  // namespace gflm
