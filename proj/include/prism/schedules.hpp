#pragma once

#include <cmath>
#include <cstddef>
#include <string>

#include "prism/errors.hpp"

// Training schedules. The penalty weight follows a piecewise-linear curriculum
// (ramp up through the first half, ease off through the second); the learning
// rate does linear warmup then cosine decay to zero.

namespace prism {

struct LambdaAnchors {
  double start = 0.01;
  double mid = 0.1;
  double end = 0.06;
};

inline void validate(const LambdaAnchors& a) {
  if (a.start < 0.0 || a.mid < 0.0 || a.end < 0.0)
    throw ConfigError("lambda anchors must be non-negative");
}

// t is training progress in [0, 1]; anchors are hit exactly at 0, 0.5, 1.
inline double lambda_schedule(double t, const LambdaAnchors& a = {}) {
  validate(a);
  if (!(t >= 0.0) || !(t <= 1.0))
    throw ConfigError("lambda_schedule: t must lie in [0, 1], got " + std::to_string(t));
  if (t <= 0.5) return std::lerp(a.start, a.mid, t / 0.5);
  return std::lerp(a.mid, a.end, (t - 0.5) / 0.5);
}

inline std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction) {
  return static_cast<std::size_t>(
      std::ceil(warmup_fraction * static_cast<double>(total_steps)));
}

// Linear warmup over ceil(warmup_fraction * total) steps, then cosine decay
// that lands at base_lr exactly when warmup ends and at zero at total_steps.
inline double lr_schedule(std::size_t step, std::size_t total_steps, double base_lr,
                          double warmup_fraction = 0.03) {
  if (total_steps == 0) throw ConfigError("lr_schedule: total_steps must be positive");
  if (!(base_lr > 0.0)) throw ConfigError("lr_schedule: base_lr must be positive");
  if (warmup_fraction < 0.0 || warmup_fraction >= 1.0)
    throw ConfigError("lr_schedule: warmup_fraction must lie in [0, 1)");
  if (step > total_steps)
    throw ConfigError("lr_schedule: step " + std::to_string(step) +
                      " exceeds total_steps " + std::to_string(total_steps));
  const std::size_t w = warmup_steps(total_steps, warmup_fraction);
  if (step < w)
    return base_lr * static_cast<double>(step) / static_cast<double>(w);
  if (total_steps == w) return base_lr;
  const double u = static_cast<double>(step - w) / static_cast<double>(total_steps - w);
  return base_lr * 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
}

}  // namespace prism
