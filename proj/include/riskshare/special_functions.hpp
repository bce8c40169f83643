#pragma once

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "riskshare/error.hpp"

namespace riskshare {

/// Digamma psi(x) for x > 0: upward recurrence to x >= 10, then the asymptotic series.
inline double digamma(double x) {
  if (!(x > 0.0)) throw DomainError("digamma: argument must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  // Bernoulli terms B_2n / (2n x^2n), n = 1..7
  const double series =
      inv2 * (1.0 / 12 -
              inv2 * (1.0 / 120 -
                      inv2 * (1.0 / 252 -
                              inv2 * (1.0 / 240 -
                                      inv2 * (1.0 / 132 -
                                              inv2 * (691.0 / 32760 - inv2 * (1.0 / 12)))))));
  return acc + std::log(x) - 0.5 * inv - series;
}

/// Trigamma psi'(x) for x > 0.
inline double trigamma(double x) {
  if (!(x > 0.0)) throw DomainError("trigamma: argument must be positive");
  double acc = 0.0;
  while (x < 10.0) {
    acc += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv * (1.0 +
             inv * (0.5 +
                    inv * (1.0 / 6 -
                           inv2 * (1.0 / 30 -
                                   inv2 * (1.0 / 42 -
                                           inv2 * (1.0 / 30 -
                                                   inv2 * (5.0 / 66 -
                                                           inv2 * (691.0 / 2730 -
                                                                   inv2 * (7.0 / 6)))))))));
  return acc + series;
}

/// Principal branch W0 of the Lambert W function: w * exp(w) = x, w >= -1.
///
/// Halley iteration on h(w) = w - x exp(-w), which stays finite for large x,
/// started from the branch-point series near -1/e and the log asymptote for large x.
inline double lambert_w0(double x) {
  constexpr double inv_e = 1.0 / std::numbers::e;
  if (std::isnan(x)) throw DomainError("lambert_w0: NaN argument");
  if (x < -inv_e) {
    // allow the rounding of -1/e itself
    if (x < -inv_e * (1.0 + 4.0 * std::numeric_limits<double>::epsilon())) {
      std::ostringstream os;
      os << "lambert_w0: argument " << x << " below -1/e";
      throw DomainError(os.str());
    }
    return -1.0;
  }
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;

  double w;
  if (x < -0.25) {
    const double p = std::sqrt(2.0 * (std::numbers::e * x + 1.0));
    w = -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * (11.0 / 72.0)));
  } else if (x <= std::numbers::e) {
    w = std::log1p(x);
  } else {
    const double l1 = std::log(x);
    const double l2 = std::log(l1);
    w = l1 - l2 + l2 / l1;
  }
  if (w <= -1.0) w = -1.0 + 1e-12;

  for (int iter = 0; iter < 64; ++iter) {
    const double xe = x * std::exp(-w);
    const double h = w - xe;
    const double dh = 1.0 + xe;
    const double d2h = -xe;
    const double denom = 2.0 * dh * dh - h * d2h;
    if (denom == 0.0) break;
    double step = 2.0 * h * dh / denom;
    double next = w - step;
    if (next <= -1.0) next = 0.5 * (w - 1.0);
    const bool small = std::abs(next - w) <= 4.0 * std::numeric_limits<double>::epsilon() *
                                                    (1.0 + std::abs(next));
    w = next;
    if (small) break;
  }
  return w;
}

}  // namespace riskshare
