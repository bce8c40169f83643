#pragma once

// Globally adaptive Gauss-Kronrod (7/15) quadrature, QUADPACK QAG style,
// plus a half-line variant built on the map xi = s * u / (1 - u) and a
// real-line variant for integrands written in ln xi.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <sstream>
#include <vector>

#include "riskshare/error.hpp"

namespace riskshare::quad {

struct Tolerance {
  double absolute = 1e-10;
  double relative = 1e-10;
};

struct Result {
  double value = 0.0;
  double abs_error = 0.0;
  std::size_t intervals = 0;
  bool converged = false;
};

namespace detail {

inline constexpr std::array<double, 8> kKronrodNodes = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};

inline constexpr std::array<double, 8> kKronrodWeights = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};

// Gauss weights for the odd Kronrod nodes (1, 3, 5, 7).
inline constexpr std::array<double, 4> kGaussWeights = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

struct Segment {
  double a;
  double b;
  double value;
  double error;
  bool operator<(const Segment& other) const { return error < other.error; }
};

template <class F>
Segment gauss_kronrod_15(F& f, double a, double b) {
  constexpr double eps = std::numeric_limits<double>::epsilon();
  constexpr double tiny = std::numeric_limits<double>::min();
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  const double fc = f(center);
  double res_g = fc * kGaussWeights[3];
  double res_k = fc * kKronrodWeights[7];
  double res_abs = std::abs(res_k);
  std::array<double, 7> f1{};
  std::array<double, 7> f2{};
  for (std::size_t j = 0; j < 7; ++j) {
    const double dx = half * kKronrodNodes[j];
    f1[j] = f(center - dx);
    f2[j] = f(center + dx);
    const double pair = f1[j] + f2[j];
    res_k += kKronrodWeights[j] * pair;
    res_abs += kKronrodWeights[j] * (std::abs(f1[j]) + std::abs(f2[j]));
    if (j % 2 == 1) res_g += kGaussWeights[j / 2] * pair;
  }
  const double mean = 0.5 * res_k;
  double res_asc = kKronrodWeights[7] * std::abs(fc - mean);
  for (std::size_t j = 0; j < 7; ++j) {
    res_asc += kKronrodWeights[j] * (std::abs(f1[j] - mean) + std::abs(f2[j] - mean));
  }
  const double value = res_k * half;
  res_abs *= std::abs(half);
  res_asc *= std::abs(half);
  double err = std::abs((res_k - res_g) * half);
  if (res_asc != 0.0 && err != 0.0) {
    err = res_asc * std::min(1.0, std::pow(200.0 * err / res_asc, 1.5));
  }
  if (res_abs > tiny / (50.0 * eps)) err = std::max(50.0 * eps * res_abs, err);
  return {a, b, value, err};
}

}  // namespace detail

/// Integrate f over [a, b]. Non-convergence is reported through Result::converged.
template <class F>
Result integrate(F&& f, double a, double b, Tolerance tol = {}, std::size_t max_intervals = 5000) {
  std::priority_queue<detail::Segment> heap;
  auto first = detail::gauss_kronrod_15(f, a, b);
  double total = first.value;
  double total_err = first.error;
  heap.push(first);

  auto done = [&] {
    return total_err <= std::max(tol.absolute, tol.relative * std::abs(total));
  };

  bool stalled = false;
  while (!done() && heap.size() < max_intervals) {
    auto worst = heap.top();
    const double mid = 0.5 * (worst.a + worst.b);
    if (!(mid > worst.a && mid < worst.b)) {
      stalled = true;
      break;
    }
    heap.pop();
    auto left = detail::gauss_kronrod_15(f, worst.a, mid);
    auto right = detail::gauss_kronrod_15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    total_err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
  }

  // Re-sum to shed accumulated cancellation in the running totals.
  Result r;
  r.intervals = heap.size();
  while (!heap.empty()) {
    r.value += heap.top().value;
    r.abs_error += heap.top().error;
    heap.pop();
  }
  r.converged = !stalled && std::isfinite(r.value) &&
                r.abs_error <= std::max(tol.absolute, tol.relative * std::abs(r.value));
  return r;
}

/// Integrate f over (0, inf) after xi = scale * u / (1 - u). `scale` should be a
/// characteristic abscissa of the integrand (1 reproduces the plain map).
template <class F>
Result integrate_half_line(F&& f, double scale = 1.0, Tolerance tol = {},
                           std::size_t max_intervals = 5000) {
  auto mapped = [&f, scale](double u) {
    const double one_minus = 1.0 - u;
    if (one_minus <= 0.0) return 0.0;
    const double xi = scale * u / one_minus;
    if (!(xi > 0.0) || !std::isfinite(xi)) return 0.0;
    const double jac = scale / (one_minus * one_minus);
    const double v = f(xi);
    return v == 0.0 ? 0.0 : v * jac;
  };
  return integrate(mapped, 0.0, 1.0, tol, max_intervals);
}

/// Integrate f over (0, inf) split at the given interior breakpoints (sorted, positive),
/// so that jumps of f fall on segment ends. The last segment uses the shifted map
/// xi = b + scale * u / (1 - u).
template <class F>
Result integrate_half_line_split(F&& f, double scale, const std::vector<double>& breaks,
                                 Tolerance tol = {}, std::size_t max_intervals = 5000) {
  if (breaks.empty()) return integrate_half_line(f, scale, tol, max_intervals);
  Result total;
  total.converged = true;
  auto add = [&](const Result& r) {
    total.value += r.value;
    total.abs_error += r.abs_error;
    total.intervals += r.intervals;
    total.converged = total.converged && r.converged;
  };
  double lo = 0.0;
  for (double b : breaks) {
    if (!(b > lo)) continue;
    add(integrate(f, lo, b, tol, max_intervals));
    lo = b;
  }
  auto shifted = [&f, scale, lo](double u) {
    const double one_minus = 1.0 - u;
    if (one_minus <= 0.0) return 0.0;
    const double xi = lo + scale * u / one_minus;
    if (!std::isfinite(xi)) return 0.0;
    const double v = f(xi);
    return v == 0.0 ? 0.0 : v * scale / (one_minus * one_minus);
  };
  add(integrate(shifted, 0.0, 1.0, tol, max_intervals));
  return total;
}

/// Integrate g over the whole real line after t = center + width * u / (1 - u^2).
/// Meant for integrands in t = ln xi, whose mass can sit below the smallest double xi.
template <class F>
Result integrate_real_line(F&& g, double center = 0.0, double width = 1.0, Tolerance tol = {},
                           std::size_t max_intervals = 5000) {
  auto mapped = [&g, center, width](double u) {
    const double d = 1.0 - u * u;
    if (d <= 0.0) return 0.0;
    const double t = center + width * u / d;
    if (!std::isfinite(t)) return 0.0;
    const double v = g(t);
    return v == 0.0 ? 0.0 : v * width * (1.0 + u * u) / (d * d);
  };
  return integrate(mapped, -1.0, 1.0, tol, max_intervals);
}

/// Same as integrate_half_line but throws NumericalFailure when the tolerance is missed.
template <class F>
double integrate_half_line_or_throw(F&& f, double scale = 1.0, Tolerance tol = {}) {
  auto r = integrate_half_line(std::forward<F>(f), scale, tol);
  if (!r.converged) {
    std::ostringstream os;
    os << "quadrature on (0, inf) did not converge: estimate " << r.value
       << ", achieved error " << r.abs_error << " after " << r.intervals << " intervals";
    throw NumericalFailure(os.str(), r.abs_error);
  }
  return r.value;
}

template <class F>
double integrate_real_line_or_throw(F&& g, double center = 0.0, double width = 1.0,
                                   Tolerance tol = {}) {
  auto r = integrate_real_line(std::forward<F>(g), center, width, tol);
  if (!r.converged) {
    std::ostringstream os;
    os << "quadrature on the real line did not converge: estimate " << r.value
       << ", achieved error " << r.abs_error << " after " << r.intervals << " intervals";
    throw NumericalFailure(os.str(), r.abs_error);
  }
  return r.value;
}

}  // namespace riskshare::quad
