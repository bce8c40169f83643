#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "riskshare/error.hpp"

namespace riskshare {

struct DensityCurve {
  std::vector<double> abscissa;
  std::vector<double> density;
  double bandwidth = 0.0;
};

namespace detail {

// Linear-interpolated quantile of sorted data (type 7).
inline double quantile_sorted(const std::vector<double>& s, double q) {
  const double h = q * static_cast<double>(s.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, s.size() - 1);
  return s[lo] + (h - static_cast<double>(lo)) * (s[hi] - s[lo]);
}

}  // namespace detail

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^(-1/5); falls back to sd when the IQR is 0.
inline double silverman_bandwidth(std::vector<double> samples) {
  if (samples.size() < 2) throw DegenerateSample("kernel density needs at least 2 samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double v : samples) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : samples) ss += (v - mean) * (v - mean);
  const double sd = std::sqrt(ss / (n - 1.0));
  if (!(sd > 0.0)) throw DegenerateSample("kernel density of a sample with zero variance");
  const double iqr = detail::quantile_sorted(samples, 0.75) - detail::quantile_sorted(samples, 0.25);
  const double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  return 0.9 * spread * std::pow(n, -0.2);
}

/// Gaussian kernel density on `points` evenly spaced abscissae over [min - 3h, max + 3h].
inline DensityCurve terminal_kde(std::vector<double> samples,
                                 std::optional<double> bandwidth = std::nullopt,
                                 std::size_t points = 512) {
  if (samples.size() < 2) throw DegenerateSample("kernel density needs at least 2 samples");
  for (double v : samples)
    if (!std::isfinite(v)) throw DomainError("kernel density of non-finite samples");
  if (points < 2) throw DomainError("kernel density needs at least 2 abscissae");
  const double h = bandwidth ? *bandwidth : silverman_bandwidth(samples);
  if (!(h > 0.0) || !std::isfinite(h)) throw DomainError("bandwidth must be positive");
  std::sort(samples.begin(), samples.end());

  DensityCurve out;
  out.bandwidth = h;
  const double lo = samples.front() - 3.0 * h;
  const double hi = samples.back() + 3.0 * h;
  const double step = (hi - lo) / static_cast<double>(points - 1);
  const double norm = 1.0 / (static_cast<double>(samples.size()) * h * std::sqrt(2.0 * std::numbers::pi));
  out.abscissa.resize(points);
  out.density.resize(points);
  for (std::size_t i = 0; i < points; ++i) {
    const double x = i + 1 == points ? hi : lo + step * static_cast<double>(i);
    // kernel mass beyond 8h is below 1e-14 of the peak
    const auto first = std::lower_bound(samples.begin(), samples.end(), x - 8.0 * h);
    const auto last = std::upper_bound(first, samples.end(), x + 8.0 * h);
    double acc = 0.0;
    for (auto it = first; it != last; ++it) {
      const double u = (x - *it) / h;
      acc += std::exp(-0.5 * u * u);
    }
    out.abscissa[i] = x;
    out.density[i] = acc * norm;
  }
  return out;
}

}  // namespace riskshare
