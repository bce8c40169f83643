#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "riskshare/kde.hpp"

using namespace riskshare;

TEST(Kde, DegenerateSamples) {
  EXPECT_THROW(terminal_kde({0.0, 0.0}), DegenerateSample);
  EXPECT_THROW(terminal_kde({1.0}), DegenerateSample);
  EXPECT_THROW(terminal_kde({1.0, std::nan("")}), DomainError);
  EXPECT_NO_THROW(terminal_kde({0.0, 0.0}, 1.0));
}

TEST(Kde, StandardNormalSample) {
  std::mt19937_64 rng(12345);
  std::normal_distribution<double> n01;
  std::vector<double> x(10000);
  for (auto& v : x) v = n01(rng);
  const auto curve = terminal_kde(x);
  double sup = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < curve.abscissa.size(); ++i) {
    const double u = curve.abscissa[i];
    if (std::abs(u) <= 3.0) {
      const double phi = std::exp(-0.5 * u * u) / std::sqrt(2.0 * std::numbers::pi);
      sup = std::max(sup, std::abs(curve.density[i] - phi));
    }
    if (i > 0)
      mass += 0.5 * (curve.density[i] + curve.density[i - 1]) * (curve.abscissa[i] - curve.abscissa[i - 1]);
  }
  EXPECT_LT(sup, 0.02);
  EXPECT_NEAR(mass, 1.0, 1e-3);
}

TEST(Kde, SilvermanMatchesHandComputation) {
  // sd = sqrt(2.5), IQR = 2 -> spread = min(1.5811, 1.4925)
  const std::vector<double> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * (2.0 / 1.34) * std::pow(5.0, -0.2), 1e-14);
}

TEST(Kde, ZeroIqrFallsBackToStandardDeviation) {
  const std::vector<double> x{0, 0, 0, 0, 0, 0, 0, 10};
  const double sd = std::sqrt((7 * 1.25 * 1.25 + 8.75 * 8.75) / 7.0);
  EXPECT_NEAR(silverman_bandwidth(x), 0.9 * sd * std::pow(8.0, -0.2), 1e-12);
}
