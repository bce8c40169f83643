#include <gtest/gtest.h>

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <cmath>
#include <random>

#include "riskshare/compensators.hpp"

using namespace riskshare;
using boost::multiprecision::cpp_bin_float_50;

namespace {

const GammaCompensator kC(0.52, 0.58, 654.98);
const GammaCompensator k20(0.51, 0.56, 697.68);
const GammaCompensator k41(0.54, 0.57, 678.55);

// ln v(xi) in 50-digit arithmetic
double log_density_mp(double rate, double shape, double scale, double xi) {
  const cpp_bin_float_50 r(rate), m(shape), s(scale), x(xi);
  const cpp_bin_float_50 v = log(r) + (m - 1) * log(x) - x / s - lgamma(m) - m * log(s);
  return static_cast<double>(v);
}

// Random feasible Gamma pair/triple with the integral exponent a >= 0.1 and rate b > 0.
GammaCompensator random_model(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> rate(0.1, 20.0), shape(0.3, 3.0), lscale(-1.0, 3.0);
  return GammaCompensator(rate(rng), shape(rng), std::pow(10.0, lscale(rng)));
}

}  // namespace

TEST(DensityLog, ExponentialAtOne) {
  EXPECT_NEAR(density_log(GammaCompensator(1, 1, 1), 1.0), -1.0, 1e-15);
  EXPECT_NEAR(density_log(GammaCompensator(2, 1, 1), 1.0), std::log(2.0) - 1.0, 1e-15);
}

TEST(DensityLog, MatchesHighPrecisionOracle) {
  EXPECT_NEAR(density_log(kC, 100.0), log_density_mp(0.52, 0.58, 654.98, 100.0), 1e-13);
  for (double xi : {1e-6, 0.3, 10.0, 5000.0, 1e5})
    EXPECT_NEAR(density_log(k41, xi), log_density_mp(0.54, 0.57, 678.55, xi),
                1e-13 * std::max(1.0, std::abs(density_log(k41, xi))));
}

TEST(DensityLog, RejectsNonPositiveLoss) {
  EXPECT_THROW(density_log(kC, 0.0), DomainError);
  EXPECT_THROW(density_log(kC, -1.0), DomainError);
}

TEST(GammaCompensator, RejectsInvalidParameters) {
  EXPECT_THROW(GammaCompensator(0.0, 1, 1), DomainError);
  EXPECT_THROW(GammaCompensator(1, -1, 1), DomainError);
  EXPECT_THROW(GammaCompensator(1, 1, std::nan("")), DomainError);
}

TEST(GammaCompensator, MomentRates) {
  const GammaCompensator m(2.0, 3.0, 4.0);
  EXPECT_DOUBLE_EQ(m.mean_loss_rate(), 24.0);
  EXPECT_DOUBLE_EQ(m.second_moment_rate(), 2.0 * 3.0 * 4.0 * 16.0);
  auto mass = quad::integrate_half_line([&](double x) { return std::exp(m.log_density(x)); }, 12.0);
  EXPECT_NEAR(mass.value, 2.0, 1e-10);
}

TEST(CrossIntegral2, SelfIsRate) {
  EXPECT_NEAR(cross_integral_2(kC, kC), kC.rate(), 1e-12 * kC.rate());
}

TEST(CrossIntegral2, CalibratedModelMatchesQuadrature) {
  const double closed = cross_integral_2(kC, k20);
  const double oracle = cross_integral_2_quadrature(kC, k20);
  EXPECT_NEAR(closed / oracle, 1.0, 1e-8);
}

TEST(CrossIntegral2, InfeasibleShapeNamesIndices) {
  const GammaCompensator k(0.5, 1.2, 600.0);
  try {
    cross_integral_2(kC, k, 3, 1);
    FAIL() << "expected InfeasibleModelPair";
  } catch (const InfeasibleModelPair& e) {
    EXPECT_EQ(e.first(), 3u);
    EXPECT_EQ(e.second(), 1u);
  }
}

TEST(CrossIntegral2, SharedSeverityCauchySchwarz) {
  const GammaCompensator k(0.3, kC.shape(), kC.scale());
  EXPECT_GE(cross_integral_2(kC, k), kC.rate() * kC.rate() / k.rate() * (1.0 - 1e-12));
}

TEST(CrossIntegral3, SelfIsRate) {
  EXPECT_NEAR(cross_integral_3(kC, kC, kC), kC.rate(), 1e-12 * kC.rate());
}

TEST(CrossIntegral3, CalibratedModelsMatchQuadrature) {
  const double closed = cross_integral_3(kC, k20, k41);
  const double oracle = cross_integral_3_quadrature(kC, k20, k41);
  EXPECT_NEAR(closed / oracle, 1.0, 1e-8);
}

TEST(CrossIntegral3, BoundaryShapeRejected) {
  const GammaCompensator j(0.52, 0.87, 654.98);  // 3 m_C = 2 m_j
  EXPECT_THROW(cross_integral_3(kC, j, j), InfeasibleModelPair);
}

TEST(CrossIntegral, RandomizedAgreementWithQuadrature) {
  std::mt19937_64 rng(11);
  int pairs = 0, triples = 0;
  while (pairs < 100 || triples < 100) {
    const auto c = random_model(rng);
    const auto j = random_model(rng);
    const auto k = random_model(rng);
    const double a2 = 2 * c.shape() - k.shape();
    const double b2 = 2 / c.scale() - 1 / k.scale();
    if (pairs < 100 && a2 >= 0.1 && b2 * c.scale() > 0.05) {
      EXPECT_NEAR(cross_integral_2(c, k) / cross_integral_2_quadrature(c, k), 1.0, 1e-8);
      ++pairs;
    }
    const double a3 = 3 * c.shape() - j.shape() - k.shape();
    const double b3 = 3 / c.scale() - 1 / j.scale() - 1 / k.scale();
    if (triples < 100 && a3 >= 0.1 && b3 * c.scale() > 0.05) {
      EXPECT_NEAR(cross_integral_3(c, j, k) / cross_integral_3_quadrature(c, j, k), 1.0, 1e-8);
      ++triples;
    }
  }
}

TEST(CrossIntegral, NearBoundaryShapesMatchQuadrature) {
  // 2 m_C - m_k barely positive: the integrand behaves like xi^{-0.997} near zero
  const GammaCompensator c(18.1158, 0.300591, 1.74371), k(0.733077, 0.598309, 2.57118);
  EXPECT_NEAR(cross_integral_2(c, k) / cross_integral_2_quadrature(c, k), 1.0, 1e-8);
  const GammaCompensator c3(10.6688, 1.24707, 0.146104), j3(5.04325, 2.45092, 225.028),
      k3(4.23079, 1.28333, 179.545);
  ASSERT_TRUE(triple_condition(c3, j3, k3).pass());
  EXPECT_NEAR(cross_integral_3(c3, j3, k3) / cross_integral_3_quadrature(c3, j3, k3), 1.0, 1e-8);
}

TEST(Ensemble, WeightsValidatedAndNormalized) {
  EXPECT_THROW(ModelEnsemble({k20}, kC, {0.5}, 0.4), ConfigError);
  EXPECT_THROW(ModelEnsemble({k20}, kC, {1.5}, -0.5), ConfigError);
  EXPECT_THROW(ModelEnsemble({k20, k41}, kC, {0.5}, 0.5), ConfigError);
  const ModelEnsemble e({k20, k41}, kC, {0.5, 0.5 - 1e-10}, 0.0);
  EXPECT_NEAR(e.weight(0) + e.weight(1) + e.weight(2), 1.0, 1e-15);
  EXPECT_EQ(e.size(), 3u);
  EXPECT_EQ(e.counterparty_index(), 2u);
  EXPECT_EQ(e.label(0), "1");
  EXPECT_EQ(e.label(2), "C");
}

TEST(Ensemble, CounterpartyExistsWithZeroWeight) {
  const ModelEnsemble e({k20}, kC, {1.0}, 0.0);
  EXPECT_EQ(e.counterparty(), kC);
  EXPECT_EQ(e.weight(e.counterparty_index()), 0.0);
}

TEST(PairFeasibility, Examples) {
  EXPECT_TRUE(check_assumption_1(ModelEnsemble::single(kC)).pass());
  EXPECT_TRUE(check_assumption_1(ModelEnsemble({k20}, kC, {1.0}, 0.0)).pass());
  const auto r = check_assumption_1(ModelEnsemble({GammaCompensator(0.5, 0.58, 300.0)}, kC, {1.0}, 0.0));
  EXPECT_FALSE(r.pass());
  EXPECT_EQ(r.failures(), 1u);
  EXPECT_TRUE(r.entries[0].shape_ok);
  EXPECT_FALSE(r.entries[0].scale_ok);
}

TEST(PairFeasibility, BoundaryIsRejected) {
  const GammaCompensator k(0.5, 1.16, 700.0);  // 2 m_C == m_k
  EXPECT_FALSE(check_assumption_1(ModelEnsemble({k}, kC, {1.0}, 0.0)).pass());
  EXPECT_THROW(require(check_assumption_1(ModelEnsemble({k}, kC, {1.0}, 0.0))), InfeasibleModelPair);
}

TEST(TripleFeasibility, Examples) {
  EXPECT_TRUE(check_assumption_2(ModelEnsemble({kC, kC}, kC, {0.5, 0.5}, 0.0)).pass());
  EXPECT_TRUE(check_assumption_2(ModelEnsemble({k20, k41}, kC, {0.5, 0.5}, 0.0)).pass());
  const GammaCompensator heavy(0.5, 1.0, 654.98);
  EXPECT_FALSE(check_assumption_2(ModelEnsemble({heavy}, kC, {1.0}, 0.0)).pass());
}

TEST(TripleFeasibility, SymmetricInPair) {
  const GammaCompensator a(0.5, 0.9, 400.0), b(0.6, 0.7, 900.0);
  const ModelEnsemble e({a, b, k20}, kC, {0.2, 0.3, 0.5}, 0.0);
  const auto r = check_assumption_2(e);
  const auto n = e.size();
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t k = 0; k < n; ++k) {
      const auto& x = r.entries[j * n + k];
      const auto& y = r.entries[k * n + j];
      EXPECT_EQ(x.shape_ok, y.shape_ok);
      EXPECT_EQ(x.scale_ok, y.scale_ok);
    }
}
