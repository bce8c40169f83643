#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "riskshare/moments.hpp"
#include "riskshare/pricing.hpp"

using namespace riskshare;

namespace {

MarketParams market(double theta, double horizon = 1.0) {
  MarketParams m;
  m.premium_rate = 0.0;
  m.safety_loading = 0.0;
  m.ambiguity_penalty = theta;
  m.initial_wealth_counterparty = 10.0;
  m.horizon = horizon;
  return m;
}

// eta e^{eta^2 lambda T} = mu theta / 2 by bisection
double foc_bisect(double lambda, double mu, double theta, double t) {
  double lo = 0.0, hi = 1.0;
  const double target = 0.5 * mu * theta;
  while (hi * std::exp(hi * hi * lambda * t) < target) hi *= 2.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (mid * std::exp(mid * mid * lambda * t) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

const GammaCompensator kC(0.52, 0.58, 654.98);
const GammaCompensator k20(0.51, 0.56, 697.68);
const GammaCompensator k41(0.54, 0.57, 678.55);

}  // namespace

TEST(Pricing, UnitExample) {
  const double eta = eta_star_one_model(GammaCompensator(1.0, 1.0, 1.0), market(2.0));
  EXPECT_NEAR(eta, 0.652919, 1e-6);
  EXPECT_NEAR(eta * std::exp(eta * eta), 1.0, 1e-12);
  EXPECT_NEAR(eta, foc_bisect(1.0, 1.0, 2.0, 1.0), 1e-12);
}

TEST(Pricing, FirstOrderConditionRandomized) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const double lambda = std::pow(10.0, -1.0 + 2.0 * u(rng));
    const double mu = std::pow(10.0, 3.0 * u(rng));
    const double theta = std::pow(10.0, -3.0 + 3.0 * u(rng));
    const double t = 0.5 + 9.5 * u(rng);
    const double eta = eta_star_one_model(GammaCompensator(lambda, 2.0, mu / 2.0), market(theta, t));
    const double target = 0.5 * mu * theta;
    EXPECT_NEAR(eta * std::exp(eta * eta * lambda * t), target, 1e-10 * std::max(1.0, target));
  }
}

TEST(Pricing, ObjectiveAtZeroIsInitialWealth) {
  const ModelEnsemble e({k20, k41}, kC, {0.5, 0.5}, 0.0);
  const CounterpartyObjective f(e, market(0.01, 5.0));
  EXPECT_NEAR(f(0.0), 10.0, 1e-9);
}

TEST(Pricing, ObjectiveMatchesMeanY) {
  const ModelEnsemble e({k20, k41}, kC, {0.4, 0.6}, 0.0);
  auto m = market(0.01, 5.0);
  for (double eta : {0.05, 0.12, 0.3}) {
    m.safety_loading = eta;
    m.premium_rate = 0.0;
    const RiskSharingProblem p(e, m);
    EXPECT_NEAR(CounterpartyObjective(e, m)(eta), mean_Y(p, 5.0), 1e-8 * std::abs(mean_Y(p, 5.0)));
  }
}

TEST(Pricing, DerivativeMatchesFiniteDifference) {
  const ModelEnsemble e({k20, k41}, kC, {0.4, 0.6}, 0.0);
  const CounterpartyObjective f(e, market(0.01, 5.0));
  for (double eta : {0.01, 0.1, 0.4}) {
    const double h = 1e-6;
    const double fd = (f(eta + h) - f(eta - h)) / (2.0 * h);
    EXPECT_NEAR(f.derivative(eta), fd, 1e-5 * std::max(1.0, std::abs(fd)));
  }
}

TEST(Pricing, OptimizerAgreesWithClosedForm) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < 30; ++i) {
    const GammaCompensator c(0.2 + 2.0 * u(rng), 0.5 + u(rng), 1.0 + 4.0 * u(rng));
    const auto m = market(0.05 + 0.5 * u(rng), 1.0 + 4.0 * u(rng));
    const double closed = eta_star_one_model(c, m);
    if (closed > 0.9) continue;
    const auto r = optimize_eta(ModelEnsemble::single(c), m);
    EXPECT_NEAR(r.eta_star, closed, 1e-7);
    EXPECT_FALSE(r.multimodal);
  }
  const auto closed = eta_star_one_model_result(kC, market(0.01, 5.0));
  EXPECT_NEAR(optimize_eta(ModelEnsemble::single(kC), market(0.01, 5.0)).eta_star, closed.eta_star, 1e-7);
}

TEST(Pricing, OneModelObjectiveConcave) {
  const CounterpartyObjective f(ModelEnsemble::single(kC), market(0.01, 5.0));
  for (int i = 1; i < 99; ++i) {
    const double eta = i / 100.0, h = 1e-2;
    EXPECT_LE(f(eta + h) + f(eta - h) - 2.0 * f(eta), 1e-9 * std::abs(f(eta)));
  }
}

TEST(Pricing, SmallThetaGivesSmallLoading) {
  EXPECT_EQ(eta_star_one_model(kC, market(1e-300, 5.0)), 0.0);
  EXPECT_LT(eta_star_one_model(kC, market(1e-9, 5.0)), 1e-6);
}

TEST(Pricing, ThetaSweepNondecreasing) {
  const ModelEnsemble e({k20, k41, kC}, kC, {0.3, 0.3, 0.4}, 0.0);
  const auto sweep = theta_sweep(e, market(0.01, 5.0), {0.001, 0.002, 0.005, 0.01, 0.02, 0.05});
  for (std::size_t i = 1; i < sweep.size(); ++i) EXPECT_GE(sweep[i].second, sweep[i - 1].second - 1e-9);
  EXPECT_GT(sweep.back().second, sweep.front().second);
}

TEST(Pricing, BoundaryMaximumAtEtaMax) {
  // the loading wants to exceed the bracket
  const auto r = optimize_eta(ModelEnsemble::single(GammaCompensator(1.0, 1.0, 1.0)), market(20.0), 0.5);
  EXPECT_EQ(r.eta_star, 0.5);
}
