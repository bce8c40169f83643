#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "riskshare/verify.hpp"

using namespace riskshare;

namespace {

const GammaCompensator kC(0.52, 0.58, 654.98);
const GammaCompensator k20(0.51, 0.56, 697.68);
const GammaCompensator k41(0.54, 0.57, 678.55);

MarketParams market() {
  MarketParams m;
  m.premium_rate = 200.0;
  m.safety_loading = 0.12;
  m.ambiguity_penalty = 0.01;
  m.initial_wealth_insurer = 1000.0;
  m.horizon = 5.0;
  return m;
}

const RiskSharingProblem& problem() {
  static const RiskSharingProblem p(ModelEnsemble({k20, k41}, kC, {0.5, 0.3}, 0.2), market());
  return p;
}

const std::vector<double> kZ{1.3, 0.7, 1.1};
constexpr double kT = 2.0;

// (1/theta) sum pi_k z_k l_k(T - t) I2(C, k) by quadrature
double weighted_i2() {
  const auto& p = problem();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k)
    acc += p.ensemble().weight(k) * kZ[k] * p.ell(k, 5.0 - kT) *
           cross_integral_2_quadrature(kC, p.ensemble().model(k));
  return acc / p.theta();
}

}  // namespace

TEST(Verify, OptimalAlphaAndBetaGiveZero) {
  EXPECT_LE(std::abs(residual_beta_fixed(AlphaPerturbation::optimal(), kT, 0.0, kZ, problem())), 1e-8);
  EXPECT_EQ(residual_alpha_fixed(BetaPerturbation::optimal(), kT, 0.0, kZ, problem()), 0.0);
}

TEST(Verify, AnyAdmissibleAlphaGivesZeroAgainstBetaStar) {
  for (const auto& a : {AlphaPerturbation::indicator_bump(100.0, 1000.0), AlphaPerturbation::zero(),
                        AlphaPerturbation::proportional(0.4),
                        AlphaPerturbation::gamma_bump(5e4, 1.5, 300.0)})
    EXPECT_LE(std::abs(residual_beta_fixed(a, kT, 0.0, kZ, problem())), 1e-8) << a.describe();
}

TEST(Verify, ScaledBetaMatchesClosedForm) {
  const double expected = 0.5 * std::pow(0.1 * 1.12, 2) * weighted_i2();
  const double r = residual_alpha_fixed(BetaPerturbation::scaled(1.1), kT, 0.0, kZ, problem());
  EXPECT_NEAR(r, expected, 1e-8 * expected);
}

TEST(Verify, GeneratorWithOptimalAlphaMatchesReducedForm) {
  const auto& p = problem();
  for (const auto& b : {BetaPerturbation::scaled(1.1), BetaPerturbation::scaled(0.6),
                        BetaPerturbation::indicator_bump(0.5, 800.0),
                        BetaPerturbation::gamma_bump(0.2, 1.0, 500.0)}) {
    const double full = generator(
        p, kT, 0.0, kZ, [&](double xi) { return p.alpha_star(kT, xi, kZ); },
        [&](double xi) { return b(p, xi); }, b.breaks());
    const double reduced = residual_alpha_fixed(b, kT, 0.0, kZ, p);
    EXPECT_NEAR(full, reduced, 1e-7 * std::max(1.0, reduced)) << b.describe();
    EXPECT_GT(reduced, 0.0);
  }
}

TEST(Verify, ResidualConvexInScale) {
  // r(s) is a quadratic in s - 1 with minimum 0 at s = 1
  const auto& p = problem();
  std::vector<double> r;
  for (double s : {0.5, 0.75, 1.0, 1.25, 1.5})
    r.push_back(residual_alpha_fixed(BetaPerturbation::scaled(s), kT, 0.0, kZ, p));
  EXPECT_EQ(r[2], 0.0);
  for (std::size_t i = 1; i + 1 < r.size(); ++i) EXPECT_GE(r[i - 1] + r[i + 1] - 2.0 * r[i], -1e-9);
  EXPECT_NEAR(r[0], r[4], 1e-9 * r[0]);
  EXPECT_NEAR(r[0], 4.0 * r[1], 1e-9 * r[0]);
}

TEST(Verify, HeavyBetaBumpIsRejected) {
  EXPECT_THROW(residual_alpha_fixed(BetaPerturbation::gamma_bump(0.1, 0.2, 500.0), kT, 0.0, kZ, problem()),
               AdmissibilityViolation);
  EXPECT_THROW(residual_alpha_fixed(BetaPerturbation::gamma_bump(0.1, 1.0, 2000.0), kT, 0.0, kZ, problem()),
               AdmissibilityViolation);
  EXPECT_THROW(residual_alpha_fixed(BetaPerturbation::scaled(-1.0), kT, 0.0, kZ, problem()),
               AdmissibilityViolation);
  EXPECT_THROW(residual_beta_fixed(AlphaPerturbation::gamma_bump(1.0, 0.5, 100.0), kT, 0.0, kZ, problem()),
               AdmissibilityViolation);
}

TEST(Verify, ScaledDistance) {
  EXPECT_NEAR(scaled_distance(BetaPerturbation::scaled(1.2), problem()), 0.2, 1e-9);
  EXPECT_EQ(scaled_distance(BetaPerturbation::optimal(), problem()), 0.0);
}

TEST(Verify, RandomizedRunPasses) {
  const auto rep = run_verification(problem(), 20, 99);
  EXPECT_EQ(rep.entries.size(), 40u);
  for (const auto& e : rep.entries) EXPECT_TRUE(e.pass) << e.control << " " << e.description << " " << e.residual;
}

TEST(Verify, StateValidated) {
  EXPECT_THROW(residual_beta_fixed(AlphaPerturbation::zero(), 6.0, 0.0, kZ, problem()), DomainError);
  EXPECT_THROW(residual_beta_fixed(AlphaPerturbation::zero(), 1.0, 0.0, std::vector<double>{1.0}, problem()),
               DomainError);
}
