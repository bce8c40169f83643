#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "riskshare/moments.hpp"

using namespace riskshare;

namespace {

const double kBenchmarkRate = 5577.0 / (1.12 * 0.58 * 654.98);
const GammaCompensator kC(0.52, 0.58, 654.98);
const GammaCompensator k20(0.51, 0.56, 697.68);
const GammaCompensator k41(0.54, 0.57, 678.55);

MarketParams market(double theta = 0.01) {
  MarketParams m;
  m.premium_rate = 200.0;
  m.safety_loading = 0.12;
  m.ambiguity_penalty = theta;
  m.initial_wealth_insurer = 1000.0;
  m.initial_wealth_counterparty = 50.0;
  m.horizon = 5.0;
  return m;
}

MarketParams benchmark_market(double theta = 0.01) {
  MarketParams m;
  m.premium_rate = 5550.0;
  m.safety_loading = 0.12;
  m.ambiguity_penalty = theta;
  m.initial_wealth_insurer = 5000.0;
  m.horizon = 5.0;
  return m;
}

RiskSharingProblem three_model(double theta = 0.01) {
  return RiskSharingProblem(ModelEnsemble({k20, k41, kC}, kC, {0.3, 0.3, 0.4}, 0.0), market(theta));
}

}  // namespace

TEST(Benchmark, ClassicalMomentsUnderCounterpartyModel) {
  const RiskSharingProblem p(ModelEnsemble::single(GammaCompensator(kBenchmarkRate, 0.58, 654.98)),
                             benchmark_market());
  const auto pc = Measure::reference(0);
  EXPECT_NEAR(mean_X_cl(p, pc, 5.0), 7852.7, 0.5);
  EXPECT_NEAR(var_X_cl(p, pc, 5.0) / 25780268.0, 1.0, 5e-3);
  EXPECT_NEAR(mean_X(p, Measure::q_star(), 5.0), 4865.0, 0.5);
  EXPECT_NEAR(var_X_cl(p, Measure::q_star(), 5.0) / var_X_cl(p, pc, 5.0), 1.12, 1e-12);
}

TEST(Benchmark, AmbiguityVarianceScalesAsInverseThetaSquared) {
  const auto e = ModelEnsemble::single(GammaCompensator(kBenchmarkRate, 0.58, 654.98));
  const double v1 = var_X(RiskSharingProblem(e, benchmark_market(0.005)), Measure::q_star(), 5.0);
  const double v2 = var_X(RiskSharingProblem(e, benchmark_market(0.01)), Measure::q_star(), 5.0);
  const double v3 = var_X(RiskSharingProblem(e, benchmark_market(0.02)), Measure::q_star(), 5.0);
  EXPECT_NEAR(v1 / v2, 4.0, 1e-12);
  EXPECT_NEAR(v2 / v3, 4.0, 1e-12);
}

TEST(MeanZ, MeasureSpecificValues) {
  const auto p = three_model();
  const double t = 2.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double gk = p.ensemble().model(k).rate() - 2.0 * 1.12 * kC.rate() +
                      1.12 * 1.12 * cross_integral_2_quadrature(kC, p.ensemble().model(k));
    EXPECT_NEAR(mean_Z(p, Measure::q_star(), k, t), std::exp(gk * t), 1e-9);
    EXPECT_DOUBLE_EQ(mean_Z(p, Measure::reference(k), k, t), 1.0);
  }
  // Z_C is a P_C martingale, and so is Z_k under P_C when model k equals C.
  EXPECT_NEAR(mean_Z(p, Measure::reference(3), 3, t), 1.0, 1e-15);
  EXPECT_NEAR(mean_Z(p, Measure::reference(3), 2, t), 1.0, 1e-12);
  EXPECT_THROW(mean_Z(p, Measure::reference(0), 1, t), UsageError);
  EXPECT_THROW(mean_Z(p, Measure::q_star(), 9, t), DomainError);
  EXPECT_THROW(mean_Z(p, Measure::q_star(), 0, 6.0), DomainError);
}

TEST(MeanZ, InitialValueIsOne) {
  const auto p = three_model();
  for (std::size_t k = 0; k < p.size(); ++k) {
    EXPECT_DOUBLE_EQ(mean_Z(p, Measure::q_star(), k, 0.0), 1.0);
    EXPECT_DOUBLE_EQ(mean_Z(p, Measure::reference(3), k, 0.0), 1.0);
  }
}

TEST(CovZ, QStarMatchesQuadratureOfCompoundPoissonMoment) {
  const auto p = three_model();
  const double t = 1.5, a = 1.12;
  for (std::size_t j = 0; j < p.size(); ++j)
    for (std::size_t k = 0; k < p.size(); ++k) {
      const auto& mj = p.ensemble().model(j);
      const auto& mk = p.ensemble().model(k);
      const double i3 = cross_integral_3_quadrature(kC, mj, mk);
      const double second = std::exp(t * (mj.rate() + mk.rate() - 3.0 * a * kC.rate() + a * a * a * i3));
      const double expected = second - mean_Z(p, Measure::q_star(), j, t) * mean_Z(p, Measure::q_star(), k, t);
      EXPECT_NEAR(cov_Z(p, Measure::q_star(), j, k, t), expected, 1e-8 * std::max(1.0, std::abs(second)));
      EXPECT_NEAR(cov_Z(p, Measure::q_star(), j, k, t), cov_Z(p, Measure::q_star(), k, j, t),
                  1e-12 * std::abs(second));
    }
}

TEST(CovZ, MatrixIsPositiveSemidefiniteOnDiagonal) {
  const auto p = three_model();
  const auto s = cov_Z_matrix(p, Measure::q_star(), 3.0);
  for (std::size_t j = 0; j < s.size(); ++j) {
    EXPECT_GE(s[j][j], 0.0);
    for (std::size_t k = 0; k < s.size(); ++k)
      EXPECT_LE(s[j][k] * s[j][k], s[j][j] * s[k][k] * (1.0 + 1e-10));
  }
}

TEST(VarX, ZeroAtTime0AndQuadraticForm) {
  const auto p = three_model();
  EXPECT_NEAR(var_X(p, Measure::q_star(), 0.0), 0.0, 1e-12);
  const double t = 2.5;
  const auto w = x_loadings(p, t);
  const auto s = cov_Z_matrix(p, Measure::q_star(), t);
  double acc = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j)
    for (std::size_t k = 0; k < w.size(); ++k) acc += w[j] * w[k] * s[j][k];
  EXPECT_NEAR(var_X_Qstar(p, t), acc / 1e-4, 1e-10 * acc / 1e-4);
}

TEST(MeanX, QStarIsDeterministicDrift) {
  const auto p = three_model();
  EXPECT_NEAR(mean_X(p, Measure::q_star(), 2.0), 1000.0 + 2.0 * (200.0 - 1.12 * kC.mean_loss_rate()), 1e-9);
  EXPECT_THROW(mean_X(p, Measure::reference(1), 2.0), UsageError);
}

TEST(MeanY, QStarMartingaleAndConservationUnderPC) {
  const auto p = three_model();
  const auto pc = Measure::reference(p.ensemble().counterparty_index());
  for (double t : {0.0, 1.0, 5.0}) {
    EXPECT_DOUBLE_EQ(mean_Y(p, Measure::q_star(), t), 50.0);
    // X* + Y = x + y + c t - sum xi: total wealth does not see the sharing rule
    EXPECT_NEAR(mean_X(p, pc, t) + mean_Y(p, t), 1050.0 + t * (200.0 - kC.mean_loss_rate()), 1e-8);
  }
}

TEST(ClassicalWealth, MeasureDependentLossLaw) {
  const auto p = three_model();
  EXPECT_NEAR(mean_X_cl(p, Measure::reference(0), 2.0), 1000.0 + 2.0 * (200.0 - k20.mean_loss_rate()), 1e-9);
  EXPECT_NEAR(var_X_cl(p, Measure::reference(1), 2.0), 2.0 * k41.second_moment_rate(), 1e-6);
  EXPECT_NEAR(var_X_cl(p, Measure::q_star(), 2.0), 2.0 * 1.12 * kC.second_moment_rate(), 1e-6);
}

TEST(OneModel, TableAgreesWithGeneralFormulas) {
  const auto m = market();
  const RiskSharingProblem p(ModelEnsemble::single(kC), m);
  const auto pc = Measure::reference(0);
  const auto q = Measure::q_star();
  for (double t : {0.0, 1.0, 3.7, 5.0}) {
    const auto r = one_model_moments(t, p.ensemble(), m);
    auto close = [](double a, double b) { return std::abs(a - b) <= 1e-10 * std::max(1.0, std::abs(b)); };
    EXPECT_TRUE(close(r.mean_Z_Q, mean_Z(p, q, 0, t)));
    EXPECT_TRUE(close(r.mean_Z_P, mean_Z(p, pc, 0, t)));
    EXPECT_TRUE(close(r.mean_X_Q, mean_X(p, q, t)));
    EXPECT_TRUE(close(r.mean_X_P, mean_X(p, pc, t)));
    EXPECT_TRUE(close(r.var_Z_Q, cov_Z(p, q, 0, 0, t)));
    EXPECT_TRUE(close(r.var_Z_P, cov_Z(p, pc, 0, 0, t)));
    EXPECT_TRUE(close(r.var_X_Q, var_X(p, q, t)));
    EXPECT_TRUE(close(r.var_X_P, var_X(p, pc, t)));
    if (t > 0.0) {
      EXPECT_NEAR(r.cov_XZ_Q / std::sqrt(r.var_X_Q * r.var_Z_Q), -1.0, 1e-12);
      EXPECT_NEAR(r.cov_XZ_P / std::sqrt(r.var_X_P * r.var_Z_P), -1.0, 1e-12);
    }
  }
}

TEST(OneModel, RejectsMultiModelEnsemble) {
  EXPECT_THROW(one_model_moments(1.0, three_model().ensemble(), market()), UsageError);
}

TEST(MomentReport, FillsOnlyAvailableEntries) {
  const auto p = three_model();
  const auto r = moment_report(p, Measure::reference(0), 1.0);
  EXPECT_EQ(r.measure, "P_1");
  EXPECT_TRUE(r.mean_Z[0].has_value());
  EXPECT_FALSE(r.mean_Z[1].has_value());
  EXPECT_FALSE(r.var_X.has_value());
  const auto q = moment_report(p, Measure::q_star(), 1.0);
  EXPECT_EQ(q.measure, "Q*");
  EXPECT_TRUE(q.var_X.has_value());
  EXPECT_TRUE(q.cov_Z.has_value());
}
