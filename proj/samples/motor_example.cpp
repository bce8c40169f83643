// Analytic moments for the single-model motor insurance example, with the
// arrival rate chosen so that (1+eta) int xi nu_C - c = 27.

#include <iomanip>
#include <iostream>

#include "riskshare/riskshare.hpp"

int main() {
  using namespace riskshare;
  const double eta = 0.12, c = 5550.0, shape = 0.58, scale = 654.98;
  const double rate = (c + 27.0) / ((1.0 + eta) * shape * scale);

  MarketParams market;
  market.premium_rate = c;
  market.safety_loading = eta;
  market.ambiguity_penalty = 0.01;
  market.initial_wealth_insurer = 5000.0;
  market.horizon = 5.0;

  const RiskSharingProblem p(ModelEnsemble::single(GammaCompensator(rate, shape, scale)), market);
  const double t = market.horizon;
  const auto pc = Measure::reference(p.ensemble().counterparty_index());
  const auto q = Measure::q_star();

  std::cout << std::fixed << std::setprecision(1);
  std::cout << "lambda_C                 " << std::setprecision(6) << rate << std::setprecision(1) << '\n';
  std::cout << "E^{P_C}[X^CL_T]          " << mean_X_cl(p, pc, t) << '\n';
  std::cout << "Var^{P_C}(X^CL_T)        " << var_X_cl(p, pc, t) << '\n';
  std::cout << "E^{Q*}[X^CL_T]           " << mean_X_cl(p, q, t) << '\n';
  std::cout << "Var^{Q*}(X^CL_T)         " << var_X_cl(p, q, t) << '\n';
  std::cout << "E^{Q*}[X*_T]             " << mean_X(p, q, t) << '\n';
  for (double theta : {0.005, 0.01, 0.02}) {
    market.ambiguity_penalty = theta;
    const RiskSharingProblem pt(p.ensemble(), market);
    std::cout << "Var^{Q*}(X*_T), theta=" << std::setprecision(3) << theta << "  " << std::setprecision(6) << var_X(pt, q, t)
              << std::setprecision(1) << "  (one-model ensemble)\n";
  }
}
