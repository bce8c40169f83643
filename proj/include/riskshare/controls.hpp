#pragma once

// Optimal controls of the insurer's robust risk-sharing problem:
//   alpha*(t, xi, z) = xi - (1/theta) sum_k pi_k z_k l_k(T-t) [(1+eta) v_C/v_k - 1]
//   beta*(xi)        = (1+eta) v_C(xi)
//   J(t, x, z)       = x + (1/2theta) sum_k pi_k z_k l_k(T-t) - 1/(2theta)
//                        - [(1+eta) int xi nu_C - c] (T - t)
// with growth factors l_k(t) = exp(t g_k),
//   g_k = int [1 - (1+eta) v_C/v_k]^2 nu_k = lambda_k - 2(1+eta) lambda_C + (1+eta)^2 I2(C,k).

#include <cmath>
#include <concepts>
#include <cstddef>
#include <span>
#include <sstream>
#include <vector>

#include "riskshare/compensators.hpp"
#include "riskshare/error.hpp"

namespace riskshare {

struct MarketParams {
  double premium_rate = 0.0;                 // c
  double safety_loading = 0.0;               // eta
  double ambiguity_penalty = 1.0;            // theta
  double initial_wealth_insurer = 0.0;       // x
  double initial_wealth_counterparty = 0.0;  // y
  double horizon = 1.0;                      // T, years

  void validate() const {
    auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(premium_rate) || !finite(safety_loading) || !finite(ambiguity_penalty) ||
        !finite(initial_wealth_insurer) || !finite(initial_wealth_counterparty) ||
        !finite(horizon))
      throw ConfigError("market parameters must be finite");
    if (!(ambiguity_penalty > 0.0)) throw ConfigError("ambiguity penalty theta must be > 0");
    if (!(horizon > 0.0)) throw ConfigError("horizon T must be > 0");
    if (!(safety_loading >= 0.0)) throw ConfigError("safety loading eta must be >= 0");
  }

  /// Premium viability c < (1+eta) int xi nu_C: ceding everything is not optimal.
  void validate_viability(double counterparty_mean_loss_rate) const {
    const double full_cession = (1.0 + safety_loading) * counterparty_mean_loss_rate;
    if (!(premium_rate < full_cession)) {
      std::ostringstream os;
      os.precision(15);
      os << "premium rate c = " << premium_rate
         << " is not below the full-cession premium (1+eta) int xi nu_C = " << full_cession;
      throw ConfigError(os.str());
    }
  }
};

/// Exponents g_k with l_k(t) = exp(t g_k), one per ensemble index.
struct GrowthFactors {
  std::vector<double> exponents;

  double operator()(std::size_t k, double t) const { return std::exp(t * exponents.at(k)); }
};

/// g_k = lambda_k - 2(1+eta) lambda_C + (1+eta)^2 I2(C, k).
template <LossModel M>
double growth_exponent(const M& k, const M& c, double eta) {
  const double a = 1.0 + eta;
  return k.rate() - 2.0 * a * c.rate() + a * a * cross_integral_2(c, k);
}

/// Ensemble bound to market parameters, with the per-index constants of the
/// optimal strategy precomputed. Construction checks the square-integrability
/// of every v_C^2/v_k and premium viability.
template <LossModel M>
class BasicRiskSharingProblem {
 public:
  using ensemble_type = BasicEnsemble<M>;

  BasicRiskSharingProblem(ensemble_type ensemble, MarketParams market,
                          bool require_viability = true)
      : ensemble_(std::move(ensemble)), market_(market) {
    market_.validate();
    if (require_viability) market_.validate_viability(ensemble_.counterparty().mean_loss_rate());
    if constexpr (std::same_as<M, GammaCompensator>) require(check_assumption_1(ensemble_));

    const auto n = ensemble_.size();
    const auto& c = ensemble_.counterparty();
    const double a = 1.0 + market_.safety_loading;
    lambda_c_ = c.rate();
    mean_loss_rate_c_ = c.mean_loss_rate();
    i2_.resize(n);
    growth_.resize(n);
    drift_.resize(n);
    kappa_.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& mk = ensemble_.model(k);
      i2_[k] = cross_integral_2(c, mk, ensemble_.counterparty_index(), k);
      growth_[k] = mk.rate() - 2.0 * a * lambda_c_ + a * a * i2_[k];
      drift_[k] = mk.rate() - a * lambda_c_;
      kappa_[k] = a * i2_[k] - lambda_c_;
      if (market_.horizon * growth_[k] > 700.0) {
        std::ostringstream os;
        os << "growth factor l_" << ensemble_.label(k) << "(T) = exp(" << market_.horizon * growth_[k]
           << ") overflows double precision";
        warn(os.str());
      }
    }
  }

  const ensemble_type& ensemble() const noexcept { return ensemble_; }
  const MarketParams& market() const noexcept { return market_; }
  std::size_t size() const noexcept { return ensemble_.size(); }

  double eta() const noexcept { return market_.safety_loading; }
  double theta() const noexcept { return market_.ambiguity_penalty; }
  double horizon() const noexcept { return market_.horizon; }

  double lambda_c() const noexcept { return lambda_c_; }
  /// int xi nu_C(dxi)
  double mean_loss_rate_c() const noexcept { return mean_loss_rate_c_; }
  /// c - (1+eta) int xi nu_C: the deterministic drift of X* under Q*.
  double net_premium_drift() const noexcept {
    return market_.premium_rate - (1.0 + eta()) * mean_loss_rate_c_;
  }

  double i2(std::size_t k) const { return i2_.at(k); }
  double growth_exponent(std::size_t k) const { return growth_.at(k); }
  /// lambda_k - (1+eta) lambda_C: drift of ln Z*_k between jumps.
  double log_z_drift(std::size_t k) const { return drift_.at(k); }
  /// (1+eta) I2(C,k) - lambda_C = int [(1+eta) v_C/v_k - 1] nu_C.
  double kappa(std::size_t k) const { return kappa_.at(k); }

  GrowthFactors growth_factors() const { return {growth_}; }
  double ell(std::size_t k, double t) const { return std::exp(t * growth_.at(k)); }

  /// ln[(1+eta) v_C(xi)/v_k(xi)], the jump of ln Z*_k at a loss of size xi.
  double log_jump_ratio(std::size_t k, double xi) const {
    return std::log1p(eta()) + ensemble_.counterparty().log_density(xi) -
           ensemble_.model(k).log_density(xi);
  }

  double alpha_star(double t, double xi, std::span<const double> z) const {
    check_time(t);
    check_z(z);
    if (!(xi > 0.0)) throw DomainError("alpha_star: loss size must be positive");
    const double tau = horizon() - t;
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const double w = ensemble_.weight(k);
      if (w == 0.0) continue;
      acc += w * z[k] * std::exp(tau * growth_[k]) * std::expm1(log_jump_ratio(k, xi));
    }
    return xi - acc / theta();
  }

  double beta_star(double xi) const {
    return (1.0 + eta()) * std::exp(density_log(ensemble_.counterparty(), xi));
  }

  double value_function(double t, double x, std::span<const double> z) const {
    check_time(t);
    check_z(z);
    const double tau = horizon() - t;
    double acc = 0.0;
    for (std::size_t k = 0; k < size(); ++k) {
      const double w = ensemble_.weight(k);
      if (w == 0.0) continue;
      acc += w * z[k] * std::exp(tau * growth_[k]);
    }
    return x + (acc - 1.0) / (2.0 * theta()) + net_premium_drift() * tau;
  }

  void check_time(double t) const {
    if (!(t >= 0.0 && t <= horizon())) {
      std::ostringstream os;
      os << "time " << t << " outside [0, T = " << horizon() << "]";
      throw DomainError(os.str());
    }
  }

  void check_z(std::span<const double> z) const {
    if (z.size() != size()) {
      std::ostringstream os;
      os << "state vector z has " << z.size() << " entries, ensemble has " << size();
      throw DomainError(os.str());
    }
    for (double v : z)
      if (!(v > 0.0) || !std::isfinite(v))
        throw DomainError("state vector z must be strictly positive");
  }

 private:
  ensemble_type ensemble_;
  MarketParams market_;
  double lambda_c_ = 0.0;
  double mean_loss_rate_c_ = 0.0;
  std::vector<double> i2_;
  std::vector<double> growth_;
  std::vector<double> drift_;
  std::vector<double> kappa_;
};

using RiskSharingProblem = BasicRiskSharingProblem<GammaCompensator>;

// Free-function forms over (ensemble, market).

inline double alpha_star(double t, double xi, std::span<const double> z,
                         const ModelEnsemble& ensemble, const MarketParams& market) {
  return RiskSharingProblem(ensemble, market).alpha_star(t, xi, z);
}

inline double beta_star(double xi, const GammaCompensator& c, double eta) {
  return (1.0 + eta) * std::exp(density_log(c, xi));
}

inline double value_function(double t, double x, std::span<const double> z,
                             const ModelEnsemble& ensemble, const MarketParams& market) {
  return RiskSharingProblem(ensemble, market).value_function(t, x, z);
}

inline GrowthFactors growth_factors(const ModelEnsemble& ensemble, double eta) {
  GrowthFactors g;
  for (std::size_t k = 0; k < ensemble.size(); ++k)
    g.exponents.push_back(growth_exponent(ensemble.model(k), ensemble.counterparty(), eta));
  return g;
}

}  // namespace riskshare
