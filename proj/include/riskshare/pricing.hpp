#pragma once

// Counterparty's choice of safety loading: maximize E^{P_C}[Y_T^eta] over eta in [0, eta_max].

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "riskshare/controls.hpp"
#include "riskshare/special_functions.hpp"

namespace riskshare {

/// E^{P_C}[Y_T^eta] as a function of eta. The cross integrals I2(C, k) do not depend
/// on eta, so they are computed once.
class CounterpartyObjective {
 public:
  template <LossModel M>
  CounterpartyObjective(const BasicEnsemble<M>& ens, const MarketParams& market)
      : market_(market) {
    market_.validate();
    const auto& c = ens.counterparty();
    lambda_c_ = c.rate();
    mean_loss_c_ = c.mean_loss_rate();
    for (std::size_t k = 0; k < ens.size(); ++k) {
      if (ens.weight(k) == 0.0) continue;
      weights_.push_back(ens.weight(k));
      rates_.push_back(ens.model(k).rate());
      i2_.push_back(cross_integral_2(c, ens.model(k), ens.counterparty_index(), k));
    }
  }

  /// y + T eta int xi nu_C - (1/theta) sum_k pi_k l_k(T) [1 - exp(T eta (lambda_C - (1+eta) I2))]
  double operator()(double eta) const {
    const double big_t = market_.horizon;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double a = 1.0 + eta;
      const double g = rates_[i] - 2.0 * a * lambda_c_ + a * a * i2_[i];
      acc += weights_[i] * std::exp(big_t * g) * std::expm1(big_t * eta * (lambda_c_ - a * i2_[i]));
    }
    return market_.initial_wealth_counterparty + big_t * eta * mean_loss_c_ +
           acc / market_.ambiguity_penalty;
  }

  /// d/d eta of the objective.
  double derivative(double eta) const {
    const double big_t = market_.horizon;
    const double a = 1.0 + eta;
    double acc = 0.0;
    for (std::size_t i = 0; i < weights_.size(); ++i) {
      const double g = rates_[i] - 2.0 * a * lambda_c_ + a * a * i2_[i];
      const double e = rates_[i] - (2.0 + eta) * lambda_c_ + a * i2_[i];
      const double dg = -2.0 * lambda_c_ + 2.0 * a * i2_[i];
      const double de = i2_[i] - lambda_c_;
      acc += weights_[i] * (dg * std::exp(big_t * g) - de * std::exp(big_t * e));
    }
    return big_t * mean_loss_c_ - big_t * acc / market_.ambiguity_penalty;
  }

  const MarketParams& market() const noexcept { return market_; }

 private:
  MarketParams market_;
  double lambda_c_ = 0.0;
  double mean_loss_c_ = 0.0;
  std::vector<double> weights_;
  std::vector<double> rates_;
  std::vector<double> i2_;
};

template <LossModel M>
double expected_counterparty_wealth(const BasicEnsemble<M>& ens, const MarketParams& market,
                                    double eta) {
  return CounterpartyObjective(ens, market)(eta);
}

struct PricingResult {
  double eta_star = 0.0;
  double expected_wealth = 0.0;
  std::pair<double, double> bracket{0.0, 0.0};
  int iterations = 0;
  std::string method;  // "golden-section" or "closed-form-lambert-w"
  bool multimodal = false;
  std::vector<std::pair<double, double>> scan;  // (eta, objective)
};

inline constexpr std::size_t kPricingScanPoints = 64;
inline constexpr double kPricingAbscissaTolerance = 1e-8;

namespace detail {

/// Largest eta_hi <= eta_max with a finite objective, halving from eta_max.
inline double finite_upper(const CounterpartyObjective& f, double eta_max) {
  double hi = eta_max;
  for (int i = 0; i < 200; ++i) {
    if (std::isfinite(f(hi)) && std::isfinite(f.derivative(hi))) break;
    hi *= 0.5;
  }
  if (hi != eta_max) {
    std::ostringstream os;
    os << "objective overflows at eta = " << eta_max << "; search bracket shrunk to [0, " << hi
       << "]";
    warn(os.str());
  }
  return hi;
}

}  // namespace detail

/// Scan on 64 points, golden-section on the cell around the best scan point, then
/// a sign-change bisection on the analytic derivative to polish the abscissa.
inline PricingResult optimize_eta(const CounterpartyObjective& f, double eta_max = 1.0) {
  if (!(eta_max > 0.0) || !std::isfinite(eta_max)) throw DomainError("eta_max must be positive");
  const double hi = detail::finite_upper(f, eta_max);

  PricingResult r;
  r.method = "golden-section";
  r.bracket = {0.0, hi};
  const std::size_t n = kPricingScanPoints;
  r.scan.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double eta = i + 1 == n ? hi : hi * static_cast<double>(i) / static_cast<double>(n - 1);
    r.scan.emplace_back(eta, f(eta));
  }

  std::size_t local_maxima = 0;
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double v = r.scan[i].second;
    const bool left = i == 0 || v > r.scan[i - 1].second;
    const bool right = i + 1 == n || v >= r.scan[i + 1].second;
    if (left && right) ++local_maxima;
    if (v > r.scan[best].second) best = i;
  }
  r.multimodal = local_maxima > 1;
  if (r.multimodal) warn("counterparty objective has several local maxima on the eta scan");

  double a = r.scan[best == 0 ? 0 : best - 1].first;
  double b = r.scan[std::min(best + 1, n - 1)].first;

  constexpr double inv_phi = 0.6180339887498949;
  double c = b - inv_phi * (b - a);
  double d = a + inv_phi * (b - a);
  double fc = f(c);
  double fd = f(d);
  while (b - a > kPricingAbscissaTolerance && r.iterations < 500) {
    ++r.iterations;
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = f(d);
    }
  }
  double eta = 0.5 * (a + b);

  // polish: the derivative changes sign from + to - across an interior maximum
  double lo = std::max(0.0, a - kPricingAbscissaTolerance);
  double up = std::min(hi, b + kPricingAbscissaTolerance);
  if (f.derivative(lo) > 0.0 && f.derivative(up) < 0.0) {
    for (int i = 0; i < 200 && up - lo > 0.0; ++i) {
      const double mid = 0.5 * (lo + up);
      if (!(mid > lo && mid < up)) break;
      (f.derivative(mid) > 0.0 ? lo : up) = mid;
      ++r.iterations;
    }
    eta = 0.5 * (lo + up);
  } else if (best == 0 && f.derivative(0.0) <= 0.0) {
    eta = 0.0;
  } else if (best + 1 == n && f.derivative(hi) >= 0.0) {
    eta = hi;
  }
  r.eta_star = std::clamp(eta, 0.0, hi);
  r.expected_wealth = f(r.eta_star);
  return r;
}

template <LossModel M>
PricingResult optimize_eta(const BasicEnsemble<M>& ens, const MarketParams& market,
                           double eta_max = 1.0) {
  return optimize_eta(CounterpartyObjective(ens, market), eta_max);
}

/// One model with rate lambda and mean severity mu: eta* = sqrt(W(mu^2 theta^2 lambda T / 2) / (2 lambda T)).
template <LossModel M>
double eta_star_one_model(const M& model, const MarketParams& market) {
  market.validate();
  const double lambda = model.rate();
  const double mu = model.mean_loss_rate() / lambda;
  const double theta = market.ambiguity_penalty;
  const double big_t = market.horizon;
  const double arg = 0.5 * mu * mu * theta * theta * lambda * big_t;
  return std::sqrt(lambert_w0(arg) / (2.0 * lambda * big_t));
}

template <LossModel M>
PricingResult eta_star_one_model_result(const M& model, const MarketParams& market) {
  PricingResult r;
  r.method = "closed-form-lambert-w";
  r.eta_star = eta_star_one_model(model, market);
  r.bracket = {r.eta_star, r.eta_star};
  r.expected_wealth = expected_counterparty_wealth(BasicEnsemble<M>::single(model), market, r.eta_star);
  return r;
}

/// (theta, eta*) pairs, one optimization per theta.
template <LossModel M>
std::vector<std::pair<double, double>> theta_sweep(const BasicEnsemble<M>& ens, MarketParams market,
                                                   const std::vector<double>& thetas,
                                                   double eta_max = 1.0) {
  std::vector<std::pair<double, double>> out;
  for (double th : thetas) {
    market.ambiguity_penalty = th;
    out.emplace_back(th, optimize_eta(ens, market, eta_max).eta_star);
  }
  return out;
}

}  // namespace riskshare
