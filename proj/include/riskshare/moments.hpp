#pragma once

// Analytic moments of Z*, X*, X^CL and Y under Q*, P_C and (for Z*_k only) P_k.

#include <cmath>
#include <cstddef>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riskshare/controls.hpp"
#include "riskshare/measure.hpp"

namespace riskshare {

namespace detail {

inline double exp_or_warn(double arg, const char* what) {
  const double v = std::exp(arg);
  if (std::isinf(v)) {
    std::ostringstream os;
    os << what << ": exp(" << arg << ") overflows; returning +inf";
    warn(os.str());
  }
  return v;
}

template <LossModel M>
void check_measure(const BasicRiskSharingProblem<M>& p, const Measure& m) {
  if (!m.is_q_star() && m.index() >= p.size()) throw DomainError("measure index out of range");
}

template <LossModel M>
bool is_counterparty(const BasicRiskSharingProblem<M>& p, const Measure& m) {
  return !m.is_q_star() && m.index() == p.ensemble().counterparty_index();
}

template <LossModel M>
[[noreturn]] void not_available(const BasicRiskSharingProblem<M>& p, const Measure& m,
                                const char* what) {
  std::ostringstream os;
  os << what << " has no closed form under P_" << p.ensemble().label(m.index())
     << "; use Q*, P_C, or Monte Carlo";
  throw UsageError(os.str());
}

/// t * [lambda_k - (2+eta) lambda_C + (1+eta) I2(C,k)]: log E^{P_C}[Z*_{k,t}].
template <LossModel M>
double log_mean_z_counterparty(const BasicRiskSharingProblem<M>& p, std::size_t k, double t) {
  const double eta = p.eta();
  return t * (p.ensemble().model(k).rate() - (2.0 + eta) * p.lambda_c() + (1.0 + eta) * p.i2(k));
}

}  // namespace detail

/// E[Z*_{k,t}] under P_k (=1), Q* (= l_k(t)) or P_C.
template <LossModel M>
double mean_Z(const BasicRiskSharingProblem<M>& p, const Measure& m, std::size_t k, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  if (k >= p.size()) throw DomainError("model index out of range");
  if (m.is_q_star()) return detail::exp_or_warn(t * p.growth_exponent(k), "mean_Z");
  if (m.index() == k) return 1.0;
  if (detail::is_counterparty(p, m))
    return detail::exp_or_warn(detail::log_mean_z_counterparty(p, k, t), "mean_Z");
  detail::not_available(p, m, "E[Z*_k] for k different from the measure index");
}

/// E[X*_t] under Q* or P_C.
template <LossModel M>
double mean_X(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  const double base = p.market().initial_wealth_insurer + p.net_premium_drift() * t;
  if (m.is_q_star()) return base;
  if (!detail::is_counterparty(p, m)) detail::not_available(p, m, "E[X*]");
  const double eta = p.eta();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double w = p.ensemble().weight(k);
    if (w == 0.0) continue;
    const double decay = t * eta * (p.lambda_c() - (1.0 + eta) * p.i2(k));
    acc -= w * p.ell(k, p.horizon()) * std::expm1(decay);
  }
  return base + acc / p.theta();
}

/// Cov(Z*_j, Z*_k) at time t under Q* or P_C. Needs I3(C, j, k).
template <LossModel M>
double cov_Z(const BasicRiskSharingProblem<M>& p, const Measure& m, std::size_t j, std::size_t k,
             double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  const auto& ens = p.ensemble();
  const double eta = p.eta();
  const double a = 1.0 + eta;
  const double i3 = cross_integral_3(ens.counterparty(), ens.model(j), ens.model(k), j, k);
  const double lj = ens.model(j).rate();
  const double lk = ens.model(k).rate();
  double log_product;     // log E[Z_j Z_k]
  double log_means;       // log E[Z_j] + log E[Z_k]
  if (m.is_q_star()) {
    log_product = t * (lj + lk - 3.0 * a * p.lambda_c() + a * a * a * i3);
    log_means = t * (p.growth_exponent(j) + p.growth_exponent(k));
  } else if (detail::is_counterparty(p, m)) {
    log_product = t * (lj + lk - (3.0 + 2.0 * eta) * p.lambda_c() + a * a * i3);
    log_means = detail::log_mean_z_counterparty(p, j, t) + detail::log_mean_z_counterparty(p, k, t);
  } else {
    detail::not_available(p, m, "Cov(Z*_j, Z*_k)");
  }
  return detail::exp_or_warn(log_means, "cov_Z") * std::expm1(log_product - log_means);
}

template <LossModel M>
double cov_Z_Qstar(const BasicRiskSharingProblem<M>& p, std::size_t j, std::size_t k, double t) {
  return cov_Z(p, Measure::q_star(), j, k, t);
}

/// Dense covariance matrix of Z*_t; upper triangle computed, mirrored.
template <LossModel M>
std::vector<std::vector<double>> cov_Z_matrix(const BasicRiskSharingProblem<M>& p,
                                              const Measure& m, double t) {
  const auto n = p.size();
  std::vector<std::vector<double>> s(n, std::vector<double>(n, 0.0));
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t k = j; k < n; ++k) {
      s[j][k] = cov_Z(p, m, j, k, t);
      s[k][j] = s[j][k];
    }
  }
  return s;
}

/// Coefficients p_t = (pi_k l_k(T - t))_k of the affine representation of X*.
template <LossModel M>
std::vector<double> x_loadings(const BasicRiskSharingProblem<M>& p, double t) {
  std::vector<double> out(p.size());
  for (std::size_t k = 0; k < p.size(); ++k)
    out[k] = p.ensemble().weight(k) * p.ell(k, p.horizon() - t);
  return out;
}

/// Var(X*_t) = (1/theta^2) p_t' Sigma p_t under Q* or P_C.
template <LossModel M>
double var_X(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  const auto w = x_loadings(p, t);
  double acc = 0.0;
  for (std::size_t j = 0; j < p.size(); ++j) {
    if (w[j] == 0.0) continue;
    for (std::size_t k = j; k < p.size(); ++k) {
      if (w[k] == 0.0) continue;
      const double c = cov_Z(p, m, j, k, t);
      acc += (j == k ? 1.0 : 2.0) * w[j] * w[k] * c;
    }
  }
  return acc / (p.theta() * p.theta());
}

template <LossModel M>
double var_X_Qstar(const BasicRiskSharingProblem<M>& p, double t) {
  return var_X(p, Measure::q_star(), t);
}

/// E^{P_C}[Y_t] = y + t eta int xi nu_C - (1/theta) sum pi_k l_k(T)[1 - exp(t eta (lambda_C - (1+eta) I2))].
/// Under Q*, Y is a martingale and the mean is y.
template <LossModel M>
double mean_Y(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  const double y = p.market().initial_wealth_counterparty;
  if (m.is_q_star()) return y;
  if (!detail::is_counterparty(p, m)) detail::not_available(p, m, "E[Y]");
  const double eta = p.eta();
  double acc = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double w = p.ensemble().weight(k);
    if (w == 0.0) continue;
    acc -= w * p.ell(k, p.horizon()) * std::expm1(t * eta * (p.lambda_c() - (1.0 + eta) * p.i2(k)));
  }
  return y + t * eta * p.mean_loss_rate_c() - acc / p.theta();
}

template <LossModel M>
double mean_Y(const BasicRiskSharingProblem<M>& p, double t) {
  return mean_Y(p, Measure::reference(p.ensemble().counterparty_index()), t);
}

namespace detail {
// Loss compensator (total rate multiplier, model) governing N under a measure.
template <LossModel M>
std::pair<double, const M*> loss_law(const BasicRiskSharingProblem<M>& p, const Measure& m) {
  if (m.is_q_star()) return {1.0 + p.eta(), &p.ensemble().counterparty()};
  return {1.0, &p.ensemble().model(m.index())};
}
}  // namespace detail

/// E[X^CL_t] = x + c t - t int xi nu (no risk sharing), under any measure.
template <LossModel M>
double mean_X_cl(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  const auto [mult, model] = detail::loss_law(p, m);
  return p.market().initial_wealth_insurer +
         t * (p.market().premium_rate - mult * model->mean_loss_rate());
}

/// Var(X^CL_t) = t int xi^2 nu, under any measure.
template <LossModel M>
double var_X_cl(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  const auto [mult, model] = detail::loss_law(p, m);
  return t * mult * model->second_moment_rate();
}

// ---------------------------------------------------------------------------

struct MomentReport {
  std::string measure;  // "Q*", "P_C" or "P_k"
  double time = 0.0;
  std::vector<std::optional<double>> mean_Z;
  std::optional<double> mean_X;
  std::optional<std::vector<std::vector<double>>> cov_Z;
  std::optional<double> var_X;
  std::optional<double> mean_Y;
  double mean_X_cl = 0.0;
  double var_X_cl = 0.0;
};

template <LossModel M>
std::string measure_label(const BasicRiskSharingProblem<M>& p, const Measure& m) {
  return m.is_q_star() ? std::string("Q*") : "P_" + p.ensemble().label(m.index());
}

/// Every closed-form moment available under the measure; the rest stay empty.
template <LossModel M>
MomentReport moment_report(const BasicRiskSharingProblem<M>& p, const Measure& m, double t) {
  detail::check_measure(p, m);
  p.check_time(t);
  MomentReport r;
  r.measure = measure_label(p, m);
  r.time = t;
  const bool full = m.is_q_star() || detail::is_counterparty(p, m);
  r.mean_Z.resize(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (full || m.index() == k) r.mean_Z[k] = mean_Z(p, m, k, t);
  }
  if (full) {
    r.mean_X = mean_X(p, m, t);
    r.cov_Z = cov_Z_matrix(p, m, t);
    r.var_X = var_X(p, m, t);
    r.mean_Y = mean_Y(p, m, t);
  }
  r.mean_X_cl = mean_X_cl(p, m, t);
  r.var_X_cl = var_X_cl(p, m, t);
  return r;
}

// ---------------------------------------------------------------------------
// Single reference model (the counterparty's own): closed-form table.

struct OneModelMoments {
  double time = 0.0;
  double mean_Z_P = 1.0;
  double mean_Z_Q = 1.0;
  double mean_X_P = 0.0;
  double mean_X_Q = 0.0;
  double var_Z_P = 0.0;
  double var_Z_Q = 0.0;
  double var_X_P = 0.0;
  double var_X_Q = 0.0;
  double cov_XZ_P = 0.0;
  double cov_XZ_Q = 0.0;
  double corr_XZ_P = -1.0;
  double corr_XZ_Q = -1.0;
};

/// With one model (lambda, v) shared by insurer and counterparty, g = lambda eta^2.
template <LossModel M>
OneModelMoments one_model_moments(double t, const M& model, const MarketParams& market) {
  market.validate();
  if (!(t >= 0.0 && t <= market.horizon)) throw DomainError("time outside [0, T]");
  const double lambda = model.rate();
  const double eta = market.safety_loading;
  const double theta = market.ambiguity_penalty;
  const double big_t = market.horizon;
  const double g = lambda * eta * eta;
  const double drift = market.premium_rate - (1.0 + eta) * model.mean_loss_rate();

  OneModelMoments r;
  r.time = t;
  r.mean_Z_P = 1.0;
  r.mean_Z_Q = std::exp(g * t);
  r.mean_X_Q = market.initial_wealth_insurer + drift * t;
  r.mean_X_P = r.mean_X_Q - std::exp(g * big_t) * std::expm1(-g * t) / theta;
  r.var_Z_P = std::expm1(g * t);
  r.var_Z_Q = std::exp(2.0 * g * t) * std::expm1(g * (1.0 + eta) * t);
  const double load = std::exp(g * (big_t - t));  // l(T - t)
  r.var_X_P = load * load * r.var_Z_P / (theta * theta);
  r.var_X_Q = std::exp(2.0 * g * big_t) * std::expm1(g * (1.0 + eta) * t) / (theta * theta);
  r.cov_XZ_P = -load * r.var_Z_P / theta;
  r.cov_XZ_Q = -std::exp(g * (big_t + t)) * std::expm1(g * (1.0 + eta) * t) / theta;
  r.corr_XZ_P = -1.0;
  r.corr_XZ_Q = -1.0;
  return r;
}

/// Ensemble form: every index with positive weight must carry the counterparty's model.
template <LossModel M>
OneModelMoments one_model_moments(double t, const BasicEnsemble<M>& ensemble,
                                  const MarketParams& market) {
  for (std::size_t k = 0; k < ensemble.size(); ++k) {
    if (ensemble.weight(k) > 0.0 && !(ensemble.model(k) == ensemble.counterparty()))
      throw UsageError(
          "one_model_moments needs a single-model ensemble; use mean_Z/mean_X/cov_Z/var_X for "
          "multi-model ensembles");
  }
  return one_model_moments(t, ensemble.counterparty(), market);
}

}  // namespace riskshare
