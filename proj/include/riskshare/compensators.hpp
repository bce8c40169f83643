#pragma once

// Loss-model compensators nu_k(dxi) = lambda_k f_k(xi) dxi, the ensemble of
// reference models, and the cross-model integrals
//   I2(C,k)   = int v_C^2 / v_k
//   I3(C,j,k) = int v_C^3 / (v_j v_k)
// that every downstream formula depends on.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "riskshare/error.hpp"
#include "riskshare/quadrature.hpp"

namespace riskshare {

inline constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

/// Anything usable as a loss model. `log_density` is the log of the
/// rate-scaled density v(xi) = rate * f(xi) and must accept any xi > 0.
template <class M>
concept LossModel = requires(const M& m, double xi, std::mt19937_64& rng) {
  { m.rate() } -> std::convertible_to<double>;
  { m.log_density(xi) } -> std::convertible_to<double>;
  { m.mean_loss_rate() } -> std::convertible_to<double>;
  { m.second_moment_rate() } -> std::convertible_to<double>;
  { m.characteristic_scale() } -> std::convertible_to<double>;
  { m.sample_severity(rng) } -> std::convertible_to<double>;
};

/// Compound Poisson compensator with Gamma(shape, scale) severity.
class GammaCompensator {
 public:
  GammaCompensator(double rate, double shape, double scale)
      : rate_(rate), shape_(shape), scale_(scale) {
    if (!(rate > 0.0) || !(shape > 0.0) || !(scale > 0.0) || !std::isfinite(rate) ||
        !std::isfinite(shape) || !std::isfinite(scale)) {
      std::ostringstream os;
      os << "GammaCompensator requires finite positive rate, shape, scale; got (" << rate << ", "
         << shape << ", " << scale << ")";
      throw DomainError(os.str());
    }
    log_norm_ = std::log(rate_) - std::lgamma(shape_) - shape_ * std::log(scale_);
  }

  double rate() const noexcept { return rate_; }
  double shape() const noexcept { return shape_; }
  double scale() const noexcept { return scale_; }

  double mean_severity() const noexcept { return shape_ * scale_; }
  double mean_loss_rate() const noexcept { return rate_ * shape_ * scale_; }
  double second_moment_rate() const noexcept {
    return rate_ * shape_ * (shape_ + 1.0) * scale_ * scale_;
  }
  double characteristic_scale() const noexcept { return mean_severity(); }

  /// ln v(xi) = ln rate + (shape-1) ln xi - xi/scale - lnGamma(shape) - shape ln scale.
  double log_density(double xi) const {
    if (!(xi > 0.0)) throw DomainError("density_log: loss size must be positive");
    return log_density_unchecked(xi, std::log(xi));
  }

  /// Hot-loop variant; the caller supplies ln(xi).
  double log_density_unchecked(double xi, double log_xi) const noexcept {
    return log_norm_ + (shape_ - 1.0) * log_xi - xi / scale_;
  }

  double log_normalizer() const noexcept { return log_norm_; }

  template <class Rng>
  double sample_severity(Rng& rng) const {
    std::gamma_distribution<double> dist(shape_, scale_);
    return dist(rng);
  }

  friend bool operator==(const GammaCompensator& a, const GammaCompensator& b) {
    return a.rate_ == b.rate_ && a.shape_ == b.shape_ && a.scale_ == b.scale_;
  }

 private:
  double rate_;
  double shape_;
  double scale_;
  double log_norm_;
};

static_assert(LossModel<GammaCompensator>);

template <LossModel M>
double density_log(const M& model, double xi) {
  if (!(xi > 0.0)) throw DomainError("density_log: loss size must be positive");
  return model.log_density(xi);
}

// ---------------------------------------------------------------------------
// Feasibility of model pairs and triples

/// 2 m_C > m_k and 2 phi_k > phi_C (strict).
struct PairCondition {
  bool shape_ok = false;
  bool scale_ok = false;
  bool pass() const noexcept { return shape_ok && scale_ok; }
};

inline PairCondition pair_condition(const GammaCompensator& c, const GammaCompensator& k) {
  return {2.0 * c.shape() > k.shape(), 2.0 * k.scale() > c.scale()};
}

/// 3 m_C > m_j + m_k and 3 phi_j phi_k > phi_C (phi_j + phi_k) (strict).
inline PairCondition triple_condition(const GammaCompensator& c, const GammaCompensator& j,
                                      const GammaCompensator& k) {
  return {3.0 * c.shape() > j.shape() + k.shape(),
          3.0 * j.scale() * k.scale() > c.scale() * (j.scale() + k.scale())};
}

namespace detail {
inline std::string describe(const GammaCompensator& m) {
  std::ostringstream os;
  os << "(rate=" << m.rate() << ", shape=" << m.shape() << ", scale=" << m.scale() << ")";
  return os.str();
}
inline std::string label(std::size_t idx) {
  return idx == npos ? std::string("?") : std::to_string(idx);
}
}  // namespace detail

// ---------------------------------------------------------------------------
// Cross integrals, closed form (Gamma) and quadrature (any LossModel)

/// I2 = int v_C^2 / v_k over (0, inf), evaluated in log space.
inline double cross_integral_2(const GammaCompensator& c, const GammaCompensator& k,
                               std::size_t c_index = npos, std::size_t k_index = npos) {
  const auto cond = pair_condition(c, k);
  if (!cond.pass()) {
    std::ostringstream os;
    os << "infeasible model pair (C=" << detail::label(c_index) << ", k="
       << detail::label(k_index) << "): int v_C^2/v_k diverges; C" << detail::describe(c)
       << " k" << detail::describe(k) << (cond.shape_ok ? "" : " [2 m_C <= m_k]")
       << (cond.scale_ok ? "" : " [2 phi_k <= phi_C]");
    throw InfeasibleModelPair(os.str(), c_index, k_index);
  }
  const double a = 2.0 * c.shape() - k.shape();
  const double b = 2.0 / c.scale() - 1.0 / k.scale();
  const double log_value = 2.0 * std::log(c.rate()) - std::log(k.rate()) + std::lgamma(a) +
                           std::lgamma(k.shape()) + k.shape() * std::log(k.scale()) -
                           2.0 * std::lgamma(c.shape()) -
                           2.0 * c.shape() * std::log(c.scale()) - a * std::log(b);
  return std::exp(log_value);
}

/// I3 = int v_C^3 / (v_j v_k) over (0, inf), evaluated in log space.
inline double cross_integral_3(const GammaCompensator& c, const GammaCompensator& j,
                               const GammaCompensator& k, std::size_t j_index = npos,
                               std::size_t k_index = npos) {
  const auto cond = triple_condition(c, j, k);
  if (!cond.pass()) {
    std::ostringstream os;
    os << "infeasible model pair (j=" << detail::label(j_index) << ", k="
       << detail::label(k_index) << "): int v_C^3/(v_j v_k) diverges; C" << detail::describe(c)
       << " j" << detail::describe(j) << " k" << detail::describe(k)
       << (cond.shape_ok ? "" : " [3 m_C <= m_j + m_k]")
       << (cond.scale_ok ? "" : " [3 phi_j phi_k <= phi_C (phi_j + phi_k)]");
    throw InfeasibleModelPair(os.str(), j_index, k_index);
  }
  const double a = 3.0 * c.shape() - j.shape() - k.shape();
  const double b = 3.0 / c.scale() - 1.0 / j.scale() - 1.0 / k.scale();
  const double log_value =
      3.0 * std::log(c.rate()) - std::log(j.rate()) - std::log(k.rate()) + std::lgamma(a) +
      std::lgamma(j.shape()) + j.shape() * std::log(j.scale()) + std::lgamma(k.shape()) +
      k.shape() * std::log(k.scale()) - 3.0 * std::lgamma(c.shape()) -
      3.0 * c.shape() * std::log(c.scale()) - a * std::log(b);
  return std::exp(log_value);
}

inline constexpr quad::Tolerance kOracleTolerance{1e-10, 1e-10};

namespace detail {
// Models whose log density can be evaluated from ln xi alone get integrated in t = ln xi,
// which reaches mass below the smallest representable xi when shapes sit near the boundary.
template <class M>
concept HasLogAbscissa = requires(const M& m, double xi, double t) {
  { m.log_density_unchecked(xi, t) } -> std::convertible_to<double>;
};
}  // namespace detail

/// Quadrature route for I2, valid for any loss model.
template <LossModel M>
double cross_integral_2_quadrature(const M& c, const M& k, quad::Tolerance tol = kOracleTolerance) {
  if constexpr (detail::HasLogAbscissa<M>) {
    auto integrand = [&](double t) {
      const double xi = std::exp(t);
      if (!std::isfinite(xi)) return 0.0;
      return std::exp(2.0 * c.log_density_unchecked(xi, t) - k.log_density_unchecked(xi, t) + t);
    };
    return quad::integrate_real_line_or_throw(integrand, std::log(c.characteristic_scale()), 1.0, tol);
  } else {
    auto integrand = [&](double xi) {
      return std::exp(2.0 * c.log_density(xi) - k.log_density(xi));
    };
    return quad::integrate_half_line_or_throw(integrand, c.characteristic_scale(), tol);
  }
}

template <LossModel M>
double cross_integral_3_quadrature(const M& c, const M& j, const M& k,
                                   quad::Tolerance tol = kOracleTolerance) {
  if constexpr (detail::HasLogAbscissa<M>) {
    auto integrand = [&](double t) {
      const double xi = std::exp(t);
      if (!std::isfinite(xi)) return 0.0;
      return std::exp(3.0 * c.log_density_unchecked(xi, t) - j.log_density_unchecked(xi, t) -
                      k.log_density_unchecked(xi, t) + t);
    };
    return quad::integrate_real_line_or_throw(integrand, std::log(c.characteristic_scale()), 1.0, tol);
  } else {
    auto integrand = [&](double xi) {
      return std::exp(3.0 * c.log_density(xi) - j.log_density(xi) - k.log_density(xi));
    };
    return quad::integrate_half_line_or_throw(integrand, c.characteristic_scale(), tol);
  }
}

/// Generic fallback: models without a closed form go through quadrature.
template <LossModel M>
double cross_integral_2(const M& c, const M& k, std::size_t = npos, std::size_t = npos) {
  return cross_integral_2_quadrature(c, k);
}

template <LossModel M>
double cross_integral_3(const M& c, const M& j, const M& k, std::size_t = npos,
                        std::size_t = npos) {
  return cross_integral_3_quadrature(c, j, k);
}

// ---------------------------------------------------------------------------
// Ensemble

/// Reference models P_1..P_n plus the counterparty model P_C, with ambiguity
/// weights. Indices 0..n-1 address the models and index n the counterparty.
template <LossModel M>
class BasicEnsemble {
 public:
  using model_type = M;

  BasicEnsemble(std::vector<M> models, M counterparty, std::vector<double> weights,
                double weight_counterparty)
      : models_(std::move(models)) {
    models_.push_back(std::move(counterparty));
    if (weights.size() + 1 != models_.size()) {
      std::ostringstream os;
      os << "ensemble has " << models_.size() - 1 << " models but " << weights.size()
         << " weights";
      throw ConfigError(os.str());
    }
    weights.push_back(weight_counterparty);
    for (double w : weights) {
      if (!(w >= 0.0 && w <= 1.0 + 1e-9)) throw ConfigError("ensemble weights must lie in [0,1]");
    }
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-9) {
      std::ostringstream os;
      os.precision(17);
      os << "ensemble weights sum to " << sum << ", not 1";
      throw ConfigError(os.str());
    }
    for (double& w : weights) w /= sum;
    weights_ = std::move(weights);
  }

  /// Single reference model that is also the counterparty's (pi_C = 1).
  static BasicEnsemble single(M model) { return BasicEnsemble({}, std::move(model), {}, 1.0); }

  /// Number of indices n + 1 (models plus counterparty).
  std::size_t size() const noexcept { return models_.size(); }
  std::size_t n_models() const noexcept { return models_.size() - 1; }
  std::size_t counterparty_index() const noexcept { return models_.size() - 1; }

  const M& model(std::size_t i) const { return models_.at(i); }
  const M& counterparty() const noexcept { return models_.back(); }
  double weight(std::size_t i) const { return weights_.at(i); }
  std::span<const double> weights() const noexcept { return weights_; }
  std::span<const M> all_models() const noexcept { return models_; }

  /// Label used in reports and file formats: "1".."n" and "C".
  std::string label(std::size_t i) const {
    return i == counterparty_index() ? std::string("C") : std::to_string(i + 1);
  }

 private:
  std::vector<M> models_;
  std::vector<double> weights_;
};

using ModelEnsemble = BasicEnsemble<GammaCompensator>;

// ---------------------------------------------------------------------------
// Feasibility reports

struct FeasibilityEntry {
  std::size_t j = 0;  // for assumption 1, j is always the counterparty index
  std::size_t k = 0;
  bool shape_ok = false;
  bool scale_ok = false;
  bool pass() const noexcept { return shape_ok && scale_ok; }
};

struct FeasibilityReport {
  std::string assumption;
  std::vector<FeasibilityEntry> entries;

  bool pass() const noexcept {
    for (const auto& e : entries)
      if (!e.pass()) return false;
    return true;
  }
  std::size_t failures() const noexcept {
    std::size_t n = 0;
    for (const auto& e : entries) n += e.pass() ? 0 : 1;
    return n;
  }
};

/// int v_C^2 / v_k < inf for every index k (including C itself).
inline FeasibilityReport check_assumption_1(const ModelEnsemble& ens) {
  FeasibilityReport r{"square-integrability of v_C^2/v_k", {}};
  const auto c = ens.counterparty_index();
  for (std::size_t k = 0; k < ens.size(); ++k) {
    const auto cond = pair_condition(ens.counterparty(), ens.model(k));
    r.entries.push_back({c, k, cond.shape_ok, cond.scale_ok});
  }
  return r;
}

/// int v_C^3 / (v_j v_k) < inf over all ordered pairs (j, k), C included.
inline FeasibilityReport check_assumption_2(const ModelEnsemble& ens) {
  FeasibilityReport r{"integrability of v_C^3/(v_j v_k)", {}};
  for (std::size_t j = 0; j < ens.size(); ++j) {
    for (std::size_t k = 0; k < ens.size(); ++k) {
      const auto cond = triple_condition(ens.counterparty(), ens.model(j), ens.model(k));
      r.entries.push_back({j, k, cond.shape_ok, cond.scale_ok});
    }
  }
  return r;
}

/// Throws InfeasibleModelPair on the first failing entry of the report.
inline void require(const FeasibilityReport& report) {
  for (const auto& e : report.entries) {
    if (!e.pass()) {
      std::ostringstream os;
      os << "feasibility check failed (" << report.assumption << ") for pair (" << e.j << ", "
         << e.k << ")" << (e.shape_ok ? "" : " [shape condition]")
         << (e.scale_ok ? "" : " [scale condition]");
      throw InfeasibleModelPair(os.str(), e.j, e.k);
    }
  }
}

}  // namespace riskshare
