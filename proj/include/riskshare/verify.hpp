#pragma once

// Quadrature checks of the saddle-point conditions for the candidate value function:
//   A^{alpha, beta*} J = 0 for every admissible alpha,
//   A^{alpha*, beta} J = (1/theta) sum_k pi_k z_k l_k(T-t) int (beta - beta*)^2 / (2 v_k) >= 0.

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "riskshare/controls.hpp"
#include "riskshare/quadrature.hpp"

namespace riskshare {

inline constexpr quad::Tolerance kVerifyTolerance{1e-10, 1e-10};
inline constexpr double kResidualTolerance = 1e-8;

namespace detail {
inline double gamma_pdf_log(double xi, double shape, double scale) {
  return (shape - 1.0) * std::log(xi) - xi / scale - std::lgamma(shape) - shape * std::log(scale);
}
}  // namespace detail

/// Parametric cession alternatives to alpha*.
struct AlphaPerturbation {
  enum class Kind { optimal, zero, proportional, indicator_bump, gamma_bump };

  Kind kind = Kind::optimal;
  double amplitude = 0.0;  // epsilon of the bumps, s of the proportional cession
  double level = 0.0;      // L of the indicator 1{xi < L}
  double shape = 0.0;      // gamma bump
  double scale = 0.0;

  static AlphaPerturbation optimal() { return {}; }
  static AlphaPerturbation zero() { return {Kind::zero}; }
  /// alpha = s xi
  static AlphaPerturbation proportional(double s) { return {Kind::proportional, s}; }
  /// alpha* + eps 1{xi < L}
  static AlphaPerturbation indicator_bump(double eps, double l) {
    return {Kind::indicator_bump, eps, l};
  }
  /// alpha* + eps * Gamma(shape, scale) density
  static AlphaPerturbation gamma_bump(double eps, double shape, double scale) {
    return {Kind::gamma_bump, eps, 0.0, shape, scale};
  }

  double operator()(const RiskSharingProblem& p, double t, double xi,
                    std::span<const double> z) const {
    switch (kind) {
      case Kind::zero:
        return 0.0;
      case Kind::proportional:
        return amplitude * xi;
      case Kind::indicator_bump:
        return p.alpha_star(t, xi, z) + (xi < level ? amplitude : 0.0);
      case Kind::gamma_bump:
        return p.alpha_star(t, xi, z) +
               amplitude * std::exp(detail::gamma_pdf_log(xi, shape, scale));
      case Kind::optimal:
        break;
    }
    return p.alpha_star(t, xi, z);
  }

  std::vector<double> breaks() const {
    if (kind == Kind::indicator_bump && level > 0.0) return {level};
    return {};
  }

  /// Square-integrability of alpha against nu_C for the parametric family.
  void check_admissible(const RiskSharingProblem& p) const {
    if (kind == Kind::gamma_bump) {
      if (!(shape > 0.0 && scale > 0.0)) throw AdmissibilityViolation("gamma bump needs shape, scale > 0");
      const double mc = p.ensemble().counterparty().shape();
      if (!(2.0 * (shape - 1.0) + mc > 0.0)) {
        std::ostringstream os;
        os << "alpha bump with shape " << shape << " is not square integrable against nu_C near 0";
        throw AdmissibilityViolation(os.str());
      }
    }
    if (kind == Kind::indicator_bump && !(level > 0.0))
      throw AdmissibilityViolation("indicator bump needs a positive level");
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    switch (kind) {
      case Kind::optimal: os << "alpha*"; break;
      case Kind::zero: os << "alpha = 0"; break;
      case Kind::proportional: os << "alpha = " << amplitude << " xi"; break;
      case Kind::indicator_bump: os << "alpha* + " << amplitude << " 1{xi < " << level << "}"; break;
      case Kind::gamma_bump:
        os << "alpha* + " << amplitude << " Gamma(" << shape << ", " << scale << ") density";
        break;
    }
    return os.str();
  }
};

/// Parametric alternatives to beta* = (1+eta) v_C, all strictly positive.
struct BetaPerturbation {
  enum class Kind { optimal, scaled, indicator_bump, gamma_bump };

  Kind kind = Kind::optimal;
  double amplitude = 0.0;  // s for scaled, eps for bumps
  double level = 0.0;
  double shape = 0.0;
  double scale = 0.0;

  static BetaPerturbation optimal() { return {}; }
  /// s (1+eta) v_C, s > 0
  static BetaPerturbation scaled(double s) { return {Kind::scaled, s}; }
  /// beta* (1 + eps 1{xi < L}), eps > -1
  static BetaPerturbation indicator_bump(double eps, double l) {
    return {Kind::indicator_bump, eps, l};
  }
  /// beta* + eps * Gamma(shape, scale) density, eps > 0
  static BetaPerturbation gamma_bump(double eps, double shape, double scale) {
    return {Kind::gamma_bump, eps, 0.0, shape, scale};
  }

  /// beta(xi) - beta*(xi)
  double delta(const RiskSharingProblem& p, double xi) const {
    switch (kind) {
      case Kind::scaled:
        return (amplitude - 1.0) * p.beta_star(xi);
      case Kind::indicator_bump:
        return xi < level ? amplitude * p.beta_star(xi) : 0.0;
      case Kind::gamma_bump:
        return amplitude * std::exp(detail::gamma_pdf_log(xi, shape, scale));
      case Kind::optimal:
        break;
    }
    return 0.0;
  }

  double operator()(const RiskSharingProblem& p, double xi) const {
    return p.beta_star(xi) + delta(p, xi);
  }

  std::vector<double> breaks() const {
    if (kind == Kind::indicator_bump && level > 0.0) return {level};
    return {};
  }

  /// Positivity and the sufficient parametric condition int (beta - beta*)^2 / v_k < inf.
  void check_admissible(const RiskSharingProblem& p) const {
    switch (kind) {
      case Kind::scaled:
        if (!(amplitude > 0.0)) throw AdmissibilityViolation("scaled beta needs s > 0");
        break;
      case Kind::indicator_bump:
        if (!(amplitude > -1.0)) throw AdmissibilityViolation("indicator beta bump needs eps > -1");
        if (!(level > 0.0)) throw AdmissibilityViolation("indicator bump needs a positive level");
        break;
      case Kind::gamma_bump: {
        if (!(amplitude > 0.0 && shape > 0.0 && scale > 0.0))
          throw AdmissibilityViolation("gamma beta bump needs eps, shape, scale > 0");
        const auto& ens = p.ensemble();
        for (std::size_t k = 0; k < ens.size(); ++k) {
          const auto& mk = ens.model(k);
          if (!(2.0 * shape > mk.shape() && 2.0 * mk.scale() > scale)) {
            std::ostringstream os;
            os.precision(12);
            os << describe() << " is not square integrable against 1/v_" << ens.label(k)
               << " (needs 2 shape > " << mk.shape() << " and scale < " << 2.0 * mk.scale() << ")";
            throw AdmissibilityViolation(os.str());
          }
        }
        break;
      }
      case Kind::optimal:
        break;
    }
  }

  std::string describe() const {
    std::ostringstream os;
    os.precision(12);
    switch (kind) {
      case Kind::optimal: os << "beta*"; break;
      case Kind::scaled: os << amplitude << " beta*"; break;
      case Kind::indicator_bump:
        os << "beta* (1 + " << amplitude << " 1{xi < " << level << "})";
        break;
      case Kind::gamma_bump:
        os << "beta* + " << amplitude << " Gamma(" << shape << ", " << scale << ") density";
        break;
    }
    return os.str();
  }
};

namespace detail {

inline std::vector<double> merge_breaks(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  std::sort(a.begin(), a.end());
  a.erase(std::unique(a.begin(), a.end()), a.end());
  return a;
}

inline double integrate_or_throw(const quad::Result& r, const char* what) {
  if (!r.converged) {
    std::ostringstream os;
    os << what << ": quadrature did not converge (estimate " << r.value << ", achieved error "
       << r.abs_error << ")";
    throw NumericalFailure(os.str(), r.abs_error);
  }
  return r.value;
}

}  // namespace detail

/// A^{alpha, beta} J(t, x, z) by quadrature of the generator applied term by term to J.
template <class Alpha, class Beta>
double generator(const RiskSharingProblem& p, double t, double x, std::span<const double> z,
                 const Alpha& alpha, const Beta& beta,
                 const std::vector<double>& breaks = {}) {
  (void)x;  // J is affine in x with unit slope
  p.check_time(t);
  p.check_z(z);
  const auto n = p.size();
  const auto& ens = p.ensemble();
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = ens.weight(k) * p.ell(k, p.horizon() - t) / (2.0 * p.theta()) * z[k];

  auto h = [&](double xi) {
    const double bs = p.beta_star(xi);
    const double b = beta(xi);
    if (bs == 0.0 && b == 0.0) return 0.0;
    const double a = alpha(xi);
    const double lbs = std::log(bs);
    const double lb = std::log(b);
    double time_part = 0.0;
    double z_drift = 0.0;
    double jump = -(xi - a) * b;  // [J(x - (xi - a), z b/v) - J] against beta
    double comp = (xi - a) * b;   // compensators of the x and z jumps
    for (std::size_t k = 0; k < n; ++k) {
      if (w[k] == 0.0) continue;
      const double lv = ens.model(k).log_density(xi);
      const double v = std::exp(lv);
      const double qs = std::exp(2.0 * lbs - lv);  // beta*^2 / v_k
      const double q = std::exp(2.0 * lb - lv);    // beta^2 / v_k
      time_part -= w[k] * (v - 2.0 * bs + qs);
      z_drift += w[k] * (v - 2.0 * b + q);
      jump += w[k] * (q - b);
      comp += w[k] * (b - q);
    }
    const double x_drift = (xi - a) * bs - (xi - a) * b;
    return time_part + x_drift + z_drift + jump + comp;
  };
  const auto r = quad::integrate_half_line_split(
      h, ens.counterparty().characteristic_scale(), breaks, kVerifyTolerance);
  return detail::integrate_or_throw(r, "generator");
}

/// A^{alpha, beta*} J; zero for every admissible alpha.
inline double residual_beta_fixed(const AlphaPerturbation& alpha, double t, double x,
                                  std::span<const double> z, const RiskSharingProblem& p) {
  alpha.check_admissible(p);
  return generator(
      p, t, x, z, [&](double xi) { return alpha(p, t, xi, z); },
      [&](double xi) { return p.beta_star(xi); }, alpha.breaks());
}

/// A^{alpha*, beta} J through the reduced quadrature; nonnegative, zero iff beta = beta*.
inline double residual_alpha_fixed(const BetaPerturbation& beta, double t, double x,
                                   std::span<const double> z, const RiskSharingProblem& p) {
  (void)x;
  beta.check_admissible(p);
  p.check_time(t);
  p.check_z(z);
  if (beta.kind == BetaPerturbation::Kind::optimal) return 0.0;
  const auto& ens = p.ensemble();
  const auto n = p.size();
  std::vector<double> w(n);
  for (std::size_t k = 0; k < n; ++k)
    w[k] = ens.weight(k) * z[k] * p.ell(k, p.horizon() - t) / p.theta();
  auto f = [&](double xi) {
    const double d = beta.delta(p, xi);
    if (d == 0.0) return 0.0;
    const double ld = 2.0 * std::log(std::abs(d));
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (w[k] == 0.0) continue;
      acc += w[k] * 0.5 * std::exp(ld - ens.model(k).log_density(xi));
    }
    return acc;
  };
  const auto r = quad::integrate_half_line_split(
      f, ens.counterparty().characteristic_scale(), beta.breaks(), kVerifyTolerance);
  return detail::integrate_or_throw(r, "residual_alpha_fixed");
}

/// sqrt( int (beta - beta*)^2 / v_C  /  int beta*^2 / v_C ).
inline double scaled_distance(const BetaPerturbation& beta, const RiskSharingProblem& p) {
  beta.check_admissible(p);
  if (beta.kind == BetaPerturbation::Kind::optimal) return 0.0;
  const auto& c = p.ensemble().counterparty();
  auto f = [&](double xi) {
    const double d = beta.delta(p, xi);
    if (d == 0.0) return 0.0;
    return std::exp(2.0 * std::log(std::abs(d)) - c.log_density(xi));
  };
  const auto r = quad::integrate_half_line_split(f, c.characteristic_scale(), beta.breaks(),
                                                 kVerifyTolerance);
  const double num = detail::integrate_or_throw(r, "scaled_distance");
  const double a = 1.0 + p.eta();
  return std::sqrt(num / (a * a * c.rate()));
}

// ---------------------------------------------------------------------------
// Randomized admissible families

inline AlphaPerturbation random_alpha(const RiskSharingProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double mean = p.ensemble().counterparty().mean_severity();
  const double mc = p.ensemble().counterparty().shape();
  switch (static_cast<int>(u(rng) * 4.0)) {
    case 0:
      return AlphaPerturbation::proportional(1.5 * u(rng));
    case 1:
      return AlphaPerturbation::indicator_bump(mean * (2.0 * u(rng) - 1.0), mean * (0.1 + 5.0 * u(rng)));
    case 2: {
      const double lo = std::max(0.05, 1.0 - 0.5 * mc + 0.1);
      return AlphaPerturbation::gamma_bump(mean * mean * (2.0 * u(rng) - 1.0), lo + 3.0 * u(rng),
                                           mean * (0.1 + 3.0 * u(rng)));
    }
    default:
      return u(rng) < 0.5 ? AlphaPerturbation::zero() : AlphaPerturbation::optimal();
  }
}

inline BetaPerturbation random_beta(const RiskSharingProblem& p, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto& ens = p.ensemble();
  const double mean = ens.counterparty().mean_severity();
  switch (static_cast<int>(u(rng) * 4.0)) {
    case 0:
      return BetaPerturbation::scaled(0.5 + 1.5 * u(rng));
    case 1:
      return BetaPerturbation::indicator_bump(-0.9 + 2.9 * u(rng), mean * (0.1 + 5.0 * u(rng)));
    case 2: {
      double max_shape = 0.0;
      double min_scale = std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < ens.size(); ++k) {
        max_shape = std::max(max_shape, ens.model(k).shape());
        min_scale = std::min(min_scale, ens.model(k).scale());
      }
      const double shape = 0.5 * max_shape + 0.15 + 2.0 * u(rng);
      const double scale = min_scale * (0.2 + 1.7 * u(rng));
      return BetaPerturbation::gamma_bump(ens.counterparty().rate() * (0.05 + 0.95 * u(rng)), shape,
                                          scale);
    }
    default:
      return BetaPerturbation::optimal();
  }
}

struct VerificationEntry {
  std::string control;  // "alpha" or "beta"
  std::string description;
  double residual = 0.0;
  double scaled_distance = 0.0;  // beta entries only
  bool pass = false;
};

struct VerificationReport {
  double t = 0.0;
  double x = 0.0;
  std::vector<double> z;
  std::vector<VerificationEntry> entries;

  bool pass() const {
    for (const auto& e : entries)
      if (!e.pass) return false;
    return true;
  }
};

/// Draws a state (t, z) and n perturbations of each control, then evaluates both residuals.
inline VerificationReport run_verification(const RiskSharingProblem& p, std::size_t n,
                                           std::uint64_t seed) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> nz(0.0, 0.3);

  VerificationReport rep;
  rep.t = p.horizon() * u(rng);
  rep.x = p.market().initial_wealth_insurer;
  for (std::size_t k = 0; k < p.size(); ++k) rep.z.push_back(std::exp(nz(rng)));

  for (std::size_t i = 0; i < n; ++i) {
    const auto a = random_alpha(p, rng);
    VerificationEntry e{"alpha", a.describe()};
    e.residual = residual_beta_fixed(a, rep.t, rep.x, rep.z, p);
    e.pass = std::abs(e.residual) <= kResidualTolerance;
    rep.entries.push_back(std::move(e));
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto b = random_beta(p, rng);
    VerificationEntry e{"beta", b.describe()};
    e.residual = residual_alpha_fixed(b, rep.t, rep.x, rep.z, p);
    e.scaled_distance = scaled_distance(b, p);
    e.pass = e.residual >= -1e-10 && (e.scaled_distance <= 1e-3 || e.residual > 0.0);
    rep.entries.push_back(std::move(e));
  }
  return rep;
}

}  // namespace riskshare
