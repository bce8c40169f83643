#pragma once

// Claims data ingestion and maximum-likelihood fits of (lambda, m, phi).

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "riskshare/compensators.hpp"
#include "riskshare/special_functions.hpp"

namespace riskshare {

struct PolicyRecord {
  std::string policy_id;
  double exposure = 1.0;  // policy-years
  std::uint64_t n_claims = 0;
  double avg_claim = 0.0;
};

// ---------------------------------------------------------------------------
// CSV

inline constexpr const char* kPolicyHeader = "policy_id,exposure,n_claims,avg_claim";

namespace detail {

inline std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(trim(field));
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

[[noreturn]] inline void schema_fail(std::size_t line, const std::string& msg) {
  std::ostringstream os;
  os << "line " << line << ": " << msg;
  throw SchemaError(os.str());
}

inline double parse_real(const std::string& s, std::size_t line, const char* field) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    schema_fail(line, std::string("field ") + field + " is not a number: '" + s + "'");
  }
}

}  // namespace detail

/// Reads the claims CSV; the header `policy_id,exposure,n_claims,avg_claim` is required.
inline std::vector<PolicyRecord> read_policy_csv(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!detail::trim(line).empty()) break;
  }
  if (lineno == 0 || detail::trim(line).empty()) detail::schema_fail(1, "empty file, expected header");
  {
    const auto cols = detail::split_csv(line);
    const std::vector<std::string> want{"policy_id", "exposure", "n_claims", "avg_claim"};
    if (cols != want)
      detail::schema_fail(lineno, std::string("expected header '") + kPolicyHeader + "', got '" + line + "'");
  }
  std::vector<PolicyRecord> out;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trim(line).empty()) continue;
    const auto f = detail::split_csv(line);
    if (f.size() != 4) {
      std::ostringstream os;
      os << "expected 4 fields, found " << f.size();
      detail::schema_fail(lineno, os.str());
    }
    PolicyRecord r;
    r.policy_id = f[0];
    r.exposure = detail::parse_real(f[1], lineno, "exposure");
    const double n = detail::parse_real(f[2], lineno, "n_claims");
    r.avg_claim = detail::parse_real(f[3], lineno, "avg_claim");
    if (!(r.exposure > 0.0) || !std::isfinite(r.exposure))
      detail::schema_fail(lineno, "exposure must be positive");
    if (!(n >= 0.0) || n != std::floor(n) || n > 9e15)
      detail::schema_fail(lineno, "n_claims must be a nonnegative integer");
    r.n_claims = static_cast<std::uint64_t>(n);
    if (!(r.avg_claim >= 0.0) || !std::isfinite(r.avg_claim))
      detail::schema_fail(lineno, "avg_claim must be nonnegative");
    if (r.n_claims == 0 && r.avg_claim != 0.0)
      detail::schema_fail(lineno, "avg_claim must be 0 when n_claims is 0");
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<PolicyRecord> read_policy_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  return read_policy_csv(in);
}

inline void write_policy_csv(std::ostream& out, const std::vector<PolicyRecord>& records) {
  out << kPolicyHeader << '\n';
  out.precision(17);
  for (const auto& r : records)
    out << r.policy_id << ',' << r.exposure << ',' << r.n_claims << ',' << r.avg_claim << '\n';
}

// ---------------------------------------------------------------------------
// Fits

struct PoissonFit {
  double rate = 0.0;
  double std_error = 0.0;
  double exposure = 0.0;
  std::uint64_t n_claims = 0;
  bool degenerate = false;  // no claims: rate 0, unusable as a compensator
};

/// sum n_claims / sum exposure, with standard error sqrt(rate / exposure).
inline PoissonFit fit_poisson_rate(const std::vector<PolicyRecord>& records) {
  PoissonFit f;
  for (const auto& r : records) {
    f.exposure += r.exposure;
    f.n_claims += r.n_claims;
  }
  if (!(f.exposure > 0.0)) throw DomainError("total exposure must be positive");
  f.rate = static_cast<double>(f.n_claims) / f.exposure;
  f.std_error = std::sqrt(f.rate / f.exposure);
  f.degenerate = f.n_claims == 0;
  return f;
}

struct GammaFit {
  double shape = 0.0;
  double scale = 0.0;
  double shape_se = 0.0;  // sandwich standard errors
  double scale_se = 0.0;
  double loglik = 0.0;
  double gradient_norm = 0.0;  // |score| / total weight at the optimum
  int iterations = 0;
  bool converged = false;
  std::size_t n_used = 0;
  double total_weight = 0.0;
};

/// Root of ln m - psi(m) = s on (1/(2s), 1/s), Newton with bisection safeguard.
inline double solve_gamma_shape(double s, int* iterations = nullptr) {
  if (!(s > 0.0) || !std::isfinite(s)) throw DegenerateSample("gamma shape equation needs s > 0");
  auto g = [s](double m) { return std::log(m) - digamma(m) - s; };
  double lo = 0.5 / s;
  double hi = 1.0 / s;
  // the bounds are strict in exact arithmetic; widen slightly against rounding
  lo *= 1.0 - 1e-12;
  hi *= 1.0 + 1e-12;
  if (g(lo) < 0.0) lo *= 0.5;
  if (g(hi) > 0.0) hi *= 2.0;
  double m = 0.5 * (lo + hi);
  for (int it = 1; it <= 200; ++it) {
    const double gm = g(m);
    if (gm == 0.0) {
      if (iterations) *iterations = it;
      return m;
    }
    if (gm > 0.0) lo = m; else hi = m;
    const double dg = 1.0 / m - trigamma(m);
    double next = m - gm / dg;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - m) <= 1e-14 * m || hi - lo <= 1e-15 * m) {
      if (iterations) *iterations = it;
      return next;
    }
    m = next;
  }
  throw NumericalFailure("gamma shape Newton iteration did not converge in 200 iterations",
                         hi - lo);
}

/// Weighted Gamma MLE on per-policy average claims with weights n_claims.
inline GammaFit fit_gamma_severity(const std::vector<PolicyRecord>& records) {
  std::vector<double> y;
  std::vector<double> w;
  std::size_t dropped = 0;
  for (const auto& r : records) {
    if (r.n_claims == 0) continue;
    if (!(r.avg_claim > 0.0)) {
      ++dropped;
      continue;
    }
    y.push_back(r.avg_claim);
    w.push_back(static_cast<double>(r.n_claims));
  }
  if (dropped > 0) {
    std::ostringstream os;
    os << "dropped " << dropped << " records with claims but zero average claim";
    warn(os.str());
  }
  if (y.size() < 2) throw DegenerateSample("gamma fit needs at least 2 records with claims");
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == y.front(); }))
    throw DegenerateSample("gamma fit on identical average claims");

  const double wsum = std::accumulate(w.begin(), w.end(), 0.0);
  double mean = 0.0;
  double mean_log = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    mean += w[i] * y[i];
    mean_log += w[i] * std::log(y[i]);
  }
  mean /= wsum;
  mean_log /= wsum;
  const double s = std::log(mean) - mean_log;
  if (!(s > 0.0)) throw DegenerateSample("gamma fit on (numerically) identical average claims");

  GammaFit f;
  f.n_used = y.size();
  f.total_weight = wsum;
  f.shape = solve_gamma_shape(s, &f.iterations);
  f.scale = mean / f.shape;
  const double m = f.shape;
  const double phi = f.scale;
  const double psi = digamma(m);
  const double lg = std::lgamma(m);

  // log-likelihood, score and sandwich pieces
  double a_mm = 0.0, a_mp = 0.0, a_pp = 0.0;
  double b_mm = 0.0, b_mp = 0.0, b_pp = 0.0;
  double g_m = 0.0, g_p = 0.0;
  const double tri = trigamma(m);
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double ly = std::log(y[i]);
    f.loglik += w[i] * ((m - 1.0) * ly - y[i] / phi - lg - m * std::log(phi));
    const double sm = ly - psi - std::log(phi);
    const double sp = y[i] / (phi * phi) - m / phi;
    g_m += w[i] * sm;
    g_p += w[i] * sp;
    a_mm += w[i] * tri;
    a_mp += w[i] / phi;
    a_pp += w[i] * (2.0 * y[i] / (phi * phi * phi) - m / (phi * phi));
    b_mm += w[i] * w[i] * sm * sm;
    b_mp += w[i] * w[i] * sm * sp;
    b_pp += w[i] * w[i] * sp * sp;
  }
  // per unit weight, so the check does not scale with portfolio size
  f.gradient_norm = std::hypot(g_m, g_p) / wsum;
  f.converged = f.gradient_norm <= 1e-8;

  // Cov = A^{-1} B A^{-1}, A the negated Hessian
  const double det = a_mm * a_pp - a_mp * a_mp;
  if (det > 0.0) {
    const double i_mm = a_pp / det, i_mp = -a_mp / det, i_pp = a_mm / det;
    const double c_mm = i_mm * (b_mm * i_mm + b_mp * i_mp) + i_mp * (b_mp * i_mm + b_pp * i_mp);
    const double c_pp = i_mp * (b_mm * i_mp + b_mp * i_pp) + i_pp * (b_mp * i_mp + b_pp * i_pp);
    f.shape_se = std::sqrt(std::max(0.0, c_mm));
    f.scale_se = std::sqrt(std::max(0.0, c_pp));
  }
  return f;
}

struct FitResult {
  GammaCompensator model;
  PoissonFit rate;
  GammaFit severity;
  double loglik_severity = 0.0;
  std::size_t n_policies = 0;
  std::uint64_t n_claims_total = 0;
  bool converged = false;
};

inline FitResult fit_model(const std::vector<PolicyRecord>& records) {
  const auto rate = fit_poisson_rate(records);
  if (rate.degenerate) throw DegenerateSample("no claims in the data: rate 0 cannot define a compensator");
  const auto sev = fit_gamma_severity(records);
  return FitResult{GammaCompensator(rate.rate, sev.shape, sev.scale),
                   rate,
                   sev,
                   sev.loglik,
                   records.size(),
                   rate.n_claims,
                   sev.converged};
}

// ---------------------------------------------------------------------------
// Cross-validation ensemble

struct CvResult {
  ModelEnsemble ensemble;
  FitResult full;
  std::vector<FitResult> subsamples;
};

inline std::mt19937_64 stream_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

/// P_C from the full data; P_k from independent uniform subsamples of floor(fraction N) records.
/// Default weights: uniform over the subsample models, zero on the counterparty.
inline CvResult cv_ensemble(const std::vector<PolicyRecord>& records, std::size_t n_models,
                            double fraction, std::uint64_t seed,
                            std::optional<std::vector<double>> weights = std::nullopt,
                            double weight_counterparty = 0.0) {
  if (records.empty()) throw DomainError("cv_ensemble needs records");
  if (n_models < 1) throw DomainError("cv_ensemble needs n_models >= 1");
  if (!(fraction > 0.0 && fraction <= 1.0)) throw DomainError("fraction must lie in (0, 1]");
  const auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(records.size())));
  if (take < 2) throw DomainError("fraction leaves fewer than 2 records per subsample");

  auto full = fit_model(records);
  std::vector<FitResult> fits;
  std::vector<std::size_t> idx(records.size());
  std::vector<PolicyRecord> sub;
  for (std::size_t k = 1; k <= n_models; ++k) {
    auto rng = stream_for(seed, k);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // partial Fisher-Yates: the first `take` slots are a uniform subset
    for (std::size_t i = 0; i < take; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
      std::swap(idx[i], idx[pick(rng)]);
    }
    sub.clear();
    for (std::size_t i = 0; i < take; ++i) sub.push_back(records[idx[i]]);
    try {
      fits.push_back(fit_model(sub));
    } catch (const Error& e) {
      std::ostringstream os;
      os << "subsample fit failed for k = " << k << " (seed " << seed << "): " << e.what();
      throw NumericalFailure(os.str());
    }
  }
  std::vector<GammaCompensator> models;
  for (const auto& f : fits) models.push_back(f.model);
  std::vector<double> w = weights ? *weights
                                  : std::vector<double>(n_models, (1.0 - weight_counterparty) /
                                                                      static_cast<double>(n_models));
  ModelEnsemble ens(std::move(models), full.model, std::move(w), weight_counterparty);
  return CvResult{std::move(ens), std::move(full), std::move(fits)};
}

// ---------------------------------------------------------------------------
// Synthetic portfolios

struct SyntheticPortfolio {
  std::size_t n_policies = 69740;
  double exposure = 1.0;
  double rate = 0.52;
  double shape = 0.58;
  double scale = 654.98;
  // false: avg_claim ~ Gamma(shape, scale), the law the weighted fit assumes.
  // true: avg_claim is the mean of n_claims Gamma(shape, scale) claims.
  bool mean_of_claims = false;
};

inline std::vector<PolicyRecord> synthetic_portfolio(const SyntheticPortfolio& cfg, std::uint64_t seed) {
  if (!(cfg.rate > 0.0 && cfg.shape > 0.0 && cfg.scale > 0.0 && cfg.exposure > 0.0))
    throw ConfigError("synthetic portfolio parameters must be positive");
  auto rng = stream_for(seed, 0);
  std::poisson_distribution<std::uint64_t> count(cfg.rate * cfg.exposure);
  std::gamma_distribution<double> sev(cfg.shape, cfg.scale);
  std::vector<PolicyRecord> out;
  out.reserve(cfg.n_policies);
  for (std::size_t i = 0; i < cfg.n_policies; ++i) {
    PolicyRecord r;
    r.policy_id = std::to_string(i + 1);
    r.exposure = cfg.exposure;
    r.n_claims = count(rng);
    if (r.n_claims > 0) {
      if (cfg.mean_of_claims) {
        double sum = 0.0;
        for (std::uint64_t j = 0; j < r.n_claims; ++j) sum += sev(rng);
        r.avg_claim = sum / static_cast<double>(r.n_claims);
      } else {
        r.avg_claim = sev(rng);
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

/// Sample correlation of two equally long series.
inline double sample_correlation(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw DomainError("correlation needs paired samples");
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
  const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace riskshare
