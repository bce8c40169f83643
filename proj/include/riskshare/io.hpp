#pragma once

// JSON configuration files and reports, CSV outputs.

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "riskshare/compensators.hpp"
#include "riskshare/controls.hpp"
#include "riskshare/fitting.hpp"
#include "riskshare/kde.hpp"
#include "riskshare/moments.hpp"
#include "riskshare/pricing.hpp"
#include "riskshare/simulate.hpp"
#include "riskshare/verify.hpp"

namespace riskshare::io {

using json = nlohmann::json;

inline constexpr int kCsvPrecision = 15;

namespace detail {

inline const json& field(const json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw SchemaError(where + ": expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(where + ": missing key '" + key + "'");
  return *it;
}

inline double number(const json& j, const char* key, const std::string& where) {
  const auto& v = field(j, key, where);
  if (!v.is_number()) throw SchemaError(where + ": key '" + key + "' must be a number");
  return v.get<double>();
}

inline json load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

inline void save(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << j.dump(2) << '\n';
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Ensemble and market files

inline json to_json(const GammaCompensator& m) {
  return {{"rate", m.rate()}, {"shape", m.shape()}, {"scale", m.scale()}};
}

inline GammaCompensator model_from_json(const json& j, const std::string& where) {
  return GammaCompensator(detail::number(j, "rate", where), detail::number(j, "shape", where),
                          detail::number(j, "scale", where));
}

inline json to_json(const ModelEnsemble& e) {
  json models = json::array();
  json weights = json::array();
  for (std::size_t k = 0; k < e.n_models(); ++k) {
    models.push_back(to_json(e.model(k)));
    weights.push_back(e.weight(k));
  }
  return {{"models", models},
          {"counterparty", to_json(e.counterparty())},
          {"weights", weights},
          {"weight_counterparty", e.weight(e.counterparty_index())}};
}

inline ModelEnsemble ensemble_from_json(const json& j) {
  const std::string where = "ensemble";
  const auto& jm = detail::field(j, "models", where);
  const auto& jw = detail::field(j, "weights", where);
  if (!jm.is_array()) throw SchemaError("ensemble: 'models' must be an array");
  if (!jw.is_array()) throw SchemaError("ensemble: 'weights' must be an array");
  std::vector<GammaCompensator> models;
  for (std::size_t i = 0; i < jm.size(); ++i)
    models.push_back(model_from_json(jm[i], "ensemble.models[" + std::to_string(i) + "]"));
  std::vector<double> weights;
  for (const auto& w : jw) {
    if (!w.is_number()) throw SchemaError("ensemble: weights must be numbers");
    weights.push_back(w.get<double>());
  }
  return ModelEnsemble(std::move(models),
                       model_from_json(detail::field(j, "counterparty", where), "ensemble.counterparty"),
                       std::move(weights), detail::number(j, "weight_counterparty", where));
}

inline json to_json(const MarketParams& m) {
  return {{"c", m.premium_rate},
          {"eta", m.safety_loading},
          {"theta", m.ambiguity_penalty},
          {"x0", m.initial_wealth_insurer},
          {"y0", m.initial_wealth_counterparty},
          {"T", m.horizon}};
}

inline MarketParams market_from_json(const json& j) {
  const std::string where = "market";
  MarketParams m;
  m.premium_rate = detail::number(j, "c", where);
  m.safety_loading = detail::number(j, "eta", where);
  m.ambiguity_penalty = detail::number(j, "theta", where);
  m.initial_wealth_insurer = detail::number(j, "x0", where);
  m.initial_wealth_counterparty = detail::number(j, "y0", where);
  m.horizon = detail::number(j, "T", where);
  m.validate();
  return m;
}

inline ModelEnsemble read_ensemble(const std::string& path) { return ensemble_from_json(detail::load(path)); }
inline MarketParams read_market(const std::string& path) { return market_from_json(detail::load(path)); }
inline void write_ensemble(const std::string& path, const ModelEnsemble& e) { detail::save(path, to_json(e)); }
inline void write_market(const std::string& path, const MarketParams& m) { detail::save(path, to_json(m)); }

// ---------------------------------------------------------------------------
// Reports

inline json to_json(const FeasibilityReport& r, const ModelEnsemble& e) {
  json entries = json::array();
  for (const auto& x : r.entries) {
    entries.push_back({{"j", e.label(x.j)},
                       {"k", e.label(x.k)},
                       {"shape_ok", x.shape_ok},
                       {"scale_ok", x.scale_ok},
                       {"pass", x.pass()}});
  }
  return {{"assumption", r.assumption}, {"pass", r.pass()}, {"failures", r.failures()},
          {"entries", entries}};
}

inline json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

inline json to_json(const MomentReport& r) {
  json mz = json::array();
  for (const auto& v : r.mean_Z) mz.push_back(optional_number(v));
  json j{{"measure", r.measure},
         {"time", r.time},
         {"mean_Z", mz},
         {"mean_X", optional_number(r.mean_X)},
         {"var_X", optional_number(r.var_X)},
         {"mean_Y", optional_number(r.mean_Y)},
         {"mean_X_cl", r.mean_X_cl},
         {"var_X_cl", r.var_X_cl}};
  j["cov_Z"] = r.cov_Z ? json(*r.cov_Z) : json(nullptr);
  return j;
}

inline json to_json(const OneModelMoments& m) {
  return {{"time", m.time},         {"mean_Z_P", m.mean_Z_P},   {"mean_Z_Q", m.mean_Z_Q},
          {"mean_X_P", m.mean_X_P}, {"mean_X_Q", m.mean_X_Q},   {"var_Z_P", m.var_Z_P},
          {"var_Z_Q", m.var_Z_Q},   {"var_X_P", m.var_X_P},     {"var_X_Q", m.var_X_Q},
          {"cov_XZ_P", m.cov_XZ_P}, {"cov_XZ_Q", m.cov_XZ_Q},   {"corr_XZ_P", m.corr_XZ_P},
          {"corr_XZ_Q", m.corr_XZ_Q}};
}

inline json to_json(const SeriesStats& s) {
  json mean = json::array(), var = json::array(), se = json::array();
  for (const auto& r : s.at) {
    mean.push_back(r.mean());
    var.push_back(r.variance());
    se.push_back(r.std_error());
  }
  return {{"mean", mean}, {"variance", var}, {"std_error", se}};
}

inline json to_json(const SimulationSummary& s, const ModelEnsemble& e) {
  json z = json::object();
  for (std::size_t k = 0; k < s.Z.size(); ++k) z["Z_" + e.label(k)] = to_json(s.Z[k]);
  return {{"measure", s.measure},
          {"n_paths", s.n_paths},
          {"grid", s.grid},
          {"X_star", to_json(s.X_star)},
          {"X_cl", to_json(s.X_cl)},
          {"Y", to_json(s.Y)},
          {"Z", z},
          {"jump_count", {{"mean", s.jump_count.mean()},
                          {"variance", s.jump_count.variance()},
                          {"std_error", s.jump_count.std_error()}}},
          {"negative_cessions", s.negative_cessions}};
}

inline json to_json(const PricingResult& r) {
  json scan = json::array();
  for (const auto& [eta, v] : r.scan) scan.push_back({{"eta", eta}, {"value", v}});
  return {{"eta_star", r.eta_star},
          {"expected_wealth", r.expected_wealth},
          {"bracket", {r.bracket.first, r.bracket.second}},
          {"iterations", r.iterations},
          {"method", r.method},
          {"multimodal", r.multimodal},
          {"scan", scan}};
}

inline json to_json(const VerificationReport& r) {
  json entries = json::array();
  for (const auto& e : r.entries) {
    json x{{"control", e.control}, {"perturbation", e.description}, {"residual", e.residual},
           {"pass", e.pass}};
    if (e.control == "beta") x["scaled_distance"] = e.scaled_distance;
    entries.push_back(std::move(x));
  }
  return {{"t", r.t}, {"x", r.x}, {"z", r.z}, {"pass", r.pass()}, {"entries", entries}};
}

inline json to_json(const FitResult& f) {
  return {{"model", to_json(f.model)},
          {"rate_std_error", f.rate.std_error},
          {"shape_std_error", f.severity.shape_se},
          {"scale_std_error", f.severity.scale_se},
          {"loglik_severity", f.loglik_severity},
          {"gradient_norm", f.severity.gradient_norm},
          {"n_policies", f.n_policies},
          {"n_claims_total", f.n_claims_total},
          {"converged", f.converged}};
}

// ---------------------------------------------------------------------------
// CSV

inline void csv_precision(std::ostream& os) { os << std::setprecision(kCsvPrecision); }

inline void write_path_header(std::ostream& os, const ModelEnsemble& e) {
  os << "path_id,time,X_star,X_cl,Y";
  for (std::size_t k = 0; k < e.size(); ++k) os << ",logZ_" << e.label(k);
  os << '\n';
}

inline void write_path_rows(std::ostream& os, const PathBundle& b) {
  csv_precision(os);
  for (std::size_t g = 0; g < b.grid.size(); ++g) {
    os << b.path_id << ',' << b.grid[g] << ',' << b.X_star[g] << ',' << b.X_cl[g] << ',' << b.Y[g];
    for (const auto& lz : b.logZ) os << ',' << lz[g];
    os << '\n';
  }
}

inline void write_kde_csv(std::ostream& os, const DensityCurve& c) {
  csv_precision(os);
  os << "abscissa,density\n";
  for (std::size_t i = 0; i < c.abscissa.size(); ++i) os << c.abscissa[i] << ',' << c.density[i] << '\n';
}

inline void write_envelope_csv(std::ostream& os, const std::vector<double>& grid,
                               const PathEnvelopes& e) {
  csv_precision(os);
  os << "time,X_star_mean,X_star_upper,X_star_lower,X_cl_mean,X_cl_upper,X_cl_lower,Y_mean,Y_upper,"
        "Y_lower\n";
  for (std::size_t g = 0; g < grid.size(); ++g) {
    os << grid[g];
    for (const auto* s : {&e.X_star, &e.X_cl, &e.Y}) os << ',' << s->mean[g] << ',' << s->upper[g] << ',' << s->lower[g];
    os << '\n';
  }
}

/// One row per subsample fit.
inline void write_fit_scatter_csv(std::ostream& os, const std::vector<FitResult>& fits) {
  csv_precision(os);
  os << "k,rate,shape,scale\n";
  for (std::size_t k = 0; k < fits.size(); ++k)
    os << k + 1 << ',' << fits[k].model.rate() << ',' << fits[k].model.shape() << ','
       << fits[k].model.scale() << '\n';
}

}  // namespace riskshare::io
