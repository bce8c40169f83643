#pragma once

// Commands of the riskshare tool. Each writes its outputs plus manifest.json into the
// output directory and returns a process exit code.

#include <openssl/evp.h>

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "riskshare/io.hpp"
#include "riskshare/riskshare.hpp"

namespace riskshare::cli {

inline constexpr const char* kToolVersion = "1.0.0";

enum ExitCode : int {
  kOk = 0,
  kOther = 1,
  kSchema = 2,
  kFeasibility = 3,
  kNumerical = 4,
};

namespace fs = std::filesystem;
using json = nlohmann::json;

inline std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

/// Tracks the files a command writes and emits manifest.json at the end.
class Run {
 public:
  Run(std::string command, fs::path out, std::optional<std::uint64_t> seed, json inputs)
      : command_(std::move(command)), out_(std::move(out)), seed_(seed), inputs_(std::move(inputs)),
        start_(utc_now()) {
    fs::create_directories(out_);
  }

  fs::path file(const std::string& name) {
    files_.push_back(name);
    return out_ / name;
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream os(file(name));
    os << j.dump(2) << '\n';
  }

  void finish() {
    json outputs = json::array();
    for (const auto& f : files_) outputs.push_back({{"file", f}, {"sha256", sha256_file(out_ / f)}});
    json m{{"command", command_},
           {"inputs", inputs_},
           {"seed", seed_ ? json(*seed_) : json(nullptr)},
           {"output_directory", out_.string()},
           {"tool_version", kToolVersion},
           {"started", start_},
           {"finished", utc_now()},
           {"outputs", outputs}};
    std::ofstream os(out_ / "manifest.json");
    os << m.dump(2) << '\n';
  }

 private:
  std::string command_;
  fs::path out_;
  std::optional<std::uint64_t> seed_;
  json inputs_;
  std::string start_;
  std::vector<std::string> files_;
};

/// "Q*" (or "Q"), "P_C", "P_1".."P_n".
inline Measure parse_measure(const std::string& s, const ModelEnsemble& e) {
  if (s == "Q*" || s == "Q" || s == "Qstar") return Measure::q_star();
  if (s == "P_C" || s == "PC") return Measure::reference(e.counterparty_index());
  if (s.size() > 2 && s.rfind("P_", 0) == 0) {
    std::size_t used = 0;
    unsigned long k = 0;
    try {
      k = std::stoul(s.substr(2), &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == s.size() - 2 && k >= 1 && k <= e.n_models()) return Measure::reference(k - 1);
  }
  throw UsageError("unknown measure '" + s + "'; use Q*, P_C or P_1..P_" + std::to_string(e.n_models()));
}

inline std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("not a number list: '" + s + "'");
    }
  }
  if (out.empty()) throw UsageError("empty number list");
  return out;
}

/// Integer N: N uniform steps on [0, T]. Otherwise a comma separated list of times.
inline std::vector<double> parse_grid(const std::string& s, double horizon) {
  if (s.find(',') == std::string::npos) {
    try {
      std::size_t used = 0;
      const long n = std::stol(s, &used);
      if (used == s.size()) {
        if (n < 1) throw UsageError("grid step count must be >= 1");
        return uniform_grid(horizon, static_cast<std::size_t>(n));
      }
    } catch (const std::invalid_argument&) {
    }
  }
  return parse_list(s);
}

inline json inputs_json(std::initializer_list<std::pair<const char*, std::string>> items) {
  json j = json::object();
  for (const auto& [k, v] : items)
    if (!v.empty()) j[k] = v;
  return j;
}

// ---------------------------------------------------------------------------

struct FitOptions {
  std::string data;
  std::size_t n_models = 100;
  double fraction = 0.5;
  std::uint64_t seed = 0;
  std::string out = "out";
};

inline int cmd_fit(const FitOptions& o) {
  if (!(o.fraction > 0.0 && o.fraction <= 1.0)) throw DomainError("--fraction must lie in (0, 1]");
  Run run("fit", o.out, o.seed, inputs_json({{"data", o.data}}));
  const auto records = read_policy_csv(o.data);
  const auto cv = cv_ensemble(records, o.n_models, o.fraction, o.seed);
  io::write_ensemble(run.file("ensemble.json").string(), cv.ensemble);
  {
    std::ofstream os(run.file("fit_scatter.csv"));
    io::write_fit_scatter_csv(os, cv.subsamples);
  }
  json subs = json::array();
  for (const auto& f : cv.subsamples) subs.push_back(io::to_json(f));
  std::vector<double> shapes, scales;
  for (const auto& f : cv.subsamples) {
    shapes.push_back(f.model.shape());
    scales.push_back(f.model.scale());
  }
  json rep{{"counterparty", io::to_json(cv.full)}, {"subsamples", subs},
           {"n_models", o.n_models}, {"fraction", o.fraction}};
  if (shapes.size() >= 2) rep["shape_scale_correlation"] = sample_correlation(shapes, scales);
  run.write_json("fit_report.json", rep);
  run.finish();
  std::cout << "fitted " << o.n_models << " models; counterparty rate " << cv.full.model.rate()
            << " shape " << cv.full.model.shape() << " scale " << cv.full.model.scale() << '\n';
  return kOk;
}

struct SynthOptions {
  std::size_t policies = 69740;
  double rate = 0.52;
  double shape = 0.58;
  double scale = 654.98;
  std::uint64_t seed = 0;
  std::string out = "out";
};

inline int cmd_synth(const SynthOptions& o) {
  Run run("synth", o.out, o.seed, json::object());
  SyntheticPortfolio cfg;
  cfg.n_policies = o.policies;
  cfg.rate = o.rate;
  cfg.shape = o.shape;
  cfg.scale = o.scale;
  const auto records = synthetic_portfolio(cfg, o.seed);
  {
    std::ofstream os(run.file("policies.csv"));
    write_policy_csv(os, records);
  }
  run.finish();
  return kOk;
}

inline int cmd_check(const std::string& ensemble_path, const std::string& out) {
  Run run("check", out, std::nullopt, inputs_json({{"ensemble", ensemble_path}}));
  const auto e = io::read_ensemble(ensemble_path);
  const auto a1 = check_assumption_1(e);
  const auto a2 = check_assumption_2(e);
  run.write_json("feasibility.json", {{"pass", a1.pass() && a2.pass()},
                                      {"assumption_1", io::to_json(a1, e)},
                                      {"assumption_2", io::to_json(a2, e)}});
  run.finish();
  std::cout << "assumption 1: " << (a1.pass() ? "pass" : "FAIL") << " (" << a1.failures()
            << " failing pairs)\nassumption 2: " << (a2.pass() ? "pass" : "FAIL") << " ("
            << a2.failures() << " failing triples)\n";
  return a1.pass() && a2.pass() ? kOk : kFeasibility;
}

struct SimulateOptions {
  std::string ensemble;
  std::string market;
  std::uint64_t seed = 0;
  std::size_t paths = 10000;
  std::string grid = "100";
  std::string measure = "Q*";
  std::string out = "out";
  std::size_t csv_paths = 10;
  unsigned threads = 0;
};

inline int cmd_simulate(const SimulateOptions& o) {
  Run run("simulate", o.out, o.seed, inputs_json({{"ensemble", o.ensemble}, {"market", o.market}}));
  const auto e = io::read_ensemble(o.ensemble);
  const auto m = io::read_market(o.market);
  RiskSharingProblem p(e, m);
  SimConfig cfg;
  cfg.measure = parse_measure(o.measure, e);
  cfg.n_paths = o.paths;
  cfg.seed = o.seed;
  cfg.record_grid = parse_grid(o.grid, m.horizon);
  cfg.threads = o.threads;
  cfg.validate(m.horizon);

  {
    BasicPathSimulator<GammaCompensator> sim(p, cfg);
    std::ofstream os(run.file("paths.csv"));
    io::write_path_header(os, e);
    for (std::size_t i = 0; i < std::min(o.csv_paths, o.paths); ++i) io::write_path_rows(os, sim.path(i));
  }
  const auto summary = simulate(p, cfg, true);
  run.write_json("summary.json", io::to_json(summary, e));
  const auto env = path_envelopes(p, cfg, summary);
  {
    std::ofstream os(run.file("envelope.csv"));
    io::write_envelope_csv(os, cfg.record_grid, env);
  }
  auto kde = [&](const std::string& name, const std::vector<double>& xs) {
    try {
      const auto curve = terminal_kde(xs);
      std::ofstream os(run.file(name));
      io::write_kde_csv(os, curve);
    } catch (const DegenerateSample& ex) {
      warn(name + " skipped: " + ex.what());
    }
  };
  kde("kde_X_star.csv", summary.terminal.X_star);
  kde("kde_X_cl.csv", summary.terminal.X_cl);
  kde("kde_Y.csv", summary.terminal.Y);
  run.finish();
  const auto& xt = summary.X_star.at.back();
  std::cout << std::setprecision(12) << "measure " << summary.measure << ", " << summary.n_paths
            << " paths: E[X*_T] = " << xt.mean() << " (se " << xt.std_error() << ")\n";
  return kOk;
}

struct MomentsOptions {
  std::string ensemble;
  std::string market;
  std::string grid = "1";
  std::string measure = "Q*";
  std::string out = "out";
};

inline int cmd_moments(const MomentsOptions& o) {
  Run run("moments", o.out, std::nullopt, inputs_json({{"ensemble", o.ensemble}, {"market", o.market}}));
  const auto e = io::read_ensemble(o.ensemble);
  const auto m = io::read_market(o.market);
  RiskSharingProblem p(e, m);
  const auto meas = parse_measure(o.measure, e);
  const auto times = parse_grid(o.grid, m.horizon);
  json reports = json::array();
  for (double t : times) reports.push_back(io::to_json(moment_report(p, meas, t)));
  run.write_json("moments.json", {{"measure", measure_label(p, meas)}, {"reports", reports}});
  run.finish();
  return kOk;
}

struct PriceOptions {
  std::string ensemble;
  std::string market;
  double eta_max = 1.0;
  std::string theta_sweep;
  std::string out = "out";
};

inline int cmd_price(const PriceOptions& o) {
  Run run("price", o.out, std::nullopt, inputs_json({{"ensemble", o.ensemble}, {"market", o.market}}));
  const auto e = io::read_ensemble(o.ensemble);
  const auto m = io::read_market(o.market);
  require(check_assumption_1(e));
  const auto r = optimize_eta(e, m, o.eta_max);
  json rep = io::to_json(r);
  bool one_model = true;
  for (std::size_t k = 0; k < e.size(); ++k)
    if (e.weight(k) > 0.0 && !(e.model(k) == e.counterparty())) one_model = false;
  if (one_model) rep["eta_star_closed_form"] = eta_star_one_model(e.counterparty(), m);
  if (!o.theta_sweep.empty()) {
    json sweep = json::array();
    std::ofstream os(run.file("theta_sweep.csv"));
    io::csv_precision(os);
    os << "theta,eta_star\n";
    for (const auto& [th, eta] : theta_sweep(e, m, parse_list(o.theta_sweep), o.eta_max)) {
      sweep.push_back({{"theta", th}, {"eta_star", eta}});
      os << th << ',' << eta << '\n';
    }
    rep["theta_sweep"] = sweep;
  }
  {
    std::ofstream os(run.file("pricing_scan.csv"));
    io::csv_precision(os);
    os << "eta,expected_wealth\n";
    for (const auto& [eta, v] : r.scan) os << eta << ',' << v << '\n';
  }
  run.write_json("pricing.json", rep);
  run.finish();
  std::cout << std::setprecision(12) << "eta* = " << r.eta_star
            << ", E^{P_C}[Y_T] = " << r.expected_wealth << '\n';
  return kOk;
}

struct VerifyOptions {
  std::string ensemble;
  std::string market;
  std::size_t perturbations = 100;
  std::uint64_t seed = 0;
  std::string out = "out";
};

inline int cmd_verify(const VerifyOptions& o) {
  Run run("verify", o.out, o.seed, inputs_json({{"ensemble", o.ensemble}, {"market", o.market}}));
  const auto e = io::read_ensemble(o.ensemble);
  const auto m = io::read_market(o.market);
  RiskSharingProblem p(e, m);
  const auto rep = run_verification(p, o.perturbations, o.seed);
  run.write_json("verification.json", io::to_json(rep));
  run.finish();
  std::size_t failed = 0;
  for (const auto& x : rep.entries) failed += x.pass ? 0 : 1;
  std::cout << rep.entries.size() << " residuals, " << failed << " failed\n";
  return rep.pass() ? kOk : kNumerical;
}

/// Maps library exceptions to exit codes.
template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const SchemaError& e) {
    std::cerr << "schema error: " << e.what() << '\n';
    return kSchema;
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kSchema;
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kSchema;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << '\n';
    return kSchema;
  } catch (const InfeasibleModelPair& e) {
    std::cerr << "feasibility error: " << e.what() << '\n';
    return kFeasibility;
  } catch (const AdmissibilityViolation& e) {
    std::cerr << "admissibility error: " << e.what() << '\n';
    return kFeasibility;
  } catch (const NumericalFailure& e) {
    std::cerr << "numerical failure: " << e.what() << " (achieved " << e.achieved_tolerance() << ")\n";
    return kNumerical;
  } catch (const DegenerateSample& e) {
    std::cerr << "degenerate sample: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kOther;
  }
}

}  // namespace riskshare::cli
