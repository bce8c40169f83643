#include <CLI11.hpp>

#include "riskshare_cli.hpp"

using namespace riskshare::cli;

int main(int argc, char** argv) {
  CLI::App app{"Robust risk sharing under model ambiguity: fitting, simulation, moments, pricing"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);

  FitOptions fit;
  auto* c_fit = app.add_subcommand("fit", "fit the counterparty model and a cross-validation ensemble");
  c_fit->add_option("--data", fit.data, "claims CSV (policy_id,exposure,n_claims,avg_claim)")->required();
  c_fit->add_option("--n-models", fit.n_models, "number of subsample models")->capture_default_str();
  c_fit->add_option("--fraction", fit.fraction, "subsample fraction in (0, 1]")->capture_default_str();
  c_fit->add_option("--seed", fit.seed)->capture_default_str();
  c_fit->add_option("--out", fit.out, "output directory")->capture_default_str();

  SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic claims CSV");
  c_synth->add_option("--policies", synth.policies)->capture_default_str();
  c_synth->add_option("--rate", synth.rate)->capture_default_str();
  c_synth->add_option("--shape", synth.shape)->capture_default_str();
  c_synth->add_option("--scale", synth.scale)->capture_default_str();
  c_synth->add_option("--seed", synth.seed)->capture_default_str();
  c_synth->add_option("--out", synth.out)->capture_default_str();

  std::string check_ensemble;
  std::string check_out = "out";
  auto* c_check = app.add_subcommand("check", "check the square-integrability assumptions");
  c_check->add_option("--ensemble", check_ensemble)->required();
  c_check->add_option("--out", check_out)->capture_default_str();

  SimulateOptions sim;
  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo paths of Z*, X*, X^CL and Y");
  c_sim->add_option("--ensemble", sim.ensemble)->required();
  c_sim->add_option("--market", sim.market)->required();
  c_sim->add_option("--seed", sim.seed)->capture_default_str();
  c_sim->add_option("--paths", sim.paths)->capture_default_str();
  c_sim->add_option("--grid", sim.grid, "step count or comma separated times")->capture_default_str();
  c_sim->add_option("--measure", sim.measure, "Q*, P_C or P_k")->capture_default_str();
  c_sim->add_option("--out", sim.out)->capture_default_str();
  c_sim->add_option("--csv-paths", sim.csv_paths, "paths written to paths.csv")->capture_default_str();
  c_sim->add_option("--threads", sim.threads, "worker threads, 0 for all cores")->capture_default_str();

  MomentsOptions mom;
  auto* c_mom = app.add_subcommand("moments", "closed-form moments");
  c_mom->add_option("--ensemble", mom.ensemble)->required();
  c_mom->add_option("--market", mom.market)->required();
  c_mom->add_option("--grid", mom.grid, "step count or comma separated times")->capture_default_str();
  c_mom->add_option("--measure", mom.measure)->capture_default_str();
  c_mom->add_option("--out", mom.out)->capture_default_str();

  PriceOptions price;
  auto* c_price = app.add_subcommand("price", "optimal safety loading for the counterparty");
  c_price->add_option("--ensemble", price.ensemble)->required();
  c_price->add_option("--market", price.market)->required();
  c_price->add_option("--eta-max", price.eta_max)->capture_default_str();
  c_price->add_option("--theta-sweep", price.theta_sweep, "comma separated theta values");
  c_price->add_option("--out", price.out)->capture_default_str();

  VerifyOptions ver;
  auto* c_ver = app.add_subcommand("verify", "quadrature check of the saddle-point conditions");
  c_ver->add_option("--ensemble", ver.ensemble)->required();
  c_ver->add_option("--market", ver.market)->required();
  c_ver->add_option("--perturbations", ver.perturbations)->capture_default_str();
  c_ver->add_option("--seed", ver.seed)->capture_default_str();
  c_ver->add_option("--out", ver.out)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kSchema;
  }

  return guarded([&] {
    if (*c_fit) return cmd_fit(fit);
    if (*c_synth) return cmd_synth(synth);
    if (*c_check) return cmd_check(check_ensemble, check_out);
    if (*c_sim) return cmd_simulate(sim);
    if (*c_mom) return cmd_moments(mom);
    if (*c_price) return cmd_price(price);
    return cmd_verify(ver);
  });
}
