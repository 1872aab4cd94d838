#include <iostream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "commands.hpp"

using namespace sqz::cli;

int main(int argc, char** argv) {
  CLI::App app{"Squeezed-light spectrum analysis: normalization, OPO fits, detector checks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "sqz 0.1.0");

  NormalizeArgs norm;
  auto* n = app.add_subcommand("normalize", "Dark-correct and shot-normalize a trace");
  n->add_option("-m,--measured", norm.measured, "Measured trace CSV")->required();
  n->add_option("-s,--shot", norm.shot, "Shot-noise reference CSV")->required();
  n->add_option("-d,--dark", norm.dark, "Dark-noise CSV")->required();
  n->add_option("-o,--out", norm.out, "Output directory")->capture_default_str();
  n->add_option("--resample", norm.resample, "Resample shot/dark onto the measured grid")
      ->check(CLI::IsMember({"nearest", "linear"}));
  n->add_option("--policy", norm.policy, "Non-positive corrected power: flag or error")
      ->check(CLI::IsMember({"flag", "error"}))
      ->capture_default_str();
  n->add_option("--label", norm.label, "Output label (default: measured file stem)");

  FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the OPO model to normalized spectra");
  f->add_option("--squeezed", fit.squeezed, "Normalized squeezed CSV")->required();
  f->add_option("--antisqueezed", fit.antisqueezed, "Normalized anti-squeezed CSV");
  f->add_option("-o,--out", fit.out, "Output directory")->capture_default_str();
  f->add_option("--mask", fit.mask, "Exclude lo_hz:hi_hz (repeatable)");
  f->add_option("--init", fit.init, "Start at gamma_fwhm_hz,x,eta");
  f->add_option("--max-iter", fit.options.max_iterations)->capture_default_str();
  f->add_option("--cost-tol", fit.options.cost_tolerance)->capture_default_str();
  f->add_option("--step-tol", fit.options.step_tolerance)->capture_default_str();
  f->add_option("--damping", fit.options.initial_damping)->capture_default_str();
  f->add_option("--multistart", fit.options.multistart, "Restarts if the first run stalls")
      ->capture_default_str();
  f->add_option("--seed", fit.options.seed, "Multi-start jitter seed")->capture_default_str();
  f->add_option("--condition-warning", fit.options.condition_warning)->capture_default_str();
  f->add_option("--covariance", fit.covariance, "residual or clustered (frequency_clustered)")
      ->check(CLI::IsMember({"residual", "clustered", "frequency_clustered"}))
      ->capture_default_str();
  f->add_option("--jacobian", fit.jacobian, "analytic or fd")
      ->check(CLI::IsMember({"analytic", "fd"}))
      ->capture_default_str();
  f->add_flag("--allow-degenerate", fit.options.allow_degenerate,
              "Report singular fits with infinite sigma instead of failing");

  LinearityArgs lin;
  auto* l = app.add_subcommand("linearity", "Detector linearity versus LO power");
  l->add_option("--manifest", lin.manifest, "CSV lo_power_w,noise_csv,dark_csv")->required();
  l->add_option("--band", lin.band, "Averaging band lo_hz:hi_hz")->capture_default_str();
  l->add_option("--tol", lin.tolerance, "Allowed |exponent - 1|")->capture_default_str();
  l->add_option("-o,--out", lin.out, "Output directory (default: manifest directory)");

  BudgetArgs bud;
  auto* b = app.add_subcommand("budget", "Product of component efficiencies");
  b->add_option("-c,--component", bud.components, "name=efficiency (repeatable)")->required();
  b->add_option("--fitted-eta", bud.fitted_eta, "Fitted total efficiency");
  b->add_option("-o,--out", bud.out, "Output directory")->capture_default_str();

  SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Synthesize a measurement campaign");
  s->add_option("--scenario", sim.scenario, "Scenario INI file")->required();
  s->add_option("-o,--out", sim.out, "Output directory")->capture_default_str();

  ReportArgs rep;
  auto* r = app.add_subcommand("report", "Consolidated report for a run directory");
  r->add_option("run", rep.run, "Run directory with fit.json")->required();
  r->add_option("--threshold", rep.threshold_db, "Squeeze bandwidth threshold in dB")
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kParse;
  }

  try {
    if (*n) return cmd_normalize(norm);
    if (*f) return cmd_fit(fit);
    if (*l) return cmd_linearity(lin);
    if (*b) return cmd_budget(bud);
    if (*s) return cmd_simulate(sim);
    if (*r) return cmd_report(rep);
  } catch (const sqz::Error& e) {
    fmt::print(stderr, "sqz: {} error: {}\n", sqz::to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    fmt::print(stderr, "sqz: error: {}\n", e.what());
    return kFailure;
  }
  return kFailure;
}
