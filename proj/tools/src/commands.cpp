#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

#include "sqz/detector.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/opo_model.hpp"
#include "sqz/synth.hpp"
#include "sqz/trace_io.hpp"

namespace sqz::cli {

using json = nlohmann::ordered_json;

int exit_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Parse:
    case ErrorKind::Io:
      return kParse;
    case ErrorKind::Alignment:
    case ErrorKind::Range:
      return kGrid;
    case ErrorKind::Empty:
      return kEmpty;
    default:
      return kFailure;
  }
}

namespace {

double parse_number(std::string_view text, std::string_view what) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) {
    text.remove_suffix(1);
  }
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw Error(ErrorKind::Parse, fmt::format("{}: '{}' is not a number", what, text));
  }
  return v;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep)) out.push_back(item);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorKind::Io, fmt::format("cannot create output directory {}", dir.string()));
  }
}

// Paths in JSON are stored relative to the directory holding the JSON file
// so a run directory can be moved as a whole.
std::string relative_to(const fs::path& p, const fs::path& base) {
  const auto abs = fs::absolute(p).lexically_normal();
  const auto rel = abs.lexically_relative(fs::absolute(base).lexically_normal());
  return (rel.empty() ? abs : rel).generic_string();
}

fs::path resolve(const fs::path& base, const std::string& stored) {
  const fs::path p(stored);
  return p.is_absolute() ? p : base / p;
}

void write_json(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

template <class F>
std::string render(F&& writer) {
  std::ostringstream out;
  writer(out);
  return out.str();
}

json params_json(const OpoParams& p) {
  return {{"gamma_fwhm_hz", p.gamma_fwhm}, {"x", p.x}, {"eta", p.eta}};
}

json mask_json(const std::vector<FrequencyInterval>& mask) {
  json out = json::array();
  for (const auto& m : mask) out.push_back({m.lo, m.hi});
  return out;
}

std::string gigahertz(double hz) { return fmt::format("{:.4f} GHz", hz / 1e9); }

json series(std::span<const double> v) {
  json out = json::array();
  for (double x : v) out.push_back(x);
  return out;
}

}  // namespace

FrequencyInterval parse_interval(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::Parse, fmt::format("interval '{}' expects lo_hz:hi_hz", text));
  }
  const FrequencyInterval iv{parse_number(std::string_view(text).substr(0, colon), "interval"),
                             parse_number(std::string_view(text).substr(colon + 1), "interval")};
  if (!iv.well_formed()) {
    throw Error(ErrorKind::Parse, fmt::format("interval '{}' needs 0 <= lo <= hi", text));
  }
  return iv;
}

// ---------------------------------------------------------------------------

int cmd_normalize(const NormalizeArgs& args) {
  const auto measured = read_trace_csv(args.measured);
  auto shot = read_trace_csv(args.shot);
  auto dark = read_trace_csv(args.dark);

  std::optional<Interpolation> method;
  if (args.resample) {
    if (*args.resample == "nearest") {
      method = Interpolation::Nearest;
    } else if (*args.resample == "linear") {
      method = Interpolation::Linear;
    } else {
      throw Error(ErrorKind::Parse, fmt::format("unknown resample method '{}'", *args.resample));
    }
    shot = resample(shot, measured.frequencies(), *method);
    dark = resample(dark, measured.frequencies(), *method);
  }

  DegeneratePolicy policy;
  if (args.policy == "flag") {
    policy = DegeneratePolicy::Flag;
  } else if (args.policy == "error") {
    policy = DegeneratePolicy::Error;
  } else {
    throw Error(ErrorKind::Parse, fmt::format("unknown policy '{}'", args.policy));
  }

  auto spectrum = normalize_to_shot(measured, shot, dark, policy);
  spectrum.label = args.label.value_or(measured.label());

  ensure_dir(args.out);
  const auto csv_name = spectrum.label + ".normalized.csv";
  write_file_atomic(args.out / csv_name,
                    render([&](std::ostream& o) { write_normalized_csv(o, spectrum); }));

  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (!spectrum.valid[i]) continue;
    lo = std::min(lo, spectrum.rel_power_db[i]);
    hi = std::max(hi, spectrum.rel_power_db[i]);
    sum += spectrum.rel_power_db[i];
  }
  const double mean = sum / static_cast<double>(spectrum.valid_count());

  json j;
  j["command"] = "normalize";
  j["inputs"] = {{"measured", relative_to(args.measured, args.out)},
                 {"shot", relative_to(args.shot, args.out)},
                 {"dark", relative_to(args.dark, args.out)}};
  j["label"] = spectrum.label;
  j["policy"] = to_string(policy);
  j["resample"] = method ? json(to_string(*method)) : json(nullptr);
  j["points"] = spectrum.size();
  j["valid_points"] = spectrum.valid_count();
  j["invalid_points"] = spectrum.correction.invalid_points;
  j["rel_power_db"] = {{"min", lo}, {"max", hi}, {"mean", mean}};
  j["output"] = csv_name;
  write_json(args.out / (spectrum.label + ".normalize.json"), j);

  fmt::print("normalized {} ({} points, {} invalid, policy {})\n", spectrum.label, spectrum.size(),
             spectrum.correction.invalid_points, to_string(policy));
  fmt::print("rel_power_db min = {:.3f} dB, max = {:.3f} dB, mean = {:.3f} dB\n", lo, hi, mean);
  fmt::print("wrote {}\n", (args.out / csv_name).string());
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_fit(const FitArgs& args) {
  FitDataset data;
  data.squeezed = read_normalized_csv(args.squeezed);
  if (args.antisqueezed) data.antisqueezed = read_normalized_csv(*args.antisqueezed);
  for (const auto& m : args.mask) data.mask.push_back(parse_interval(m));

  FitOptions opt = args.options;
  if (args.covariance == "residual") {
    opt.covariance = CovarianceEstimator::Residual;
  } else if (args.covariance == "clustered" || args.covariance == "frequency_clustered") {
    opt.covariance = CovarianceEstimator::FrequencyClustered;
  } else {
    throw Error(ErrorKind::Parse, fmt::format("unknown covariance estimator '{}'", args.covariance));
  }
  if (args.jacobian == "analytic") {
    opt.jacobian_mode = JacobianMode::Analytic;
  } else if (args.jacobian == "fd") {
    opt.jacobian_mode = JacobianMode::FiniteDifference;
  } else {
    throw Error(ErrorKind::Parse, fmt::format("unknown jacobian mode '{}'", args.jacobian));
  }

  data.validate();
  OpoParams init;
  if (args.init) {
    const auto parts = split(*args.init, ',');
    if (parts.size() != 3) {
      throw Error(ErrorKind::Parse, "--init expects gamma_fwhm_hz,x,eta");
    }
    init = {parse_number(parts[0], "--init"), parse_number(parts[1], "--init"),
            parse_number(parts[2], "--init")};
  } else {
    init = initial_guess(data);
  }

  const auto r = fit(data, init, opt);

  ensure_dir(args.out);
  json j;
  j["command"] = "fit";
  j["inputs"] = {{"squeezed", relative_to(args.squeezed, args.out)},
                 {"antisqueezed", args.antisqueezed
                                      ? json(relative_to(*args.antisqueezed, args.out))
                                      : json(nullptr)}};
  j["options"] = {{"max_iterations", opt.max_iterations},
                  {"cost_tolerance", opt.cost_tolerance},
                  {"step_tolerance", opt.step_tolerance},
                  {"initial_damping", opt.initial_damping},
                  {"multistart", opt.multistart},
                  {"seed", opt.seed},
                  {"condition_warning", opt.condition_warning},
                  {"allow_degenerate", opt.allow_degenerate},
                  {"jacobian", args.jacobian},
                  {"covariance", to_string(opt.covariance)}};
  j["init"] = params_json(init);
  j["params"] = params_json(r.params);
  j["sigma"] = {{"gamma_fwhm_hz", r.sigma[0]}, {"x", r.sigma[1]}, {"eta", r.sigma[2]}};
  json cov = json::array();
  for (int a = 0; a < 3; ++a) {
    json row = json::array();
    for (int b = 0; b < 3; ++b) row.push_back(r.covariance(a, b));
    cov.push_back(row);
  }
  j["covariance"] = cov;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["start_index"] = r.start_index;
  j["cost"] = r.cost;
  j["rms_residual_db"] = r.rms_residual_db;
  j["n_points"] = r.n_points;
  j["n_squeezed"] = r.n_squeezed;
  j["n_antisqueezed"] = r.n_antisqueezed;
  j["condition_number"] = r.condition_number;
  j["mask"] = mask_json(r.mask);
  j["cost_history"] = r.cost_history;
  j["warnings"] = r.warnings;

  const auto text = fit_report(r);
  write_json(args.out / "fit.json", j);
  write_file_atomic(args.out / "fit_report.txt", text);
  fmt::print("{}", text);
  return r.converged ? kOk : kNotConverged;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<LinearityPoint> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open manifest {}", path.string()));
  const auto base = path.parent_path();
  std::vector<LinearityPoint> points;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    if (!header) {
      if (line != "lo_power_w,noise_csv,dark_csv") {
        throw Error(ErrorKind::Parse,
                    fmt::format("{}: expected header lo_power_w,noise_csv,dark_csv", path.string()));
      }
      header = true;
      continue;
    }
    const auto cols = split(line, ',');
    if (cols.size() != 3) {
      throw Error(ErrorKind::Parse, fmt::format("{}:{}: expected 3 columns", path.string(), lineno));
    }
    points.push_back({parse_number(cols[0], "lo_power_w"), read_trace_csv(resolve(base, cols[1])),
                      read_trace_csv(resolve(base, cols[2]))});
  }
  if (!header) throw Error(ErrorKind::Parse, fmt::format("{}: empty manifest", path.string()));
  return points;
}

}  // namespace

int cmd_linearity(const LinearityArgs& args) {
  const auto band = parse_interval(args.band);
  const auto points = read_manifest(args.manifest);
  const auto r = linearity_fit(points, band);
  const auto verdict = saturation_verdict(r.exponent, args.tolerance);
  const fs::path out = args.out.value_or(args.manifest.parent_path().empty()
                                             ? fs::path(".")
                                             : args.manifest.parent_path());

  json j;
  j["command"] = "linearity";
  j["inputs"] = {{"manifest", relative_to(args.manifest, out)}};
  j["band_hz"] = {band.lo, band.hi};
  j["tolerance"] = args.tolerance;
  j["levels"] = r.levels;
  j["exponent"] = r.exponent;
  j["db_per_doubling"] = r.db_per_doubling;
  j["verdict"] = to_string(verdict);
  json powers = json::array();
  for (const auto& p : points) powers.push_back(p.lo_power_w);
  j["lo_powers_w"] = powers;
  j["band_levels_db"] = r.band_levels_db;
  j["per_frequency"] = {{"frequency_hz", r.frequencies}, {"exponent", series(r.exponents)}};

  std::string text;
  text += fmt::format("LO power levels = {}\n", r.levels);
  text += fmt::format("band = {} .. {}\n", gigahertz(band.lo), gigahertz(band.hi));
  text += fmt::format("exponent = {:.4f}\n", r.exponent);
  text += fmt::format("{:.2f} dB per doubling\n", r.db_per_doubling);
  text += fmt::format("verdict = {} (tolerance {:.3f})\n", to_string(verdict), args.tolerance);

  ensure_dir(out);
  write_json(out / "linearity.json", j);
  write_file_atomic(out / "linearity.txt", text);
  fmt::print("{}", text);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_budget(const BudgetArgs& args) {
  LossBudget budget;
  for (const auto& c : args.components) {
    const auto eq = c.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorKind::Parse, fmt::format("component '{}' expects name=efficiency", c));
    }
    budget.components.push_back(
        {c.substr(0, eq), parse_number(std::string_view(c).substr(eq + 1), "efficiency")});
  }
  budget.fitted_eta = args.fitted_eta;
  const auto s = loss_budget_product(budget);

  json comps = json::array();
  std::string text;
  for (const auto& c : budget.components) {
    comps.push_back({{"name", c.name}, {"efficiency", c.efficiency}});
    text += fmt::format("{} = {:.3f}\n", c.name, c.efficiency);
  }
  text += fmt::format("product = {:.3f}\n", s.product);
  json j;
  j["command"] = "budget";
  j["components"] = comps;
  j["product"] = s.product;
  j["fitted_eta"] = budget.fitted_eta ? json(*budget.fitted_eta) : json(nullptr);
  j["residual"] = s.residual ? json(*s.residual) : json(nullptr);
  if (s.residual) {
    text += fmt::format("fitted eta = {:.3f}\n", *budget.fitted_eta);
    text += fmt::format("residual = {:.3f}\n", *s.residual);
  }

  ensure_dir(args.out);
  write_json(args.out / "budget.json", j);
  write_file_atomic(args.out / "budget.txt", text);
  fmt::print("{}", text);
  return kOk;
}

// ---------------------------------------------------------------------------

int cmd_simulate(const SimulateArgs& args) {
  auto scenario = load_scenario(args.scenario);
  if (const char* env = std::getenv("SQZ_SEED"); env && *env) {
    std::uint64_t seed = 0;
    const std::string_view text(env);
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), seed);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
      throw Error(ErrorKind::Parse, fmt::format("SQZ_SEED '{}' is not an unsigned integer", text));
    }
    scenario.seed = seed;
  }
  const auto c = generate_campaign(scenario);

  ensure_dir(args.out);
  json files = json::array();
  auto put = [&](const fs::path& rel, const Trace& t) {
    write_file_atomic(args.out / rel, render([&](std::ostream& o) { write_trace_csv(o, t); }));
    files.push_back(rel.generic_string());
  };
  put("shot.csv", c.shot);
  put("dark.csv", c.dark);
  put("squeezed.csv", c.squeezed);
  put("antisqueezed.csv", c.antisqueezed);
  if (!c.linearity.empty()) {
    ensure_dir(args.out / "linearity");
    std::string manifest = "lo_power_w,noise_csv,dark_csv\n";
    for (const auto& p : c.linearity) {
      const auto noise = fs::path("linearity") / (p.noise.label() + ".csv");
      const auto dark = fs::path("linearity") / (p.dark.label() + ".csv");
      put(noise, p.noise);
      put(dark, p.dark);
      manifest += fmt::format("{},{},{}\n", format_double(p.lo_power_w), noise.generic_string(),
                              dark.generic_string());
    }
    write_file_atomic(args.out / "linearity_manifest.csv", manifest);
    files.push_back("linearity_manifest.csv");
  }

  const auto& p = scenario.params;
  const double sq0 = -10 * std::log10(variance_detected(0.0, p, Quadrature::Squeezed));
  const double an0 = 10 * std::log10(variance_detected(0.0, p, Quadrature::AntiSqueezed));

  json j;
  j["command"] = "simulate";
  j["inputs"] = {{"scenario", relative_to(args.scenario, args.out)}};
  j["seed"] = scenario.seed;
  j["params"] = params_json(p);
  j["grid"] = {{"start_hz", scenario.grid.front()},
               {"stop_hz", scenario.grid.back()},
               {"points", scenario.grid.size()}};
  j["shot_level_dbm"] = scenario.shot_level_dbm;
  j["clearance"] = {{"low_hz", scenario.clearance.low_hz},
                    {"low_db", scenario.clearance.low_db},
                    {"high_hz", scenario.clearance.high_hz},
                    {"high_db", scenario.clearance.high_db}};
  j["trace_noise_sigma_db"] = scenario.trace_noise_sigma_db;
  j["n_averages"] = scenario.n_averages;
  j["reference_averages"] =
      scenario.reference_averages ? json(*scenario.reference_averages) : json(nullptr);
  if (scenario.imbalance) {
    const auto& m = *scenario.imbalance;
    j["imbalance"] = {{"slope_rad_per_hz", m.slope},
                      {"amplitude_rad", m.amplitude},
                      {"f0_hz", m.f0},
                      {"width_hz", m.width}};
  } else {
    j["imbalance"] = nullptr;
  }
  j["lo_powers_w"] = scenario.lo_powers;
  j["saturation_knee_w"] =
      scenario.saturation_knee ? json(*scenario.saturation_knee) : json(nullptr);
  j["lo_scaling_exponent"] = scenario.lo_scaling_exponent;
  j["dc_squeezing_db"] = sq0;
  j["dc_antisqueezing_db"] = an0;
  j["files"] = files;
  write_json(args.out / "truth.json", j);

  fmt::print("ground truth (seed {})\n", scenario.seed);
  fmt::print("gamma_fwhm = {}\n", gigahertz(p.gamma_fwhm));
  fmt::print("x = {:.6g}\n", p.x);
  fmt::print("eta = {:.4g} %\n", 100 * p.eta);
  fmt::print("DC squeezing = {:.3f} dB, DC anti-squeezing = {:.3f} dB\n", sq0, an0);
  fmt::print("wrote {} files to {}\n", files.size(), args.out.string());
  return kOk;
}

// ---------------------------------------------------------------------------

namespace {

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, fmt::format("cannot open {}", path.string()));
  try {
    return json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("{}: {}", path.string(), e.what()));
  }
}

double number_or_nan(const json& j) { return j.is_number() ? j.get<double>() : NAN; }

struct ModelColumns {
  std::string text;
  std::size_t points = 0;
};

ModelColumns model_csv(const NormalizedSpectrum& s, const OpoParams& p, Quadrature q,
                       const std::vector<FrequencyInterval>& mask) {
  ModelColumns out;
  out.text = "frequency_hz,data_db,valid,masked,model_db,residual_db\n";
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double f = s.frequencies[i];
    const bool masked =
        std::any_of(mask.begin(), mask.end(), [&](const auto& m) { return m.contains(f); });
    const double model = 10 * std::log10(variance_detected(f, p, q));
    const bool valid = s.valid[i];
    out.text += fmt::format("{},{},{},{},{},{}\n", format_double(f),
                            valid ? format_double(s.rel_power_db[i]) : "nan", valid ? 1 : 0,
                            masked ? 1 : 0, format_double(model),
                            valid ? format_double(s.rel_power_db[i] - model) : "nan");
    ++out.points;
  }
  return out;
}

}  // namespace

int cmd_report(const ReportArgs& args) {
  const auto fit_path = args.run / "fit.json";
  if (!fs::exists(fit_path)) {
    throw Error(ErrorKind::Io, fmt::format("no fit.json in {}; run `sqz fit` first", args.run.string()));
  }
  const auto fitj = read_json(fit_path);
  OpoParams p;
  std::array<double, 3> sigma{};
  std::vector<FrequencyInterval> mask;
  std::string sq_rel;
  std::optional<std::string> an_rel;
  bool converged = false;
  double rms = 0.0;
  try {
    p = {fitj.at("params").at("gamma_fwhm_hz").get<double>(), fitj.at("params").at("x").get<double>(),
         fitj.at("params").at("eta").get<double>()};
    sigma = {number_or_nan(fitj.at("sigma").at("gamma_fwhm_hz")), number_or_nan(fitj.at("sigma").at("x")),
             number_or_nan(fitj.at("sigma").at("eta"))};
    for (const auto& m : fitj.at("mask")) mask.push_back({m.at(0).get<double>(), m.at(1).get<double>()});
    sq_rel = fitj.at("inputs").at("squeezed").get<std::string>();
    if (!fitj.at("inputs").at("antisqueezed").is_null()) {
      an_rel = fitj.at("inputs").at("antisqueezed").get<std::string>();
    }
    converged = fitj.at("converged").get<bool>();
    rms = fitj.at("rms_residual_db").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, fmt::format("{}: {}", fit_path.string(), e.what()));
  }
  p.validate();

  json files = json::array();
  const auto sq = read_normalized_csv(resolve(args.run, sq_rel));
  const auto sq_model = model_csv(sq, p, Quadrature::Squeezed, mask);
  write_file_atomic(args.run / "model_squeezed.csv", sq_model.text);
  files.push_back("model_squeezed.csv");
  if (an_rel) {
    const auto an = read_normalized_csv(resolve(args.run, *an_rel));
    write_file_atomic(args.run / "model_antisqueezed.csv",
                      model_csv(an, p, Quadrature::AntiSqueezed, mask).text);
    files.push_back("model_antisqueezed.csv");
  }

  // Clearance from the shot and dark references named by the first
  // normalization summary in the run directory.
  std::vector<fs::path> summaries;
  for (const auto& e : fs::directory_iterator(args.run)) {
    const auto name = e.path().filename().string();
    if (name.size() > 15 && name.ends_with(".normalize.json")) summaries.push_back(e.path());
  }
  std::sort(summaries.begin(), summaries.end());
  json clear = nullptr;
  std::string clear_text = "clearance = n/a (no normalization summary in run directory)\n";
  if (!summaries.empty()) {
    const auto nj = read_json(summaries.front());
    const auto shot = read_trace_csv(resolve(args.run, nj.at("inputs").at("shot").get<std::string>()));
    const auto dark = read_trace_csv(resolve(args.run, nj.at("inputs").at("dark").get<std::string>()));
    const auto c = clearance(shot, dark);
    std::string csv = "frequency_hz,clearance_db\n";
    double lo = INFINITY, hi = -INFINITY, above_ghz = INFINITY;
    for (std::size_t i = 0; i < c.size(); ++i) {
      const double f = c.frequencies()[i];
      const double v = c.powers()[i];
      csv += fmt::format("{},{}\n", format_double(f), format_double(v));
      lo = std::min(lo, v);
      hi = std::max(hi, v);
      if (f >= 1e9) above_ghz = std::min(above_ghz, v);
    }
    write_file_atomic(args.run / "clearance.csv", csv);
    files.push_back("clearance.csv");
    clear = {{"source", summaries.front().filename().string()},
             {"at_lowest_frequency_db", c.powers().front()},
             {"lowest_frequency_hz", c.frequencies().front()},
             {"min_db", lo},
             {"max_db", hi},
             {"min_above_1ghz_db", std::isfinite(above_ghz) ? json(above_ghz) : json(nullptr)}};
    clear_text = fmt::format("clearance at {} = {:.2f} dB (min {:.2f} dB, max {:.2f} dB)\n",
                             gigahertz(c.frequencies().front()), c.powers().front(), lo, hi);
    if (std::isfinite(above_ghz)) {
      clear_text += fmt::format("clearance above 1 GHz >= {:.2f} dB\n", above_ghz);
    }
  }

  std::optional<double> bandwidth;
  try {
    bandwidth = squeeze_bandwidth(p, args.threshold_db);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::Domain) throw;
  }
  std::optional<double> limit;
  if (p.eta < 1.0) limit = max_squeezing_db(p.eta);
  const double sq0 = -10 * std::log10(variance_detected(0.0, p, Quadrature::Squeezed));
  const double an0 = 10 * std::log10(variance_detected(0.0, p, Quadrature::AntiSqueezed));

  json j;
  j["command"] = "report";
  j["fit"] = {{"params", params_json(p)},
              {"sigma", {{"gamma_fwhm_hz", sigma[0]}, {"x", sigma[1]}, {"eta", sigma[2]}}},
              {"converged", converged},
              {"rms_residual_db", rms}};
  j["threshold_db"] = args.threshold_db;
  j["squeeze_bandwidth_hz"] = bandwidth ? json(*bandwidth) : json(nullptr);
  j["max_squeezing_db"] = limit ? json(*limit) : json(nullptr);
  j["dc_squeezing_db"] = sq0;
  j["dc_antisqueezing_db"] = an0;
  j["clearance"] = clear;
  j["files"] = files;

  std::string text;
  if (!converged) text += "*** FIT DID NOT CONVERGE; values below are the last iterate ***\n";
  auto with_sigma = [](double v, double s, double scale, const char* unit) {
    return std::isfinite(s) ? fmt::format("{:.4f} ± {:.4f}{}", v * scale, s * scale, unit)
                            : fmt::format("{:.4f} ± n/a{}", v * scale, unit);
  };
  text += fmt::format("gamma_fwhm = {}\n", with_sigma(p.gamma_fwhm, sigma[0], 1e-9, " GHz"));
  text += fmt::format("x = {}\n", with_sigma(p.x, sigma[1], 1.0, ""));
  text += fmt::format("eta = {}\n", with_sigma(p.eta, sigma[2], 100.0, " %"));
  text += fmt::format("rms residual = {:.4g} dB\n", rms);
  text += limit ? fmt::format("loss-limited squeezing = {:.2f} dB\n", *limit)
                : std::string("loss-limited squeezing = unbounded (eta = 1)\n");
  text += fmt::format("DC squeezing = {:.2f} dB, DC anti-squeezing = {:.2f} dB\n", sq0, an0);
  text += bandwidth ? fmt::format("{:g} dB squeeze bandwidth = {}\n", args.threshold_db,
                                  gigahertz(*bandwidth))
                    : fmt::format("{:g} dB squeeze bandwidth = n/a (never reached)\n",
                                  args.threshold_db);
  text += clear_text;

  write_json(args.run / "report.json", j);
  write_file_atomic(args.run / "report.txt", text);
  fmt::print("{}", text);
  return kOk;
}

}  // namespace sqz::cli
