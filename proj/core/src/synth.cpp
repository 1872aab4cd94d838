#include "sqz/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

// Trace indices feeding the per-trace seed.
enum : std::uint32_t { kShot = 0, kDark = 1, kSqueezed = 2, kAnti = 3, kLinearityBase = 16 };

class NoiseSource {
 public:
  NoiseSource(std::uint64_t seed, std::uint32_t stream, double sigma) : sigma_(sigma) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      stream};
    engine_.seed(seq);
  }

  double operator()() { return sigma_ > 0.0 ? sigma_ * normal_(engine_) : 0.0; }

 private:
  double sigma_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

double to_db(double lin) { return 10.0 * std::log10(lin); }
double to_lin(double db) { return std::pow(10.0, db / 10.0); }

double noise_sigma(const Scenario& s) {
  return s.trace_noise_sigma_db / std::sqrt(static_cast<double>(s.n_averages));
}

double reference_sigma(const Scenario& s) {
  const int n = s.reference_averages.value_or(s.n_averages);
  return s.trace_noise_sigma_db / std::sqrt(static_cast<double>(n));
}

// Quantum shot-noise power S and dark power D at grid point i.
struct Levels {
  std::vector<double> quantum;
  std::vector<double> dark;
};

Levels levels(const Scenario& s) {
  Levels out;
  const double total = to_lin(s.shot_level_dbm);
  for (double f : s.grid) {
    const double d = total * to_lin(-s.clearance.at(f));
    out.dark.push_back(d);
    out.quantum.push_back(total - d);
  }
  return out;
}

Trace noisy_trace(const std::vector<double>& grid, const std::vector<double>& lin,
                  NoiseSource& noise, std::string label) {
  std::vector<double> db(lin.size());
  for (std::size_t i = 0; i < lin.size(); ++i) db[i] = to_db(lin[i]) + noise();
  return Trace(grid, std::move(db), std::move(label));
}

double compression(double p, const std::optional<double>& knee) {
  return knee ? *knee * -std::expm1(-p / *knee) : p;
}

}  // namespace

double ClearanceSpec::at(double f) const {
  if (f <= low_hz || high_hz <= low_hz) return low_db;
  if (f >= high_hz) return high_db;
  const double t = (f - low_hz) / (high_hz - low_hz);
  return low_db + t * (high_db - low_db);
}

void Scenario::validate() const {
  params.validate();
  // Constructing a throwaway trace checks the grid rules.
  Trace(grid, std::vector<double>(grid.size(), 0.0), "grid");
  if (!std::isfinite(shot_level_dbm)) {
    throw Error(ErrorKind::Domain, "shot level must be finite");
  }
  if (!(clearance.low_db > 0.0) || !(clearance.high_db > 0.0)) {
    throw Error(ErrorKind::Domain, "dark clearance must be positive");
  }
  if (!(trace_noise_sigma_db >= 0.0)) {
    throw Error(ErrorKind::Domain, "trace noise sigma must be >= 0");
  }
  if (n_averages < 1) throw Error(ErrorKind::Domain, "n_averages must be >= 1");
  if (reference_averages && *reference_averages < 1) {
    throw Error(ErrorKind::Domain, "reference_averages must be >= 1");
  }
  if (imbalance) imbalance->validate();
  for (double p : lo_powers) {
    if (!(p > 0.0)) throw Error(ErrorKind::Domain, fmt::format("LO power {} W must be positive", p));
  }
  if (saturation_knee && !(*saturation_knee > 0.0)) {
    throw Error(ErrorKind::Domain, "saturation knee must be positive");
  }
  if (!(lo_scaling_exponent > 0.0)) {
    throw Error(ErrorKind::Domain, "LO scaling exponent must be positive");
  }
}

std::vector<double> linear_grid(double start_hz, double stop_hz, std::size_t points) {
  if (points < 2 || !(start_hz > 0.0) || !(stop_hz > start_hz)) {
    throw Error(ErrorKind::Domain, "grid needs 0 < start < stop and >= 2 points");
  }
  std::vector<double> g(points);
  const double step = (stop_hz - start_hz) / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) g[i] = start_hz + step * static_cast<double>(i);
  g.back() = stop_hz;
  return g;
}

std::vector<double> log_grid(double start_hz, double stop_hz, std::size_t points) {
  auto g = linear_grid(std::log(start_hz), std::log(stop_hz), points);
  for (double& v : g) v = std::exp(v);
  g.front() = start_hz;
  g.back() = stop_hz;
  return g;
}

Campaign generate_campaign(const Scenario& s) {
  s.validate();
  const double sigma = noise_sigma(s);
  const auto lv = levels(s);
  const auto n = s.grid.size();

  std::vector<double> shot(n);
  std::vector<double> sq(n);
  std::vector<double> anti(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double f = s.grid[i];
    double v_sq = variance_detected(f, s.params, Quadrature::Squeezed);
    double v_anti = variance_detected(f, s.params, Quadrature::AntiSqueezed);
    if (s.imbalance) {
      const double mixed_sq = apply_imbalance(*s.imbalance, v_sq, v_anti, f, Quadrature::Squeezed);
      const double mixed_anti =
          apply_imbalance(*s.imbalance, v_sq, v_anti, f, Quadrature::AntiSqueezed);
      v_sq = mixed_sq;
      v_anti = mixed_anti;
    }
    shot[i] = lv.quantum[i] + lv.dark[i];
    sq[i] = v_sq * lv.quantum[i] + lv.dark[i];
    anti[i] = v_anti * lv.quantum[i] + lv.dark[i];
  }

  NoiseSource shot_noise(s.seed, kShot, reference_sigma(s));
  NoiseSource dark_noise(s.seed, kDark, reference_sigma(s));
  NoiseSource sq_noise(s.seed, kSqueezed, sigma);
  NoiseSource anti_noise(s.seed, kAnti, sigma);
  Campaign out{
      noisy_trace(s.grid, shot, shot_noise, "shot"),
      noisy_trace(s.grid, lv.dark, dark_noise, "dark"),
      noisy_trace(s.grid, sq, sq_noise, "squeezed"),
      noisy_trace(s.grid, anti, anti_noise, "antisqueezed"),
      {},
  };
  if (!s.lo_powers.empty()) out.linearity = generate_linearity_series(s);
  return out;
}

std::vector<LinearityPoint> generate_linearity_series(const Scenario& s) {
  s.validate();
  if (s.lo_powers.empty()) {
    throw Error(ErrorKind::Domain, "scenario lists no LO powers for a linearity series");
  }
  const double sigma = noise_sigma(s);
  const auto lv = levels(s);
  const double p_ref = *std::max_element(s.lo_powers.begin(), s.lo_powers.end());
  const double g_ref = compression(p_ref, s.saturation_knee);

  std::vector<LinearityPoint> out;
  for (std::size_t k = 0; k < s.lo_powers.size(); ++k) {
    const double p = s.lo_powers[k];
    const double scale = std::pow(compression(p, s.saturation_knee) / g_ref, s.lo_scaling_exponent);
    std::vector<double> noise(s.grid.size());
    for (std::size_t i = 0; i < s.grid.size(); ++i) noise[i] = scale * lv.quantum[i] + lv.dark[i];

    const auto stream = static_cast<std::uint32_t>(kLinearityBase + 2 * k);
    NoiseSource noise_rng(s.seed, stream, sigma);
    NoiseSource dark_rng(s.seed, stream + 1, sigma);
    out.push_back({p, noisy_trace(s.grid, noise, noise_rng, fmt::format("lo_{}_noise", k)),
                   noisy_trace(s.grid, lv.dark, dark_rng, fmt::format("lo_{}_dark", k))});
  }
  return out;
}

namespace {

namespace pt = boost::property_tree;

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "opo.gamma_fwhm_hz",       "opo.x",
      "opo.eta",                 "grid.start_hz",
      "grid.stop_hz",            "grid.points",
      "grid.spacing",            "detector.shot_level_dbm",
      "detector.clearance_db",   "detector.clearance_low",
      "detector.clearance_high", "detector.trace_noise_sigma_db",
      "detector.n_averages",     "detector.reference_averages",
      "imbalance.slope_rad_per_hz",
      "imbalance.amplitude_rad", "imbalance.f0_hz",
      "imbalance.width_hz",      "linearity.lo_powers_w",
      "linearity.saturation_knee_w", "linearity.scaling_exponent",
      "run.seed",
  };
  return keys;
}

double to_number(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorKind::Parse, fmt::format("scenario: '{}' = '{}' is not a number", key, text));
  }
}

// "<hz>:<db>"
std::pair<double, double> to_pair(const std::string& key, const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::Parse, fmt::format("scenario: '{}' expects <hz>:<db>", key));
  }
  return {to_number(key, text.substr(0, colon)), to_number(key, text.substr(colon + 1))};
}

std::string strip(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

Scenario parse_scenario(std::istream& in) {
  // Comments (# or ;) may trail a value; the INI reader only knows
  // whole-line ';' comments.
  std::ostringstream cleaned;
  std::string line;
  while (std::getline(in, line)) {
    const auto cut = line.find_first_of("#;");
    cleaned << strip(line.substr(0, cut)) << '\n';
  }
  pt::ptree tree;
  try {
    std::istringstream text(cleaned.str());
    pt::ini_parser::read_ini(text, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorKind::Parse, fmt::format("scenario: {}", e.message()));
  }

  std::map<std::string, std::string> values;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      throw Error(ErrorKind::Parse, fmt::format("scenario: key '{}' outside a section", section));
    }
    for (const auto& [key, value] : body) {
      const auto full = section + "." + key;
      if (!known_keys().contains(full)) {
        throw Error(ErrorKind::Parse, fmt::format("scenario: unknown key '{}'", full));
      }
      values[full] = value.data();
    }
  }
  const auto number = [&](const std::string& key) -> std::optional<double> {
    const auto it = values.find(key);
    if (it == values.end()) return std::nullopt;
    return to_number(key, it->second);
  };
  const auto required = [&](const std::string& key) {
    const auto v = number(key);
    if (!v) throw Error(ErrorKind::Parse, fmt::format("scenario: missing '{}'", key));
    return *v;
  };

  Scenario s;
  s.params = {required("opo.gamma_fwhm_hz"), required("opo.x"), required("opo.eta")};

  const double points = required("grid.points");
  if (points < 2 || points != std::floor(points)) {
    throw Error(ErrorKind::Parse, "scenario: grid.points must be an integer >= 2");
  }
  const auto spacing = values.contains("grid.spacing") ? values["grid.spacing"] : "linear";
  if (spacing == "linear") {
    s.grid = linear_grid(required("grid.start_hz"), required("grid.stop_hz"),
                         static_cast<std::size_t>(points));
  } else if (spacing == "log") {
    s.grid = log_grid(required("grid.start_hz"), required("grid.stop_hz"),
                      static_cast<std::size_t>(points));
  } else {
    throw Error(ErrorKind::Parse, fmt::format("scenario: unknown grid.spacing '{}'", spacing));
  }

  if (auto v = number("detector.shot_level_dbm")) s.shot_level_dbm = *v;
  const bool flat = values.contains("detector.clearance_db");
  const bool two_point =
      values.contains("detector.clearance_low") || values.contains("detector.clearance_high");
  if (flat && two_point) {
    throw Error(ErrorKind::Parse,
                "scenario: give either detector.clearance_db or clearance_low/high");
  }
  if (flat) s.clearance = ClearanceSpec::flat(required("detector.clearance_db"));
  if (two_point) {
    if (!values.contains("detector.clearance_low") || !values.contains("detector.clearance_high")) {
      throw Error(ErrorKind::Parse, "scenario: clearance_low and clearance_high go together");
    }
    const auto [lo_hz, lo_db] = to_pair("detector.clearance_low", values["detector.clearance_low"]);
    const auto [hi_hz, hi_db] = to_pair("detector.clearance_high", values["detector.clearance_high"]);
    s.clearance = {lo_hz, lo_db, hi_hz, hi_db};
  }
  if (auto v = number("detector.trace_noise_sigma_db")) s.trace_noise_sigma_db = *v;
  if (auto v = number("detector.n_averages")) s.n_averages = static_cast<int>(*v);
  if (auto v = number("detector.reference_averages")) s.reference_averages = static_cast<int>(*v);

  if (tree.find("imbalance") != tree.not_found()) {
    ImbalanceModel m;
    if (auto v = number("imbalance.slope_rad_per_hz")) m.slope = *v;
    m.amplitude = required("imbalance.amplitude_rad");
    m.f0 = required("imbalance.f0_hz");
    m.width = required("imbalance.width_hz");
    s.imbalance = m;
  }

  if (values.contains("linearity.lo_powers_w")) {
    std::istringstream list(values["linearity.lo_powers_w"]);
    std::string item;
    while (std::getline(list, item, ',')) {
      s.lo_powers.push_back(to_number("linearity.lo_powers_w", strip(item)));
    }
  }
  if (auto v = number("linearity.saturation_knee_w")) s.saturation_knee = *v;
  if (auto v = number("linearity.scaling_exponent")) s.lo_scaling_exponent = *v;

  if (values.contains("run.seed")) {
    try {
      s.seed = std::stoull(values["run.seed"]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::Parse, "scenario: run.seed must be a non-negative integer");
    }
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Parse, fmt::format("cannot open scenario '{}'", path.string()));
  return parse_scenario(in);
}

}  // namespace sqz
