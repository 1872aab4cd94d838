#pragma once

// Seeded synthetic measurement campaigns.
//
// Traces are built in linear power: with S the quantum shot-noise power and
// D the dark-noise power,
//   shot     = S + D            (sits at shot_level_dbm)
//   dark     = D                (clearance(f) dB below the shot trace)
//   measured = V·S + D
// so normalize_to_shot recovers V exactly when the trace noise is zero.
// Trace noise is Gaussian in dB with σ = trace_noise_sigma_db / √n_averages
// (√reference_averages for the shot and dark references), drawn from std::mt19937_64 seeded per trace from (seed, trace index).

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

#include "sqz/detector.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/opo_model.hpp"

namespace sqz {

// Dark-noise clearance: low_db up to low_hz, high_db from high_hz on, linear
// in frequency between.
struct ClearanceSpec {
  double low_hz = 0.0;
  double low_db = 10.0;
  double high_hz = 0.0;
  double high_db = 10.0;

  static ClearanceSpec flat(double db) { return {0.0, db, 0.0, db}; }
  double at(double f) const;
};

struct Scenario {
  OpoParams params{1.75e9, 0.8116, 0.858};
  std::vector<double> grid;
  double shot_level_dbm = -80.0;
  ClearanceSpec clearance = ClearanceSpec::flat(10.0);
  double trace_noise_sigma_db = 0.0;
  int n_averages = 1;
  // Averages behind the shot and dark reference traces; defaults to
  // n_averages.
  std::optional<int> reference_averages;
  std::optional<ImbalanceModel> imbalance;
  // Linearity series. Shot-noise power scales as g(P)^exponent relative to
  // the largest listed power, where g is P below saturation or
  // knee·(1 − exp(−P/knee)) with a knee.
  std::vector<double> lo_powers;
  std::optional<double> saturation_knee;
  double lo_scaling_exponent = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct Campaign {
  Trace shot;
  Trace dark;
  Trace squeezed;
  Trace antisqueezed;
  std::vector<LinearityPoint> linearity;  // empty without lo_powers
};

std::vector<double> linear_grid(double start_hz, double stop_hz, std::size_t points);
std::vector<double> log_grid(double start_hz, double stop_hz, std::size_t points);

Campaign generate_campaign(const Scenario& scenario);
std::vector<LinearityPoint> generate_linearity_series(const Scenario& scenario);

// Key-value scenario files; see docs/scenario_format.md.
Scenario parse_scenario(std::istream& in);
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace sqz
