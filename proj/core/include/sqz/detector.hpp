#pragma once

// Balanced-homodyne-detector diagnostics: the shot-noise linearity test
// (noise power versus LO power on a log-log scale) and a phase-imbalance
// response that mixes the two quadratures.

#include <span>
#include <vector>

#include "sqz/interval.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/opo_model.hpp"

namespace sqz {

// Noise and dark traces recorded with blocked signal input at one LO power.
struct LinearityPoint {
  double lo_power_w = 0.0;
  Trace noise;
  Trace dark;
};

struct LinearityResult {
  // Slope of log10(noise) versus log10(P_LO) on the band average.
  double exponent = 0.0;
  double db_per_doubling = 0.0;
  std::size_t levels = 0;
  // Band-averaged dark-corrected noise per input point, dB.
  std::vector<double> band_levels_db;
  // Slope at each in-band frequency; NaN where any level is not above dark.
  std::vector<double> frequencies;
  std::vector<double> exponents;
};

LinearityResult linearity_fit(std::span<const LinearityPoint> points,
                              FrequencyInterval band);

enum class Verdict { ShotLimited, Technical, Saturating };

const char* to_string(Verdict v) noexcept;

Verdict saturation_verdict(double exponent, double tolerance);

// Inter-channel phase error δ(f) = slope·f + a·f·f₀·w² / ((f₀² − f²)² + (f·w)²).
// The resonance term peaks at δ = a for f = f₀; w sets its width in Hz.
struct ImbalanceModel {
  double slope = 0.0;      // rad/Hz
  double amplitude = 0.0;  // rad at f₀
  double f0 = 1e9;         // Hz
  double width = 1e8;      // Hz

  void validate() const;
  double delta(double f) const;
};

// cos²(δ/2)·V_target + sin²(δ/2)·V_orthogonal.
double mix_quadratures(double delta, double v_target, double v_orthogonal);

// Variance measured on `target` when the detector phase error is δ(f).
double apply_imbalance(const ImbalanceModel& model, double v_sqz, double v_anti,
                       double f, Quadrature target);

}  // namespace sqz
