#pragma once

// Below-threshold OPO quadrature noise spectrum with detection loss.
//
//   V∓(f) = 1 ∓ 4x / ((1 ± x)² + Ω²),   Ω = 2f / γ_FWHM
//   V_det = η·V + (1 − η)
//
// Variances are in shot-noise units (vacuum = 1). Phase jitter is not
// modeled.

#include <optional>
#include <string>
#include <vector>

namespace sqz {

enum class Quadrature { Squeezed, AntiSqueezed };

const char* to_string(Quadrature q) noexcept;

struct OpoParams {
  double gamma_fwhm = 1.0e9;  // resonator linewidth, Hz
  double x = 0.5;             // √(P/P_th)
  double eta = 1.0;           // total detection efficiency

  // Throws Domain for bad γ or η, Threshold for x ≥ 1.
  void validate() const;
};

struct VarianceGradient {
  double d_gamma = 0.0;
  double d_x = 0.0;
  double d_eta = 0.0;
};

double variance_pure(double f, double gamma_fwhm, double x, Quadrature q);
double variance_detected(double f, const OpoParams& params, Quadrature q);

// Analytic partial derivatives of variance_detected.
VarianceGradient variance_detected_gradient(double f, const OpoParams& params,
                                            Quadrature q);

// Detected squeezing (positive dB) of the squeezed quadrature.
double squeezing_db(double f, const OpoParams& params);

// −10·log10(1 − η): the detected squeezing at f → 0, x → 1.
double max_squeezing_db(double eta);

// Pump parameter reproducing a DC anti-squeezing level (dB above shot noise)
// at efficiency η.
double pump_from_antisqueezing(double antisqueezing_db, double eta);

// Sideband frequency at which detected squeezing falls to threshold_db.
double squeeze_bandwidth(const OpoParams& params, double threshold_db);

struct LossComponent {
  std::string name;
  double efficiency = 1.0;
};

struct LossBudget {
  std::vector<LossComponent> components;
  std::optional<double> fitted_eta;

  void validate() const;
};

struct BudgetSummary {
  double product = 1.0;
  // fitted_eta / product, the efficiency the listed components do not
  // account for.
  std::optional<double> residual;
};

BudgetSummary loss_budget_product(const LossBudget& budget);

namespace detail {
// Model evaluation without parameter checks, for finite differences that
// may step slightly outside the physical range.
double variance_detected_raw(double f, double gamma_fwhm, double x, double eta,
                             Quadrature q) noexcept;
}  // namespace detail

}  // namespace sqz
