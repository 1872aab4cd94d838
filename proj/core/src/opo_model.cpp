#include "sqz/opo_model.hpp"

#include <cmath>

#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

double sign_of(Quadrature q) { return q == Quadrature::Squeezed ? -1.0 : 1.0; }

// (1 ± x)² + Ω² with + for the squeezed quadrature.
double denominator(double omega2, double x, Quadrature q) {
  const double a = q == Quadrature::Squeezed ? 1.0 + x : 1.0 - x;
  return a * a + omega2;
}

void check_frequency(double f) {
  if (!std::isfinite(f) || f < 0.0) {
    throw Error(ErrorKind::Domain, fmt::format("sideband frequency {} Hz must be >= 0", f));
  }
}

void check_eta(double eta) {
  if (!(eta > 0.0 && eta <= 1.0)) {
    throw Error(ErrorKind::Domain, fmt::format("efficiency {} not in (0, 1]", eta));
  }
}

}  // namespace

const char* to_string(Quadrature q) noexcept {
  return q == Quadrature::Squeezed ? "squeezed" : "antisqueezed";
}

void OpoParams::validate() const {
  if (!(gamma_fwhm > 0.0) || !std::isfinite(gamma_fwhm)) {
    throw Error(ErrorKind::Domain, fmt::format("linewidth {} Hz must be positive", gamma_fwhm));
  }
  if (!(x >= 0.0)) {
    throw Error(ErrorKind::Domain, fmt::format("pump parameter {} must be >= 0", x));
  }
  if (!(x < 1.0)) {
    throw Error(ErrorKind::Threshold,
                fmt::format("pump parameter {} at or above threshold", x));
  }
  check_eta(eta);
}

namespace detail {

double variance_detected_raw(double f, double gamma_fwhm, double x, double eta,
                             Quadrature q) noexcept {
  const double omega = 2.0 * f / gamma_fwhm;
  // 1 ∓ 4x/((1 ± x)² + Ω²) written as a ratio of sums, which avoids the
  // cancellation in the squeezed quadrature near threshold.
  const double lo = (1.0 - x) * (1.0 - x) + omega * omega;
  const double hi = (1.0 + x) * (1.0 + x) + omega * omega;
  const double pure = q == Quadrature::Squeezed ? lo / hi : hi / lo;
  return eta * pure + (1.0 - eta);
}

}  // namespace detail

double variance_pure(double f, double gamma_fwhm, double x, Quadrature q) {
  check_frequency(f);
  OpoParams{gamma_fwhm, x, 1.0}.validate();
  return detail::variance_detected_raw(f, gamma_fwhm, x, 1.0, q);
}

double variance_detected(double f, const OpoParams& p, Quadrature q) {
  check_frequency(f);
  p.validate();
  return detail::variance_detected_raw(f, p.gamma_fwhm, p.x, p.eta, q);
}

VarianceGradient variance_detected_gradient(double f, const OpoParams& p,
                                            Quadrature q) {
  check_frequency(f);
  p.validate();
  const double s = sign_of(q);
  const double omega = 2.0 * f / p.gamma_fwhm;
  const double omega2 = omega * omega;
  const double d = denominator(omega2, p.x, q);
  const double d2 = d * d;

  // dD/dx: 2(1 + x) squeezed, −2(1 − x) anti-squeezed.
  const double dd_dx = q == Quadrature::Squeezed ? 2.0 * (1.0 + p.x) : -2.0 * (1.0 - p.x);
  const double dd_dgamma = -2.0 * omega2 / p.gamma_fwhm;

  const double dpure_dx = s * 4.0 * (d - p.x * dd_dx) / d2;
  const double dpure_dgamma = -s * 4.0 * p.x * dd_dgamma / d2;
  const double pure = detail::variance_detected_raw(f, p.gamma_fwhm, p.x, 1.0, q);

  return {p.eta * dpure_dgamma, p.eta * dpure_dx, pure - 1.0};
}

double squeezing_db(double f, const OpoParams& params) {
  return -10.0 * std::log10(variance_detected(f, params, Quadrature::Squeezed));
}

double max_squeezing_db(double eta) {
  if (eta == 1.0) {
    throw Error(ErrorKind::Domain, "max_squeezing_db: unbounded at unit efficiency");
  }
  check_eta(eta);
  return -10.0 * std::log10(1.0 - eta);
}

double pump_from_antisqueezing(double antisqueezing_db, double eta) {
  check_eta(eta);
  if (!std::isfinite(antisqueezing_db) || antisqueezing_db < 0.0) {
    throw Error(ErrorKind::Inconsistent,
                fmt::format("anti-squeezing of {} dB has no pump solution below "
                            "threshold",
                            antisqueezing_db));
  }
  // 1 + η·4x/(1 − x)² = R  ⇔  k·x² − (2k + 4)·x + k = 0 with k = (R − 1)/η.
  // The roots multiply to 1; the one below threshold is
  // x = k / (√(k + 1) + 1)², which stays accurate for small k.
  const double k = std::expm1(antisqueezing_db * std::log(10.0) / 10.0) / eta;
  const double root = std::sqrt(k + 1.0) + 1.0;
  const double x = k / (root * root);
  if (!(x >= 0.0 && x < 1.0)) {
    throw Error(ErrorKind::Inconsistent,
                fmt::format("no pump parameter below threshold reproduces {} dB",
                            antisqueezing_db));
  }
  return x;
}

double squeeze_bandwidth(const OpoParams& p, double threshold_db) {
  p.validate();
  if (!(threshold_db > 0.0) || !std::isfinite(threshold_db)) {
    throw Error(ErrorKind::Domain,
                fmt::format("squeeze_bandwidth: threshold {} dB must be positive", threshold_db));
  }
  // Solve η·4x / ((1 + x)² + Ω²) = 1 − V_t for Ω².
  const double depth = -std::expm1(-threshold_db * std::log(10.0) / 10.0);
  const double omega2 = p.eta * 4.0 * p.x / depth - (1.0 + p.x) * (1.0 + p.x);
  if (omega2 < 0.0) {
    const double dc = p.x > 0.0 ? squeezing_db(0.0, p) : 0.0;
    // Within rounding of the DC value the crossing is at f = 0.
    if (p.x > 0.0 && std::abs(dc - threshold_db) <= 1e-12 * threshold_db) return 0.0;
    throw Error(ErrorKind::Domain,
                fmt::format("squeeze_bandwidth: DC squeezing {:.3f} dB never "
                            "reaches {} dB",
                            dc, threshold_db));
  }
  return 0.5 * p.gamma_fwhm * std::sqrt(omega2);
}

void LossBudget::validate() const {
  if (components.empty()) {
    throw Error(ErrorKind::Domain, "loss budget has no components");
  }
  for (const auto& c : components) {
    if (!(c.efficiency > 0.0 && c.efficiency <= 1.0)) {
      throw Error(ErrorKind::Domain,
                  fmt::format("component '{}' efficiency {} not in (0, 1]", c.name,
                              c.efficiency));
    }
  }
  if (fitted_eta) check_eta(*fitted_eta);
}

BudgetSummary loss_budget_product(const LossBudget& budget) {
  budget.validate();
  BudgetSummary out;
  for (const auto& c : budget.components) out.product *= c.efficiency;
  if (budget.fitted_eta) out.residual = *budget.fitted_eta / out.product;
  return out;
}

}  // namespace sqz
