#include "sqz/detector.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <set>

#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace

LinearityResult linearity_fit(std::span<const LinearityPoint> points,
                              FrequencyInterval band) {
  if (!band.well_formed()) {
    throw Error(ErrorKind::Domain,
                fmt::format("linearity band [{}, {}] Hz is not well formed", band.lo, band.hi));
  }
  std::set<double> distinct;
  for (const auto& p : points) {
    if (!(p.lo_power_w > 0.0)) {
      throw Error(ErrorKind::Domain, fmt::format("LO power {} W must be positive", p.lo_power_w));
    }
    distinct.insert(p.lo_power_w);
  }
  if (distinct.size() < 2) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("linearity fit needs at least 2 distinct LO powers, got {}",
                            distinct.size()));
  }

  const auto& grid = points.front().noise;
  std::vector<std::size_t> in_band;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (band.contains(grid.frequencies()[i])) in_band.push_back(i);
  }
  if (in_band.empty()) {
    throw Error(ErrorKind::InsufficientData,
                fmt::format("no samples inside band [{}, {}] Hz", band.lo, band.hi));
  }

  std::vector<std::vector<double>> corrected;  // linear, NaN where invalid
  std::vector<double> log_power;
  LinearityResult out;
  for (const auto& p : points) {
    if (!same_grid(p.noise, grid) || !same_grid(p.dark, grid)) {
      throw Error(ErrorKind::Alignment, "linearity traces are not on a common grid");
    }
    const auto c = dark_correct(p.noise, p.dark, DegeneratePolicy::Flag);
    std::vector<double> lin(in_band.size());
    double sum = 0.0;
    for (std::size_t k = 0; k < in_band.size(); ++k) {
      const auto i = in_band[k];
      lin[k] = c.valid[i] ? std::pow(10.0, c.powers_db[i] / 10.0)
                          : std::numeric_limits<double>::quiet_NaN();
      // Points below dark stay in the mean.
      sum += std::pow(10.0, p.noise.powers()[i] / 10.0) -
             std::pow(10.0, p.dark.powers()[i] / 10.0);
    }
    const double mean = sum / static_cast<double>(in_band.size());
    if (!(mean > 0.0)) {
      throw Error(ErrorKind::Empty,
                  fmt::format("band-averaged noise at {} W is not above dark noise",
                              p.lo_power_w));
    }
    out.band_levels_db.push_back(10.0 * std::log10(mean));
    log_power.push_back(std::log10(p.lo_power_w));
    corrected.push_back(std::move(lin));
  }

  std::vector<double> log_level(out.band_levels_db.size());
  std::transform(out.band_levels_db.begin(), out.band_levels_db.end(), log_level.begin(),
                 [](double db) { return db / 10.0; });
  out.exponent = ols_slope(log_power, log_level);
  out.db_per_doubling = out.exponent * 10.0 * std::log10(2.0);
  out.levels = distinct.size();

  std::vector<double> column(points.size());
  for (std::size_t k = 0; k < in_band.size(); ++k) {
    bool ok = true;
    for (std::size_t p = 0; p < points.size(); ++p) {
      const double v = corrected[p][k];
      ok = ok && std::isfinite(v);
      column[p] = ok ? std::log10(v) : 0.0;
    }
    out.frequencies.push_back(grid.frequencies()[in_band[k]]);
    out.exponents.push_back(ok ? ols_slope(log_power, column)
                               : std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

const char* to_string(Verdict v) noexcept {
  switch (v) {
    case Verdict::ShotLimited: return "shot_limited";
    case Verdict::Technical: return "technical";
    case Verdict::Saturating: return "saturating";
  }
  return "unknown";
}

Verdict saturation_verdict(double exponent, double tolerance) {
  if (std::abs(exponent - 1.0) <= tolerance) return Verdict::ShotLimited;
  return exponent < 1.0 ? Verdict::Saturating : Verdict::Technical;
}

void ImbalanceModel::validate() const {
  if (!(f0 > 0.0) || !(width > 0.0)) {
    throw Error(ErrorKind::Domain,
                fmt::format("imbalance resonance needs f0 > 0 and width > 0 (got {}, {})", f0, width));
  }
  if (!std::isfinite(slope) || !std::isfinite(amplitude)) {
    throw Error(ErrorKind::Domain, "imbalance slope and amplitude must be finite");
  }
}

double ImbalanceModel::delta(double f) const {
  const double detune = f0 * f0 - f * f;
  const double fw = f * width;
  return slope * f + amplitude * f * f0 * width * width / (detune * detune + fw * fw);
}

double mix_quadratures(double delta, double v_target, double v_orthogonal) {
  const double c = std::cos(0.5 * delta);
  const double s = std::sin(0.5 * delta);
  return c * c * v_target + s * s * v_orthogonal;
}

double apply_imbalance(const ImbalanceModel& model, double v_sqz, double v_anti,
                       double f, Quadrature target) {
  if (!(v_sqz > 0.0) || !(v_anti > 0.0)) {
    throw Error(ErrorKind::Domain, "apply_imbalance: variances must be positive");
  }
  const double d = model.delta(f);
  return target == Quadrature::Squeezed ? mix_quadratures(d, v_sqz, v_anti)
                                        : mix_quadratures(d, v_anti, v_sqz);
}

}  // namespace sqz
