#include "sqz/noise_math.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kGridTolerance = 1e-12;

// Linear power of a dB value, with -inf mapping to zero.
double power_of(double db) {
  if (db == -std::numeric_limits<double>::infinity()) return 0.0;
  return std::pow(10.0, db / 10.0);
}

void require_same_grid(const Trace& a, const Trace& b) {
  if (!same_grid(a, b)) {
    throw Error(ErrorKind::Alignment,
                fmt::format("traces '{}' and '{}' are not on a common "
                            "frequency grid; resample explicitly",
                            a.label(), b.label()));
  }
}

}  // namespace

Trace::Trace(std::vector<double> frequencies, std::vector<double> powers_dbm,
             std::string label)
    : frequencies_(std::move(frequencies)),
      powers_(std::move(powers_dbm)),
      label_(std::move(label)) {
  if (frequencies_.size() != powers_.size()) {
    throw Error(ErrorKind::Parse,
                fmt::format("trace '{}': {} frequencies but {} powers", label_,
                            frequencies_.size(), powers_.size()));
  }
  if (frequencies_.size() < 2) {
    throw Error(ErrorKind::Parse,
                fmt::format("trace '{}': need at least 2 samples", label_));
  }
  for (std::size_t i = 0; i < frequencies_.size(); ++i) {
    const double f = frequencies_[i];
    if (!std::isfinite(f) || f <= 0.0) {
      throw Error(ErrorKind::Parse,
                  fmt::format("trace '{}': frequency {} at row {} must be "
                              "finite and positive",
                              label_, f, i));
    }
    if (i > 0 && f <= frequencies_[i - 1]) {
      throw Error(ErrorKind::Parse,
                  fmt::format("trace '{}': frequencies not strictly "
                              "increasing at row {}",
                              label_, i));
    }
    const double p = powers_[i];
    if (std::isnan(p) || p == std::numeric_limits<double>::infinity()) {
      throw Error(ErrorKind::Parse,
                  fmt::format("trace '{}': power {} at row {} is not a "
                              "usable number",
                              label_, p, i));
    }
  }
}

Trace Trace::with_label(std::string label) const {
  Trace copy = *this;
  copy.label_ = std::move(label);
  return copy;
}

Trace Trace::offset(double offset_db) const {
  Trace copy = *this;
  for (double& p : copy.powers_) p += offset_db;
  return copy;
}

const char* to_string(DegeneratePolicy policy) noexcept {
  return policy == DegeneratePolicy::Flag ? "flag" : "error";
}

const char* to_string(Interpolation method) noexcept {
  return method == Interpolation::Nearest ? "nearest" : "linear";
}

std::size_t CorrectedTrace::invalid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), false));
}

std::size_t NormalizedSpectrum::valid_count() const noexcept {
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), true));
}

NormalizedSpectrum NormalizedSpectrum::from_db(std::vector<double> frequencies,
                                               std::vector<double> rel_power_db,
                                               std::string label) {
  NormalizedSpectrum out;
  out.valid.assign(frequencies.size(), true);
  out.frequencies = std::move(frequencies);
  out.rel_power_db = std::move(rel_power_db);
  out.label = std::move(label);
  check(out);
  return out;
}

void check(const NormalizedSpectrum& s) {
  if (s.frequencies.size() != s.rel_power_db.size() ||
      s.frequencies.size() != s.valid.size()) {
    throw Error(ErrorKind::Parse,
                fmt::format("normalized spectrum '{}': column lengths differ",
                            s.label));
  }
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!std::isfinite(s.frequencies[i]) || s.frequencies[i] <= 0.0) {
      throw Error(ErrorKind::Parse,
                  fmt::format("normalized spectrum '{}': bad frequency at row {}",
                              s.label, i));
    }
    if (s.valid[i] && !std::isfinite(s.rel_power_db[i])) {
      throw Error(ErrorKind::Parse,
                  fmt::format("normalized spectrum '{}': valid point {} is not "
                              "finite",
                              s.label, i));
    }
  }
}

double db_to_lin(double db) {
  if (!std::isfinite(db)) {
    throw Error(ErrorKind::Domain, fmt::format("db_to_lin: {} dB is not finite", db));
  }
  return std::pow(10.0, db / 10.0);
}

double lin_to_db(double ratio) {
  if (!(ratio > 0.0) || !std::isfinite(ratio)) {
    throw Error(ErrorKind::Domain,
                fmt::format("lin_to_db: ratio {} must be positive and finite", ratio));
  }
  return 10.0 * std::log10(ratio);
}

bool same_grid(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max(std::abs(a[i]), std::abs(b[i]));
    if (std::abs(a[i] - b[i]) > kGridTolerance * scale) return false;
  }
  return true;
}

bool same_grid(const Trace& a, const Trace& b) {
  return same_grid(a.frequencies(), b.frequencies());
}

CorrectedTrace dark_correct(const Trace& measured, const Trace& dark,
                            DegeneratePolicy policy) {
  require_same_grid(measured, dark);
  const auto m = measured.powers();
  const auto d = dark.powers();

  CorrectedTrace out;
  out.frequencies.assign(measured.frequencies().begin(),
                         measured.frequencies().end());
  out.powers_db.resize(m.size());
  out.valid.resize(m.size());
  out.label = measured.label();

  for (std::size_t i = 0; i < m.size(); ++i) {
    if (d[i] == -std::numeric_limits<double>::infinity() &&
        std::isfinite(m[i])) {
      out.powers_db[i] = m[i];
      out.valid[i] = true;
      continue;
    }
    const double diff = power_of(m[i]) - power_of(d[i]);
    if (diff > 0.0) {
      out.powers_db[i] = 10.0 * std::log10(diff);
      out.valid[i] = true;
      continue;
    }
    if (policy == DegeneratePolicy::Error) {
      throw Error(ErrorKind::Empty,
                  fmt::format("dark_correct: '{}' at {} Hz is not above dark "
                              "noise",
                              measured.label(), out.frequencies[i]));
    }
    out.powers_db[i] = kNaN;
    out.valid[i] = false;
  }
  if (out.invalid_count() == out.valid.size()) {
    throw Error(ErrorKind::Empty,
                fmt::format("dark_correct: no point of '{}' lies above the "
                            "dark noise",
                            measured.label()));
  }
  return out;
}

NormalizedSpectrum normalize_to_shot(const Trace& measured, const Trace& shot,
                                     const Trace& dark,
                                     DegeneratePolicy policy) {
  require_same_grid(measured, shot);
  require_same_grid(measured, dark);
  const auto m = measured.powers();
  const auto s = shot.powers();
  const auto d = dark.powers();

  NormalizedSpectrum out;
  out.frequencies.assign(measured.frequencies().begin(),
                         measured.frequencies().end());
  out.rel_power_db.resize(m.size());
  out.valid.resize(m.size());
  out.label = measured.label();
  out.correction.policy = policy;

  for (std::size_t i = 0; i < m.size(); ++i) {
    const double dark_lin = power_of(d[i]);
    const double num = power_of(m[i]) - dark_lin;
    const double den = power_of(s[i]) - dark_lin;
    if (num > 0.0 && den > 0.0) {
      out.rel_power_db[i] = 10.0 * std::log10(num / den);
      out.valid[i] = true;
      continue;
    }
    if (policy == DegeneratePolicy::Error) {
      throw Error(ErrorKind::Empty,
                  fmt::format("normalize_to_shot: '{}' at {} Hz is not above "
                              "dark noise",
                              measured.label(), out.frequencies[i]));
    }
    out.rel_power_db[i] = kNaN;
    out.valid[i] = false;
  }
  out.correction.invalid_points = out.size() - out.valid_count();
  if (out.valid_count() == 0) {
    throw Error(ErrorKind::Empty,
                fmt::format("normalize_to_shot: no valid point left in '{}'",
                            measured.label()));
  }
  return out;
}

Trace denormalize(const NormalizedSpectrum& spectrum, const Trace& shot,
                  const Trace& dark) {
  require_same_grid(shot, dark);
  if (!same_grid(spectrum.frequencies, shot.frequencies())) {
    throw Error(ErrorKind::Alignment,
                "denormalize: spectrum and references differ in grid");
  }
  const auto s = shot.powers();
  const auto d = dark.powers();
  std::vector<double> powers(spectrum.size());
  for (std::size_t i = 0; i < spectrum.size(); ++i) {
    if (!spectrum.valid[i]) {
      powers[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    const double dark_lin = power_of(d[i]);
    const double lin = std::pow(10.0, spectrum.rel_power_db[i] / 10.0) *
                           (power_of(s[i]) - dark_lin) +
                       dark_lin;
    powers[i] = 10.0 * std::log10(lin);
  }
  return Trace(spectrum.frequencies, std::move(powers), spectrum.label);
}

Trace resample(const Trace& trace, std::span<const double> grid,
               Interpolation method) {
  const auto f = trace.frequencies();
  const auto p = trace.powers();
  const double lo = f.front();
  const double hi = f.back();

  std::vector<double> out(grid.size());
  for (std::size_t k = 0; k < grid.size(); ++k) {
    const double g = grid[k];
    if (!(g >= lo && g <= hi)) {
      throw Error(ErrorKind::Range,
                  fmt::format("resample: {} Hz outside '{}' range [{}, {}] Hz",
                              g, trace.label(), lo, hi));
    }
    // First sample >= g.
    const auto it = std::lower_bound(f.begin(), f.end(), g);
    const auto j = static_cast<std::size_t>(it - f.begin());
    if (f[j] == g) {
      out[k] = p[j];
      continue;
    }
    const std::size_t i = j - 1;
    if (method == Interpolation::Nearest) {
      // Ties go to the lower sample.
      out[k] = (g - f[i] <= f[j] - g) ? p[i] : p[j];
    } else {
      const double t = (g - f[i]) / (f[j] - f[i]);
      out[k] = p[i] + t * (p[j] - p[i]);
    }
  }
  return Trace(std::vector<double>(grid.begin(), grid.end()), std::move(out),
               trace.label() + "@" + to_string(method));
}

Trace clearance(const Trace& shot, const Trace& dark) {
  require_same_grid(shot, dark);
  const auto s = shot.powers();
  const auto d = dark.powers();
  std::vector<double> gap(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) gap[i] = s[i] - d[i];
  return Trace(std::vector<double>(shot.frequencies().begin(),
                                   shot.frequencies().end()),
               std::move(gap), "clearance");
}

}  // namespace sqz
