#pragma once

// Power arithmetic on spectrum-analyzer traces: dB/linear conversion,
// dark-noise subtraction, shot-noise normalization and grid alignment.
//
// All subtraction happens in the linear power domain. Traces keep their
// ingested dBm values; everything derived from them is relative dB.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace sqz {

// Sampled power spectrum. Frequencies in Hz, strictly increasing and
// positive; powers in dBm. A power of -inf stands for zero linear power and
// is accepted so that "no dark noise" can be expressed; NaN and +inf are
// rejected.
class Trace {
 public:
  Trace(std::vector<double> frequencies, std::vector<double> powers_dbm,
        std::string label = {});

  std::span<const double> frequencies() const noexcept { return frequencies_; }
  std::span<const double> powers() const noexcept { return powers_; }
  const std::string& label() const noexcept { return label_; }
  std::size_t size() const noexcept { return frequencies_.size(); }

  Trace with_label(std::string label) const;
  // Same grid and label, every power shifted by offset_db.
  Trace offset(double offset_db) const;

 private:
  std::vector<double> frequencies_;
  std::vector<double> powers_;
  std::string label_;
};

// What to do with points whose linear power is non-positive after the dark
// noise is subtracted.
enum class DegeneratePolicy {
  Flag,   // mark invalid and carry on
  Error,  // throw ErrorKind::Empty on the first such point
};

const char* to_string(DegeneratePolicy policy) noexcept;

struct CorrectedTrace {
  std::vector<double> frequencies;
  std::vector<double> powers_db;  // NaN where !valid
  std::vector<bool> valid;
  std::string label;

  std::size_t invalid_count() const noexcept;
};

struct CorrectionRecord {
  DegeneratePolicy policy = DegeneratePolicy::Flag;
  bool shot_dark_corrected = true;
  std::size_t invalid_points = 0;
};

struct NormalizedSpectrum {
  std::vector<double> frequencies;
  std::vector<double> rel_power_db;  // NaN where !valid
  std::vector<bool> valid;
  CorrectionRecord correction;
  std::string label;

  std::size_t size() const noexcept { return frequencies.size(); }
  std::size_t valid_count() const noexcept;

  // All-valid spectrum from model or test values.
  static NormalizedSpectrum from_db(std::vector<double> frequencies,
                                    std::vector<double> rel_power_db,
                                    std::string label = {});
};

// Throws ErrorKind::Parse when lengths disagree or a valid point is not
// finite.
void check(const NormalizedSpectrum& spectrum);

double db_to_lin(double db);
double lin_to_db(double ratio);

// Frequencies equal to within 1e-12 relative per point.
bool same_grid(std::span<const double> a, std::span<const double> b);
bool same_grid(const Trace& a, const Trace& b);

CorrectedTrace dark_correct(const Trace& measured, const Trace& dark,
                            DegeneratePolicy policy = DegeneratePolicy::Flag);

// 10·log10((L(m) − L(d)) / (L(s) − L(d))) per point. The shot reference is
// dark corrected as well as the measurement.
NormalizedSpectrum normalize_to_shot(
    const Trace& measured, const Trace& shot, const Trace& dark,
    DegeneratePolicy policy = DegeneratePolicy::Flag);

// Inverse of normalize_to_shot on valid points: rebuilds the measured trace
// from the normalized values and the shot and dark references. Invalid
// points come back as -inf.
Trace denormalize(const NormalizedSpectrum& spectrum, const Trace& shot,
                  const Trace& dark);

enum class Interpolation { Nearest, Linear };

const char* to_string(Interpolation method) noexcept;

// Interpolates in the dB domain onto `grid`. The method is appended to the
// label as "<label>@<method>".
Trace resample(const Trace& trace, std::span<const double> grid,
               Interpolation method);

// Pointwise shot − dark in dB.
Trace clearance(const Trace& shot, const Trace& dark);

}  // namespace sqz
