#pragma once

namespace sqz {

// Closed frequency interval [lo, hi] in Hz.
struct FrequencyInterval {
  double lo = 0.0;
  double hi = 0.0;

  bool contains(double f) const noexcept { return f >= lo && f <= hi; }
  bool well_formed() const noexcept { return lo < hi; }
};

}  // namespace sqz
