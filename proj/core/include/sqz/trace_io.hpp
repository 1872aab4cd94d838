#pragma once

// CSV files for traces and normalized spectra.
//
//   trace:       header `frequency_hz,power_dbm`
//   normalized:  header `frequency_hz,rel_power_db,valid`
//
// Lines starting with '#' are comments. Blank lines are skipped. Values are
// written with round-trip precision.

#include <filesystem>
#include <iosfwd>
#include <string>

#include "sqz/noise_math.hpp"

namespace sqz {

Trace parse_trace_csv(std::istream& in, std::string label);
Trace read_trace_csv(const std::filesystem::path& path);
void write_trace_csv(std::ostream& out, const Trace& trace);

NormalizedSpectrum parse_normalized_csv(std::istream& in, std::string label);
NormalizedSpectrum read_normalized_csv(const std::filesystem::path& path);
void write_normalized_csv(std::ostream& out, const NormalizedSpectrum& spectrum);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

}  // namespace sqz
