#include "sqz/trace_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <string_view>
#include <system_error>
#include <vector>

#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

constexpr std::string_view kTraceHeader = "frequency_hz,power_dbm";
constexpr std::string_view kNormalizedHeader = "frequency_hz,rel_power_db,valid";

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

double parse_number(std::string_view text, const std::string& label,
                    std::size_t line_no) {
  if (text == "nan" || text == "NaN") return std::numeric_limits<double>::quiet_NaN();
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end || text.empty()) {
    throw Error(ErrorKind::Parse,
                fmt::format("{}:{}: '{}' is not a decimal number", label,
                            line_no, text));
  }
  return value;
}

// Calls `row(fields, line_no)` for every data line after checking the header.
template <typename RowFn>
void for_each_row(std::istream& in, std::string_view header,
                  const std::string& label, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  bool seen_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty() || text.front() == '#') continue;
    if (!seen_header) {
      if (text != header) {
        throw Error(ErrorKind::Parse,
                    fmt::format("{}:{}: expected header '{}', got '{}'", label,
                                line_no, header, text));
      }
      seen_header = true;
      continue;
    }
    row(split(text), line_no);
  }
  if (!seen_header) {
    throw Error(ErrorKind::Parse, fmt::format("{}: missing header '{}'", label, header));
  }
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorKind::Parse, fmt::format("cannot open '{}'", path.string()));
  }
  return in;
}

}  // namespace

Trace parse_trace_csv(std::istream& in, std::string label) {
  std::vector<double> freqs;
  std::vector<double> powers;
  for_each_row(in, kTraceHeader, label,
               [&](const std::vector<std::string_view>& fields, std::size_t n) {
                 if (fields.size() != 2) {
                   throw Error(ErrorKind::Parse,
                               fmt::format("{}:{}: expected 2 columns", label, n));
                 }
                 const double f = parse_number(fields[0], label, n);
                 const double p = parse_number(fields[1], label, n);
                 if (!std::isfinite(p)) {
                   throw Error(ErrorKind::Parse,
                               fmt::format("{}:{}: power must be finite", label, n));
                 }
                 freqs.push_back(f);
                 powers.push_back(p);
               });
  return Trace(std::move(freqs), std::move(powers), std::move(label));
}

Trace read_trace_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_trace_csv(in, path.stem().string());
}

void write_trace_csv(std::ostream& out, const Trace& trace) {
  out << kTraceHeader << '\n';
  const auto f = trace.frequencies();
  const auto p = trace.powers();
  for (std::size_t i = 0; i < f.size(); ++i) {
    out << format_double(f[i]) << ',' << format_double(p[i]) << '\n';
  }
}

NormalizedSpectrum parse_normalized_csv(std::istream& in, std::string label) {
  NormalizedSpectrum s;
  s.label = label;
  for_each_row(in, kNormalizedHeader, label,
               [&](const std::vector<std::string_view>& fields, std::size_t n) {
                 if (fields.size() != 3) {
                   throw Error(ErrorKind::Parse,
                               fmt::format("{}:{}: expected 3 columns", label, n));
                 }
                 if (fields[2] != "0" && fields[2] != "1") {
                   throw Error(ErrorKind::Parse,
                               fmt::format("{}:{}: valid must be 0 or 1", label, n));
                 }
                 s.frequencies.push_back(parse_number(fields[0], label, n));
                 s.rel_power_db.push_back(parse_number(fields[1], label, n));
                 s.valid.push_back(fields[2] == "1");
               });
  s.correction.invalid_points = s.size() - s.valid_count();
  check(s);
  return s;
}

NormalizedSpectrum read_normalized_csv(const std::filesystem::path& path) {
  auto in = open_input(path);
  auto stem = path.stem().string();
  // "<label>.normalized.csv" -> "<label>"
  if (const auto dot = stem.rfind(".normalized"); dot != std::string::npos) {
    stem.erase(dot);
  }
  return parse_normalized_csv(in, std::move(stem));
}

void write_normalized_csv(std::ostream& out, const NormalizedSpectrum& s) {
  out << kNormalizedHeader << '\n';
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_double(s.frequencies[i]) << ','
        << (s.valid[i] ? format_double(s.rel_power_db[i]) : std::string("nan"))
        << ',' << (s.valid[i] ? '1' : '0') << '\n';
  }
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, ptr);
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorKind::Io, fmt::format("cannot write '{}'", tmp.string()));
    }
    out << contents;
    if (!out.flush()) {
      throw Error(ErrorKind::Io, fmt::format("write to '{}' failed", tmp.string()));
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    throw Error(ErrorKind::Io, fmt::format("cannot rename '{}' to '{}': {}",
                                           tmp.string(), path.string(),
                                           ec.message()));
  }
}

}  // namespace sqz
