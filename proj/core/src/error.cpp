#include "sqz/error.hpp"

namespace sqz {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Threshold: return "threshold";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::Alignment: return "alignment";
    case ErrorKind::Range: return "range";
    case ErrorKind::Empty: return "empty";
    case ErrorKind::Inconsistent: return "inconsistent";
    case ErrorKind::Degenerate: return "degenerate";
    case ErrorKind::Numeric: return "numeric";
    case ErrorKind::InsufficientData: return "insufficient-data";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

}  // namespace sqz
