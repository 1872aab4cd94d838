#pragma once

// Subcommands of the `sqz` tool. Each returns a process exit code; library
// errors are mapped by exit_code().

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sqz/error.hpp"
#include "sqz/fitting.hpp"
#include "sqz/interval.hpp"

namespace sqz::cli {

namespace fs = std::filesystem;

enum Exit : int {
  kOk = 0,
  kFailure = 1,
  kParse = 2,
  kGrid = 3,
  kEmpty = 4,
  kNotConverged = 5,
};

int exit_code(ErrorKind kind) noexcept;

// "lo:hi" in Hz.
FrequencyInterval parse_interval(const std::string& text);

struct NormalizeArgs {
  fs::path measured, shot, dark;
  fs::path out = ".";
  std::optional<std::string> resample;  // nearest | linear
  std::string policy = "flag";          // flag | error
  std::optional<std::string> label;
};

struct FitArgs {
  fs::path squeezed;
  std::optional<fs::path> antisqueezed;
  fs::path out = ".";
  std::vector<std::string> mask;
  std::optional<std::string> init;  // gamma_hz,x,eta
  std::string covariance = "residual";
  std::string jacobian = "analytic";
  FitOptions options;
};

struct LinearityArgs {
  fs::path manifest;
  std::string band = "1e8:1.5e9";
  double tolerance = 0.05;
  std::optional<fs::path> out;
};

struct BudgetArgs {
  std::vector<std::string> components;  // name=efficiency
  std::optional<double> fitted_eta;
  fs::path out = ".";
};

struct SimulateArgs {
  fs::path scenario;
  fs::path out = ".";
};

struct ReportArgs {
  fs::path run;
  double threshold_db = 3.0;
};

int cmd_normalize(const NormalizeArgs& args);
int cmd_fit(const FitArgs& args);
int cmd_linearity(const LinearityArgs& args);
int cmd_budget(const BudgetArgs& args);
int cmd_simulate(const SimulateArgs& args);
int cmd_report(const ReportArgs& args);

}  // namespace sqz::cli
