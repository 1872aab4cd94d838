#pragma once

// Joint least-squares fit of (γ, x, η) to shot-normalized squeezed and
// anti-squeezed spectra.
//
// Residuals are data_dB − 10·log10(V_det) with uniform weights. The solver
// is a damped Gauss–Newton (Levenberg–Marquardt) iteration over the
// unconstrained coordinates (ln γ, logit x, logit η); bounds are therefore
// never clipped. Uncertainties come from s²·(JᵀJ)⁻¹, s² = SSR/(n − 3), or
// optionally a frequency-clustered sandwich, mapped back to (γ, x, η)
// through the transform Jacobian.

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sqz/interval.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/opo_model.hpp"

namespace sqz {

struct FitDataset {
  NormalizedSpectrum squeezed;
  // Leave empty for a squeezed-only fit.
  NormalizedSpectrum antisqueezed;
  // Excluded frequency ranges, closed intervals.
  std::vector<FrequencyInterval> mask;

  // Needs well-formed masks, at least one quadrature, and >= 3 usable points
  // in every quadrature that is present.
  void validate() const;
};

struct FitPoint {
  double frequency = 0.0;
  double value_db = 0.0;
  Quadrature quadrature = Quadrature::Squeezed;
};

// Valid, unmasked points: squeezed by ascending frequency, then anti-squeezed.
std::vector<FitPoint> fit_points(const FitDataset& data);

std::vector<double> residuals(const OpoParams& params, const FitDataset& data);
std::vector<double> residuals(const OpoParams& params,
                              const std::vector<FitPoint>& points);

enum class JacobianMode { Analytic, FiniteDifference };

enum class CovarianceEstimator {
  // s²·(JᵀJ)⁻¹ with s² = SSR/(n − 3); assumes independent, equal-variance
  // residuals.
  Residual,
  // Sandwich (JᵀJ)⁻¹·M·(JᵀJ)⁻¹ with M summed over frequency clusters, so
  // residual variance may differ point to point and the two quadratures may
  // share noise at one frequency (common shot and dark references).
  FrequencyClustered,
};

const char* to_string(CovarianceEstimator e) noexcept;

// ∂residual/∂(γ, x, η), one row per fit point.
Eigen::MatrixXd jacobian(const OpoParams& params, const FitDataset& data,
                         JacobianMode mode);
Eigen::MatrixXd jacobian(const OpoParams& params,
                         const std::vector<FitPoint>& points, JacobianMode mode);

struct FitOptions {
  int max_iterations = 200;
  double cost_tolerance = 1e-10;  // relative cost change on an accepted step
  double step_tolerance = 1e-12;  // norm of the step in transformed coordinates
  double initial_damping = 1e-3;
  int multistart = 5;             // jittered restarts when the first run stalls
  std::uint64_t seed = 0;
  double condition_warning = 1e8;
  // Return a singular fit with a warning and infinite σ along the null
  // direction instead of throwing. A squeezed-only (or anti-squeezed-only)
  // spectrum constrains just η·4x/(1 ± x)² and γ·(1 ± x), so it is always
  // singular in (γ, x, η).
  bool allow_degenerate = false;
  JacobianMode jacobian_mode = JacobianMode::Analytic;
  CovarianceEstimator covariance = CovarianceEstimator::Residual;
};

struct FitResult {
  OpoParams params;
  std::array<double, 3> sigma{};  // 1σ for γ (Hz), x, η
  Eigen::Matrix3d covariance = Eigen::Matrix3d::Zero();
  CovarianceEstimator covariance_estimator = CovarianceEstimator::Residual;
  double cost = 0.0;              // sum of squared dB residuals
  double rms_residual_db = 0.0;   // sqrt(cost / n)
  std::size_t n_points = 0;
  std::size_t n_squeezed = 0;
  std::size_t n_antisqueezed = 0;
  bool converged = false;
  int iterations = 0;
  int start_index = 0;            // 0 = caller's init, k > 0 = k-th restart
  double condition_number = 0.0;  // equilibrated JᵀJ
  std::vector<double> cost_history;  // cost after each accepted step
  std::vector<std::string> warnings;
  std::vector<FrequencyInterval> mask;
};

// Starting point from the data: x from DC anti-squeezing (η = 1), γ from
// the half-excess frequency of the anti-squeezing, η from the DC squeezing
// floor.
OpoParams initial_guess(const FitDataset& data);

// Throws ErrorKind::Degenerate when JᵀJ at the solution is singular, unless
// options.allow_degenerate is set.
FitResult fit(const FitDataset& data, const OpoParams& init,
              const FitOptions& options = {});
FitResult fit_auto(const FitDataset& data, const FitOptions& options = {});

std::string fit_report(const FitResult& result);

}  // namespace sqz
