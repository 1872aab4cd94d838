#include "sqz/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <tuple>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <fmt/format.h>

#include "sqz/error.hpp"

namespace sqz {
namespace {

constexpr double kDbPerLn = 10.0 / std::numbers::ln10;
constexpr std::array<const char*, 3> kParamNames{"gamma_fwhm", "x", "eta"};
// Condition number above which JᵀJ is treated as singular.
constexpr double kSingularCondition = 1e15;

using Vec3 = Eigen::Vector3d;

double logistic(double u) { return 1.0 / (1.0 + std::exp(-u)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

Vec3 to_internal(const OpoParams& p) {
  const double x = std::clamp(p.x, 1e-12, 1.0 - 1e-12);
  const double eta = std::clamp(p.eta, 1e-12, 1.0 - 1e-12);
  return {std::log(p.gamma_fwhm), logit(x), logit(eta)};
}

OpoParams from_internal(const Vec3& t) {
  return {std::exp(t[0]), logistic(t[1]), logistic(t[2])};
}

// dp/dθ on the diagonal.
Vec3 transform_derivative(const OpoParams& p) {
  return {p.gamma_fwhm, p.x * (1.0 - p.x), p.eta * (1.0 - p.eta)};
}

bool usable(const OpoParams& p) {
  return std::isfinite(p.gamma_fwhm) && p.gamma_fwhm > 0.0 && p.x >= 0.0 &&
         p.x < 1.0 && p.eta > 0.0 && p.eta <= 1.0;
}

void collect(const NormalizedSpectrum& s, Quadrature q,
             const std::vector<FrequencyInterval>& mask,
             std::vector<FitPoint>& out) {
  const auto first = out.size();
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (!s.valid[i]) continue;
    const double f = s.frequencies[i];
    const bool masked = std::any_of(mask.begin(), mask.end(),
                                    [f](const auto& m) { return m.contains(f); });
    if (!masked) out.push_back({f, s.rel_power_db[i], q});
  }
  std::sort(out.begin() + static_cast<std::ptrdiff_t>(first), out.end(),
            [](const FitPoint& a, const FitPoint& b) {
              return std::tie(a.frequency, a.value_db) < std::tie(b.frequency, b.value_db);
            });
}

double sum_squares(const std::vector<double>& r) {
  double s = 0.0;
  for (double v : r) s += v * v;
  return s;
}

struct Run {
  Vec3 theta;
  double cost = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> history;
};

Eigen::MatrixXd internal_jacobian(const Vec3& theta,
                                  const std::vector<FitPoint>& points,
                                  JacobianMode mode) {
  const OpoParams p = from_internal(theta);
  Eigen::MatrixXd j = jacobian(p, points, mode);
  const Vec3 t = transform_derivative(p);
  for (int c = 0; c < 3; ++c) j.col(c) *= t[c];
  return j;
}

// Cost at theta, or +inf when theta leaves the representable range.
double cost_at(const Vec3& theta, const std::vector<FitPoint>& points) {
  const OpoParams p = from_internal(theta);
  if (!usable(p)) return std::numeric_limits<double>::infinity();
  const double c = sum_squares(residuals(p, points));
  return std::isfinite(c) ? c : std::numeric_limits<double>::infinity();
}

Run levenberg_marquardt(const Vec3& start, const std::vector<FitPoint>& points,
                        const FitOptions& opt) {
  Run run;
  run.theta = start;
  run.cost = cost_at(start, points);
  if (!std::isfinite(run.cost)) return run;
  run.history.push_back(run.cost);

  Eigen::MatrixXd j = internal_jacobian(run.theta, points, opt.jacobian_mode);
  Eigen::VectorXd r = Eigen::Map<const Eigen::VectorXd>(
      residuals(from_internal(run.theta), points).data(),
      static_cast<Eigen::Index>(points.size()));
  double lambda = opt.initial_damping;

  while (run.iterations < opt.max_iterations) {
    ++run.iterations;
    const Eigen::Matrix3d a = j.transpose() * j;
    const Vec3 g = j.transpose() * r;
    if (run.cost == 0.0 || g.norm() == 0.0) {
      run.converged = true;
      break;
    }
    Eigen::Matrix3d damped = a;
    const double diag_floor = 1e-12 * a.diagonal().maxCoeff();
    for (int k = 0; k < 3; ++k) {
      damped(k, k) += lambda * std::max(a(k, k), diag_floor);
    }
    const Vec3 step = damped.ldlt().solve(-g);
    const Vec3 trial = run.theta + step;
    const double trial_cost = step.allFinite() ? cost_at(trial, points)
                                               : std::numeric_limits<double>::infinity();

    if (trial_cost < run.cost) {
      const double rel = (run.cost - trial_cost) / run.cost;
      run.theta = trial;
      run.cost = trial_cost;
      run.history.push_back(trial_cost);
      lambda = std::max(lambda / 10.0, 1e-15);
      if (rel < opt.cost_tolerance || step.norm() < opt.step_tolerance) {
        run.converged = true;
        break;
      }
      const auto res = residuals(from_internal(run.theta), points);
      r = Eigen::Map<const Eigen::VectorXd>(res.data(), static_cast<Eigen::Index>(res.size()));
      j = internal_jacobian(run.theta, points, opt.jacobian_mode);
    } else {
      lambda *= 10.0;
      // No descent even along a vanishing gradient step: stationary to
      // working precision.
      if (step.norm() < opt.step_tolerance || lambda > 1e16) {
        run.converged = true;
        break;
      }
    }
  }
  return run;
}

std::string describe_direction(const Vec3& v) {
  std::string out;
  for (int k = 0; k < 3; ++k) {
    if (std::abs(v[k]) < 0.05) continue;
    if (!out.empty()) out += v[k] < 0 ? " - " : " + ";
    else if (v[k] < 0) out += "-";
    out += fmt::format("{:.2f}*{}", std::abs(v[k]), kParamNames[static_cast<std::size_t>(k)]);
  }
  return out;
}

}  // namespace

const char* to_string(CovarianceEstimator e) noexcept {
  return e == CovarianceEstimator::Residual ? "residual" : "frequency_clustered";
}

void FitDataset::validate() const {
  check(squeezed);
  check(antisqueezed);
  for (const auto& m : mask) {
    if (!m.well_formed()) {
      throw Error(ErrorKind::Domain,
                  fmt::format("mask interval [{}, {}] Hz is not well formed", m.lo, m.hi));
    }
  }
  if (squeezed.size() == 0 && antisqueezed.size() == 0) {
    throw Error(ErrorKind::InsufficientData, "fit dataset has no spectra");
  }
  const auto points = fit_points(*this);
  for (const auto q : {Quadrature::Squeezed, Quadrature::AntiSqueezed}) {
    const auto& s = q == Quadrature::Squeezed ? squeezed : antisqueezed;
    if (s.size() == 0) continue;
    const auto n = std::count_if(points.begin(), points.end(),
                                 [q](const FitPoint& p) { return p.quadrature == q; });
    if (n < 3) {
      throw Error(ErrorKind::InsufficientData,
                  fmt::format("{} spectrum has {} usable points, need 3", to_string(q), n));
    }
  }
}

std::vector<FitPoint> fit_points(const FitDataset& data) {
  std::vector<FitPoint> out;
  out.reserve(data.squeezed.size() + data.antisqueezed.size());
  collect(data.squeezed, Quadrature::Squeezed, data.mask, out);
  collect(data.antisqueezed, Quadrature::AntiSqueezed, data.mask, out);
  return out;
}

std::vector<double> residuals(const OpoParams& params,
                              const std::vector<FitPoint>& points) {
  params.validate();
  std::vector<double> r(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& pt = points[i];
    r[i] = pt.value_db - 10.0 * std::log10(variance_detected(pt.frequency, params, pt.quadrature));
  }
  return r;
}

std::vector<double> residuals(const OpoParams& params, const FitDataset& data) {
  return residuals(params, fit_points(data));
}

Eigen::MatrixXd jacobian(const OpoParams& params,
                         const std::vector<FitPoint>& points, JacobianMode mode) {
  params.validate();
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::MatrixXd j(n, 3);

  if (mode == JacobianMode::Analytic) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pt = points[static_cast<std::size_t>(i)];
      const double v = variance_detected(pt.frequency, params, pt.quadrature);
      const auto grad = variance_detected_gradient(pt.frequency, params, pt.quadrature);
      const double scale = -kDbPerLn / v;
      j(i, 0) = scale * grad.d_gamma;
      j(i, 1) = scale * grad.d_x;
      j(i, 2) = scale * grad.d_eta;
    }
    return j;
  }

  // Central differences, step 1e-6 relative to each parameter. Evaluated
  // without range checks so η = 1 can be differentiated.
  const std::array<double, 3> base{params.gamma_fwhm, params.x, params.eta};
  for (int c = 0; c < 3; ++c) {
    const double value = base[static_cast<std::size_t>(c)];
    const double h = 1e-6 * (value != 0.0 ? std::abs(value) : 1.0);
    if (!(value + h != value) || !(value - h != value)) {
      throw Error(ErrorKind::Numeric,
                  fmt::format("finite-difference step underflows for {} = {}",
                              kParamNames[static_cast<std::size_t>(c)], value));
    }
    auto plus = base;
    auto minus = base;
    plus[static_cast<std::size_t>(c)] += h;
    minus[static_cast<std::size_t>(c)] -= h;
    const double width = plus[static_cast<std::size_t>(c)] - minus[static_cast<std::size_t>(c)];
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pt = points[static_cast<std::size_t>(i)];
      const double vp = detail::variance_detected_raw(pt.frequency, plus[0], plus[1], plus[2], pt.quadrature);
      const double vm = detail::variance_detected_raw(pt.frequency, minus[0], minus[1], minus[2], pt.quadrature);
      // residual = data − 10·log10(V)
      j(i, c) = -(10.0 * std::log10(vp) - 10.0 * std::log10(vm)) / width;
    }
  }
  return j;
}

Eigen::MatrixXd jacobian(const OpoParams& params, const FitDataset& data,
                         JacobianMode mode) {
  return jacobian(params, fit_points(data), mode);
}

OpoParams initial_guess(const FitDataset& data) {
  const auto points = fit_points(data);
  std::vector<FitPoint> sq;
  std::vector<FitPoint> anti;
  for (const auto& p : points) {
    (p.quadrature == Quadrature::Squeezed ? sq : anti).push_back(p);
  }
  // Mean of the lowest-frequency samples as the DC level.
  const auto dc_level = [](const std::vector<FitPoint>& v) {
    const std::size_t n = std::min<std::size_t>(3, v.size());
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += v[i].value_db;
    return s / static_cast<double>(n);
  };
  // First frequency where the linear deviation from shot noise drops below
  // half of its DC value.
  const auto half_frequency = [](const std::vector<FitPoint>& v, double dc_dev) {
    for (const auto& p : v) {
      if (std::abs(std::pow(10.0, p.value_db / 10.0) - 1.0) <= 0.5 * dc_dev) return p.frequency;
    }
    return v.back().frequency;
  };

  OpoParams guess{1e9, 0.5, 0.9};
  if (!anti.empty()) {
    const double a0 = dc_level(anti);
    guess.x = a0 > 0.01 ? std::clamp(pump_from_antisqueezing(a0, 1.0), 0.05, 0.95) : 0.1;
    const double f_half = half_frequency(anti, std::pow(10.0, a0 / 10.0) - 1.0);
    guess.gamma_fwhm = 2.0 * f_half / (1.0 - guess.x);
  }
  if (!sq.empty()) {
    const double v0 = std::pow(10.0, dc_level(sq) / 10.0);
    const double depth = 1.0 - v0;
    const double full = 4.0 * guess.x / ((1.0 + guess.x) * (1.0 + guess.x));
    guess.eta = std::clamp(depth / full, 0.05, 0.99);
    if (anti.empty()) {
      const double f_half = half_frequency(sq, std::max(depth, 1e-6));
      guess.gamma_fwhm = 2.0 * f_half / (1.0 + guess.x);
    }
  }
  return guess;
}

FitResult fit(const FitDataset& data, const OpoParams& init, const FitOptions& opt) {
  data.validate();
  init.validate();
  const auto points = fit_points(data);
  const auto n = points.size();

  std::vector<Run> runs;
  const Vec3 start = to_internal(init);
  runs.push_back(levenberg_marquardt(start, points, opt));
  if (!runs.front().converged && opt.multistart > 0) {
    std::mt19937_64 rng(opt.seed);
    std::normal_distribution<double> jitter(0.0, 0.5);
    for (int k = 0; k < opt.multistart; ++k) {
      Vec3 s = start;
      for (int c = 0; c < 3; ++c) s[c] += jitter(rng);
      runs.push_back(levenberg_marquardt(s, points, opt));
    }
  }
  // Converged first, then lowest cost, then lowest start index.
  std::size_t best = 0;
  for (std::size_t k = 1; k < runs.size(); ++k) {
    const auto& a = runs[k];
    const auto& b = runs[best];
    if ((a.converged && !b.converged) ||
        (a.converged == b.converged && a.cost < b.cost)) {
      best = k;
    }
  }
  const Run& run = runs[best];
  if (!std::isfinite(run.cost)) {
    throw Error(ErrorKind::Numeric, "fit: model could not be evaluated at the start point");
  }

  FitResult result;
  result.params = from_internal(run.theta);
  result.cost = run.cost;
  result.n_points = n;
  result.n_squeezed = static_cast<std::size_t>(std::count_if(
      points.begin(), points.end(),
      [](const FitPoint& p) { return p.quadrature == Quadrature::Squeezed; }));
  result.n_antisqueezed = n - result.n_squeezed;
  result.rms_residual_db = std::sqrt(run.cost / static_cast<double>(n));
  result.converged = run.converged;
  result.iterations = run.iterations;
  result.start_index = static_cast<int>(best);
  result.cost_history = run.history;
  result.mask = data.mask;
  result.covariance_estimator = opt.covariance;

  // Covariance in transformed coordinates, then mapped back.
  const Eigen::MatrixXd j = internal_jacobian(run.theta, points, opt.jacobian_mode);
  const Eigen::Matrix3d a = j.transpose() * j;
  const Vec3 d = a.diagonal();
  for (int k = 0; k < 3; ++k) {
    if (!(d[k] > 0.0)) {
      throw Error(ErrorKind::Degenerate,
                  fmt::format("fit: data carry no information on {}",
                              kParamNames[static_cast<std::size_t>(k)]));
    }
  }
  const Vec3 inv_sqrt = d.cwiseSqrt().cwiseInverse();
  const Eigen::Matrix3d equilibrated = inv_sqrt.asDiagonal() * a * inv_sqrt.asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(equilibrated);
  const Vec3 lambdas = eig.eigenvalues();
  const Vec3 null_dir = eig.eigenvectors().col(0);
  result.condition_number =
      lambdas[0] > 0.0 ? lambdas[2] / lambdas[0] : std::numeric_limits<double>::infinity();
  const bool singular = !(result.condition_number < kSingularCondition);
  if (singular && !opt.allow_degenerate) {
    throw Error(ErrorKind::Degenerate,
                fmt::format("fit: JᵀJ is singular (condition {:.3g}); ill-constrained "
                            "direction {}",
                            result.condition_number, describe_direction(null_dir)));
  }
  if (singular) {
    result.warnings.push_back(fmt::format(
        "JᵀJ is singular (condition {:.3g}); parameters along {} are not identified",
        result.condition_number, describe_direction(null_dir)));
  } else if (result.condition_number > opt.condition_warning) {
    result.warnings.push_back(fmt::format(
        "JᵀJ condition number {:.3g} exceeds {:.3g}; nearly degenerate direction {}",
        result.condition_number, opt.condition_warning, describe_direction(null_dir)));
  }

  // (JᵀJ)⁻¹ = D^{-1/2} E⁻¹ D^{-1/2}; a singular problem drops the null
  // eigenvector here and marks the parameters along it as unbounded below.
  Vec3 inv_lambdas = lambdas.cwiseInverse();
  if (singular) inv_lambdas[0] = 0.0;
  const Eigen::Matrix3d inv_eq =
      eig.eigenvectors() * inv_lambdas.asDiagonal() * eig.eigenvectors().transpose();
  const Eigen::Matrix3d a_inv = inv_sqrt.asDiagonal() * inv_eq * inv_sqrt.asDiagonal();

  Eigen::Matrix3d cov_internal;
  if (opt.covariance == CovarianceEstimator::Residual) {
    const double dof = n > 3 ? static_cast<double>(n - 3) : static_cast<double>(n);
    cov_internal = (run.cost / dof) * a_inv;
  } else {
    const auto r = residuals(result.params, points);
    std::map<double, Vec3> score;
    for (std::size_t i = 0; i < n; ++i) {
      auto& s = score.try_emplace(points[i].frequency, Vec3::Zero()).first->second;
      s += j.row(static_cast<Eigen::Index>(i)).transpose() * r[i];
    }
    Eigen::Matrix3d meat = Eigen::Matrix3d::Zero();
    for (const auto& [f, s] : score) meat += s * s.transpose();
    // Small-sample factor G/(G − 1)·(n − 1)/(n − 3).
    const auto groups = static_cast<double>(score.size());
    const auto nd = static_cast<double>(n);
    if (groups > 1.0 && nd > 3.0) meat *= groups / (groups - 1.0) * (nd - 1.0) / (nd - 3.0);
    cov_internal = a_inv * meat * a_inv;
  }
  const Vec3 t = transform_derivative(result.params);
  result.covariance = t.asDiagonal() * cov_internal * t.asDiagonal();
  result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();
  for (int k = 0; k < 3; ++k) {
    result.sigma[static_cast<std::size_t>(k)] = std::sqrt(std::max(result.covariance(k, k), 0.0));
  }
  if (singular) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    for (int k = 0; k < 3; ++k) {
      if (std::abs(null_dir[k]) < 1e-3) continue;
      result.sigma[static_cast<std::size_t>(k)] = inf;
      result.covariance.row(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      result.covariance.col(k).setConstant(std::numeric_limits<double>::quiet_NaN());
      result.covariance(k, k) = inf;
    }
  }
  if (!result.converged) {
    result.warnings.push_back(
        fmt::format("no convergence within {} iterations", opt.max_iterations));
  }
  return result;
}

FitResult fit_auto(const FitDataset& data, const FitOptions& options) {
  data.validate();
  return fit(data, initial_guess(data), options);
}

namespace {

// "value ± sigma unit" with sigma rounded to two significant digits.
std::string value_with_sigma(double value, double sigma, const char* unit) {
  const std::string suffix = *unit ? fmt::format(" {}", unit) : std::string();
  if (!std::isfinite(sigma)) return fmt::format("{:.6g} ± n/a{}", value, suffix);
  if (sigma < 1e-6) return fmt::format("{:.6f} ± < 1e-6{}", value, suffix);
  const int decimals = std::max(0, 1 - static_cast<int>(std::floor(std::log10(sigma))));
  return fmt::format("{:.{}f} ± {:.{}f}{}", value, decimals, sigma, decimals, suffix);
}

}  // namespace

std::string fit_report(const FitResult& r) {
  std::string out;
  if (!r.converged) {
    out += "*** FIT DID NOT CONVERGE: values below are the last iterate ***\n";
  }
  out += fmt::format("OPO spectrum fit ({} after {} iterations, start {})\n",
                     r.converged ? "converged" : "not converged", r.iterations,
                     r.start_index);
  out += fmt::format("gamma_fwhm = {}\n",
                     value_with_sigma(r.params.gamma_fwhm / 1e9, r.sigma[0] / 1e9, "GHz"));
  out += fmt::format("x = {}\n", value_with_sigma(r.params.x, r.sigma[1], ""));
  out += fmt::format("eta = {}\n",
                     value_with_sigma(r.params.eta * 100.0, r.sigma[2] * 100.0, "%"));
  out += fmt::format("rms residual = {:.4g} dB over {} points ({} squeezed, {} anti-squeezed)\n",
                     r.rms_residual_db, r.n_points, r.n_squeezed, r.n_antisqueezed);
  out += fmt::format("condition number = {:.3g}\n", r.condition_number);
  if (r.mask.empty()) {
    out += "masked = none\n";
  } else {
    for (const auto& m : r.mask) {
      out += fmt::format("masked = {:.4f} .. {:.4f} GHz\n", m.lo / 1e9, m.hi / 1e9);
    }
  }
  for (const auto& w : r.warnings) out += fmt::format("warning: {}\n", w);
  return out;
}

}  // namespace sqz
