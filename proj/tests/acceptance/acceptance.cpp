// Acceptance checks, one line per criterion. Exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "sqz/detector.hpp"
#include "sqz/fitting.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/opo_model.hpp"
#include "sqz/synth.hpp"

using namespace sqz;

namespace {

// Tolerances.
constexpr double kLossLimitTol = 0.1;        // dB, criterion 1
constexpr double kDarkCorrectionTol = 0.3;   // dB, criterion 2
constexpr double kSqueezing1GHzTol = 0.5;    // dB, criterion 3
constexpr double kAntiSqueezing1GHzTol = 0.7;
constexpr double kBudgetTol = 0.001;         // criterion 4
constexpr double kUncertaintyTol = 1e-12;    // criterion 5
constexpr double kJacobianTol = 1e-6;        // criterion 6
constexpr double kRecoveryTol = 1e-6;        // criterion 7
constexpr int kCoverageMin = 90;             // criterion 8, out of 100
constexpr double kSigmaRatioLo = 0.1;        // "same order" as the reference σ
constexpr double kSigmaRatioHi = 10.0;
constexpr double kDoublingTol = 0.05;        // dB, criterion 9
constexpr double kVerdictTol = 0.05;

// Reference values.
constexpr double kRefLossLimitDb = 8.5;
constexpr double kRefCorrectedDb = 8.5;
constexpr double kRefSqueezing1GHzLo = 3.5;
constexpr double kRefSqueezing1GHzHi = 4.0;
constexpr double kRefAntiSqueezing1GHz = 5.0;
constexpr double kRefBudget = 0.913;
constexpr double kRefSigmaGammaHz = 0.013e9;
constexpr double kRefSigmaEta = 0.011;

const OpoParams kSystem2{1.75e9, 0.8116, 0.858};

int failures = 0;

void report(int id, bool pass, const std::string& name, const std::string& detail) {
  if (!pass) ++failures;
  fmt::print("[{}] {:2d} {}: {}\n", pass ? "PASS" : "FAIL", id, name, detail);
  std::fflush(stdout);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Trace flat(const std::vector<double>& f, double db) {
  return Trace(f, std::vector<double>(f.size(), db));
}

Scenario campaign_scenario(std::uint64_t seed, double sigma) {
  Scenario s;
  s.params = kSystem2;
  s.grid = linear_grid(1e7, 1.5e9, 500);
  s.clearance = {3e7, 10.0, 1e9, 9.0};
  s.trace_noise_sigma_db = sigma;
  s.seed = seed;
  return s;
}

FitDataset pipeline(const Campaign& c) {
  return {normalize_to_shot(c.squeezed, c.shot, c.dark),
          normalize_to_shot(c.antisqueezed, c.shot, c.dark), {}};
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

void criterion_1() {
  const double s1 = max_squeezing_db(0.858);
  const double s2 = max_squeezing_db(0.828);
  report(1, std::abs(s1 - kRefLossLimitDb) <= kLossLimitTol, "loss-limit consistency",
         fmt::format("max_squeezing_db(0.858) = {:.3f} dB vs {} dB (tol {}); "
                     "max_squeezing_db(0.828) = {:.3f} dB",
                     s1, kRefLossLimitDb, kLossLimitTol, s2));
}

void criterion_2() {
  const std::vector<double> f{3e7, 3.1e7};
  const auto n = normalize_to_shot(flat(f, -6.5), flat(f, 0.0), flat(f, -10.0));
  const double v = -n.rel_power_db[0];
  report(2, std::abs(v - kRefCorrectedDb) <= kDarkCorrectionTol, "dark-correction consistency",
         fmt::format("measured -6.5 dB, clearance 10 dB -> {:.3f} dB vs {} dB (tol {})", -v,
                     -kRefCorrectedDb, kDarkCorrectionTol));
}

void criterion_3() {
  const double x = pump_from_antisqueezing(19.0, 0.858);
  const OpoParams p{1.75e9, x, 0.858};
  const double sq = squeezing_db(1.1e9, p);
  const double an = 10 * std::log10(variance_detected(1.1e9, p, Quadrature::AntiSqueezed));
  const double mid = 0.5 * (kRefSqueezing1GHzLo + kRefSqueezing1GHzHi);
  const bool pass = std::abs(sq - mid) <= kSqueezing1GHzTol &&
                    std::abs(an - kRefAntiSqueezing1GHz) <= kAntiSqueezing1GHzTol;
  report(3, pass, "high-frequency consistency",
         fmt::format("x = {:.4f}; at 1.1 GHz squeezing {:.3f} dB vs {}-{} dB (tol {}), "
                     "anti-squeezing {:.3f} dB vs {} dB (tol {})",
                     x, sq, kRefSqueezing1GHzLo, kRefSqueezing1GHzHi, kSqueezing1GHzTol, an,
                     kRefAntiSqueezing1GHz, kAntiSqueezing1GHzTol));
}

void criterion_4() {
  LossBudget b{{{"pd", 0.98}, {"mm", 0.97}, {"pg", 0.97}, {"ec", 0.99}}, 0.828};
  const auto s1 = loss_budget_product(b);
  b.fitted_eta = 0.858;
  const auto s2 = loss_budget_product(b);
  report(4, std::abs(s1.product - kRefBudget) <= kBudgetTol, "budget reproduction",
         fmt::format("product {:.5f} vs {} (tol {}); residual eta1=0.828 -> {:.4f}, "
                     "eta2=0.858 -> {:.4f}",
                     s1.product, kRefBudget, kBudgetTol, *s1.residual, *s2.residual));
}

void criterion_5() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto grid = log_grid(1e6, 1e10, 10000);
  double worst = 0.0;
  for (double x : {0.1, 0.5, 0.99}) {
    const OpoParams p{1.75e9, x, 1.0};
    for (double f : grid) {
      const double prod = variance_detected(f, p, Quadrature::Squeezed) *
                          variance_detected(f, p, Quadrature::AntiSqueezed);
      worst = std::max(worst, std::abs(prod - 1.0));
    }
  }
  const double t = seconds_since(t0);
  report(5, worst < kUncertaintyTol && t < 1.0, "minimum-uncertainty invariant",
         fmt::format("max |V+V- - 1| = {:.3g} (tol {}) over 3 x 10^4 points in {:.3f} s", worst,
                     kUncertaintyTol, t));
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> ug(0.5e9, 3e9), ux(0.05, 0.95), ue(0.3, 0.99);
  const auto grid = linear_grid(1e6, 2e9, 100);
  double worst = 0.0;
  for (int k = 0; k < 10; ++k) {
    const OpoParams p{ug(rng), ux(rng), ue(rng)};
    std::vector<FitPoint> pts;
    for (double f : grid) {
      pts.push_back({f, 0.0, Quadrature::Squeezed});
      pts.push_back({f, 0.0, Quadrature::AntiSqueezed});
    }
    const auto a = jacobian(p, pts, JacobianMode::Analytic);
    const auto n = jacobian(p, pts, JacobianMode::FiniteDifference);
    for (int c = 0; c < 3; ++c) {
      // Entries far below the column scale (the γ column at f → 0) are
      // compared against 1e-3 of the column maximum instead of themselves.
      const double floor = 1e-3 * a.col(c).cwiseAbs().maxCoeff();
      for (Eigen::Index i = 0; i < a.rows(); ++i) {
        worst = std::max(worst, std::abs(a(i, c) - n(i, c)) / std::max(std::abs(a(i, c)), floor));
      }
    }
  }
  const double t = seconds_since(t0);
  report(6, worst < kJacobianTol && t < 1.0, "jacobian check",
         fmt::format("max relative deviation {:.3g} (tol {}) at 10 points x 100 frequencies x 2 "
                     "quadratures in {:.3f} s",
                     worst, kJacobianTol, t));
}

void criterion_7() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto data = pipeline(generate_campaign(campaign_scenario(1, 0.0)));
  double worst = 0.0;
  int runs = 0;
  for (double sg : {0.8, 1.2}) {
    for (double sx : {0.8, 1.2}) {
      for (double se : {0.8, 1.2}) {
        // η·1.2 leaves the physical range; that start is clamped just below 1.
        const OpoParams init{kSystem2.gamma_fwhm * sg, kSystem2.x * sx,
                             std::min(kSystem2.eta * se, 0.999)};
        const auto r = fit(data, init);
        worst = std::max({worst, rel(r.params.gamma_fwhm, kSystem2.gamma_fwhm),
                          rel(r.params.x, kSystem2.x), rel(r.params.eta, kSystem2.eta)});
        if (!r.converged) worst = INFINITY;
        ++runs;
      }
    }
  }
  const double t = seconds_since(t0);
  report(7, worst < kRecoveryTol && t < 1.0, "noiseless fit recovery",
         fmt::format("{} starts at +-20%: max relative error {:.3g} (tol {}) in {:.3f} s", runs,
                     worst, kRecoveryTol, t));
}

void criterion_8() {
  const auto t0 = std::chrono::steady_clock::now();
  int gamma_hits = 0, eta_hits = 0, both = 0, converged = 0;
  int gamma_hits_res = 0, eta_hits_res = 0;
  double sg_sum = 0.0, se_sum = 0.0;
  FitOptions clustered;
  clustered.covariance = CovarianceEstimator::FrequencyClustered;
  for (std::uint64_t seed = 1; seed <= 100; ++seed) {
    const auto data = pipeline(generate_campaign(campaign_scenario(seed, 0.2)));
    const auto r = fit_auto(data, clustered);
    converged += r.converged;
    const bool g = std::abs(r.params.gamma_fwhm - kSystem2.gamma_fwhm) <= 2 * r.sigma[0];
    const bool e = std::abs(r.params.eta - kSystem2.eta) <= 2 * r.sigma[2];
    gamma_hits += g;
    eta_hits += e;
    both += g && e;
    sg_sum += r.sigma[0];
    se_sum += r.sigma[2];

    // Same point estimate, independent-residual covariance, for comparison.
    const auto rr = fit_auto(data);
    gamma_hits_res += std::abs(rr.params.gamma_fwhm - kSystem2.gamma_fwhm) <= 2 * rr.sigma[0];
    eta_hits_res += std::abs(rr.params.eta - kSystem2.eta) <= 2 * rr.sigma[2];
  }
  const double sg = sg_sum / 100, se = se_sum / 100;
  const double rg = sg / kRefSigmaGammaHz, re = se / kRefSigmaEta;
  const double t = seconds_since(t0);
  const bool pass = gamma_hits >= kCoverageMin && eta_hits >= kCoverageMin && converged == 100 &&
                    rg >= kSigmaRatioLo && rg <= kSigmaRatioHi && re >= kSigmaRatioLo &&
                    re <= kSigmaRatioHi && t < 60.0;
  report(8, pass, "noisy fit recovery",
         fmt::format("within 2 sigma (clustered): gamma {}/100, eta {}/100, both {}/100 "
                     "(min {}); converged {}/100; mean sigma gamma {:.4f} GHz (x{:.2f} of "
                     "reference), eta {:.3f} % (x{:.2f}); residual-covariance counts gamma {}, "
                     "eta {}; {:.1f} s",
                     gamma_hits, eta_hits, both, kCoverageMin, converged, sg / 1e9, rg, se * 100,
                     re, gamma_hits_res, eta_hits_res, t));
}

void criterion_9() {
  auto series = [](double exponent, std::optional<double> knee) {
    // Dark clearance 15 dB at the largest LO power, 0.05 dB trace scatter.
    Scenario s = campaign_scenario(5, 0.05);
    s.clearance = ClearanceSpec::flat(15.0);
    s.grid = linear_grid(1e7, 1.5e9, 200);
    s.lo_powers = {0.5e-3, 1e-3, 2e-3, 4e-3, 8e-3};
    s.lo_scaling_exponent = exponent;
    s.saturation_knee = knee;
    return linearity_fit(generate_linearity_series(s), {1e8, 1.5e9});
  };
  const auto shot = series(1.0, std::nullopt);
  const auto quad = series(2.0, std::nullopt);
  const auto knee = series(1.0, 6e-3);
  const auto vs = saturation_verdict(shot.exponent, kVerdictTol);
  const auto vq = saturation_verdict(quad.exponent, kVerdictTol);
  const auto vk = saturation_verdict(knee.exponent, kVerdictTol);
  const bool pass = std::abs(shot.db_per_doubling - 3.01) <= kDoublingTol &&
                    vs == Verdict::ShotLimited &&
                    std::abs(quad.db_per_doubling - 6.02) <= kDoublingTol &&
                    vq == Verdict::Technical && vk == Verdict::Saturating;
  report(9, pass, "linearity protocol",
         fmt::format("shot-limited {:.3f} dB/doubling {}; quadratic {:.3f} dB/doubling {}; "
                     "6 mW knee exponent {:.3f} {} (tol {} dB)",
                     shot.db_per_doubling, to_string(vs), quad.db_per_doubling, to_string(vq),
                     knee.exponent, to_string(vk), kDoublingTol));
}

}  // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  const int printed_failures = failures;
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  report(10, printed_failures == 0, "scope",
         "raw measured spectra are unpublished, so no figure is reproduced point by point; "
         "every printed number is pinned by 1-4 and the rest by property checks 5-9");
  fmt::print("{} of 10 criteria failed\n", failures);
  return failures;
}
