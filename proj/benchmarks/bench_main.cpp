#include <benchmark/benchmark.h>

#include "sqz/fitting.hpp"
#include "sqz/noise_math.hpp"
#include "sqz/synth.hpp"

using namespace sqz;

namespace {

Scenario scenario(std::size_t points, double sigma) {
  Scenario s;
  s.grid = linear_grid(1e7, 1.5e9, points);
  s.clearance = {3e7, 10.0, 1e9, 9.0};
  s.trace_noise_sigma_db = sigma;
  return s;
}

FitDataset dataset(std::size_t points, double sigma) {
  const auto c = generate_campaign(scenario(points, sigma));
  return {normalize_to_shot(c.squeezed, c.shot, c.dark),
          normalize_to_shot(c.antisqueezed, c.shot, c.dark), {}};
}

}  // namespace

static void BM_VarianceDetected(benchmark::State& state) {
  const OpoParams p{1.75e9, 0.8116, 0.858};
  double f = 1e6;
  for (auto _ : state) {
    benchmark::DoNotOptimize(variance_detected(f, p, Quadrature::Squeezed));
    f += 1.0;
  }
}
BENCHMARK(BM_VarianceDetected);

static void BM_Normalize(benchmark::State& state) {
  const auto c = generate_campaign(scenario(static_cast<std::size_t>(state.range(0)), 0.2));
  for (auto _ : state) benchmark::DoNotOptimize(normalize_to_shot(c.squeezed, c.shot, c.dark));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Normalize)->Arg(500)->Arg(10000);

static void BM_Jacobian(benchmark::State& state) {
  const auto data = dataset(static_cast<std::size_t>(state.range(0)), 0.2);
  const auto mode = state.range(1) ? JacobianMode::FiniteDifference : JacobianMode::Analytic;
  const OpoParams p{1.7e9, 0.8, 0.85};
  for (auto _ : state) benchmark::DoNotOptimize(jacobian(p, data, mode));
}
BENCHMARK(BM_Jacobian)->Args({500, 0})->Args({500, 1});

static void BM_Fit(benchmark::State& state) {
  const auto data = dataset(static_cast<std::size_t>(state.range(0)), 0.2);
  FitOptions opt;
  opt.covariance = state.range(1) ? CovarianceEstimator::FrequencyClustered
                                  : CovarianceEstimator::Residual;
  for (auto _ : state) benchmark::DoNotOptimize(fit_auto(data, opt));
}
BENCHMARK(BM_Fit)->Args({500, 0})->Args({500, 1})->Args({5000, 0})->Unit(benchmark::kMillisecond);

static void BM_Campaign(benchmark::State& state) {
  const auto s = scenario(static_cast<std::size_t>(state.range(0)), 0.2);
  for (auto _ : state) benchmark::DoNotOptimize(generate_campaign(s));
}
BENCHMARK(BM_Campaign)->Arg(500);
BENCHMARK_MAIN();
