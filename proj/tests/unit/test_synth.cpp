#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <span>
#include <sstream>

#include "oracles.hpp"
#include "sqz/detector.hpp"
#include "sqz/error.hpp"
#include "sqz/synth.hpp"

using namespace sqz;

namespace {

Scenario system2() {
  Scenario s;
  s.params = {1.75e9, 0.8116, 0.858};
  s.grid = linear_grid(1e7, 2e9, 200);
  s.clearance = {3e7, 10.0, 1e9, 9.0};
  return s;
}

bool same(std::span<const double> a, std::span<const double> b) {
  return std::equal(a.begin(), a.end(), b.begin(), b.end());
}

double stddev(const std::vector<double>& v) {
  double m = 0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_CASE("grids") {
  const auto lin = linear_grid(1e6, 1e9, 1000);
  CHECK(lin.front() == 1e6);
  CHECK(lin.back() == 1e9);
  CHECK(lin.size() == 1000);
  const auto lg = log_grid(1e6, 1e9, 4);
  CHECK(lg[1] == doctest::Approx(1e7).epsilon(1e-12));
  CHECK(lg.back() == 1e9);
  CHECK_THROWS_AS(linear_grid(1e9, 1e6, 10), Error);
  CHECK_THROWS_AS(log_grid(0.0, 1e6, 10), Error);
}

TEST_CASE("clearance spec") {
  const ClearanceSpec c{3e7, 10.0, 1e9, 9.0};
  CHECK(c.at(1e7) == 10.0);
  CHECK(c.at(3e7) == 10.0);
  CHECK(c.at(2e9) == 9.0);
  CHECK(c.at(5.15e8) == doctest::Approx(9.5).epsilon(1e-12));
  CHECK(ClearanceSpec::flat(7.0).at(123.0) == 7.0);
}

TEST_CASE("noiseless campaign closes the loop") {
  const auto s = system2();
  const auto c = generate_campaign(s);
  const auto sq = normalize_to_shot(c.squeezed, c.shot, c.dark);
  const auto an = normalize_to_shot(c.antisqueezed, c.shot, c.dark);
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    const double f = s.grid[i];
    const auto& p = s.params;
    CHECK(std::abs(sq.rel_power_db[i] -
                   static_cast<double>(oracle::to_db(
                       oracle::opo_variance(f, p.gamma_fwhm, p.x, p.eta, true)))) < 1e-10);
    CHECK(std::abs(an.rel_power_db[i] -
                   static_cast<double>(oracle::to_db(
                       oracle::opo_variance(f, p.gamma_fwhm, p.x, p.eta, false)))) < 1e-10);
    CHECK(c.shot.powers()[i] - c.dark.powers()[i] ==
          doctest::Approx(s.clearance.at(f)).epsilon(1e-12));
  }
  CHECK(c.shot.powers()[0] == doctest::Approx(s.shot_level_dbm));
  CHECK(c.linearity.empty());
}

TEST_CASE("system 2 scenario: measured and corrected squeezing at 30 MHz") {
  auto s = system2();
  s.grid = {3e7, 1e8, 1e9};
  const auto c = generate_campaign(s);
  const double measured = c.squeezed.powers()[0] - c.shot.powers()[0];
  const double corrected = normalize_to_shot(c.squeezed, c.shot, c.dark).rel_power_db[0];
  MESSAGE("measured " << measured << " dB, corrected " << corrected << " dB");
  CHECK(std::abs(measured + 6.5) <= 0.4);
  CHECK(std::abs(corrected + 8.5) <= 0.4);
  CHECK(corrected < measured);
}

TEST_CASE("campaigns are deterministic per seed") {
  auto s = system2();
  s.trace_noise_sigma_db = 0.3;
  const auto a = generate_campaign(s);
  const auto b = generate_campaign(s);
  CHECK(same(a.squeezed.powers(), b.squeezed.powers()));
  CHECK(same(a.dark.powers(), b.dark.powers()));
  s.seed = 2;
  const auto c = generate_campaign(s);
  CHECK_FALSE(same(a.squeezed.powers(), c.squeezed.powers()));
}

TEST_CASE("a zero imbalance is a no-op") {
  auto s = system2();
  s.trace_noise_sigma_db = 0.2;
  const auto plain = generate_campaign(s);
  s.imbalance = ImbalanceModel{0.0, 0.0, 0.83e9, 5e7};
  const auto mixed = generate_campaign(s);
  CHECK(same(plain.squeezed.powers(), mixed.squeezed.powers()));
  CHECK(same(plain.antisqueezed.powers(), mixed.antisqueezed.powers()));
}

TEST_CASE("imbalance lifts the squeezed trace near f0") {
  auto s = system2();
  s.grid = linear_grid(0.5e9, 1.2e9, 141);
  const auto plain = generate_campaign(s);
  s.imbalance = ImbalanceModel{0.0, 0.2, 0.83e9, 2e7};
  const auto mixed = generate_campaign(s);
  std::size_t at = 0;
  for (std::size_t i = 0; i < s.grid.size(); ++i) {
    if (std::abs(s.grid[i] - 0.83e9) < std::abs(s.grid[at] - 0.83e9)) at = i;
  }
  CHECK(mixed.squeezed.powers()[at] > plain.squeezed.powers()[at] + 0.1);
  CHECK(mixed.squeezed.powers().front() - plain.squeezed.powers().front() < 0.01);
}

TEST_CASE("trace noise scales with averaging") {
  Scenario s = system2();
  s.grid = linear_grid(1e6, 2e9, 10000);
  s.trace_noise_sigma_db = 0.5;
  const auto noiseless = [&] {
    auto q = s;
    q.trace_noise_sigma_db = 0.0;
    return generate_campaign(q);
  }();
  auto scatter = [&](int n) {
    auto q = s;
    q.n_averages = n;
    const auto c = generate_campaign(q);
    std::vector<double> d(s.grid.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      d[i] = c.squeezed.powers()[i] - noiseless.squeezed.powers()[i];
    }
    return stddev(d);
  };
  const double s1 = scatter(1);
  const double s2 = scatter(2);
  const double s8 = scatter(8);
  CHECK(s1 == doctest::Approx(0.5).epsilon(0.05));
  CHECK(s1 / s2 == doctest::Approx(std::sqrt(2.0)).epsilon(0.1));
  CHECK(s2 / s8 == doctest::Approx(2.0).epsilon(0.1));
}

TEST_CASE("reference averaging only affects shot and dark") {
  auto s = system2();
  s.trace_noise_sigma_db = 0.5;
  const auto base = generate_campaign(s);
  s.reference_averages = 100;
  const auto ref = generate_campaign(s);
  CHECK(same(base.squeezed.powers(), ref.squeezed.powers()));
  CHECK_FALSE(same(base.shot.powers(), ref.shot.powers()));
  double worst = 0;
  for (double p : ref.shot.powers()) worst = std::max(worst, std::abs(p - s.shot_level_dbm));
  CHECK(worst < 0.5);
}

TEST_CASE("linearity series") {
  auto s = system2();
  s.lo_powers = {1e-3, 2e-3, 4e-3};
  const auto series = generate_linearity_series(s);
  REQUIRE(series.size() == 3);
  CHECK(series[0].noise.label() == "lo_0_noise");
  CHECK(series[2].dark.label() == "lo_2_dark");
  CHECK(linearity_fit(series, {1e8, 1.5e9}).exponent == doctest::Approx(1.0).epsilon(1e-10));

  s.lo_scaling_exponent = 2.0;
  CHECK(linearity_fit(generate_linearity_series(s), {1e8, 1.5e9}).exponent ==
        doctest::Approx(2.0).epsilon(1e-10));
  CHECK(generate_campaign(s).linearity.size() == 3);

  s.lo_powers.clear();
  CHECK_THROWS_AS(generate_linearity_series(s), Error);
}

TEST_CASE("scenario validation") {
  auto s = system2();
  s.trace_noise_sigma_db = -1;
  CHECK_THROWS_AS(s.validate(), Error);
  s = system2();
  s.n_averages = 0;
  CHECK_THROWS_AS(s.validate(), Error);
  s = system2();
  s.params.x = 1.0;
  CHECK_THROWS_AS(generate_campaign(s), Error);
}

TEST_CASE("scenario files") {
  std::istringstream in(R"(# system 2
[opo]
gamma_fwhm_hz = 1.75e9
x = 0.8116   ; pump
eta = 0.858

[grid]
start_hz = 1e7
stop_hz = 2e9
points = 100
spacing = log

[detector]
shot_level_dbm = -75
clearance_low = 3e7:10
clearance_high = 1e9:9
trace_noise_sigma_db = 0.1
n_averages = 4
reference_averages = 16

[imbalance]
amplitude_rad = 0.2
f0_hz = 0.83e9
width_hz = 5e7

[linearity]
lo_powers_w = 1e-3, 2e-3, 4e-3
saturation_knee_w = 6e-3

[run]
seed = 42
)");
  const auto s = parse_scenario(in);
  CHECK(s.params.gamma_fwhm == 1.75e9);
  CHECK(s.params.x == 0.8116);
  CHECK(s.grid.size() == 100);
  CHECK(s.grid[1] / s.grid[0] == doctest::Approx(s.grid[2] / s.grid[1]));
  CHECK(s.shot_level_dbm == -75);
  CHECK(s.clearance.at(2e9) == 9.0);
  CHECK(s.n_averages == 4);
  CHECK(s.reference_averages == 16);
  REQUIRE(s.imbalance);
  CHECK(s.imbalance->amplitude == 0.2);
  CHECK(s.imbalance->slope == 0.0);
  CHECK(s.lo_powers.size() == 3);
  CHECK(s.saturation_knee == 6e-3);
  CHECK(s.seed == 42);

  auto bad = [](const char* text) {
    std::istringstream is(text);
    try {
      parse_scenario(is);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::Io;
  };
  const char* head = "[opo]\ngamma_fwhm_hz=1e9\nx=0.5\neta=0.9\n[grid]\nstart_hz=1e6\nstop_hz=1e9\n";
  CHECK(bad((std::string(head) + "points=10\nbogus=1\n").c_str()) == ErrorKind::Parse);
  CHECK(bad((std::string(head) + "points=ten\n").c_str()) == ErrorKind::Parse);
  CHECK(bad((std::string(head) + "points=10\nspacing=cubic\n").c_str()) == ErrorKind::Parse);
  CHECK(bad("[opo]\nx=0.5\n") == ErrorKind::Parse);
  CHECK(bad((std::string(head) + "points=10\n[detector]\nclearance_db=10\nclearance_low=1:2\n")
                .c_str()) == ErrorKind::Parse);
  CHECK(bad((std::string(head) + "points=10\n[detector]\nclearance_low=1e6\nclearance_high=1e9:9\n")
                .c_str()) == ErrorKind::Parse);
  CHECK(bad((std::string(head) + "points=10\n[detector]\nn_averages=0\n").c_str()) ==
        ErrorKind::Domain);

  CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.ini"), Error);
}
