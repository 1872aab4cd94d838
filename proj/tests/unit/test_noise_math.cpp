#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>
#include <vector>

#include "oracles.hpp"
#include "sqz/error.hpp"
#include "sqz/noise_math.hpp"

using namespace sqz;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Trace flat(const std::vector<double>& f, double level, const char* label) {
  return Trace(f, std::vector<double>(f.size(), level), label);
}

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected sqz::Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("db_to_lin and lin_to_db") {
  CHECK(db_to_lin(0.0) == 1.0);
  CHECK(db_to_lin(3.0103) == doctest::Approx(2.0).epsilon(1e-5));
  CHECK(db_to_lin(-10.0) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(lin_to_db(1.0) == 0.0);
  CHECK(lin_to_db(0.5) == doctest::Approx(-3.0103).epsilon(1e-5));
  for (double x : {1e-3, 1.0, 1e3}) {
    CHECK(db_to_lin(lin_to_db(x)) == doctest::Approx(x).epsilon(1e-15));
  }
  CHECK(kind_of([] { db_to_lin(std::numeric_limits<double>::quiet_NaN()); }) == ErrorKind::Domain);
  CHECK(kind_of([] { db_to_lin(kNegInf); }) == ErrorKind::Domain);
  CHECK(kind_of([] { lin_to_db(0.0); }) == ErrorKind::Domain);
  CHECK(kind_of([] { lin_to_db(-1.0); }) == ErrorKind::Domain);
}

TEST_CASE("Trace rejects malformed input") {
  CHECK(kind_of([] { Trace({1.0}, {0.0}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { Trace({1.0, 2.0}, {0.0}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { Trace({2.0, 1.0}, {0.0, 0.0}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { Trace({0.0, 1.0}, {0.0, 0.0}); }) == ErrorKind::Parse);
  CHECK(kind_of([] { Trace({1.0, 2.0}, {0.0, std::nan("")}); }) == ErrorKind::Parse);
  CHECK_NOTHROW(Trace({1.0, 2.0}, {kNegInf, kNegInf}, "no dark"));
}

TEST_CASE("dark_correct") {
  const std::vector<double> f{1e6, 2e6, 3e6};

  SUBCASE("closed-form point") {
    const auto out = dark_correct(flat(f, -6.5, "m"), flat(f, -10.0, "d"));
    const double expected = static_cast<double>(
        oracle::to_db(oracle::to_lin(-6.5L) - oracle::to_lin(-10.0L)));
    CHECK(expected == doctest::Approx(-9.07).epsilon(5e-4));
    for (double p : out.powers_db) CHECK(p == doctest::Approx(expected).epsilon(1e-13));
  }
  SUBCASE("equal measured and dark is flagged") {
    const auto m = Trace(f, {-5.0, -10.0, -5.0}, "m");
    const auto out = dark_correct(m, flat(f, -10.0, "d"));
    CHECK(out.valid == std::vector<bool>{true, false, true});
    CHECK(std::isnan(out.powers_db[1]));
    CHECK(out.invalid_count() == 1);
    CHECK(kind_of([&] { dark_correct(m, flat(f, -10.0, "d"), DegeneratePolicy::Error); }) ==
          ErrorKind::Empty);
  }
  SUBCASE("no dark noise is the identity") {
    const auto m = Trace(f, {-3.25, 1.5, 7.125}, "m");
    const auto out = dark_correct(m, flat(f, kNegInf, "d"));
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(out.powers_db[i] == m.powers()[i]);
  }
  SUBCASE("errors") {
    CHECK(kind_of([&] { dark_correct(flat(f, -10, "m"), flat(f, -5, "d")); }) == ErrorKind::Empty);
    CHECK(kind_of([&] {
            dark_correct(flat(f, 0, "m"), flat({1e6, 2e6, 3.1e6}, -10, "d"));
          }) == ErrorKind::Alignment);
  }
}

TEST_CASE("normalize_to_shot closed-form values") {
  const std::vector<double> f{1e6, 2e6};
  // Independent long-double evaluation of (L(m) − L(d)) / (L(s) − L(d)).
  const auto expected = [](long double m, long double d, long double s) {
    return static_cast<double>(oracle::to_db((oracle::to_lin(m) - oracle::to_lin(d)) /
                                             (oracle::to_lin(s) - oracle::to_lin(d))));
  };
  const auto a = normalize_to_shot(flat(f, -6.5, "m"), flat(f, 0.0, "s"), flat(f, -10.0, "d"));
  CHECK(std::abs(expected(-6.5, -10, 0) + 8.61) < 0.005);
  CHECK(a.rel_power_db[0] == doctest::Approx(expected(-6.5, -10, 0)).epsilon(1e-13));

  const auto b = normalize_to_shot(flat(f, -3.5, "m"), flat(f, 0.0, "s"), flat(f, -9.0, "d"));
  CHECK(std::abs(expected(-3.5, -9, 0) + 4.35) < 0.005);
  CHECK(b.rel_power_db[1] == doctest::Approx(expected(-3.5, -9, 0)).epsilon(1e-13));

  const auto c = normalize_to_shot(flat(f, -2.0, "m"), flat(f, -2.0, "s"), flat(f, -12.0, "d"));
  CHECK(c.rel_power_db[0] == 0.0);
  CHECK(c.correction.shot_dark_corrected);
  CHECK(c.correction.invalid_points == 0);
}

TEST_CASE("normalize_to_shot flags points at or below dark") {
  const std::vector<double> f{1e6, 2e6, 3e6};
  const auto out = normalize_to_shot(Trace(f, {-5, -12, -5}, "m"), flat(f, 0, "s"),
                                     flat(f, -10, "d"));
  CHECK(out.valid == std::vector<bool>{true, false, true});
  CHECK(out.correction.invalid_points == 1);
  CHECK(kind_of([&] {
          normalize_to_shot(flat(f, -12, "m"), flat(f, 0, "s"), flat(f, -10, "d"));
        }) == ErrorKind::Empty);
}

TEST_CASE("normalization properties on random traces") {
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> level(-20.0, 20.0);
  std::uniform_real_distribution<double> gap(0.5, 25.0);
  std::uniform_real_distribution<double> gain(-40.0, 40.0);

  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 16;
    std::vector<double> f(n), m(n), s(n), d(n);
    for (std::size_t i = 0; i < n; ++i) {
      f[i] = 1e6 * static_cast<double>(i + 1);
      d[i] = level(rng) - 60.0;
      s[i] = d[i] + gap(rng);
      m[i] = d[i] + gap(rng);
    }
    const Trace mt(f, m, "m"), st(f, s, "s"), dt(f, d, "d");
    const auto norm = normalize_to_shot(mt, st, dt);

    // Round trip through the inverse composition.
    const auto back = denormalize(norm, st, dt);
    for (std::size_t i = 0; i < n; ++i) {
      const double rel = std::abs(std::pow(10.0, back.powers()[i] / 10) /
                                      std::pow(10.0, m[i] / 10) -
                                  1.0);
      CHECK(rel < 1e-12);
    }

    // Common gain offset cancels.
    const double g = gain(rng);
    const auto shifted = normalize_to_shot(mt.offset(g), st.offset(g), dt.offset(g));
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(shifted.rel_power_db[i] - norm.rel_power_db[i]) < 1e-12);
    }

    // Strictly increasing in the measured power.
    const auto louder = normalize_to_shot(mt.offset(1e-3), st, dt);
    for (std::size_t i = 0; i < n; ++i) CHECK(louder.rel_power_db[i] > norm.rel_power_db[i]);
  }
}

TEST_CASE("resample") {
  const Trace t({1.0, 2.0, 4.0}, {-3.0, -5.0, -9.0}, "t");

  const auto same = resample(t, t.frequencies(), Interpolation::Linear);
  CHECK(same.label() == "t@linear");
  for (std::size_t i = 0; i < 3; ++i) CHECK(same.powers()[i] == t.powers()[i]);

  const std::vector<double> mid{1.5, 3.0};
  const auto lin = resample(t, mid, Interpolation::Linear);
  CHECK(lin.powers()[0] == doctest::Approx(-4.0));
  CHECK(lin.powers()[1] == doctest::Approx(-7.0));

  const std::vector<double> pts{2.0, 2.9, 3.1};
  const auto near = resample(t, pts, Interpolation::Nearest);
  CHECK(near.powers()[0] == -5.0);
  CHECK(near.powers()[1] == -5.0);
  CHECK(near.powers()[2] == -9.0);

  const std::vector<double> outside{0.5, 2.0};
  CHECK(kind_of([&] { resample(t, outside, Interpolation::Linear); }) == ErrorKind::Range);
}

TEST_CASE("clearance") {
  const std::vector<double> f{3e7, 1e9};
  const auto c = clearance(Trace(f, {0.0, 0.0}, "s"), Trace(f, {-10.0, -8.0}, "d"));
  CHECK(c.powers()[0] == 10.0);
  CHECK(c.powers()[1] == 8.0);
  CHECK(clearance(flat(f, -3, "s"), flat(f, -3, "d")).powers()[0] == 0.0);
  CHECK(kind_of([&] { clearance(flat(f, 0, "s"), flat({3e7, 2e9}, -8, "d")); }) ==
        ErrorKind::Alignment);
}
