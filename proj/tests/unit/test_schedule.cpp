#include "aidi/error.hpp"
#include "aidi/schedule.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>
#include <fstream>

using namespace aidi;

TEST_CASE("build_schedule: single and equal factors") {
    const auto one = build_schedule(1, 0.5, 0.5);
    CHECK(one.big_t() == 1);
    CHECK(one.alpha_bar(0) == 1.0);
    CHECK(one.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-15));

    const auto two = build_schedule(2, 0.5, 0.5);
    CHECK(two.alpha_bar(0) == 1.0);
    CHECK(two.alpha_bar(1) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(two.alpha_bar(2) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("build_schedule: default scaled-linear schedule matches a direct product") {
    const auto s = build_schedule(1000, 0.00085, 0.012);
    // Independent evaluation: product of (1 - beta_s) with beta_s from a
    // linspace in sqrt-space, accumulated in long double.
    long double prod = 1.0L;
    const long double lo = std::sqrt(0.00085L), hi = std::sqrt(0.012L);
    for (int s_idx = 0; s_idx < 1000; ++s_idx) {
        const long double r = lo + (hi - lo) * s_idx / 999.0L;
        prod *= 1.0L - r * r;
    }
    CHECK(s.alpha_bar(1000) == doctest::Approx(static_cast<double>(prod)).epsilon(1e-12));
    CHECK(s.alpha_bar(1000) > 0.0);
    CHECK(s.alpha_bar(1000) < 0.01);
    for (int t = 1; t <= 1000; ++t) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(std::isfinite(std::sqrt(s.alpha_bar(t))));
        CHECK(std::isfinite(std::sqrt(1.0 - s.alpha_bar(t))));
    }
}

TEST_CASE("build_schedule rejects bad parameters") {
    CHECK_THROWS_AS(build_schedule(0, 0.1, 0.2), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.0, 0.2), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.3, 0.2), ConfigError);
    CHECK_THROWS_AS(build_schedule(10, 0.1, 1.0), ConfigError);
}

TEST_CASE("explicit schedules validate their invariants") {
    CHECK_NOTHROW(testutil::explicit_schedule({1.0, 0.5}));  // abar_1 <= abar_0 is allowed
    CHECK_THROWS_AS(NoiseSchedule({0.9, 0.5}), ConfigError);
    CHECK_THROWS_AS(testutil::explicit_schedule({0.5, 0.5}), ConfigError);
    CHECK_THROWS_AS(testutil::explicit_schedule({0.5, 0.0}), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.25}, {2, 1}), ConfigError);
    CHECK_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.25}, {1, 3}), ConfigError);
}

TEST_CASE("subsample: uniform stride ending at T") {
    const auto base = build_schedule();
    const auto one = subsample(base, 1);
    REQUIRE(one.n_steps() == 1);
    CHECK(one.timesteps()[0] == 1000);

    const auto ten = subsample(build_schedule(10, 0.01, 0.02), 5);
    CHECK(std::vector<int>(ten.timesteps().begin(), ten.timesteps().end()) == std::vector<int>{2, 4, 6, 8, 10});

    const auto twenty = subsample(base, 20);
    std::vector<int> expected;
    for (int t = 50; t <= 1000; t += 50) expected.push_back(t);
    CHECK(std::vector<int>(twenty.timesteps().begin(), twenty.timesteps().end()) == expected);

    const auto thirty = subsample(base, 30);  // stride 33, does not divide T
    CHECK(thirty.n_steps() == 30);
    CHECK(thirty.timesteps().back() == 1000);
    for (std::size_t i = 1; i < thirty.n_steps(); ++i) CHECK(thirty.timesteps()[i] - thirty.timesteps()[i - 1] == 33);

    CHECK_THROWS_AS(subsample(base, 0), ConfigError);
    CHECK_THROWS_AS(subsample(base, 1001), ConfigError);
}

TEST_CASE("subsample is idempotent and keeps abar decreasing along the grid") {
    const auto base = build_schedule();
    for (int n : {1, 7, 10, 20, 50, 333, 1000}) {
        CAPTURE(n);
        const auto once = subsample(base, n);
        const auto twice = subsample(once, n);
        CHECK(std::vector<int>(once.timesteps().begin(), once.timesteps().end()) ==
              std::vector<int>(twice.timesteps().begin(), twice.timesteps().end()));
        for (std::size_t i = 1; i < once.n_steps(); ++i)
            CHECK(once.alpha_bar(once.timesteps()[i]) < once.alpha_bar(once.timesteps()[i - 1]));
        CHECK(once.previous(0) == 0);
    }
}

TEST_CASE("ddim_variance keeps the stochastic square-root argument nonnegative") {
    const auto s = subsample(build_schedule(), 20);
    for (std::size_t i = 0; i < s.n_steps(); ++i) {
        const int t = s.timesteps()[i], tp = s.previous(i);
        const double var = s.ddim_variance(t, tp);
        CHECK(var >= 0.0);
        CHECK(1.0 - s.alpha_bar(tp) - var >= 0.0);
    }
    CHECK(s.ddim_variance(50, 0) == 0.0);  // abar_prev = 1
}

TEST_CASE("alpha-bar file round trip is bit-exact") {
    const auto s = build_schedule(50, 0.001, 0.02);
    const auto path = testutil::temp_path("schedule.txt");
    save_alpha_bar_file(s, path);
    const auto back = load_alpha_bar_file(path);
    REQUIRE(back.big_t() == 50);
    for (int t = 0; t <= 50; ++t) CHECK(back.alpha_bar(t) == s.alpha_bar(t));

    std::ofstream(path) << "# comment\n0.9\n\n0.8 # trailing\n";
    const auto small = load_alpha_bar_file(path);
    CHECK(small.big_t() == 2);
    CHECK(small.alpha_bar(2) == 0.8);

    std::ofstream(path) << "0.9\nabc\n";
    CHECK_THROWS_AS(load_alpha_bar_file(path), IoError);
    std::ofstream(path) << "0.9 0.8\n";
    CHECK_THROWS_AS(load_alpha_bar_file(path), IoError);
}
