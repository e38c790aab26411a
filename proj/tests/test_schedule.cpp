#include <doctest.h>

#include <cmath>

#include "diffpurify/schedule.hpp"

using namespace diffpurify;

TEST_CASE("linear-beta schedule satisfies its invariants") {
    auto s = make_schedule(100, ScheduleKind::LinearBeta);
    CHECK(s.sigma[0] == 1.0);
    CHECK(s.sigma[100] <= 1e-4);
    for (int t = 1; t <= 100; ++t) {
        CHECK(s.sigma[t] > 0.0);
        CHECK(s.sigma[t] <= s.sigma[t - 1]);
    }
}

TEST_CASE("cosine schedule with T=2 gives a 3-entry table") {
    auto s = make_schedule(2, ScheduleKind::Cosine);
    CHECK(s.sigma.size() == 3);
    CHECK(s.sigma[0] == 1.0);
    CHECK(s.sigma[2] <= 1e-4);
}

TEST_CASE("default linear-beta sigma matches a scalar product recurrence") {
    // Independent oracle: recompute the documented beta ramp and its product.
    const int T = 100;
    auto s = make_schedule(T, ScheduleKind::LinearBeta);
    double scale = 1000.0 / T;
    double b_lo = 1e-4 * scale, b_hi = 0.02 * scale;
    double prod = 1.0;
    for (int t = 1; t <= 50; ++t) {
        double b = b_lo + (b_hi - b_lo) * (t - 1) / static_cast<double>(T - 1);
        prod *= 1.0 - std::min(b, 0.999);
    }
    CHECK(s.sigma[50] == doctest::Approx(prod).epsilon(1e-14));
}

TEST_CASE("construction rejects bad arguments") {
    CHECK_THROWS(make_schedule(1, ScheduleKind::LinearBeta));
    CHECK_THROWS(schedule_kind_from_string("bogus"));
    CHECK_THROWS(make_schedule(10, ScheduleKind::LinearBeta, -0.1, 0.2));
}

TEST_CASE("terminal sigma is forced for flat ramps") {
    auto s = make_schedule(2, ScheduleKind::LinearBeta, 0.05, 0.05);
    CHECK(s.sigma[2] == 1e-4);
    CHECK(s.sigma[1] == doctest::Approx(0.95));
}

TEST_CASE("forward diffusion formula and edge cases") {
    auto s = make_schedule(10, ScheduleKind::LinearBeta);
    RngStream rng(3);
    State z = rng.gaussian_vec(5);

    SUBCASE("zero signal keeps only scaled noise") {
        State x(5, 0.0);
        State out = forward_diffuse(s, x, 4, z);
        double b = std::sqrt(1.0 - s.at(4));
        for (int i = 0; i < 5; ++i) CHECK(out[i] == doctest::Approx(b * z[i]).epsilon(1e-15));
    }

    SUBCASE("sigma equal to one returns the input exactly") {
        NoiseSchedule unit;
        unit.T = 2;
        unit.sigma = {1.0, 1.0, 1e-4};
        unit.validate();
        State x = rng.gaussian_vec(5);
        State out = forward_diffuse(unit, x, 1, z);
        for (int i = 0; i < 5; ++i) CHECK(out[i] == x[i]);
    }

    SUBCASE("adversarial decomposition matches the two-line oracle") {
        State x_ori = rng.gaussian_vec(5), phi = rng.gaussian_vec(5);
        State x = x_ori + phi;
        int t = 6;
        State out = forward_diffuse(s, x, t, z);
        double a = std::sqrt(s.at(t)), b = std::sqrt(1.0 - s.at(t));
        for (int i = 0; i < 5; ++i)
            CHECK(out[i] == doctest::Approx(a * (x_ori[i] + phi[i]) + b * z[i]).epsilon(1e-15));
    }

    SUBCASE("errors") {
        State x(5, 0.0), bad(4, 0.0);
        CHECK_THROWS(forward_diffuse(s, x, 0, z));
        CHECK_THROWS(forward_diffuse(s, x, 11, z));
        CHECK_THROWS(forward_diffuse(s, bad, 3, z));
    }
}

TEST_CASE("forward diffusion is linear in state and noise") {
    auto s = make_schedule(20, ScheduleKind::LinearBeta);
    RngStream rng(9);
    for (int rep = 0; rep < 20; ++rep) {
        State x1 = rng.gaussian_vec(6), x2 = rng.gaussian_vec(6);
        State n1 = rng.gaussian_vec(6), n2 = rng.gaussian_vec(6);
        double a = rng.uniform(-2, 2), b = rng.uniform(-2, 2);
        int t = 1 + static_cast<int>(rng.uniform_index(20));
        State lhs_x(6), lhs_n(6);
        for (int i = 0; i < 6; ++i) {
            lhs_x[i] = a * x1[i] + b * x2[i];
            lhs_n[i] = a * n1[i] + b * n2[i];
        }
        State lhs = forward_diffuse(s, lhs_x, t, lhs_n);
        State f1 = forward_diffuse(s, x1, t, n1), f2 = forward_diffuse(s, x2, t, n2);
        for (int i = 0; i < 6; ++i)
            CHECK(lhs[i] == doctest::Approx(a * f1[i] + b * f2[i]).epsilon(1e-12));
    }
}

TEST_CASE("Monte-Carlo mean of the forward process matches sqrt(sigma)*mu") {
    auto s = make_schedule(50, ScheduleKind::LinearBeta);
    int t = 20;
    const int N = 100000;
    State mu = {0.7, -1.2};
    State var = {0.5, 1.5};
    RngStream rng(42);
    State sum(2, 0.0);
    for (int i = 0; i < N; ++i) {
        State x = {mu[0] + std::sqrt(var[0]) * rng.gaussian(),
                   mu[1] + std::sqrt(var[1]) * rng.gaussian()};
        State z = rng.gaussian_vec(2);
        State out = forward_diffuse(s, x, t, z);
        sum[0] += out[0];
        sum[1] += out[1];
    }
    double sg = s.at(t);
    for (int i = 0; i < 2; ++i) {
        double mean = sum[i] / N;
        double se = std::sqrt((sg * var[i] + (1.0 - sg)) / N);
        CHECK(std::abs(mean - std::sqrt(sg) * mu[i]) < 4.0 * se);
    }
}
