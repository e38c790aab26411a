#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "diffpurify/sampler.hpp"

using namespace diffpurify;

namespace {

NoiseSchedule handmade(std::vector<double> sigma) {
    NoiseSchedule s;
    s.T = static_cast<int>(sigma.size()) - 1;
    s.sigma = std::move(sigma);
    s.validate();
    return s;
}

// One-sided permutation test on the energy statistic for two 1-D samples,
// using a single sort plus O(N) label passes per permutation.
double energy_pvalue_1d(const std::vector<double>& xs, const std::vector<double>& ys,
                        int permutations, std::uint64_t seed) {
    std::size_t n = xs.size(), m = ys.size();
    std::vector<std::pair<double, int>> pool;
    pool.reserve(n + m);
    for (double v : xs) pool.emplace_back(v, 0);
    for (double v : ys) pool.emplace_back(v, 1);
    std::sort(pool.begin(), pool.end());

    std::vector<double> values(n + m);
    std::vector<int> labels(n + m);
    for (std::size_t i = 0; i < pool.size(); ++i) {
        values[i] = pool[i].first;
        labels[i] = pool[i].second;
    }

    auto energy = [&](const std::vector<int>& lab) {
        double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
        long cx = 0, cy = 0;
        for (std::size_t i = 0; i < values.size(); ++i) {
            double v = values[i];
            if (lab[i] == 0) {
                sxx += v * cx - sx;
                sxy += v * cy - sy;
                ++cx;
                sx += v;
            } else {
                syy += v * cy - sy;
                sxy += v * cx - sx;
                ++cy;
                sy += v;
            }
        }
        double a = sxy / (static_cast<double>(n) * m);
        double b = 2.0 * sxx / (static_cast<double>(n) * n);
        double c = 2.0 * syy / (static_cast<double>(m) * m);
        return 2.0 * a - b - c;
    };

    double observed = energy(labels);
    RngStream rng(seed);
    int ge = 0;
    std::vector<int> perm = labels;
    for (int p = 0; p < permutations; ++p) {
        std::shuffle(perm.begin(), perm.end(), rng.engine());
        if (energy(perm) >= observed) ++ge;
    }
    return (1.0 + ge) / (permutations + 1.0);
}

}  // namespace

TEST_CASE("denoised estimate") {
    SUBCASE("full signal returns the input") {
        auto s = handmade({1.0, 1.0, 1e-4});
        GmmScoreModel model({{1.0, {0.4, -0.4}, {1.0, 1.0}}}, s);
        State x = {2.0, -3.0};
        CHECK(tweedie_estimate(model, s, x, 1) == x);
    }
    SUBCASE("standard normal data at half signal matches the posterior mean") {
        auto s = handmade({1.0, 0.5, 1e-4});
        GmmScoreModel model({{1.0, {0.0, 0.0}, {1.0, 1.0}}}, s);
        State x = {0.7, -1.1};
        State est = tweedie_estimate(model, s, x, 1);
        // E[x0 | x_t] = sqrt(sigma) x_t for unit-variance data
        for (int i = 0; i < 2; ++i)
            CHECK(est[i] == doctest::Approx(std::sqrt(0.5) * x[i]).epsilon(1e-12));
    }
    SUBCASE("an independent one-liner via the eps-form agrees") {
        auto s = make_schedule(30, ScheduleKind::LinearBeta);
        GmmScoreModel model({{1.0, {0.3, 0.9}, {0.7, 1.4}}}, s);
        RngStream rng(3);
        State x = rng.gaussian_vec(2);
        int t = 11;
        State est = tweedie_estimate(model, s, x, t);
        double sg = s.at(t);
        State sc = model.score(x, t);
        for (int i = 0; i < 2; ++i) {
            double eps_hat = -std::sqrt(1.0 - sg) * sc[i];
            double oracle = (x[i] - std::sqrt(1.0 - sg) * eps_hat) / std::sqrt(sg);
            CHECK(est[i] == doctest::Approx(oracle).epsilon(1e-12));
        }
    }
    SUBCASE("arbitrary single Gaussian matches the closed-form posterior mean to 1e-9") {
        auto s = make_schedule(60, ScheduleKind::LinearBeta);
        State mu = {1.2, -0.7, 0.3};
        State cv = {0.25, 0.5, 1.5};
        GmmScoreModel model({{1.0, mu, cv}}, s);
        RngStream rng(8);
        for (int t : {1, 15, 33, 60}) {
            State x = rng.gaussian_vec(3);
            State est = tweedie_estimate(model, s, x, t);
            double sg = s.at(t);
            for (int i = 0; i < 3; ++i) {
                double var = sg * cv[i] + (1.0 - sg);
                double post = mu[i] + std::sqrt(sg) * cv[i] * (x[i] - std::sqrt(sg) * mu[i]) / var;
                CHECK(std::abs(est[i] - post) <= 1e-9);
            }
        }
    }
}

TEST_CASE("reverse step") {
    auto s = make_schedule(10, ScheduleKind::LinearBeta);
    GmmScoreModel model({{1.0, {0.0, 0.0}, {1.0, 1.0}}}, s);
    SUBCASE("t=1 adds no noise") {
        State x = {0.5, -0.5};
        RngStream r1(1), r2(999);
        CHECK(reverse_step(model, s, x, 1, r1) == reverse_step(model, s, x, 1, r2));
    }
    SUBCASE("fixed seed gives a bit-identical trajectory") {
        auto a = sample_unconditional(model, s, 77);
        auto b = sample_unconditional(model, s, 77);
        REQUIRE(a.states.size() == b.states.size());
        for (std::size_t i = 0; i < a.states.size(); ++i) CHECK(a.states[i].x == b.states[i].x);
    }
    SUBCASE("t out of range throws") {
        RngStream r(1);
        CHECK_THROWS(reverse_step(model, s, {0.0, 0.0}, 0, r));
        CHECK_THROWS(reverse_step(model, s, {0.0, 0.0}, 11, r));
    }
}

TEST_CASE("unconditional sampling") {
    SUBCASE("T=2 records exactly 3 states") {
        auto s = make_schedule(2, ScheduleKind::LinearBeta);
        GmmScoreModel model({{1.0, {0.0}, {1.0}}}, s);
        auto traj = sample_unconditional(model, s, 5);
        CHECK(traj.states.size() == 3);
        CHECK(traj.states.front().t == 2);
        CHECK(traj.states.back().t == 0);
    }
    SUBCASE("identical models give identical trajectories") {
        auto s = make_schedule(12, ScheduleKind::LinearBeta);
        GmmScoreModel m1({{1.0, {0.2, 0.4}, {1.0, 1.0}}}, s);
        GmmScoreModel m2({{1.0, {0.2, 0.4}, {1.0, 1.0}}}, s);
        auto a = sample_unconditional(m1, s, 31);
        auto b = sample_unconditional(m2, s, 31);
        CHECK(a.x0() == b.x0());
    }
    SUBCASE("recorded estimates reproduce from the states") {
        auto s = make_schedule(8, ScheduleKind::LinearBeta);
        GmmScoreModel model({{1.0, {0.1, -0.1}, {0.5, 0.5}}}, s);
        auto traj = sample_unconditional(model, s, 13);
        for (const auto& rec : traj.states) {
            if (rec.t == 0) continue;
            CHECK(tweedie_estimate(model, s, rec.x, rec.t) == rec.x_hat);
        }
    }
    SUBCASE("single-Gaussian moments recover over many runs") {
        auto s = make_schedule(100, ScheduleKind::LinearBeta);
        State mu = {1.2, -0.7};
        GmmScoreModel model({{1.0, mu, {1.0, 1.0}}}, s);
        const int N = 2000;
        State sum(2, 0.0), sq(2, 0.0);
        double cross = 0.0;
        for (int i = 0; i < N; ++i) {
            State x0 = sample_unconditional(model, s, derive_seed(2024, "moments", i)).x0();
            for (int d = 0; d < 2; ++d) {
                sum[d] += x0[d];
                sq[d] += x0[d] * x0[d];
            }
            cross += x0[0] * x0[1];
        }
        for (int d = 0; d < 2; ++d) {
            double mean = sum[d] / N;
            CHECK(std::abs(mean - mu[d]) < 4.0 / std::sqrt(N));
            double var = sq[d] / N - mean * mean;
            CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / N));
        }
        double cov = cross / N - (sum[0] / N) * (sum[1] / N);
        CHECK(std::abs(cov) < 4.0 / std::sqrt(N));
    }
}

TEST_CASE("mixture weights recovered by component assignment") {
    auto s = make_schedule(100, ScheduleKind::LinearBeta);
    std::vector<GmmComponent> comps = {
        {0.5, {-6.0}, {1.0}},
        {0.3, {0.0}, {1.0}},
        {0.2, {6.0}, {1.0}},
    };
    GmmScoreModel model(comps, s);
    const int N = 10000;
    std::vector<long> counts(3, 0);
    for (int i = 0; i < N; ++i) {
        double x = sample_unconditional(model, s, derive_seed(7, "hist", i)).x0()[0];
        std::size_t best = 0;
        for (std::size_t k = 1; k < comps.size(); ++k)
            if (std::abs(x - comps[k].mean[0]) < std::abs(x - comps[best].mean[0])) best = k;
        ++counts[best];
    }
    CHECK(std::abs(counts[0] / double(N) - 0.5) < 0.03);
    CHECK(std::abs(counts[1] / double(N) - 0.3) < 0.03);
    CHECK(std::abs(counts[2] / double(N) - 0.2) < 0.03);
}

TEST_CASE("terminal samples pass a two-sample energy test against direct draws") {
    auto s = make_schedule(200, ScheduleKind::LinearBeta);
    std::vector<GmmComponent> comps = {
        {0.5, {-4.0}, {1.0}},
        {0.3, {0.0}, {1.0}},
        {0.2, {4.0}, {1.0}},
    };
    GmmScoreModel model(comps, s);
    const int N = 10000;
    std::vector<double> sampled(N), direct(N);
    for (int i = 0; i < N; ++i)
        sampled[i] = sample_unconditional(model, s, derive_seed(99, "energy", i)).x0()[0];
    RngStream rng(1234);
    for (int i = 0; i < N; ++i) {
        double u = rng.uniform(0.0, 1.0);
        std::size_t k = u < 0.5 ? 0 : (u < 0.8 ? 1 : 2);
        direct[i] = comps[k].mean[0] + rng.gaussian();
    }
    double p = energy_pvalue_1d(sampled, direct, 999, 555);
    CHECK(p > 0.01);
}
