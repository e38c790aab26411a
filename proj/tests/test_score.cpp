#include <doctest.h>

#include <cmath>

#include "diffpurify/score.hpp"

using namespace diffpurify;

namespace {

NoiseSchedule unit_schedule() {
    NoiseSchedule s;
    s.T = 2;
    s.sigma = {1.0, 1.0, 1e-4};
    s.validate();
    return s;
}

GmmScoreModel three_component_model(const NoiseSchedule& sched) {
    std::vector<GmmComponent> comps = {
        {0.5, {1.0, -0.5, 0.2}, {0.6, 1.1, 0.4}},
        {0.3, {-1.2, 0.8, -0.1}, {0.9, 0.5, 1.3}},
        {0.2, {0.1, 2.0, 1.5}, {1.2, 0.8, 0.7}},
    };
    return GmmScoreModel(comps, sched);
}

}  // namespace

TEST_CASE("standard normal score at full signal is -x") {
    auto sched = unit_schedule();
    GmmScoreModel model({{1.0, {0.0, 0.0}, {1.0, 1.0}}}, sched);
    State x = {0.3, -1.7};
    State s = model.score(x, 1);
    CHECK(s[0] == doctest::Approx(-x[0]).epsilon(1e-14));
    CHECK(s[1] == doctest::Approx(-x[1]).epsilon(1e-14));
}

TEST_CASE("single unit-covariance component has the closed-form score at any t") {
    auto sched = make_schedule(40, ScheduleKind::LinearBeta);
    State mu = {0.8, -0.4, 1.1};
    GmmScoreModel model({{1.0, mu, {1.0, 1.0, 1.0}}}, sched);
    RngStream rng(4);
    for (int t : {1, 7, 20, 40}) {
        State x = rng.gaussian_vec(3);
        State s = model.score(x, t);
        double rs = std::sqrt(sched.at(t));
        // marginal variance is sigma*1 + (1-sigma) = 1
        for (int i = 0; i < 3; ++i)
            CHECK(s[i] == doctest::Approx(-(x[i] - rs * mu[i])).epsilon(1e-12));
    }
}

TEST_CASE("mixture score matches finite differences of the log density") {
    auto sched = make_schedule(30, ScheduleKind::LinearBeta);
    auto model = three_component_model(sched);
    RngStream rng(6);
    for (int rep = 0; rep < 5; ++rep) {
        State x = rng.gaussian_vec(3);
        int t = 1 + static_cast<int>(rng.uniform_index(30));
        State s = model.score(x, t);
        for (int i = 0; i < 3; ++i) {
            double h = std::sqrt(1e-16) * (1.0 + std::abs(x[i]));
            State xp = x, xm = x;
            xp[i] += h;
            xm[i] -= h;
            double fd = (model.log_density(xp, t) - model.log_density(xm, t)) / (2 * h);
            CHECK(s[i] == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("score vjp") {
    auto sched = make_schedule(30, ScheduleKind::LinearBeta);

    SUBCASE("standard normal at full signal has J = -I") {
        auto unit = unit_schedule();
        GmmScoreModel model({{1.0, {0.0, 0.0}, {1.0, 1.0}}}, unit);
        State v = {0.4, -2.0};
        State jv = model.score_vjp({0.9, 0.1}, 1, v);
        CHECK(jv[0] == doctest::Approx(-v[0]).epsilon(1e-13));
        CHECK(jv[1] == doctest::Approx(-v[1]).epsilon(1e-13));
    }

    SUBCASE("vjp rows match finite-difference Jacobian rows") {
        auto model = three_component_model(sched);
        RngStream rng(13);
        State x = rng.gaussian_vec(3);
        int t = 9;
        for (int i = 0; i < 3; ++i) {
            State e(3, 0.0);
            e[i] = 1.0;
            State row = model.score_vjp(x, t, e);
            for (int j = 0; j < 3; ++j) {
                double h = 1e-6 * (1.0 + std::abs(x[j]));
                State xp = x, xm = x;
                xp[j] += h;
                xm[j] -= h;
                double fd = (model.score(xp, t)[i] - model.score(xm, t)[i]) / (2 * h);
                CHECK(row[j] == doctest::Approx(fd).epsilon(1e-5));
            }
        }
    }

    SUBCASE("vjp of zero is zero and vjp is linear") {
        auto model = three_component_model(sched);
        RngStream rng(14);
        State x = rng.gaussian_vec(3);
        CHECK(model.score_vjp(x, 5, State(3, 0.0)) == State(3, 0.0));
        State v1 = rng.gaussian_vec(3), v2 = rng.gaussian_vec(3);
        double a = 1.3, b = -0.6;
        State mix(3);
        for (int i = 0; i < 3; ++i) mix[i] = a * v1[i] + b * v2[i];
        State lhs = model.score_vjp(x, 5, mix);
        State r1 = model.score_vjp(x, 5, v1), r2 = model.score_vjp(x, 5, v2);
        for (int i = 0; i < 3; ++i)
            CHECK(lhs[i] == doctest::Approx(a * r1[i] + b * r2[i]).epsilon(1e-12));
    }

    SUBCASE("far-field evaluation stays finite") {
        auto model = three_component_model(sched);
        State x = {1e8, -1e8, 5e7};
        State jv = model.score_vjp(x, 3, State{1.0, -1.0, 1.0});
        CHECK(all_finite(jv));
    }
}

TEST_CASE("score model rejects non-finite input") {
    auto sched = make_schedule(10, ScheduleKind::LinearBeta);
    GmmScoreModel model({{1.0, {0.0}, {1.0}}}, sched);
    State bad = {std::numeric_limits<double>::quiet_NaN()};
    CHECK_THROWS(model.score(bad, 1));
}

TEST_CASE("gmm construction validates weights and covariances") {
    auto sched = make_schedule(10, ScheduleKind::LinearBeta);
    CHECK_THROWS(GmmScoreModel({{0.5, {0.0}, {1.0}}}, sched));            // weights != 1
    CHECK_THROWS(GmmScoreModel({{1.0, {0.0}, {0.0}}}, sched));            // zero covariance
    CHECK_THROWS(GmmScoreModel({{0.5, {0.0}, {1.0}}, {0.5, {0.0, 1.0}, {1.0, 1.0}}}, sched));
}

TEST_CASE("net score training") {
    auto sched = make_schedule(50, ScheduleKind::LinearBeta);

    SUBCASE("zero epochs returns the initialization") {
        std::vector<State> data(8, State{0.5, -0.5});
        ScoreTrainConfig cfg;
        cfg.epochs = 0;
        cfg.hidden = {16};
        cfg.seed = 3;
        NetScoreModel trained = train_net_score(data, sched, cfg);
        NetScoreModel fresh(2, {16}, sched, derive_seed(3, "score-init"));
        CHECK(trained.net().flatten() == fresh.net().flatten());
    }

    SUBCASE("training is deterministic given a seed") {
        RngStream rng(5);
        std::vector<State> data;
        for (int i = 0; i < 64; ++i) data.push_back(rng.gaussian_vec(2));
        ScoreTrainConfig cfg;
        cfg.epochs = 3;
        cfg.hidden = {16};
        cfg.seed = 9;
        auto a = train_net_score(data, sched, cfg).net().flatten();
        auto b = train_net_score(data, sched, cfg).net().flatten();
        CHECK(a == b);
    }

    SUBCASE("empty dataset is rejected") {
        CHECK_THROWS(train_net_score({}, sched, ScoreTrainConfig{}));
    }

    SUBCASE("a trained score improves the held-out denoising loss by 10x") {
        RngStream rng(7);
        std::vector<State> data;
        for (int i = 0; i < 512; ++i) {
            double cls = rng.uniform_index(2) ? 1.0 : -1.0;
            data.push_back({1.5 * cls + 0.1 * rng.gaussian(), 1.0 * cls + 0.1 * rng.gaussian()});
        }
        auto ddpm = make_schedule(100, ScheduleKind::LinearBeta);
        ScoreTrainConfig cfg;
        cfg.epochs = 80;
        cfg.hidden = {64, 64};
        cfg.lr = 3e-3;
        cfg.seed = 21;
        ScoreTrainReport rep;
        NetScoreModel model = train_net_score(data, ddpm, cfg, &rep);
        CHECK(rep.final_loss * 10.0 <= rep.initial_loss);
    }

    SUBCASE("single repeated point: the learned field points at it") {
        std::vector<State> data(96, State{0.8, -0.6, 0.4, 0.2});
        auto flat = make_schedule(50, ScheduleKind::LinearBeta, 0.028, 0.028);
        ScoreTrainConfig cfg;
        cfg.epochs = 150;
        cfg.hidden = {48};
        cfg.lr = 3e-3;
        cfg.seed = 4;
        NetScoreModel model = train_net_score(data, flat, cfg);
        RngStream rng(15);
        const State& p = data[0];
        int good = 0, total = 0;
        for (int rep = 0; rep < 200; ++rep) {
            // probes on a shell around the point, clear of the exact center
            State dir = rng.gaussian_vec(4);
            double r = 0.5 + rng.uniform(0.0, 1.0);
            double norm = l2_norm(dir);
            State x(4);
            for (int i = 0; i < 4; ++i) x[i] = p[i] + r * dir[i] / norm;
            State s = model.score(x, 4);
            ++total;
            if (dot(s, p - x) > 0.0) ++good;
        }
        CHECK(good >= 0.99 * total);
    }

    SUBCASE("standard normal data gives score close to -x at full signal") {
        RngStream rng(19);
        std::vector<State> data;
        for (int i = 0; i < 512; ++i) data.push_back(rng.gaussian_vec(2));
        ScoreTrainConfig cfg;
        cfg.epochs = 60;
        cfg.hidden = {64};
        cfg.lr = 3e-3;
        cfg.seed = 6;
        NetScoreModel model = train_net_score(data, sched, cfg);
        double cos_sum = 0.0;
        int probes = 0;
        for (int rep = 0; rep < 100; ++rep) {
            State x = rng.gaussian_vec(2);
            State s = model.score(x, 0);  // sigma(0) = 1
            State target = scaled(x, -1.0);
            double denom = l2_norm(s) * l2_norm(target);
            if (denom > 1e-12) {
                cos_sum += dot(s, target) / denom;
                ++probes;
            }
        }
        CHECK(cos_sum / probes >= 0.95);
    }
}

TEST_CASE("net score vjp is reverse-pass exact") {
    auto sched = make_schedule(20, ScheduleKind::LinearBeta);
    NetScoreModel model(3, {24}, sched, 77);
    RngStream rng(21);
    State x = rng.gaussian_vec(3), v = rng.gaussian_vec(3);
    State jv = model.score_vjp(x, 5, v);
    for (int i = 0; i < 3; ++i) {
        double h = 1e-6;
        State xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double fd = (dot(model.score(xp, 5), v) - dot(model.score(xm, 5), v)) / (2 * h);
        CHECK(jv[i] == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("net score save/load round trip") {
    auto sched = make_schedule(12, ScheduleKind::LinearBeta);
    NetScoreModel model(4, {16, 8}, sched, 55);
    std::string path = "net_score_roundtrip.bin";
    model.save(path);
    NetScoreModel back = NetScoreModel::load(path);
    CHECK(back.net().flatten() == model.net().flatten());
    State x = {0.1, -0.2, 0.3, 0.4};
    CHECK(back.score(x, 7) == model.score(x, 7));
    std::remove(path.c_str());
}
