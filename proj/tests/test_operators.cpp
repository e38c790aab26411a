#include <doctest.h>

#include <cmath>

#include "diffpurify/operators.hpp"

using namespace diffpurify;

TEST_CASE("sign_vec basics and the tie rule") {
    CHECK(sign_vec({3.2, -0.1}) == State{1.0, -1.0});
    CHECK(sign_vec({0.0}) == State{0.0});
}

TEST_CASE("sign_vec matches finite differences of the l1 norm away from kinks") {
    RngStream rng(5);
    State x = rng.gaussian_vec(64);
    State s = sign_vec(x);
    const double h = 1e-7;
    for (int i = 0; i < 64; ++i) {
        if (std::abs(x[i]) <= 1e-3) continue;
        State xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        double fd = (l1_norm(xp) - l1_norm(xm)) / (2 * h);
        CHECK(fd == doctest::Approx(s[i]).epsilon(1e-6));
    }
}

TEST_CASE("min_abs") {
    CHECK(min_abs({-3.0, 0.5, 2.0}) == 0.5);
    CHECK(min_abs({-1.5, -1.5, -1.5}) == 1.5);
    CHECK_THROWS(min_abs({}));

    RngStream rng(8);
    State x = rng.gaussian_vec(1000);
    double scan = std::abs(x[0]);
    for (double v : x) scan = std::min(scan, std::abs(v));
    CHECK(min_abs(x) == scan);
}

TEST_CASE("l1 and l2 distance gradients") {
    RngStream rng(11);
    State a = rng.gaussian_vec(16), b = rng.gaussian_vec(16);
    CHECK(l1_grad(a, a) == State(16, 0.0));
    CHECK(l2_grad(a, a) == State(16, 0.0));
    CHECK_THROWS(l1_grad(a, State(3, 0.0)));

    State all_pos(16, 2.0), zero(16, 0.0);
    CHECK(l1_grad(all_pos, zero) == State(16, 1.0));

    // phi shows up doubled in the squared-distance gradient
    State phi = rng.gaussian_vec(16);
    State g = l2_grad(a + phi, a);
    for (int i = 0; i < 16; ++i) CHECK(g[i] == doctest::Approx(2.0 * phi[i]).epsilon(1e-14));

    // finite differences of the squared distance
    auto d2 = [&](const State& u) {
        double acc = 0;
        for (int i = 0; i < 16; ++i) acc += (u[i] - b[i]) * (u[i] - b[i]);
        return acc;
    };
    State ga = l2_grad(a, b);
    for (int i = 0; i < 16; ++i) {
        State ap = a, am = a;
        double h = 1e-6 * (1.0 + std::abs(a[i]));
        ap[i] += h;
        am[i] -= h;
        double fd = (d2(ap) - d2(am)) / (2 * h);
        CHECK(fd == doctest::Approx(ga[i]).epsilon(1e-7));
    }
}

TEST_CASE("bicubic upsampling reproduces constants and cubics") {
    GridShape shape{8, 32, 1};
    SUBCASE("constant image stays constant") {
        State x(shape.size(), 0.37);
        State up = bicubic_up4(x, shape);
        for (double v : up) CHECK(v == doctest::Approx(0.37).epsilon(1e-14));
    }
    SUBCASE("cubic polynomial is reproduced at interior sites") {
        auto f = [](double u) { return 0.31 * u * u * u - 0.52 * u * u + 0.11 * u + 0.7; };
        State x(shape.size());
        for (int r = 0; r < shape.height; ++r)
            for (int c = 0; c < shape.width; ++c)
                x[static_cast<std::size_t>(r) * shape.width + c] = f(0.2 * c);
        State up = bicubic_up4(x, shape);
        int w4 = 4 * shape.width;
        for (int j = 0; j < w4; ++j) {
            int base = j / 4;
            if (base < 2 || base > shape.width - 4) continue;  // stencil must avoid clamped edges
            double expect = f(0.2 * (j / 4.0));
            CHECK(std::abs(up[static_cast<std::size_t>(16) * w4 + j] - expect) <= 1e-9);
        }
    }
    SUBCASE("2x2 input maps to 8x8 output") {
        GridShape tiny{2, 2, 1};
        State x = {1.0, 2.0, 3.0, 4.0};
        CHECK(bicubic_up4(x, tiny).size() == 64);
    }
    SUBCASE("shape errors") {
        CHECK_THROWS(bicubic_up4(State(10, 0.0), shape));
        CHECK_THROWS(bicubic_up4(State(3, 0.0), GridShape{1, 3, 1}));
    }
}

TEST_CASE("bicubic upsampling is linear") {
    GridShape shape{6, 6, 1};
    RngStream rng(2);
    State x = rng.gaussian_vec(36), y = rng.gaussian_vec(36);
    double a = 1.7, b = -0.4;
    State mix(36);
    for (int i = 0; i < 36; ++i) mix[i] = a * x[i] + b * y[i];
    State lhs = bicubic_up4(mix, shape);
    State ux = bicubic_up4(x, shape), uy = bicubic_up4(y, shape);
    for (std::size_t i = 0; i < lhs.size(); ++i)
        CHECK(lhs[i] == doctest::Approx(a * ux[i] + b * uy[i]).epsilon(1e-12));
}

TEST_CASE("bicubic adjoint identity and dense rows") {
    GridShape shape{8, 8, 1};
    RngStream rng(17);
    SUBCASE("inner products agree on random pairs") {
        for (int rep = 0; rep < 50; ++rep) {
            State x = rng.gaussian_vec(shape.size());
            State v = rng.gaussian_vec(shape.size() * 16);
            double lhs = dot(bicubic_up4(x, shape), v);
            double rhs = dot(x, bicubic_vjp(v, shape));
            CHECK(std::abs(lhs - rhs) <= 1e-10);
        }
    }
    SUBCASE("zero cotangent gives zero") {
        CHECK(bicubic_vjp(State(shape.size() * 16, 0.0), shape) == State(shape.size(), 0.0));
    }
    SUBCASE("one-hot cotangents recover rows of the dense matrix") {
        auto dense = bicubic_dense_matrix(shape);
        for (std::size_t k : {std::size_t{0}, std::size_t{137}, std::size_t{512}, std::size_t{1023}}) {
            State e(shape.size() * 16, 0.0);
            e[k] = 1.0;
            State row = bicubic_vjp(e, shape);
            for (std::size_t j = 0; j < row.size(); ++j)
                CHECK(row[j] == doctest::Approx(dense[k][j]).epsilon(1e-14));
        }
    }
}

TEST_CASE("nonlinear lift") {
    SUBCASE("zero maps to zero") {
        CHECK(nonlinear_lift(State(4, 0.0)) == State(12, 0.0));
    }
    SUBCASE("lifting never shrinks the l1 distance") {
        RngStream rng(23);
        for (int rep = 0; rep < 100000; ++rep) {
            State a = rng.gaussian_vec(4), b = rng.gaussian_vec(4);
            CHECK(l1_norm(nonlinear_lift(a) - nonlinear_lift(b)) >= l1_norm(a - b) - 1e-12);
        }
    }
    SUBCASE("vjp matches finite differences") {
        RngStream rng(29);
        State x = rng.gaussian_vec(5), v = rng.gaussian_vec(15);
        State jv = nonlinear_lift_vjp(x, v);
        for (int i = 0; i < 5; ++i) {
            State xp = x, xm = x;
            double h = 1e-6;
            xp[i] += h;
            xm[i] -= h;
            double fd = (dot(nonlinear_lift(xp), v) - dot(nonlinear_lift(xm), v)) / (2 * h);
            CHECK(fd == doctest::Approx(jv[i]).epsilon(1e-6));
        }
    }
}

TEST_CASE("sign gradients ignore bounded perturbations in the long-range regime") {
    // 1e5 randomized triples with |phi|_inf < xi and min|x - x_ori| > xi.
    RngStream rng(31);
    const double xi = 0.12;
    const int n = 16;
    long equal = 0;
    const long trials = 100000;
    for (long trial = 0; trial < trials; ++trial) {
        State x_ori = rng.gaussian_vec(n), x(n), phi(n);
        for (int i = 0; i < n; ++i) {
            double mag = xi * (1.0 + rng.uniform(1e-6, 1.0));
            x[i] = x_ori[i] + (rng.uniform_index(2) ? mag : -mag);
            phi[i] = xi * rng.uniform(-0.999999, 0.999999);
        }
        State adv = x_ori + phi;
        if (l1_grad(x, adv) == l1_grad(x, x_ori)) ++equal;
    }
    CHECK(equal == trials);
}

TEST_CASE("a short-range counterexample flips one sign") {
    const double xi = 0.2;
    State x_ori(4, 0.0);
    State x = x_ori;
    x[1] += xi / 2;                 // inside the short-range band
    State phi(4, 0.0);
    phi[1] = 0.9 * xi;              // |phi|_inf < xi but larger than the gap
    State adv = x_ori + phi;
    State g_adv = l1_grad(x, adv), g_ori = l1_grad(x, x_ori);
    CHECK(g_ori[1] == 1.0);
    CHECK(g_adv[1] == -1.0);
}
