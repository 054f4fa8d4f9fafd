#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "sgdlab/dynamics.hpp"
#include "sgdlab/errors.hpp"
#include "sgdlab/landscapes.hpp"
#include "sgdlab/report.hpp"
#include "sgdlab/stats.hpp"

using namespace sgdlab;

TEST_CASE("sgd step on a quadratic with eta = 1/h is an exact jump to 0") {
    auto quad = quadratic_landscape(Vec{2.0});
    SgdConfig cfg{.eta = 0.5, .batch_size = 1};
    RngStream rng(1);
    TrajectoryState s{Vec{3.7}, 0};
    TrajectoryState next = sgd_step(*quad, s, cfg, rng);
    CHECK(next.theta[0] == 0.0);
    CHECK(next.iteration == 1);
}

TEST_CASE("sgd step with eta = 0 keeps theta") {
    auto quad = quadratic_landscape(Vec{2.0});
    SgdConfig cfg{.eta = 0.0, .batch_size = 1};
    RngStream rng(1);
    TrajectoryState s{Vec{1.25}, 0};
    TrajectoryState next = sgd_step(*quad, s, cfg, rng);
    CHECK(next.theta[0] == 1.25);
}

TEST_CASE("single-sample sgd updates average to the full gradient") {
    DatasetSpec spec{.samples = 5000, .input_dim = 1, .seed = 31};
    auto l = shifted_st_landscape(1, spec);
    const Vec theta{-1.4};
    const double g_full = l->grad_v(theta)[0];

    SgdConfig cfg{.eta = 0.1, .batch_size = 1};
    Stepper stepper(*l, cfg);
    RngStream rng(7);
    const int n = 10000;
    Vec upd_over_eta(n);
    for (int i = 0; i < n; ++i) {
        TrajectoryState s{theta, 0};
        stepper.step(s, rng);
        upd_over_eta[i] = (s.theta[0] - theta[0]) / cfg.eta;
    }
    const double m = mean(upd_over_eta);
    const double se = std::sqrt(variance(upd_over_eta) / n);
    CHECK(std::abs(m - (-g_full)) <= 3.0 * se);
}

TEST_CASE("without-replacement sampling visits each sample once per epoch") {
    DatasetSpec spec{.samples = 16, .input_dim = 1, .seed = 8};
    auto l = shifted_st_landscape(1, spec);
    const Vec theta{0.9};
    const double g_full = l->grad_v(theta)[0];

    // reset the state before each step so every update reads out one
    // per-sample gradient; an epoch of 16 must sum to the full gradient
    SgdConfig cfg{.eta = 0.5, .batch_size = 1, .sampling = Sampling::without_replacement};
    Stepper stepper(*l, cfg);
    RngStream rng(3);
    for (int epoch = 0; epoch < 3; ++epoch) {
        double sum = 0.0;
        for (int j = 0; j < 16; ++j) {
            TrajectoryState s{theta, 0};
            stepper.step(s, rng);
            sum += (theta[0] - s.theta[0]) / cfg.eta;
        }
        CHECK(sum / 16.0 == doctest::Approx(g_full).epsilon(1e-9));
    }
}

TEST_CASE("sgld step without noise or gradient is stationary") {
    auto quad = quadratic_landscape(Vec{1.0});
    SgldConfig cfg{.eta = 0.01, .diffusion = 0.0};
    RngStream rng(5);
    TrajectoryState s{Vec{0.0}, 0};
    TrajectoryState next = sgld_step(*quad, s, cfg, rng);
    CHECK(next.theta[0] == 0.0);
}

TEST_CASE("sgld increment variance is 2 D eta") {
    auto flat = quadratic_landscape(Vec{0.0});  // zero gradient everywhere
    SgldConfig cfg{.eta = 0.02, .diffusion = 0.7};
    Stepper stepper(*flat, cfg);
    RngStream rng(11);
    const int n = 100000;
    Vec inc(n);
    for (int i = 0; i < n; ++i) {
        TrajectoryState s{Vec{0.0}, 0};
        stepper.step(s, rng);
        inc[i] = s.theta[0];
    }
    CHECK(variance(inc) == doctest::Approx(2.0 * 0.7 * 0.02).epsilon(0.03));
}

TEST_CASE("sgld on a quadratic reaches the Gibbs stationary law") {
    // eta h = 0.01: stationary variance D/h within 5%, excess kurtosis ~ 0
    const double h = 1.0, eta = 0.01, d = 0.5;
    auto quad = quadratic_landscape(Vec{h});
    SgldConfig cfg{.eta = eta, .diffusion = d};
    Stepper stepper(*quad, cfg);
    RngStream rng(17);
    TrajectoryState s{Vec{0.0}, 0};

    const int burn = 100000, keep = 1000000;
    for (int i = 0; i < burn; ++i) stepper.step(s, rng);
    Vec xs(keep);
    for (int i = 0; i < keep; ++i) {
        stepper.step(s, rng);
        xs[i] = s.theta[0];
    }
    CHECK(variance(xs) == doctest::Approx(d / h).epsilon(0.05));
    CHECK(std::abs(excess_kurtosis(xs)) < 0.1);
}

TEST_CASE("diffusion matrix is (eta/2B) [H]+") {
    Mat h1 = Mat::identity(3);
    Mat d1 = diffusion_matrix(h1, 0.01, 128);
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(d1(i, j) == doctest::Approx(i == j ? 3.90625e-5 : 0.0).epsilon(1e-12));

    Mat h2 = Mat::diag(Vec{2.0, -3.0});
    const double eta = 0.04;
    const int b = 5;
    Mat d2 = diffusion_matrix(h2, eta, b);
    CHECK(d2(0, 0) == doctest::Approx(eta / (2.0 * b) * 2.0).epsilon(1e-12));
    CHECK(d2(1, 1) == doctest::Approx(eta / (2.0 * b) * 3.0).epsilon(1e-12));
    CHECK(std::abs(d2(0, 1)) < 1e-14);

    Mat hz(2, 2);
    Mat dz = diffusion_matrix(hz, 0.1, 1);
    for (double v : dz.data()) CHECK(v == 0.0);

    Mat bad(2, 2);
    bad(0, 1) = 1.0;  // asymmetric
    CHECK_THROWS_AS(diffusion_matrix(bad, 0.1, 1), std::invalid_argument);
}

TEST_CASE("diffusion matrix commutes with the basis of a rotated hessian") {
    // planted non-diagonal symmetric H with a negative eigenvalue
    Mat q = Mat::identity(2);
    const double t = 0.8;
    q(0, 0) = std::cos(t);
    q(0, 1) = -std::sin(t);
    q(1, 0) = std::sin(t);
    q(1, 1) = std::cos(t);
    Mat h = matmul(q, matmul(Mat::diag(Vec{1.5, -0.7}), transpose(q)));
    Mat d = diffusion_matrix(h, 0.2, 4);
    Mat expected = matmul(q, matmul(Mat::diag(Vec{0.2 / 8 * 1.5, 0.2 / 8 * 0.7}), transpose(q)));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(d(i, j) == doctest::Approx(expected(i, j)).epsilon(1e-10));
}

TEST_CASE("valley region membership") {
    ValleyRegion r{Vec{1.0, -1.0}, 0.5};
    CHECK(r.contains(Vec{1.0, -1.0}));
    CHECK(r.contains(Vec{1.5, -0.5}));       // boundary included
    CHECK(!r.contains(Vec{1.51, -1.0}));
    CHECK(!r.contains(Vec{1.0, -1.6}));
}

TEST_CASE("simulate_until_exit immediate escape and censoring") {
    // outward gradient at the boundary: exits on the first step
    auto hill = quadratic_landscape(Vec{-1.0});
    ValleyRegion region{Vec{0.0}, 1.0};
    EscapeTrial t1 = simulate_until_exit(*hill, Vec{1.0}, region, SgdConfig{.eta = 0.5}, 100, 1);
    CHECK(t1.escaped);
    CHECK(t1.iterations == 1);
    CHECK(t1.dynamical_time == doctest::Approx(0.5).epsilon(1e-15));

    // no noise at an exact minimum: censored at max_iters
    auto well = quadratic_landscape(Vec{1.0});
    EscapeTrial t2 =
        simulate_until_exit(*well, Vec{0.0}, region, SgldConfig{.eta = 0.1, .diffusion = 0.0},
                            500, 1);
    CHECK(!t2.escaped);
    CHECK(t2.valid);
    CHECK(t2.iterations == 500);

    // starting outside the region is a precondition violation
    CHECK_THROWS_AS(
        simulate_until_exit(*well, Vec{2.0}, region, SgdConfig{.eta = 0.1}, 100, 1),
        std::invalid_argument);
}

TEST_CASE("simulate_until_exit flags divergence as invalid") {
    // eta h = 4 > 2: the quadratic map repels and blows past the bound
    auto well = quadratic_landscape(Vec{1.0});
    ValleyRegion region{Vec{0.0}, 1e7};  // region bigger than the divergence bound
    EscapeTrial t =
        simulate_until_exit(*well, Vec{0.5}, region, SgdConfig{.eta = 4.0}, 100000, 1);
    CHECK(!t.valid);
    CHECK(!t.escaped);
}

TEST_CASE("mean exit time decreases with the diffusion coefficient") {
    auto well = quadratic_landscape(Vec{1.0});
    ValleyRegion region{Vec{0.0}, 2.0};
    auto mean_exit = [&](double d) {
        double total = 0.0;
        const int reps = 40;
        for (int i = 0; i < reps; ++i) {
            EscapeTrial t = simulate_until_exit(
                *well, Vec{0.0}, region, SgldConfig{.eta = 0.01, .diffusion = d}, 10000000,
                900 + i);
            REQUIRE(t.escaped);
            total += t.dynamical_time;
        }
        return total / reps;
    };
    const double t_low = mean_exit(0.5);
    const double t_mid = mean_exit(1.0);
    const double t_high = mean_exit(2.0);
    CHECK(t_low > t_mid);
    CHECK(t_mid > t_high);
}

TEST_CASE("trajectories are bit-identical for identical seeds") {
    auto st1 = st_landscape(1);
    ValleyRegion region{Vec{st::kMinimum}, 3.06};
    SgldConfig cfg{.eta = 0.005, .diffusion = 5.0};

    EscapeTrial a = simulate_until_exit(*st1, Vec{st::kMinimum}, region, cfg, 1000000, 424242);
    EscapeTrial b = simulate_until_exit(*st1, Vec{st::kMinimum}, region, cfg, 1000000, 424242);
    CHECK(a.iterations == b.iterations);
    CHECK(a.escaped == b.escaped);
    CHECK(a.dynamical_time == b.dynamical_time);

    EscapeTrial c = simulate_until_exit(*st1, Vec{st::kMinimum}, region, cfg, 1000000, 424243);
    CHECK(a.iterations != c.iterations);
}

TEST_CASE("dynamical time is exactly eta times the iteration count") {
    auto well = quadratic_landscape(Vec{1.0});
    SgldConfig cfg{.eta = 0.013, .diffusion = 0.3};
    Stepper stepper(*well, cfg);
    RngStream rng(9);
    TrajectoryState s{Vec{0.0}, 0};
    for (int i = 1; i <= 1000; ++i) {
        stepper.step(s, rng);
        CHECK(s.dynamical_time(cfg.eta) == 0.013 * i);
    }
}

TEST_CASE("trajectory observer streams thinned snapshots") {
    auto well = quadratic_landscape(Vec{1.0});
    ValleyRegion region{Vec{0.0}, 10.0};
    SimulateOptions opts;
    opts.max_iters = 100;
    opts.observer_stride = 10;
    std::vector<std::int64_t> seen;
    opts.observer = [&](std::int64_t it, double loss, std::span<const double> theta) {
        (void)loss;
        (void)theta;
        seen.push_back(it);
    };
    simulate_until_exit(*well, Vec{0.5}, region, SgldConfig{.eta = 0.01, .diffusion = 0.0},
                        opts, RngStream(4));
    REQUIRE(seen.size() == 11);  // iteration 0 plus every 10th
    CHECK(seen.front() == 0);
    CHECK(seen.back() == 100);
}

TEST_CASE("trajectory snapshots stream to csv") {
    using sgdlab::TrajectoryCsvBuffer;
    auto well = quadratic_landscape(Vec{1.0, 2.0});
    ValleyRegion region{Vec{0.0, 0.0}, 10.0};
    TrajectoryCsvBuffer buffer(2);
    SimulateOptions opts;
    opts.max_iters = 50;
    opts.observer_stride = 25;
    opts.observer = buffer.observer();
    simulate_until_exit(*well, Vec{0.5, -0.5}, region,
                        SgldConfig{.eta = 0.01, .diffusion = 0.0}, opts, RngStream(4));
    const std::string& csv = buffer.csv();
    CHECK(csv.rfind("iteration,loss,theta_0,theta_1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);  // header + iters {0, 25, 50}
}

TEST_CASE("batch size larger than the dataset is rejected") {
    DatasetSpec spec{.samples = 10, .input_dim = 1, .seed = 1};
    auto l = shifted_st_landscape(1, spec);
    SgdConfig cfg{.eta = 0.1, .batch_size = 11};
    CHECK_THROWS_AS(Stepper(*l, cfg), std::invalid_argument);
}
