#include <doctest.h>

#include <cmath>
#include <set>

#include "sgdlab/errors.hpp"
#include "sgdlab/linalg.hpp"
#include "sgdlab/rng.hpp"
#include "sgdlab/stats.hpp"

using namespace sgdlab;

TEST_CASE("rng streams are deterministic and decorrelated") {
    RngStream a(42, 1, 2), b(42, 1, 2), c(42, 1, 3);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
    int equal = 0;
    RngStream a2(42, 1, 2);
    for (int i = 0; i < 1000; ++i)
        if (a2.next_u64() == c.next_u64()) ++equal;
    CHECK(equal == 0);
}

TEST_CASE("rng normal moments") {
    RngStream rng(7);
    const int n = 200000;
    double s1 = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        s1 += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK(std::abs(s1 / n) < 0.01);
    CHECK(s2 / n == doctest::Approx(1.0).epsilon(0.01));
    CHECK(s4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("uniform_int covers range uniformly") {
    RngStream rng(3);
    std::vector<int> counts(10, 0);
    for (int i = 0; i < 100000; ++i) ++counts[rng.uniform_int(10)];
    for (int c : counts) CHECK(std::abs(c - 10000) < 500);
}

TEST_CASE("eigh recovers a planted spectrum") {
    // Q diag(lambda) Q^T with a known rotation
    Mat m(3, 3);
    const double theta = 0.6;
    Mat q = Mat::identity(3);
    q(0, 0) = std::cos(theta);
    q(0, 1) = -std::sin(theta);
    q(1, 0) = std::sin(theta);
    q(1, 1) = std::cos(theta);
    Vec lam{-2.0, 0.5, 3.0};
    Mat d = Mat::diag(lam);
    Mat planted = matmul(q, matmul(d, transpose(q)));

    EigenSym es = eigh(planted);
    CHECK(es.values[0] == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(es.values[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(es.values[2] == doctest::Approx(3.0).epsilon(1e-12));

    // reconstruct
    Mat rec = matmul(es.vectors, matmul(Mat::diag(es.values), transpose(es.vectors)));
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            CHECK(rec(i, j) == doctest::Approx(planted(i, j)).epsilon(1e-10));
}

TEST_CASE("eigh handles larger random symmetric matrices") {
    RngStream rng(11);
    const int n = 60;
    Mat m(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i; j < n; ++j) {
            m(i, j) = rng.normal();
            m(j, i) = m(i, j);
        }
    EigenSym es = eigh(m);
    // eigenvector columns orthonormal
    for (int a = 0; a < n; a += 7)
        for (int b = a; b < n; b += 7) {
            double d = 0;
            for (int r = 0; r < n; ++r) d += es.vectors(r, a) * es.vectors(r, b);
            CHECK(d == doctest::Approx(a == b ? 1.0 : 0.0).epsilon(1e-9));
        }
    // trace preserved
    double tr = 0;
    for (double v : es.values) tr += v;
    CHECK(tr == doctest::Approx(trace(m)).epsilon(1e-10));
}

TEST_CASE("stats basics") {
    Vec xs{1, 2, 3, 4, 5};
    CHECK(mean(xs) == doctest::Approx(3.0));
    CHECK(variance(xs) == doctest::Approx(2.5));
    CHECK(median(xs) == doctest::Approx(3.0));
    Vec even{1, 2, 3, 4};
    CHECK(median(even) == doctest::Approx(2.5));

    Vec ys{2, 4, 6, 8, 10};
    CHECK(pearson(xs, ys) == doctest::Approx(1.0));
    LinearFit f = least_squares(xs, ys);
    CHECK(f.slope == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(f.intercept == doctest::Approx(0.0).epsilon(1e-12));

    CHECK_THROWS_AS(variance(Vec{1.0}), insufficient_data_error);
    CHECK_THROWS_AS(pearson(Vec{1.0}, Vec{1.0}), insufficient_data_error);
}

TEST_CASE("excess kurtosis of gaussian sample is near zero") {
    RngStream rng(5);
    Vec xs(50000);
    for (double& x : xs) x = rng.normal();
    CHECK(std::abs(excess_kurtosis(xs)) < 0.1);
}
