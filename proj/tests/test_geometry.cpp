#include <doctest.h>

#include <cmath>
#include <random>

#include "gapflow/gap_geometry.hpp"

using namespace gapflow;

TEST_CASE("delta examples") {
    auto g = GapGeometry::symmetric_default(0.02);
    CHECK(g.delta(0.2, 0.0) == doctest::Approx(0.06).epsilon(1e-14));
    auto g2 = GapGeometry::asymmetric_default(0.01);
    CHECK(g2.delta(0.0, 0.0) == doctest::Approx(0.01).epsilon(1e-15));
    GapGeometry g3(1e-3, 1.0, 1.0, poly_profile({0, 0, 0.5, 0.3}), poly_profile({0, 0, 0.5}));
    CHECK(g3.delta(0.1, 0.0) == doctest::Approx(0.0113).epsilon(1e-13));
    CHECK_THROWS_AS(g.delta(2.5, 0.0), DomainError);
}

TEST_CASE("invalid geometry rejected") {
    CHECK_THROWS_AS(GapGeometry(0.0, 1.0, 1.0, poly_profile({0, 0, 0.5}), poly_profile({0, 0, 0.5})), DomainError);
    CHECK_THROWS_AS(GapGeometry(1e-3, 1.0, 1.0, poly_profile({0, 0.1, 0.5}), poly_profile({0, 0, 0.5})), DomainError);
    CHECK_THROWS_AS(GapGeometry(1e-3, 1.0, 1.0, poly_profile({0, 0, 0.0}), poly_profile({0, 0, 0.0})), DomainError);
}

TEST_CASE("keller values and faces") {
    auto g = GapGeometry::asymmetric_default(0.02);
    double r = 0.3;
    double mid = 0.5 * g.d_r(r);
    CHECK(std::abs(g.keller(r, 0, mid).value) < 1e-15);
    CHECK(g.keller(r, 0, g.top(r)).value == doctest::Approx(0.5).epsilon(1e-14));
    CHECK(g.keller(r, 0, g.bottom(r)).value == doctest::Approx(-0.5).epsilon(1e-14));
    auto s = GapGeometry::symmetric_default(0.02);
    CHECK(s.keller(0, 0, 0).grad[2] == doctest::Approx(50.0).epsilon(1e-13));
    CHECK_THROWS_AS(g.keller(r, 0, g.top(r) + 0.1), DomainError);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> U(-1.4, 1.4);
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
        double x1 = U(rng), x2 = U(rng);
        double rr = std::hypot(x1, x2);
        for (double z : {g.top(rr), g.bottom(rr)}) {
            double k = g.keller(x1, x2, z).value;
            worst = std::max(worst, std::abs(k * k - 0.25));
        }
    }
    CHECK(worst <= 1e-12);
}

TEST_CASE("keller gradient converges against central differences") {
    auto g = GapGeometry::asymmetric_default(0.05);
    double x[3] = {0.31, -0.22, 0.0};
    x[2] = 0.3 * g.top(std::hypot(x[0], x[1]));
    auto ex = g.keller(x[0], x[1], x[2]);
    auto err = [&](double h) {
        double e = 0.0;
        for (int i = 0; i < 2; ++i) {
            double p[3] = {x[0], x[1], x[2]}, m[3] = {x[0], x[1], x[2]};
            p[i] += h;
            m[i] -= h;
            double fd = (g.keller(p[0], p[1], p[2]).value - g.keller(m[0], m[1], m[2]).value) / (2 * h);
            e = std::max(e, std::abs(fd - ex.grad[i]));
        }
        return e;
    };
    double order = std::log2(err(2e-3) / err(1e-3));
    CHECK(order >= 1.9);
}

TEST_CASE("invariants and delta-center property") {
    for (double eps : {1e-1, 1e-3, 1e-5}) {
        CHECK_NOTHROW(GapGeometry::symmetric_default(eps).check_invariants());
        CHECK_NOTHROW(GapGeometry::asymmetric_default(eps).check_invariants());
    }
    // For alpha in {-2,-1,1}: sup over the ball of radius sqrt(eps+h(x0))/C of (eps+h)^alpha
    // stays within one constant of (eps+h(x0))^alpha.
    auto g = GapGeometry::asymmetric_default(1e-3);
    double C = g.comparability_constant();
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> U(0.0, 1.0);
    for (double alpha : {-2.0, -1.0, 1.0}) {
        double worst = 0.0;
        for (int c = 0; c < 50; ++c) {
            double r0 = 1.5 * U(rng);
            double base = g.delta_r(r0);
            double rad = std::sqrt(base) / C;
            double sup = 0.0;
            for (int s = 0; s <= 40; ++s) {
                double r = std::max(0.0, r0 - rad + 2 * rad * s / 40.0);
                sup = std::max(sup, std::pow(g.delta_r(r), alpha));
            }
            worst = std::max(worst, sup / std::pow(base, alpha));
        }
        CHECK(worst < 4.0);
    }
}
