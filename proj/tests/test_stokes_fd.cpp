#include <doctest.h>

#include <cmath>
#include <limits>

#include "gapflow/stokes_fd.hpp"

using namespace gapflow;

namespace {

VecFn rigid(int alpha) {
    return [alpha](double x1, double x2, double x3) { return rigid_motion(alpha, x1, x2, x3); };
}

// Quasi-random points (r, theta, t) filling the gap over |x'| < r_max.
template <class F>
void for_points(const GapGeometry& g, double r_max, int n, F&& f) {
    for (int i = 0; i < n; ++i) {
        auto u = r2_sequence(i);
        double r = r_max * u[0], th = 2 * M_PI * u[1], t = std::fmod(0.7548776662 * i + 0.31, 1.0);
        double z = g.bottom(r) + t * (g.top(r) - g.bottom(r));
        f(r * std::cos(th), r * std::sin(th), z);
    }
}

}  // namespace

TEST_CASE("zero data give zero velocity and pressure") {
    StokesProblem p{GapGeometry::symmetric_default(1e-2), StokesGrid{12, 16, 4}};
    auto s = solve(p);
    CHECK(s.modes().empty());
    auto u = s.velocity(0.3, 0.1, 0.0);
    CHECK(std::abs(u[0]) + std::abs(u[1]) + std::abs(u[2]) == 0.0);
    CHECK(s.pressure(0.3, 0.1, 0.0) == 0.0);
}

TEST_CASE("rigid traces on all boundaries reproduce the rigid motion") {
    for (int alpha : {1, 4, 5}) {
        CAPTURE(alpha);
        StokesProblem p{GapGeometry::symmetric_default(1e-2), StokesGrid{16, 16, 6}};
        p.top_bc = p.bottom_bc = p.lateral_bc = rigid(alpha);
        auto s = solve(p);
        double err = 0.0, perr = 0.0;
        for_points(p.geom, 2.0, 200, [&](double x1, double x2, double x3) {
            auto u = s.velocity(x1, x2, x3), w = rigid_motion(alpha, x1, x2, x3);
            for (int i = 0; i < 3; ++i) err = std::max(err, std::abs(u[i] - w[i]));
            perr = std::max(perr, std::abs(s.pressure(x1, x2, x3)));
        });
        CHECK(err <= 1e-10);
        CHECK(perr <= 1e-8);
    }
}

TEST_CASE("manufactured solution converges at better than second order") {
    // u* = (sin x2 cos x3, cos x1 e^x3, sin x1 sin x2) is divergence free; p* = x2 cos x1.
    VecFn u = [](double x, double y, double z) {
        return std::array<double, 3>{std::sin(y) * std::cos(z), std::cos(x) * std::exp(z), std::sin(x) * std::sin(y)};
    };
    VecFn f = [](double x, double y, double z) {
        return std::array<double, 3>{2 * std::sin(y) * std::cos(z) - y * std::sin(x), std::cos(x),
                                     2 * std::sin(x) * std::sin(y)};
    };
    std::vector<double> err;
    for (int n : {6, 12}) {
        StokesProblem p{GapGeometry::symmetric_default(1e-1), StokesGrid{2 * n, 32, n}};
        p.top_bc = p.bottom_bc = p.lateral_bc = u;
        p.body_force = f;
        auto s = solve(p);
        double e = 0.0;
        for_points(p.geom, 2.0, 1500, [&](double x1, double x2, double x3) {
            auto a = s.velocity(x1, x2, x3), b = u(x1, x2, x3);
            for (int i = 0; i < 3; ++i) e = std::max(e, std::abs(a[i] - b[i]));
        });
        err.push_back(e);
    }
    CHECK(std::log2(err[0] / err[1]) >= 1.8);
}

TEST_CASE("algebraic residuals and prescribed divergence") {
    std::vector<double> err;
    for (int n : {4, 8}) {
        StokesProblem p{GapGeometry::symmetric_default(1e-2), StokesGrid{2 * n, 16, n}};
        GapGeometry g = p.geom;
        p.divergence_data = [g](double x1, double x2, double x3) { return g.keller(x1, x2, x3).value; };
        p.body_force = [](double x1, double, double) { return std::array<double, 3>{0.0, x1, 1.0}; };
        auto s = solve(p);
        CHECK(s.momentum_residual <= 1e-9);
        CHECK(s.divergence_residual <= 1e-9);
        CHECK(s.flux_mismatch <= 1e-12);
        // Pointwise div w + g is only weakly zero for Taylor-Hood elements; it must shrink under refinement.
        double e = 0.0;
        for_points(g, 0.8, 200, [&](double x1, double x2, double x3) {
            auto G = s.gradient(x1, x2, x3);
            e = std::max(e, std::abs(G[0][0] + G[1][1] + G[2][2] + g.keller(x1, x2, x3).value));
        });
        err.push_back(e);
    }
    CHECK(err[1] <= 0.35 * err[0]);
}

TEST_CASE("pressure pin changes the pressure by a constant only") {
    auto p = model_problem(3, 1e-2, StokesGrid{16, 16, 6});
    auto a = solve(p);
    p.pressure_pin = 40;
    auto b = solve(p);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo, scale = 0.0;
    for_points(p.geom, 2.0, 200, [&](double x1, double x2, double x3) {
        double d = a.pressure(x1, x2, x3) - b.pressure(x1, x2, x3);
        lo = std::min(lo, d);
        hi = std::max(hi, d);
        scale = std::max(scale, std::abs(a.pressure(x1, x2, x3)));
    });
    CHECK(hi - lo <= 1e-8 * scale);
    p.pressure_pin = 1 << 20;
    CHECK_THROWS_AS(solve(p), DomainError);
}

TEST_CASE("axisymmetric data give angle-independent samples") {
    auto p = model_problem(3, 1e-2, StokesGrid{12, 8, 4});
    auto s = solve(p).sample();
    const int nth = static_cast<int>(s.theta.size()), nt = static_cast<int>(s.t.size());
    double dev = 0.0;
    for (std::size_t i = 0; i < s.r.size(); ++i)
        for (int j = 1; j < nth; ++j)
            for (int k = 0; k < nt; ++k) {
                auto idx = [&](int jj) { return (i * nth + jj) * nt + k; };
                const auto &u0 = s.u[idx(0)], &u = s.u[idx(j)];
                dev = std::max({dev, std::abs(u[2] - u0[2]), std::abs(std::hypot(u[0], u[1]) - std::hypot(u0[0], u0[1])),
                                std::abs(s.p[idx(j)] - s.p[idx(0)]) / (1.0 + std::abs(s.p[idx(0)]))});
            }
    CHECK(dev <= 1e-10);
}

TEST_CASE("incompatible side data are corrected and reported") {
    StokesProblem p{GapGeometry::symmetric_default(1e-2), StokesGrid{12, 16, 4}};
    p.top_bc = rigid(3);
    auto s = solve(p);
    CHECK(s.flux_mismatch > 0.1);
    CHECK(s.divergence_residual <= 1e-9);
}

TEST_CASE("grid budget and sweep preconditions") {
    StokesProblem p{GapGeometry::symmetric_default(1e-2), StokesGrid{65, 64, 24}};
    CHECK_THROWS_AS(solve(p), DomainError);
    CHECK_THROWS_AS(blowup_sweep(1, {1e-1, 1e-2, 1e-3}), FitError);
}

TEST_CASE("alpha = 4 blow-up sweep") {
    auto b = blowup_sweep(4, default_sweep_eps());
    CHECK(std::abs(b.fit.beta + 0.5) <= 0.15);
    CHECK(sweep_csv(b).rfind("eps,grad_center,exponent_running,solve_seconds\n", 0) == 0);
}

TEST_CASE("manufactured data gradient and energy rates") {
    const double inf = std::numeric_limits<double>::infinity();
    auto zero = keyprop_check(inf, inf);
    CHECK(zero.w_max == 0.0);
    auto g = keyprop_check(inf, -0.5);
    CHECK(g.predicted_grad == -0.5);
    CHECK(std::abs(g.grad_fit.beta + 0.5) <= 0.2);
    CHECK(std::abs(g.energy_fit.beta - 2.0) <= 0.3);
    auto f = keyprop_check(-1.0, inf);
    CHECK(f.predicted_grad == 0.0);
    CHECK(f.grad_fit.beta >= -0.2);
}
