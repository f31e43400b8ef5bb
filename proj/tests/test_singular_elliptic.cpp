#include <doctest.h>

#include <cmath>

#include "gapflow/singular_elliptic.hpp"

using namespace gapflow;

namespace {
SingularEllipticProblem radial_problem(double eps, double gamma, int mode = 0) {
    SingularEllipticProblem p;
    p.disk = make_disk(GapGeometry::symmetric_default(eps), 512, 8);
    p.gamma = gamma;
    p.rhs = CoeffField::from_radial_function(p.disk, mode, false, [=](double r) {
        double d = eps + r * r;
        return mode == 0 ? std::pow(d, gamma) : r * std::pow(d, gamma - 0.5);
    });
    return p;
}
}  // namespace

TEST_CASE("zero data gives zero solutions") {
    auto p = radial_problem(1e-2, -3.0);
    p.rhs = CoeffField(p.disk);
    CHECK(solve(p).max_abs() == 0.0);
    CHECK(solve_radial_special(p).max_abs() == 0.0);
    for (int n : {1, 3}) CHECK(solve_mode(p, n).max_abs() == 0.0);
    auto s = solve_fd_2d(p, 32, 16);
    double m = 0.0;
    for (double v : s.values) m = std::max(m, std::abs(v));
    CHECK(m == 0.0);
}

TEST_CASE("radial special solution at the axis matches a nested quadrature oracle") {
    // Oracle: mpmath nested quadrature at 30 digits, h = r^2, eps = 1e-2, gamma = -3, F = (eps + r^2)^-3.
    const double oracle = -1249.9922264165023849;
    auto p = radial_problem(1e-2, -3.0);
    p.radial_rhs = [](double r) { return std::pow(1e-2 + r * r, -3.0); };
    auto U = solve_radial_special(p);
    double u0 = U.eval(0.0, 0.0);
    CHECK(u0 == doctest::Approx(oracle).epsilon(1e-8));
    CHECK(weighted_residual(p, U, 1.0) <= 1e-6);
    auto V = solve_mode(p, 0);
    CHECK(V.eval(0.0, 0.0) == doctest::Approx(oracle).epsilon(1e-8));
}

TEST_CASE("radial special solution decays like gamma + 1") {
    auto p = radial_problem(1e-2, -3.0);
    p.radial_rhs = [](double r) { return std::pow(1e-2 + r * r, -3.0); };
    auto U = solve_radial_special(p);
    // At eps = 1e-2 the window must start at delta = eps to span 1.5 decades.
    auto res = verify_u_esti(p, U, 0, FitWindow{1.0, 0.8});
    CHECK(std::abs(res.fits[0].beta + 2.0) <= 0.1);
}

TEST_CASE("mode-1 solves decay like -3/2") {
    // x1 (eps + r^2)^-3 is in class gamma = -5/2.
    auto p = radial_problem(1e-3, -2.5, 1);
    auto U = solve_mode(p, 1);
    CHECK(U.max_mode() == 1);
    CHECK(weighted_residual(p, U, 1.0) <= 1e-6);
    auto res = verify_u_esti(p, U, 0);
    CHECK(std::abs(res.fits[0].beta + 1.5) <= 0.1);
    // The alpha = 5 driver -12 mu x1 / delta^3.
    auto q = p;
    q.rhs = CoeffField::from_radial_function(p.disk, 1, false, [](double r) { return -12.0 * r / std::pow(1e-3 + r * r, 3); });
    auto V = solve_mode(q, 1);
    CHECK(std::abs(verify_u_esti(q, V, 0).fits[0].beta + 1.5) <= 0.1);
}

TEST_CASE("comparison principle: nonnegative data gives nonpositive solution") {
    auto p = radial_problem(1e-3, -2.0);
    auto U = solve(p);
    double mx = -1e300;
    for (double v : U.get(0, false)) mx = std::max(mx, v);
    CHECK(mx <= 1e-12);
}

TEST_CASE("round trip through the fields calculus") {
    auto p = radial_problem(1e-3, -1.5);
    auto U = solve(p);
    CHECK(weighted_residual(p, U, 0.8) <= 1e-6);
}

TEST_CASE("polar finite differences agree with the mode solve") {
    auto p = radial_problem(1e-3, -2.5, 1);
    auto U = solve_mode(p, 1);
    auto s = solve_fd_2d(p, 256, 64);
    CHECK(relative_linf(s, U) <= 0.02);
}

TEST_CASE("manufactured solution converges at second order") {
    const double eps = 1e-2;
    SingularEllipticProblem p;
    p.disk = make_disk(GapGeometry::symmetric_default(eps), 512, 8);
    p.gamma = 0.0;
    p.bc = eps + 4.0;
    p.rhs = CoeffField::from_radial_function(p.disk, 0, false,
                                             [=](double r) { return 4.0 + 12.0 * r * r / (eps + r * r); });
    auto err = [&](int nr) {
        auto s = solve_fd_2d(p, nr, 16);
        double e = 0.0;
        for (std::size_t i = 0; i < s.r.size(); ++i)
            for (std::size_t k = 0; k < s.theta.size(); ++k)
                e = std::max(e, std::abs(s.at(i, k) - (eps + s.r[i] * s.r[i])));
        return e;
    };
    double e1 = err(32), e2 = err(64), e3 = err(128);
    CHECK(std::log2(e1 / e2) >= 1.8);
    CHECK(std::log2(e2 / e3) >= 1.8);
}

TEST_CASE("synthetic power law is recovered exactly") {
    auto p = radial_problem(1e-3, -3.0);
    auto U = CoeffField::from_radial_function(p.disk, 0, false, [](double r) { return std::pow(1e-3 + r * r, -2.0); });
    auto res = verify_u_esti(p, U, 0);
    CHECK(res.fits[0].beta == doctest::Approx(-2.0).epsilon(0.01));
}

TEST_CASE("gamma outside the proven range is a warning") {
    auto p = radial_problem(1e-3, -0.5);
    auto U = solve(p);
    auto res = verify_u_esti(p, U, 1);
    CHECK(res.status == Status::Warning);
    CHECK(res.fits.size() == 2);
}
