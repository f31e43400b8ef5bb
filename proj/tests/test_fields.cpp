#include <doctest.h>

#include <cmath>
#include <random>

#include "gapflow/fields.hpp"

using namespace gapflow;

namespace {
DiskPtr disk_for(double eps, bool sym = false, int n = 512, int M = 8) {
    auto g = sym ? GapGeometry::symmetric_default(eps) : GapGeometry::asymmetric_default(eps);
    return make_disk(g, n, M);
}
}  // namespace

TEST_CASE("fornberg weights are exact on polynomials") {
    std::vector<double> xs{0, 1, 2, 3, 4, 5, 6};
    auto w = fd_weights(xs, 1.3, 1);
    double s = 0.0;
    for (int i = 0; i < 7; ++i) s += w[i] * std::pow(xs[i], 5);
    CHECK(s == doctest::Approx(5 * std::pow(1.3, 4)).epsilon(1e-11));
}

TEST_CASE("grid shape") {
    auto d = disk_for(1e-3);
    CHECK(d->r().back() == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(d->r().front() > 0.0);
    CHECK(d->r()[1] > d->r()[0]);
}

TEST_CASE("d_dx3 examples") {
    auto d = disk_for(1e-2);
    auto c = CoeffField::constant(d, 2.0);
    CHECK(PolyField::constant(c).d_dx3().is_zero());
    auto f = PolyField::monomial(c, 1);
    CHECK(f.d_dx3().degree() == 0);
    CHECK(f.d_dx3().d_dx3().is_zero());
    auto cubic = PolyField::monomial(c, 3) + f;
    CHECK(cubic.d_dx3().d_dx3().d_dx3().d_dx3().is_zero());
}

TEST_CASE("d_dxj on simple fields") {
    auto d = disk_for(1e-2);
    auto r2 = CoeffField::from_radial_function(d, 0, false, [](double r) { return r * r; });
    auto dx = r2.d_dx(1);
    CHECK(dx.max_mode() == 1);
    double err = 0.0;
    for (int j = 0; j < d->n(); ++j) err = std::max(err, std::abs(dx.get(1, false)[j] - 2 * d->r()[j]));
    CHECK(err < 1e-9);
    CHECK(CoeffField::constant(d, 3.0).d_dx(2).max_abs() < 1e-12);
}

TEST_CASE("d_dx1 of x1 g(r) matches a 2D central-difference oracle") {
    double eps = 1e-3;
    auto d = disk_for(eps);
    auto g = [eps](double r) { return std::pow(eps + r * r, -3.0); };
    auto f = CoeffField::from_radial_function(d, 1, false, [&](double r) { return r * g(r); });
    auto fx = f.d_dx(1);
    CHECK(fx.has(0, false));
    CHECK(fx.has(2, false));
    auto F = [&](double x1, double x2) { return x1 * g(std::hypot(x1, x2)); };
    double h = 1e-6, worst = 0.0;
    for (double x1 : {0.01, 0.05, 0.2, 0.7})
        for (double x2 : {0.0, 0.03, 0.3}) {
            double fd = (F(x1 + h, x2) - F(x1 - h, x2)) / (2 * h);
            worst = std::max(worst, std::abs(fx.eval(x1, x2) - fd) / std::abs(fd));
        }
    CHECK(worst < 1e-5);
}

TEST_CASE("mixed derivatives commute") {
    auto d = disk_for(1e-2);
    auto f = CoeffField::from_radial_function(d, 1, false, [](double r) { return r * std::exp(-r * r); }) +
             CoeffField::from_radial_function(d, 2, true, [](double r) { return r * r / (1 + r * r); });
    auto a = f.d_dx(1).d_dx(2), b = f.d_dx(2).d_dx(1);
    CHECK((a - b).max_abs() / a.max_abs() < 1e-8);
}

TEST_CASE("weighted storage differentiates by the product rule") {
    auto d = disk_for(1e-2);
    auto g = CoeffField::from_radial_function(d, 1, true, [](double r) { return r * std::cos(r); });
    auto w = g.with_weight(-2.0);
    auto a = g.d_dx(1), b = w.d_dx(1).unweighted();
    CHECK((a - b).max_abs() / a.max_abs() < 1e-7);
    CHECK((g - w).max_abs() < 1e-12);
}

TEST_CASE("mode products and overflow") {
    auto d = disk_for(1e-2, false, 128, 3);
    auto x1 = CoeffField::coordinate(d, 1), x2 = CoeffField::coordinate(d, 2);
    auto p = x1 * x2;
    CHECK(p.max_mode() == 2);
    CHECK(p.eval(0.3, 0.4) == doctest::Approx(0.12).epsilon(1e-10));
    auto q = x1 * x1 + x2 * x2;
    CHECK(q.max_mode() == 0);
    CHECK_THROWS_AS(p * p, ModeOverflow);
}

TEST_CASE("divergence examples") {
    auto d = disk_for(1e-2);
    auto x1 = CoeffField::coordinate(d, 1);
    auto x3 = PolyField::x3(d);
    VecField v{x3, PolyField(d), -1.0 * PolyField::constant(x1)};
    // d1 x1 = 1 exactly (stencil differences kill constants), so the cancellation is exact.
    CHECK(divergence(v).is_zero());
    double worst = 0.0;
    auto dv = divergence(v);
    for (double r : {0.05, 0.5})
        for (double z : {-0.001, 0.002}) worst = std::max(worst, std::abs(dv.eval(r, 0.1, z)));
    CHECK(worst < 1e-12);
    VecField u{PolyField::constant(x1), PolyField(d), PolyField(d)};
    CHECK(divergence(u).eval(0.3, -0.2, 0.0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("sup of inverse delta on an annulus") {
    double eps = 1e-3;
    auto d = make_disk(GapGeometry::symmetric_default(eps), 512, 8);
    auto gf = gap_fields(d);
    double s = sup_on_annulus(PolyField::constant(gf.inv_delta), 0.1, 0.2);
    int j = d->first_node_at_or_above(0.1);
    CHECK(s == doctest::Approx(1.0 / d->delta()[j]).epsilon(1e-12));
    CHECK(s <= 1.0 / 0.011);
    CHECK(s > 0.9 / 0.011);
}

TEST_CASE("mul_kfactor identities") {
    double eps = 1e-3;
    auto d = disk_for(eps);
    auto gf = gap_fields(d);
    const auto& geom = d->geom();
    auto one = PolyField::constant(CoeffField::constant(d, 1.0));
    auto kf = mul_kfactor(one, gf);
    CHECK(kf.degree() == 2);
    double r = 0.37;
    double dl = geom.delta_r(r);
    CHECK(kf.coeff(0).eval(r, 0) == doctest::Approx(-geom.c_r(r) / (dl * dl)).epsilon(1e-9));
    CHECK(kf.coeff(1).eval(r, 0) == doctest::Approx(-geom.d_r(r) / (dl * dl)).epsilon(1e-9));
    CHECK(kf.coeff(2).eval(r, 0) == doctest::Approx(1.0 / (dl * dl)).epsilon(1e-9));
    // Face annihilation at nodes.
    double worst = 0.0;
    for (int j = 0; j < d->n(); j += 7) {
        double rr = d->r()[j];
        double sc = std::pow(d->delta()[j], 2);
        worst = std::max(worst, std::abs(kf.eval_node(j, 0.4, geom.top(rr))) );
        worst = std::max(worst, std::abs(kf.eval_node(j, 0.4, geom.bottom(rr))));
        (void)sc;
    }
    CHECK(worst <= 1e-12);
    // Pointwise product oracle for a random degree-2 field.
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> U(-1, 1);
    auto f = PolyField(d, {CoeffField::from_radial_function(d, 1, false, [](double r) { return r; }) * U(rng),
                           CoeffField::constant(d, U(rng)),
                           CoeffField::from_radial_function(d, 0, false, [](double r) { return r * r; })});
    auto fk = mul_kfactor(f, gf);
    for (int t = 0; t < 20; ++t) {
        int j = static_cast<int>((d->n() - 1) * (0.5 + 0.5 * U(rng)));
        double th = 3.0 * U(rng);
        double rr = d->r()[j];
        double z = geom.bottom(rr) + (geom.top(rr) - geom.bottom(rr)) * (0.5 + 0.5 * U(rng));
        double k = geom.keller(rr * std::cos(th), rr * std::sin(th), z).value;
        double want = f.eval_node(j, th, z) * (k * k - 0.25);
        CHECK(fk.eval_node(j, th, z) == doctest::Approx(want).epsilon(1e-9).scale(1e-12));
    }
    // Second x3-derivative of c (k^2 - 1/4) is 2c/delta^2.
    auto c = PolyField::constant(CoeffField::from_radial_function(d, 0, false, [](double r) { return 1 + r; }));
    auto dd = mul_kfactor(c, gf).d_dx3().d_dx3();
    CHECK(dd.degree() == 0);
    CHECK(dd.eval(0.2, 0.0, 0.0) == doctest::Approx(2 * 1.2 / std::pow(geom.delta_r(0.2), 2)).epsilon(1e-9));
}

TEST_CASE("analytic keller gradient agrees with differentiated k") {
    auto d = disk_for(1e-2);
    auto gf = gap_fields(d);
    const auto& geom = d->geom();
    for (int j = 0; j < 2; ++j) {
        auto num = gf.k.d_dxj(j + 1);
        double x1 = 0.21, x2 = -0.13;
        double z = 0.2 * geom.top(std::hypot(x1, x2));
        double ex = geom.keller(x1, x2, z).grad[j];
        CHECK(gf.grad_k[j].eval(x1, x2, z) == doctest::Approx(ex).epsilon(1e-9));
        CHECK(num.eval(x1, x2, z) == doctest::Approx(ex).epsilon(1e-6));
    }
}

TEST_CASE("quadratic division") {
    auto d = disk_for(1e-2);
    auto gf = gap_fields(d);
    auto q = PolyField(d, {-1.0 * gf.c, -1.0 * gf.d, CoeffField::constant(d, 1.0)});
    auto P = PolyField(d, {CoeffField::constant(d, 0.5), gf.delta, gf.d});
    auto A = q * P + PolyField(d, {gf.delta, gf.c});
    CoeffField r1, r0;
    auto Q = A.divide_monic_quadratic(-1.0 * gf.d, -1.0 * gf.c, r1, r0);
    CHECK((Q - P).coeffs().size() >= 1);
    for (int i = 0; i <= 2; ++i) CHECK((Q.coeff(i) - P.coeff(i)).max_abs() < 1e-13);
    CHECK((r1 - gf.c).max_abs() < 1e-13);
    CHECK((r0 - gf.delta).max_abs() < 1e-13);
}

TEST_CASE("field dump layout") {
    auto d = disk_for(1e-2, false, 64, 2);
    auto f = PolyField(d, {CoeffField::coordinate(d, 2), CoeffField::constant(d, 1.0)});
    auto dump = dump_field(f);
    CHECK(dump.payload.size() == 2u * 5u * 64u);
    CHECK(dump.payload[2 * 64 + 10] == doctest::Approx(d->r()[10]));
    CHECK(dump.payload[5 * 64] == 1.0);
}
