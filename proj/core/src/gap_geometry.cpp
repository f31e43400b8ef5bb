#include "gapflow/gap_geometry.hpp"

#include <algorithm>
#include <cmath>

namespace gapflow {

RadialProfile::RadialProfile(std::vector<double> coeffs) : c_(std::move(coeffs)) {}

double RadialProfile::derivative(double r, int n) const {
    double s = 0.0;
    for (int j = static_cast<int>(c_.size()) - 1; j >= n; --j) {
        double f = 1.0;
        for (int k = 0; k < n; ++k) f *= (j - k);
        s = s * r + c_[j] * f;
    }
    // Horner above accumulates sum c_j f_j r^(j-n) for j >= n.
    return s;
}

RadialProfile poly_profile(std::vector<double> coeffs) { return RadialProfile(std::move(coeffs)); }

GapGeometry::GapGeometry(double eps, double R, double mu, RadialProfile h1, RadialProfile h2)
    : eps_(eps), R_(R), mu_(mu), h1_(std::move(h1)), h2_(std::move(h2)) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    if (!(R > 0.0)) throw DomainError("R must be positive");
    if (!(mu > 0.0)) throw DomainError("mu must be positive");
    for (const auto* h : {&h1_, &h2_}) {
        if (std::abs(h->derivative(0.0, 0)) > 0.0 || std::abs(h->derivative(0.0, 1)) > 0.0)
            throw DomainError("profiles must satisfy h(0) = h'(0) = 0");
    }
    const auto& a = h1_.coeffs();
    const auto& b = h2_.coeffs();
    std::size_t n = std::max(a.size(), b.size());
    for (std::size_t j = 2; j < n; ++j) {
        double s = (j < a.size() ? a[j] : 0.0) + (j < b.size() ? b[j] : 0.0);
        taylor_.push_back(s);
    }
    if (taylor_.empty() || !(taylor_[0] > 0.0))
        throw DomainError("sum profile needs a positive quadratic coefficient a_1");
}

GapGeometry GapGeometry::symmetric_default(double eps, double R, double mu) {
    return GapGeometry(eps, R, mu, poly_profile({0, 0, 0.5}), poly_profile({0, 0, 0.5}));
}

GapGeometry GapGeometry::asymmetric_default(double eps, double R, double mu) {
    return GapGeometry(eps, R, mu, poly_profile({0, 0, 0.5, 0.2}), poly_profile({0, 0, 0.5}));
}

double GapGeometry::comparability_constant() const {
    double s = 0.0;
    for (double a : taylor_) s += std::abs(a);
    return 10.0 * std::max({1.0, 1.0 / taylor_[0], s});
}

double GapGeometry::delta_r(double r, int n) const {
    return (n == 0 ? eps_ : 0.0) + h1_.derivative(r, n) + h2_.derivative(r, n);
}

double GapGeometry::d_r(double r, int n) const { return h1_.derivative(r, n) - h2_.derivative(r, n); }

double GapGeometry::c_r(double r, int n) const {
    // Leibniz rule on (eps + 2 h1)(eps + 2 h2) / 4.
    double s = 0.0;
    double binom = 1.0;
    for (int k = 0; k <= n; ++k) {
        double a = (k == 0 ? eps_ : 0.0) + 2.0 * h1_.derivative(r, k);
        double b = (n - k == 0 ? eps_ : 0.0) + 2.0 * h2_.derivative(r, n - k);
        s += binom * a * b;
        binom = binom * (n - k) / (k + 1);
    }
    return 0.25 * s;
}

void GapGeometry::require_in_patch(double r) const {
    if (r > outer_radius() * (1.0 + 1e-12)) throw DomainError("point outside the patch |x'| <= 2R");
}

double GapGeometry::delta(double x1, double x2) const {
    double r = std::hypot(x1, x2);
    require_in_patch(r);
    return delta_r(r);
}

KellerEval GapGeometry::keller(double x1, double x2, double x3) const {
    double r = std::hypot(x1, x2);
    require_in_patch(r);
    double lo = bottom(r), hi = top(r);
    double tol = 1e-12 * std::max(1.0, hi - lo);
    if (x3 < lo - tol || x3 > hi + tol) throw DomainError("point outside the gap slab");
    double dl = delta_r(r), dd = d_r(r);
    KellerEval k;
    k.value = (x3 - 0.5 * dd) / dl;
    double dlr = delta_r(r, 1), ddr = d_r(r, 1);
    for (int i = 0; i < 2; ++i) {
        double xi = (i == 0 ? x1 : x2);
        double dir = r > 0.0 ? xi / r : 0.0;
        k.grad[i] = -(ddr * dir) / (2.0 * dl) - (dlr * dir) / dl * k.value;
    }
    k.grad[2] = 1.0 / dl;
    return k;
}

void GapGeometry::check_invariants(int samples) const {
    double C = comparability_constant();
    double rmax = outer_radius();
    for (int i = 0; i <= samples; ++i) {
        double r = rmax * i / samples;
        double dl = delta_r(r);
        double ref = eps_ + r * r;
        if (!(dl >= ref / C && dl <= C * ref))
            throw DomainError("delta is not comparable to eps + r^2 at r = " + std::to_string(r));
        if (!(bottom(r) < top(r))) throw DomainError("gap closes at r = " + std::to_string(r));
    }
}

}  // namespace gapflow
