#pragma once

#include <array>
#include <stdexcept>
#include <string>
#include <vector>

namespace gapflow {

class DomainError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Radial polynomial profile h(r) = sum_j c_j r^j.
class RadialProfile {
public:
    RadialProfile() = default;
    explicit RadialProfile(std::vector<double> coeffs);

    // n-th derivative in r at r (n >= 0).
    double derivative(double r, int n) const;
    double operator()(double r) const { return derivative(r, 0); }
    const std::vector<double>& coeffs() const { return c_; }

private:
    std::vector<double> c_;
};

struct KellerEval {
    double value = 0.0;
    std::array<double, 3> grad{};
};

// Two-inclusion gap: top face x3 = eps/2 + h1(r), bottom face x3 = -eps/2 - h2(r).
class GapGeometry {
public:
    GapGeometry(double eps, double R, double mu, RadialProfile h1, RadialProfile h2);

    static GapGeometry symmetric_default(double eps, double R = 1.0, double mu = 1.0);
    static GapGeometry asymmetric_default(double eps, double R = 1.0, double mu = 1.0);

    double eps() const { return eps_; }
    double R() const { return R_; }
    double mu() const { return mu_; }
    double outer_radius() const { return 2.0 * R_; }
    const RadialProfile& h1() const { return h1_; }
    const RadialProfile& h2() const { return h2_; }
    bool is_symmetric() const { return h1_.coeffs() == h2_.coeffs(); }

    // Coefficients a_j of h1 + h2 = sum_j a_j r^(j+1), j >= 1.
    const std::vector<double>& taylor() const { return taylor_; }
    // 10 * max(1, 1/a_1, sum |a_j|).
    double comparability_constant() const;

    // Radial functions and their r-derivatives of order n.
    double delta_r(double r, int n = 0) const;
    double d_r(double r, int n = 0) const;  // h1 - h2
    double c_r(double r, int n = 0) const;  // (eps + 2 h1)(eps + 2 h2) / 4
    double top(double r) const { return 0.5 * eps_ + h1_(r); }
    double bottom(double r) const { return -0.5 * eps_ - h2_(r); }

    double delta(double x1, double x2) const;
    KellerEval keller(double x1, double x2, double x3) const;

    // Samples the comparability and non-closing invariants; throws DomainError on failure.
    void check_invariants(int samples = 400) const;

private:
    void require_in_patch(double r) const;

    double eps_, R_, mu_;
    RadialProfile h1_, h2_;
    std::vector<double> taylor_;
};

RadialProfile poly_profile(std::vector<double> coeffs);

}  // namespace gapflow
