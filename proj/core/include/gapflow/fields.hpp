#pragma once

#include <array>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflow/gap_geometry.hpp"

namespace gapflow {

class ModeOverflow : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Finite-difference weights (Fornberg) for derivative order m at x0 on nodes xs.
std::vector<double> fd_weights(const std::vector<double>& xs, double x0, int m);

// Radial grid on [0, 2R] with nodes r_j = sqrt(eps) sinh((j + 1/2) h), last node at 2R,
// together with the geometry sampled at the nodes.
class Disk {
public:
    Disk(const GapGeometry& geom, int nodes = 512, int mode_cap = 8);

    const GapGeometry& geom() const { return geom_; }
    int n() const { return n_; }
    int M() const { return M_; }
    double h() const { return h_; }
    double scale() const { return a_; }
    const std::vector<double>& r() const { return r_; }
    const std::vector<double>& r_s() const { return rs_; }
    const std::vector<double>& r_ss() const { return rss_; }
    double s_of_r(double r) const;

    // Geometry at nodes: delta, h1 - h2, (eps+2h1)(eps+2h2)/4 and radial derivatives.
    const std::vector<double>& delta() const { return delta_; }
    const std::vector<double>& delta_prime() const { return delta_p_; }
    const std::vector<double>& dgap() const { return d_; }
    const std::vector<double>& dgap_prime() const { return d_p_; }
    const std::vector<double>& cgap() const { return c_; }

    // d/dr of nodal values of a function with parity p (+1 even, -1 odd) in r.
    std::vector<double> d_dr(const std::vector<double>& a, int parity) const;
    // Interpolated value at radius r.
    double interp(const std::vector<double>& a, int parity, double r) const;

    // Stencil of the first or second s-derivative at node j: (node index, weight) pairs,
    // with ghost indices already folded onto real nodes (weight sign includes parity).
    std::vector<std::pair<int, double>> s_stencil(int j, int order, int parity) const;

    int first_node_at_or_above(double r) const;

private:
    GapGeometry geom_;
    int n_, M_;
    double a_, h_;
    std::vector<double> r_, rs_, rss_;
    std::vector<double> delta_, delta_p_, d_, d_p_, c_;
    // Weights for 7-point windows: centered and one-sided shifts near the outer end.
    std::vector<std::vector<double>> w1_, w2_;
};

using DiskPtr = std::shared_ptr<const Disk>;

DiskPtr make_disk(const GapGeometry& geom, int nodes = 512, int mode_cap = 8);

// Scalar function of x' on the disk: sum_n a_n(r) cos(n theta) + b_n(r) sin(n theta),
// stored value times delta^weight.
class CoeffField {
public:
    CoeffField() = default;
    explicit CoeffField(DiskPtr disk, double weight = 0.0);

    static CoeffField radial(DiskPtr disk, std::vector<double> a, double weight = 0.0);
    static CoeffField mode(DiskPtr disk, int n, bool sine, std::vector<double> a, double weight = 0.0);
    static CoeffField constant(DiskPtr disk, double c);
    // g(r) cos(n theta) or g(r) sin(n theta) from a closure.
    static CoeffField from_radial_function(DiskPtr disk, int n, bool sine,
                                           const std::function<double(double)>& g);
    // x_j as a field (j = 1, 2).
    static CoeffField coordinate(DiskPtr disk, int j);

    const DiskPtr& disk() const { return disk_; }
    double weight() const { return weight_; }
    bool has(int n, bool sine) const;
    const std::vector<double>& get(int n, bool sine) const;
    std::vector<double>& ref(int n, bool sine);
    void erase(int n, bool sine);
    // Drops mode arrays that are exactly zero.
    void prune();
    int max_mode() const;
    bool is_zero() const;
    // Largest stored coefficient magnitude in true (weighted) units.
    double max_abs() const;

    CoeffField with_weight(double w) const;
    CoeffField unweighted() const { return with_weight(0.0); }

    CoeffField operator-() const;
    CoeffField& operator+=(const CoeffField& o);
    CoeffField& operator-=(const CoeffField& o);
    CoeffField& operator*=(double s);
    friend CoeffField operator+(CoeffField a, const CoeffField& b) { return a += b; }
    friend CoeffField operator-(CoeffField a, const CoeffField& b) { return a -= b; }
    friend CoeffField operator*(CoeffField a, double s) { return a *= s; }
    friend CoeffField operator*(double s, CoeffField a) { return a *= s; }
    friend CoeffField operator*(const CoeffField& a, const CoeffField& b);

    // Multiply by a radial nodal array (mode 0, weight 0).
    CoeffField times_radial(const std::vector<double>& g) const;

    CoeffField d_dx(int j) const;
    CoeffField laplacian() const { return d_dx(1).d_dx(1) + d_dx(2).d_dx(2); }

    double eval(double x1, double x2) const;
    double eval_node(int j, double theta) const;

    // Mode-0 part only (throws unless the remainder is below tol * max_abs()).
    CoeffField radial_part(double tol) const;

private:
    CoeffField raw_d_dx(int j) const;

    DiskPtr disk_;
    double weight_ = 0.0;
    std::vector<std::vector<double>> cos_, sin_;
};

// Polynomial in x3 with CoeffField coefficients: sum_i c_i(x') x3^i.
class PolyField {
public:
    PolyField() = default;
    explicit PolyField(DiskPtr disk) : disk_(std::move(disk)) {}
    PolyField(DiskPtr disk, std::vector<CoeffField> c);

    static PolyField constant(const CoeffField& c);
    static PolyField monomial(const CoeffField& c, int power);
    static PolyField x3(DiskPtr disk);

    const DiskPtr& disk() const { return disk_; }
    int degree() const { return static_cast<int>(c_.size()) - 1; }
    const std::vector<CoeffField>& coeffs() const { return c_; }
    std::vector<CoeffField>& coeffs() { return c_; }
    CoeffField coeff(int i) const;
    bool is_zero() const;

    PolyField operator-() const;
    PolyField& operator+=(const PolyField& o);
    PolyField& operator-=(const PolyField& o);
    PolyField& operator*=(double s);
    friend PolyField operator+(PolyField a, const PolyField& b) { return a += b; }
    friend PolyField operator-(PolyField a, const PolyField& b) { return a -= b; }
    friend PolyField operator*(PolyField a, double s) { return a *= s; }
    friend PolyField operator*(double s, PolyField a) { return a *= s; }
    friend PolyField operator*(const PolyField& a, const PolyField& b);
    friend PolyField operator*(const PolyField& a, const CoeffField& b);
    friend PolyField operator*(const CoeffField& b, const PolyField& a) { return a * b; }

    PolyField d_dx3() const;
    PolyField d_dxj(int j) const;
    PolyField integrate_x3() const;  // antiderivative vanishing at x3 = 0
    PolyField laplacian_xp() const;
    PolyField laplacian() const;
    // Substitute x3 = z(x').
    CoeffField at(const CoeffField& z) const;

    // Division by the monic quadratic x3^2 + b1 x3 + b0: *this = q * quotient + r1 x3 + r0.
    PolyField divide_monic_quadratic(const CoeffField& b1, const CoeffField& b0, CoeffField& r1,
                                     CoeffField& r0) const;

    double eval(double x1, double x2, double x3) const;
    double eval_node(int j, double theta, double x3) const;
    int max_mode() const;

private:
    DiskPtr disk_;
    std::vector<CoeffField> c_;
};

using VecField = std::array<PolyField, 3>;

VecField operator+(const VecField& a, const VecField& b);
VecField operator-(const VecField& a, const VecField& b);
VecField operator*(double s, const VecField& a);
VecField zero_vec(const DiskPtr& disk);
PolyField divergence(const VecField& v);
VecField laplacian(const VecField& v);
VecField gradient(const PolyField& p);
std::array<double, 3> eval(const VecField& v, double x1, double x2, double x3);

// Geometry fields used by every construction.
struct GapFields {
    CoeffField delta, inv_delta, d, c;
    std::array<CoeffField, 2> grad_delta, grad_d;
    PolyField k;      // Keller function
    PolyField kfac;   // k^2 - 1/4
    std::array<PolyField, 2> grad_k;       // analytic x'-derivatives of k
    std::array<PolyField, 2> delta_grad_k; // delta * d_j k
};
GapFields gap_fields(const DiskPtr& disk);

// f * (k^2 - 1/4) expanded as a polynomial in x3.
PolyField mul_kfactor(const PolyField& f, const GapFields& g);

// Sample grid for sup norms: nodes in [r0, r1], theta samples and gap-height samples.
struct SampleSpec {
    int n_theta = 16;
    int n_x3 = 9;
};
double sup_on_annulus(const PolyField& f, double r0, double r1, const SampleSpec& spec = {});
double sup_on_annulus(const VecField& f, double r0, double r1, const SampleSpec& spec = {});

// Little-endian float64 payload (modes x nodes, row-major) plus JSON sidecar text.
struct FieldDump {
    std::vector<double> payload;
    std::string header_json;
};
FieldDump dump_field(const PolyField& f, int component_count = 1);
FieldDump dump_field(const VecField& f);

}  // namespace gapflow
