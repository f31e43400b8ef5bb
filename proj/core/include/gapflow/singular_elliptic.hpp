#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflow/fields.hpp"
#include "gapflow/verify.hpp"

namespace gapflow {

class QuadratureError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolveError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Delta U + 3 grad(h)/(eps + h) . grad U = F on |x'| < 2R with h = h1 + h2, U = bc at |x'| = 2R.
struct SingularEllipticProblem {
    DiskPtr disk;
    CoeffField rhs;
    double gamma = -2.5;
    double bc = 0.0;
    // Optional closed form of a radial F, used by the quadrature path instead of interpolation.
    std::function<double(double)> radial_rhs;
};

// phi'' + (1/r + 3 delta'/delta) phi' - n^2 phi / r^2 = f on the radial grid, phi(2R) = bc.
std::vector<double> solve_mode_array(const Disk& disk, int n, const std::vector<double>& f, double bc = 0.0);

// Solves the cos and sin parts of mode n of the right-hand side.
CoeffField solve_mode(const SingularEllipticProblem& p, int n);
// Solves every mode present in the right-hand side.
CoeffField solve(const SingularEllipticProblem& p);

// Mode-0 particular solution by nested Gauss-Kronrod quadrature.
CoeffField solve_radial_special(const SingularEllipticProblem& p, double tol = 1e-12);

// L U through the fields calculus.
CoeffField apply_operator(const CoeffField& U);
// max |L U - F| delta^(-gamma) over max |F| delta^(-gamma), on nodes with r <= r_max.
double weighted_residual(const SingularEllipticProblem& p, const CoeffField& U, double r_max_over_R = 1.0);

// Second-order polar finite differences on the sinh-mapped radius (validation path).
struct Sampled2D {
    std::vector<double> r, theta;
    std::vector<double> values;  // n_r x n_theta, row-major
    double at(int i, int k) const { return values[i * theta.size() + k]; }
};
Sampled2D solve_fd_2d(const SingularEllipticProblem& p, int n_r = 256, int n_theta = 64);
// max |sample - U(node)| / max |U(node)| over the FD nodes.
double relative_linf(const Sampled2D& s, const CoeffField& U);

struct UEstiResult {
    std::vector<DecayFit> fits;
    std::vector<Samples> data;
    std::vector<double> predicted;
    std::vector<bool> flagged;  // beta below prediction - 0.15
    Status status = Status::Pass;
    std::string note;
};
// Fits sup |grad^l U| over dyadic annuli against delta for l = 0..lmax.
UEstiResult verify_u_esti(const SingularEllipticProblem& p, const CoeffField& U, int lmax,
                          const FitWindow& w = {});

// All l-th order Cartesian partials of U.
std::vector<CoeffField> partials(const CoeffField& U, int l);

}  // namespace gapflow
