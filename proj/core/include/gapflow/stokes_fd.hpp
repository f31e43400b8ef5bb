#pragma once

#include <array>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "gapflow/gap_geometry.hpp"
#include "gapflow/verify.hpp"

namespace gapflow {

class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::vector<double> history)
        : std::runtime_error(what), history(std::move(history)) {}
    std::vector<double> history;  // relative residual after the solve and each refinement step
};

// Elements in r (sinh-graded), angular samples, elements across the gap in t = k + 1/2.
struct StokesGrid {
    int n_r = 48;
    int n_theta = 32;
    int n_t = 16;
};

using VecFn = std::function<std::array<double, 3>(double, double, double)>;
using ScalarFn = std::function<double(double, double, double)>;

// -mu Lap w + grad q = f, div w = -g in the gap over |x'| < r_out, w given on both faces and the side wall.
// Empty functions mean zero data.
struct StokesProblem {
    GapGeometry geom;
    StokesGrid grid;
    double r_out = 0.0;  // 0 means 2R
    VecFn top_bc, bottom_bc, lateral_bc;
    VecFn body_force;
    ScalarFn divergence_data;
    // Pressure vertex pinned for the constant-pressure null mode before the zero-mean shift.
    int pressure_pin = 0;
    // Lifts the 64 x 64 x 24 size limit.
    bool allow_large = false;
};

// One Fourier family: (u_r, u_theta, u_z, p) = (U_r c, U_t s, U_z c, P c) with c = cos m theta, s = sin m theta,
// or the sine family with cos and sin exchanged.
struct ModeSolution {
    int m = 0;
    bool sine = false;
    std::vector<double> Ur, Ut, Uz;  // per Q2 node
    std::vector<double> P;           // per Q1 vertex
};

class StokesSolution {
public:
    StokesSolution() = default;
    StokesSolution(const StokesProblem& p);

    std::array<double, 3> velocity(double x1, double x2, double x3) const;
    double pressure(double x1, double x2, double x3) const;
    // Cartesian gradient, g[i][j] = d_j u_i.
    std::array<std::array<double, 3>, 3> gradient(double x1, double x2, double x3) const;
    double gradient_norm(double x1, double x2, double x3) const;

    // Values on the mapped grid: mesh vertex radii, n_theta angles, n_t + 1 heights t in [0, 1].
    struct Sampled {
        std::vector<double> r, theta, t;
        std::vector<std::array<double, 3>> u;  // index (i * n_theta + j) * (n_t + 1) + k
        std::vector<double> p;
    };
    Sampled sample() const;

    const std::vector<ModeSolution>& modes() const { return modes_; }
    double r_out() const { return r_out_; }
    const GapGeometry& geom() const { return geom_; }

    // Algebraic residuals of the solved systems relative to their right-hand sides (max over modes).
    double momentum_residual = 0.0;
    double divergence_residual = 0.0;
    // Net boundary flux minus the integral of -g before the side-wall flux correction, relative to the
    // total absolute boundary flux.
    double flux_mismatch = 0.0;
    std::vector<double> residual_history;

private:
    friend StokesSolution solve(const StokesProblem& p);
    struct Located {
        int er = -1, et = -1;
        double xi = 0.0, eta = 0.0;
    };
    Located locate(double r, double z) const;

    GapGeometry geom_{1.0, 1.0, 1.0, RadialProfile({0.0, 0.0, 0.5}), RadialProfile({0.0, 0.0, 0.5})};
    StokesGrid grid_;
    double r_out_ = 0.0;
    std::vector<double> rv_, zb_, zt_;  // node radii and face heights, 2 n_r + 1
    std::vector<ModeSolution> modes_;
};

StokesSolution solve(const StokesProblem& p);

// Gradient norm sup over the neck |x'| <= sqrt(eps), all heights.
double neck_gradient(const StokesSolution& s);

// Model problem: psi_alpha on the top face, 0 on the bottom face, side wall from the first chain term.
StokesProblem model_problem(int alpha, double eps, const StokesGrid& grid = {});

struct BlowupSweep {
    int alpha = 1;
    std::vector<double> eps, grad_center, exponent_running, solve_seconds;
    DecayFit fit;
};
// Symmetric default geometry; needs at least 4 eps values spanning 1.5 decades.
BlowupSweep blowup_sweep(int alpha, const std::vector<double>& eps, const StokesGrid& grid = {});
std::vector<double> default_sweep_eps();
std::string sweep_csv(const BlowupSweep& s);

// Manufactured data f = delta^l e1 (l finite) and g = 2 k delta^alpha (alpha finite), zero traces.
// Infinite classes drop the corresponding datum.
struct KeypropReport {
    double l_class = 0.0, alpha_class = 0.0;
    int m = 0;
    double predicted_grad = 0.0;    // min(l + 1, alpha) - m
    double predicted_energy = 0.0;  // 3 + 2 alpha, NaN for alpha = inf
    DecayFit grad_fit, energy_fit;
    Samples grad_samples, energy_samples;
    double w_max = 0.0;  // sup |w| over the sampled centers
};
KeypropReport keyprop_check(double l_class, double alpha_class, int m = 0, double eps = 1e-3,
                            const StokesGrid& grid = {});

}  // namespace gapflow
