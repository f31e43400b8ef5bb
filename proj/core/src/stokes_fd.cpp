#include "gapflow/stokes_fd.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include "gapflow/aux_expansion.hpp"

namespace gapflow {

namespace {

using std::numbers::pi;

constexpr int kQ = 4;
constexpr std::array<double, kQ> kGaussX = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563,
                                             0.8611363115940526};
constexpr std::array<double, kQ> kGaussW = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461,
                                             0.3478548451374538};

std::array<double, 3> q2(double x) { return {0.5 * x * (x - 1.0), 1.0 - x * x, 0.5 * x * (x + 1.0)}; }
std::array<double, 3> q2d(double x) { return {x - 0.5, -2.0 * x, x + 0.5}; }
std::array<double, 2> q1(double x) { return {0.5 * (1.0 - x), 0.5 * (1.0 + x)}; }

// Angular weight of int cos^2 or int sin^2 over one turn.
double ang_weight(int m, bool is_sin) { return m == 0 ? (is_sin ? 0.0 : 2.0 * pi) : pi; }

struct Mesh {
    int nr, nt;
    std::vector<double> rv, zb, zt;  // per node column
    int ncol() const { return 2 * nr + 1; }
    int nrow() const { return 2 * nt + 1; }
    int nid(int i, int k) const { return i * nrow() + k; }
    int nnodes() const { return ncol() * nrow(); }
    int pid(int I, int K) const { return I * (nt + 1) + K; }
    int nverts() const { return (nr + 1) * (nt + 1); }
    double z(int i, int k) const { return zb[i] + (zt[i] - zb[i]) * k / (2.0 * nt); }
};

Mesh make_mesh(const GapGeometry& g, const StokesGrid& grid, double r_out) {
    Mesh m{grid.n_r, grid.n_t, {}, {}, {}};
    double a = std::sqrt(g.eps());
    double smax = std::asinh(r_out / a);
    for (int i = 0; i < m.ncol(); ++i) {
        double r = i == m.ncol() - 1 ? r_out : a * std::sinh(smax * i / (2.0 * m.nr));
        m.rv.push_back(r);
        m.zb.push_back(g.bottom(r));
        m.zt.push_back(g.top(r));
    }
    return m;
}

// Geometry and shape functions at one point of element (er, et).
struct ElemPoint {
    double r = 0, z = 0, det = 0;
    double rxi = 0, reta = 0, zxi = 0, zeta = 0;
    std::array<double, 9> N{}, Nr{}, Nz{};
    std::array<double, 4> M{};
    std::array<int, 9> node{};
    std::array<int, 4> vert{};
};

ElemPoint elem_point(const Mesh& m, int er, int et, double xi, double eta) {
    ElemPoint p;
    auto lx = q2(xi), ly = q2(eta), dx = q2d(xi), dy = q2d(eta);
    std::array<double, 9> Nxi{}, Neta{};
    double &rxi = p.rxi, &reta = p.reta, &zxi = p.zxi, &zeta = p.zeta;
    for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
            int l = a * 3 + b;
            int i = 2 * er + a, k = 2 * et + b;
            p.node[l] = m.nid(i, k);
            p.N[l] = lx[a] * ly[b];
            Nxi[l] = dx[a] * ly[b];
            Neta[l] = lx[a] * dy[b];
            double r = m.rv[i], z = m.z(i, k);
            p.r += p.N[l] * r;
            p.z += p.N[l] * z;
            rxi += Nxi[l] * r;
            reta += Neta[l] * r;
            zxi += Nxi[l] * z;
            zeta += Neta[l] * z;
        }
    p.det = rxi * zeta - reta * zxi;
    for (int l = 0; l < 9; ++l) {
        p.Nr[l] = (Nxi[l] * zeta - Neta[l] * zxi) / p.det;
        p.Nz[l] = (-Nxi[l] * reta + Neta[l] * rxi) / p.det;
    }
    auto px = q1(xi), py = q1(eta);
    for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
            p.M[a * 2 + b] = px[a] * py[b];
            p.vert[a * 2 + b] = m.pid(er + a, et + b);
        }
    return p;
}

// Fourier amplitudes of cylindrical components of a Cartesian vector function on a ring.
// out[family][m][c], family 0: (cos, sin, cos), family 1: (sin, cos, sin).
using Amp = std::vector<std::array<std::array<double, 3>, 2>>;

struct Dft {
    int n, mmax;
    std::vector<double> c, s;  // c[m * n + j]
    Dft(int n_theta) : n(n_theta), mmax(n_theta / 2 - 1) {
        for (int m = 0; m <= mmax; ++m)
            for (int j = 0; j < n; ++j) {
                c.push_back(std::cos(m * 2 * pi * j / n));
                s.push_back(std::sin(m * 2 * pi * j / n));
            }
    }
    Amp vec(const VecFn& f, double r, double z) const {
        Amp out(mmax + 1);
        for (auto& o : out) o = {};
        if (!f) return out;
        std::vector<std::array<double, 3>> cyl(n);
        for (int j = 0; j < n; ++j) {
            double th = 2 * pi * j / n, ct = std::cos(th), st = std::sin(th);
            auto v = f(r * ct, r * st, z);
            cyl[j] = {v[0] * ct + v[1] * st, -v[0] * st + v[1] * ct, v[2]};
        }
        for (int m = 0; m <= mmax; ++m) {
            double sc = (m == 0 ? 1.0 : 2.0) / n;
            for (int j = 0; j < n; ++j) {
                double cm = c[m * n + j], sm = s[m * n + j];
                out[m][0][0] += sc * cyl[j][0] * cm;
                out[m][0][1] += sc * cyl[j][1] * sm;
                out[m][0][2] += sc * cyl[j][2] * cm;
                out[m][1][0] += sc * cyl[j][0] * sm;
                out[m][1][1] += sc * cyl[j][1] * cm;
                out[m][1][2] += sc * cyl[j][2] * sm;
            }
        }
        return out;
    }
    // out[m] = {cos amplitude, sin amplitude}
    std::vector<std::array<double, 2>> scalar(const ScalarFn& f, double r, double z) const {
        std::vector<std::array<double, 2>> out(mmax + 1, {0.0, 0.0});
        if (!f) return out;
        for (int j = 0; j < n; ++j) {
            double th = 2 * pi * j / n;
            double v = f(r * std::cos(th), r * std::sin(th), z);
            for (int m = 0; m <= mmax; ++m) {
                double sc = (m == 0 ? 1.0 : 2.0) / n;
                out[m][0] += sc * v * c[m * n + j];
                out[m][1] += sc * v * s[m * n + j];
            }
        }
        return out;
    }
};

struct Slot {
    int g = -1;         // unknown index, -1 when known
    double coef = 1.0;  // value = coef * x[g]
    double known = 0.0;
};

struct Data {
    // Boundary amplitudes per node (empty entries for interior nodes).
    std::vector<Amp> bnd;
    std::vector<char> is_bnd;
    // Per element and quadrature point.
    std::vector<Amp> force;
    std::vector<std::vector<std::array<double, 2>>> gdat;
};

double mode_scale(const Data& d, int m, int fam) {
    double s = 0.0;
    for (std::size_t n = 0; n < d.bnd.size(); ++n)
        if (d.is_bnd[n])
            for (int c = 0; c < 3; ++c) s = std::max(s, std::abs(d.bnd[n][m][fam][c]));
    for (const auto& a : d.force)
        for (int c = 0; c < 3; ++c) s = std::max(s, std::abs(a[m][fam][c]));
    for (const auto& a : d.gdat) s = std::max(s, std::abs(a[m][fam]));
    return s;
}

struct ModeResult {
    ModeSolution sol;
    double mom = 0.0, div = 0.0, flux = 0.0;
    std::vector<double> history;
};

ModeResult solve_mode(const Mesh& mesh, const Data& data, double mu, int m, int fam, int pin) {
    const double sigma = fam == 0 ? 1.0 : -1.0;
    const double meff = sigma * m;
    const double wR = ang_weight(m, fam == 1), wT = ang_weight(m, fam == 0);
    const int nn = mesh.nnodes(), nv = mesh.nverts();
    const int top = mesh.nrow() - 1, side = mesh.ncol() - 1;

    // Velocity slots per (node, component), pressure slots per vertex.
    std::vector<Slot> vs(3 * nn), ps(nv);
    int nu = 0;
    for (int i = 0; i < mesh.ncol(); ++i)
        for (int k = 0; k < mesh.nrow(); ++k) {
            int n = mesh.nid(i, k);
            Slot* s = &vs[3 * n];
            bool face = k == 0 || k == top, wall = i == side;
            if (face || wall) {
                for (int c = 0; c < 3; ++c) s[c] = {-1, 1.0, data.bnd[n][m][fam][c]};
                continue;
            }
            // Components that never enter the weak form for this family.
            bool dead_r = wR == 0.0, dead_t = wT == 0.0, dead_z = wR == 0.0;
            if (i == 0) {
                if (m == 0) {
                    s[0] = {-1, 1.0, 0.0};
                    s[1] = {-1, 1.0, 0.0};
                    s[2] = dead_z ? Slot{-1, 1.0, 0.0} : Slot{nu++, 1.0, 0.0};
                } else if (m == 1) {
                    s[0] = {nu++, 1.0, 0.0};
                    s[1] = {s[0].g, -sigma, 0.0};
                    s[2] = {-1, 1.0, 0.0};
                } else {
                    for (int c = 0; c < 3; ++c) s[c] = {-1, 1.0, 0.0};
                }
                continue;
            }
            s[0] = dead_r ? Slot{-1, 1.0, 0.0} : Slot{nu++, 1.0, 0.0};
            s[1] = dead_t ? Slot{-1, 1.0, 0.0} : Slot{nu++, 1.0, 0.0};
            s[2] = dead_z ? Slot{-1, 1.0, 0.0} : Slot{nu++, 1.0, 0.0};
        }
    const bool has_p = wR != 0.0;
    const bool null_mode = has_p && m == 0;
    if (null_mode && (pin < 0 || pin >= nv)) throw DomainError("pressure pin outside the vertex range");
    int np = 0;
    for (int I = 0; I <= mesh.nr; ++I)
        for (int K = 0; K <= mesh.nt; ++K) {
            int v = mesh.pid(I, K);
            bool fixed = !has_p || (m > 0 && I == 0) || (null_mode && v == pin);
            ps[v] = fixed ? Slot{-1, 1.0, 0.0} : Slot{nu + np++, 1.0, 0.0};
        }
    const int N = nu + np;

    ModeResult res;
    // Dropping the pinned continuity row is harmless only if int (div u_known + g) = 0; a uniform radial
    // velocity c on the side wall restores this when the data are slightly incompatible.
    if (null_mode) {
        double mis = 0.0, unit = 0.0, scale = 0.0;
        for (int er = 0; er < mesh.nr; ++er)
            for (int et = 0; et < mesh.nt; ++et)
                for (int qa = 0; qa < kQ; ++qa)
                    for (int qb = 0; qb < kQ; ++qb) {
                        ElemPoint p = elem_point(mesh, er, et, kGaussX[qa], kGaussX[qb]);
                        double dV = wR * p.r * p.det * kGaussW[qa] * kGaussW[qb];
                        int e = er * mesh.nt + et;
                        double gq = data.gdat.empty() ? 0.0 : data.gdat[e * kQ * kQ + qa * kQ + qb][0][0];
                        double dk = 0.0, du = 0.0;
                        for (int l = 0; l < 9; ++l) {
                            const Slot* sl = &vs[3 * p.node[l]];
                            double dr = p.Nr[l] + p.N[l] / p.r;
                            if (sl[0].g < 0) dk += dr * sl[0].known;
                            if (sl[2].g < 0) dk += p.Nz[l] * sl[2].known;
                            int i = p.node[l] / mesh.nrow(), k = p.node[l] % mesh.nrow();
                            if (i == side && k != 0 && k != top) du += dr;
                        }
                        mis += (dk + gq) * dV;
                        unit += du * dV;
                        scale += (std::abs(dk) + std::abs(gq)) * dV;
                    }
        res.flux = scale > 0 ? std::abs(mis) / scale : 0.0;
        if (mis != 0.0 && unit != 0.0)
            for (int k = 1; k < top; ++k) vs[3 * mesh.nid(side, k)].known -= mis / unit;
    }

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(N);

    auto add = [&](const Slot& row, const Slot& col, double v) {
        if (row.g < 0) return;
        if (col.g >= 0)
            trip.emplace_back(row.g, col.g, row.coef * col.coef * v);
        else
            rhs[row.g] -= row.coef * v * col.known;
    };

    for (int er = 0; er < mesh.nr; ++er)
        for (int et = 0; et < mesh.nt; ++et) {
            int e = er * mesh.nt + et;
            for (int qa = 0; qa < kQ; ++qa)
                for (int qb = 0; qb < kQ; ++qb) {
                    ElemPoint p = elem_point(mesh, er, et, kGaussX[qa], kGaussX[qb]);
                    double dV = p.r * p.det * kGaussW[qa] * kGaussW[qb];
                    double ir = 1.0 / p.r;
                    // Gradient entries (rr, rt, rz, tr, tt, tz, zr, zt, zz) and divergence of each basis function.
                    std::array<std::array<double, 9>, 27> G{};
                    std::array<double, 27> D{};
                    for (int l = 0; l < 9; ++l) {
                        double f = p.N[l], fr = p.Nr[l], fz = p.Nz[l];
                        auto& gr = G[3 * l];
                        gr[0] = fr;
                        gr[1] = -meff * f * ir;
                        gr[2] = fz;
                        gr[4] = f * ir;
                        D[3 * l] = fr + f * ir;
                        auto& gt = G[3 * l + 1];
                        gt[1] = -f * ir;
                        gt[3] = fr;
                        gt[4] = meff * f * ir;
                        gt[5] = fz;
                        D[3 * l + 1] = meff * f * ir;
                        auto& gz = G[3 * l + 2];
                        gz[6] = fr;
                        gz[7] = -meff * f * ir;
                        gz[8] = fz;
                        D[3 * l + 2] = fz;
                    }
                    const std::array<double, 9> w = {wR, wT, wR, wT, wR, wT, wR, wT, wR};
                    const std::array<double, 3> wc = {wR, wT, wR};
                    const Amp& F = data.force[e * kQ * kQ + qa * kQ + qb];
                    double gq = data.gdat.empty() ? 0.0 : data.gdat[e * kQ * kQ + qa * kQ + qb][m][fam];
                    for (int a = 0; a < 27; ++a) {
                        const Slot& row = vs[3 * p.node[a / 3] + a % 3];
                        if (row.g >= 0) rhs[row.g] += row.coef * wc[a % 3] * F[m][fam][a % 3] * p.N[a / 3] * dV;
                        for (int b = 0; b < 27; ++b) {
                            double v = 0.0;
                            for (int t = 0; t < 9; ++t) v += w[t] * G[a][t] * G[b][t];
                            if (v != 0.0) add(row, vs[3 * p.node[b / 3] + b % 3], mu * v * dV);
                        }
                    }
                    if (!has_p) continue;
                    for (int q = 0; q < 4; ++q) {
                        const Slot& pr = ps[p.vert[q]];
                        if (pr.g >= 0) rhs[pr.g] += wR * gq * p.M[q] * dV;
                        for (int b = 0; b < 27; ++b) {
                            double v = -wR * p.M[q] * D[b] * dV;
                            if (v == 0.0) continue;
                            const Slot& col = vs[3 * p.node[b / 3] + b % 3];
                            add(pr, col, v);
                            add(col, pr, v);
                        }
                    }
                }
        }

    Eigen::SparseMatrix<double> K(N, N);
    K.setFromTriplets(trip.begin(), trip.end());
    K.makeCompressed();
    // Rows that received nothing (components absent from this family) become identities.
    {
        std::vector<char> seen(N, 0);
        for (int c = 0; c < K.outerSize(); ++c)
            for (Eigen::SparseMatrix<double>::InnerIterator it(K, c); it; ++it)
                if (it.value() != 0.0) seen[it.row()] = 1;
        bool patched = false;
        for (int r = 0; r < N; ++r)
            if (!seen[r]) {
                trip.emplace_back(r, r, 1.0);
                rhs[r] = 0.0;
                patched = true;
            }
        if (patched) {
            K.setFromTriplets(trip.begin(), trip.end());
            K.makeCompressed();
        }
    }

    Eigen::VectorXd x = Eigen::VectorXd::Zero(N);
    if (N > 0) {
        Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
        lu.compute(K);
        if (lu.info() != Eigen::Success) {
            std::ostringstream os;
            os << "singular Stokes system for mode " << m << (fam ? " (sine family)" : " (cosine family)")
               << "; null mode: " << (null_mode ? "constant pressure (check the pressure pin)" : "none expected")
               << "; " << lu.lastErrorMessage();
            throw SingularSystemError(os.str());
        }
        x = lu.solve(rhs);
        double bn = std::max(rhs.lpNorm<Eigen::Infinity>(), std::numeric_limits<double>::min());
        Eigen::VectorXd r = rhs - K * x;
        res.history.push_back(r.lpNorm<Eigen::Infinity>() / bn);
        for (int it = 0; it < 3 && res.history.back() > 1e-13; ++it) {
            x += lu.solve(r);
            r = rhs - K * x;
            res.history.push_back(r.lpNorm<Eigen::Infinity>() / bn);
        }
        if (!std::isfinite(res.history.back()) || res.history.back() > 1e-9) {
            std::ostringstream os;
            os << "Stokes solve did not reach 1e-9 for mode " << m << "; residual history:";
            for (double h : res.history) os << " " << h;
            throw SolverError(os.str(), res.history);
        }
        res.mom = r.head(nu).lpNorm<Eigen::Infinity>() / bn;
        res.div = np > 0 ? r.tail(np).lpNorm<Eigen::Infinity>() / bn : 0.0;
    }

    ModeSolution& s = res.sol;
    s.m = m;
    s.sine = fam == 1;
    s.Ur.resize(nn);
    s.Ut.resize(nn);
    s.Uz.resize(nn);
    auto val = [&](const Slot& sl) { return sl.g >= 0 ? sl.coef * x[sl.g] : sl.known; };
    for (int n = 0; n < nn; ++n) {
        s.Ur[n] = val(vs[3 * n]);
        s.Ut[n] = val(vs[3 * n + 1]);
        s.Uz[n] = val(vs[3 * n + 2]);
    }
    s.P.resize(nv);
    for (int v = 0; v < nv; ++v) s.P[v] = val(ps[v]);
    if (null_mode) {
        // Zero mean over the gap volume.
        double num = 0.0, den = 0.0;
        for (int er = 0; er < mesh.nr; ++er)
            for (int et = 0; et < mesh.nt; ++et)
                for (int qa = 0; qa < kQ; ++qa)
                    for (int qb = 0; qb < kQ; ++qb) {
                        ElemPoint p = elem_point(mesh, er, et, kGaussX[qa], kGaussX[qb]);
                        double dV = p.r * p.det * kGaussW[qa] * kGaussW[qb];
                        double pv = 0.0;
                        for (int q = 0; q < 4; ++q) pv += p.M[q] * s.P[p.vert[q]];
                        num += pv * dV;
                        den += dV;
                    }
        for (double& v : s.P) v -= num / den;
    }
    return res;
}

}  // namespace

StokesSolution::StokesSolution(const StokesProblem& p)
    : geom_(p.geom), grid_(p.grid), r_out_(p.r_out > 0 ? p.r_out : p.geom.outer_radius()) {
    Mesh m = make_mesh(geom_, grid_, r_out_);
    rv_ = m.rv;
    zb_ = m.zb;
    zt_ = m.zt;
}

StokesSolution::Located StokesSolution::locate(double r, double z) const {
    Mesh mesh{grid_.n_r, grid_.n_t, rv_, zb_, zt_};
    r = std::clamp(r, 0.0, r_out_);
    int er = 0;
    while (er < grid_.n_r - 1 && rv_[2 * er + 2] < r) ++er;
    double zb = geom_.bottom(r), zt = geom_.top(r);
    double t = std::clamp((z - zb) / (zt - zb), 0.0, 1.0);
    int et = std::min(grid_.n_t - 1, static_cast<int>(t * grid_.n_t));
    Located best;
    double best_out = std::numeric_limits<double>::infinity();
    for (int tries = 0; tries < 3; ++tries) {
        double xi = 0.0, eta = 0.0;
        for (int it = 0; it < 30; ++it) {
            ElemPoint p = elem_point(mesh, er, et, xi, eta);
            double a = p.rxi, b = p.reta, c = p.zxi, d = p.zeta, det = p.det;
            double fr = r - p.r, fz = z - p.z;
            double dxi = (d * fr - b * fz) / det, deta = (-c * fr + a * fz) / det;
            xi += dxi;
            eta += deta;
            if (std::abs(dxi) + std::abs(deta) < 1e-14) break;
        }
        double out = std::max(std::abs(xi), std::abs(eta)) - 1.0;
        if (out < best_out) {
            best_out = out;
            best = {er, et, std::clamp(xi, -1.0, 1.0), std::clamp(eta, -1.0, 1.0)};
        }
        if (out <= 1e-10) break;
        if (eta > 1.0 && et < grid_.n_t - 1) ++et;
        else if (eta < -1.0 && et > 0) --et;
        else if (xi > 1.0 && er < grid_.n_r - 1) ++er;
        else if (xi < -1.0 && er > 0) --er;
        else break;
    }
    return best;
}

namespace {

struct ModeValues {
    double Ur, Ut, Uz, Urr, Urz, Utr, Utz, Uzr, Uzz, P;
};

}  // namespace

std::array<double, 3> StokesSolution::velocity(double x1, double x2, double x3) const {
    double r = std::hypot(x1, x2), th = std::atan2(x2, x1);
    Located L = locate(r, x3);
    Mesh mesh{grid_.n_r, grid_.n_t, rv_, zb_, zt_};
    ElemPoint p = elem_point(mesh, L.er, L.et, L.xi, L.eta);
    double ur = 0, ut = 0, uz = 0;
    for (const auto& s : modes_) {
        double Ur = 0, Ut = 0, Uz = 0;
        for (int l = 0; l < 9; ++l) {
            Ur += p.N[l] * s.Ur[p.node[l]];
            Ut += p.N[l] * s.Ut[p.node[l]];
            Uz += p.N[l] * s.Uz[p.node[l]];
        }
        double c = std::cos(s.m * th), sn = std::sin(s.m * th);
        double Tr = s.sine ? sn : c, Tt = s.sine ? c : sn;
        ur += Ur * Tr;
        ut += Ut * Tt;
        uz += Uz * Tr;
    }
    double ct = std::cos(th), st = std::sin(th);
    return {ur * ct - ut * st, ur * st + ut * ct, uz};
}

double StokesSolution::pressure(double x1, double x2, double x3) const {
    double r = std::hypot(x1, x2), th = std::atan2(x2, x1);
    Located L = locate(r, x3);
    Mesh mesh{grid_.n_r, grid_.n_t, rv_, zb_, zt_};
    ElemPoint p = elem_point(mesh, L.er, L.et, L.xi, L.eta);
    double out = 0.0;
    for (const auto& s : modes_) {
        double P = 0.0;
        for (int q = 0; q < 4; ++q) P += p.M[q] * s.P[p.vert[q]];
        out += P * (s.sine ? std::sin(s.m * th) : std::cos(s.m * th));
    }
    return out;
}

std::array<std::array<double, 3>, 3> StokesSolution::gradient(double x1, double x2, double x3) const {
    double r = std::max(std::hypot(x1, x2), 1e-12 * r_out_), th = std::atan2(x2, x1);
    Located L = locate(r, x3);
    Mesh mesh{grid_.n_r, grid_.n_t, rv_, zb_, zt_};
    ElemPoint p = elem_point(mesh, L.er, L.et, L.xi, L.eta);
    double ir = 1.0 / p.r;
    // Cylindrical gradient, rows (u_r, u_t, u_z), columns (d_r, (1/r) d_t, d_z) with the frame terms.
    std::array<std::array<double, 3>, 3> G{};
    for (const auto& s : modes_) {
        ModeValues v{};
        for (int l = 0; l < 9; ++l) {
            int n = p.node[l];
            v.Ur += p.N[l] * s.Ur[n];
            v.Ut += p.N[l] * s.Ut[n];
            v.Uz += p.N[l] * s.Uz[n];
            v.Urr += p.Nr[l] * s.Ur[n];
            v.Urz += p.Nz[l] * s.Ur[n];
            v.Utr += p.Nr[l] * s.Ut[n];
            v.Utz += p.Nz[l] * s.Ut[n];
            v.Uzr += p.Nr[l] * s.Uz[n];
            v.Uzz += p.Nz[l] * s.Uz[n];
        }
        double meff = s.sine ? -s.m : s.m;
        double c = std::cos(s.m * th), sn = std::sin(s.m * th);
        double Tr = s.sine ? sn : c, Tt = s.sine ? c : sn;
        G[0][0] += v.Urr * Tr;
        G[0][1] += (-meff * v.Ur - v.Ut) * ir * Tt;
        G[0][2] += v.Urz * Tr;
        G[1][0] += v.Utr * Tt;
        G[1][1] += (meff * v.Ut + v.Ur) * ir * Tr;
        G[1][2] += v.Utz * Tt;
        G[2][0] += v.Uzr * Tr;
        G[2][1] += -meff * v.Uz * ir * Tt;
        G[2][2] += v.Uzz * Tr;
    }
    double ct = std::cos(th), st = std::sin(th);
    // Q columns: e_r, e_t, e_z.
    std::array<std::array<double, 3>, 3> Q = {{{ct, -st, 0}, {st, ct, 0}, {0, 0, 1}}};
    std::array<std::array<double, 3>, 3> out{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            double v = 0.0;
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) v += Q[i][a] * G[a][b] * Q[j][b];
            out[i][j] = v;
        }
    return out;
}

double StokesSolution::gradient_norm(double x1, double x2, double x3) const {
    auto g = gradient(x1, x2, x3);
    double s = 0.0;
    for (const auto& row : g)
        for (double v : row) s += v * v;
    return std::sqrt(s);
}

StokesSolution::Sampled StokesSolution::sample() const {
    Sampled out;
    for (int i = 0; i < static_cast<int>(rv_.size()); i += 2) out.r.push_back(rv_[i]);
    for (int j = 0; j < grid_.n_theta; ++j) out.theta.push_back(2 * pi * j / grid_.n_theta);
    for (int k = 0; k <= grid_.n_t; ++k) out.t.push_back(static_cast<double>(k) / grid_.n_t);
    for (double r : out.r)
        for (double th : out.theta)
            for (double t : out.t) {
                double z = geom_.bottom(r) + t * (geom_.top(r) - geom_.bottom(r));
                double x1 = r * std::cos(th), x2 = r * std::sin(th);
                out.u.push_back(velocity(x1, x2, z));
                out.p.push_back(pressure(x1, x2, z));
            }
    return out;
}

StokesSolution solve(const StokesProblem& prob) {
    const StokesGrid& g = prob.grid;
    if (g.n_r < 2 || g.n_t < 1 || g.n_theta < 4) throw DomainError("Stokes grid too small");
    if (!prob.allow_large && static_cast<long>(g.n_r) * g.n_theta * g.n_t > 64L * 64 * 24)
        throw DomainError("Stokes grid exceeds the 64 x 64 x 24 memory budget");
    StokesSolution sol(prob);
    Mesh mesh = make_mesh(prob.geom, g, sol.r_out_);
    Dft dft(g.n_theta);

    Data d;
    d.bnd.resize(mesh.nnodes());
    d.is_bnd.assign(mesh.nnodes(), 0);
    const int top = mesh.nrow() - 1, side = mesh.ncol() - 1;
    for (int i = 0; i < mesh.ncol(); ++i)
        for (int k = 0; k < mesh.nrow(); ++k) {
            const VecFn* f = nullptr;
            if (k == 0) f = &prob.bottom_bc;
            else if (k == top) f = &prob.top_bc;
            else if (i == side) f = &prob.lateral_bc;
            int n = mesh.nid(i, k);
            d.bnd[n] = Amp(dft.mmax + 1);
            for (auto& a : d.bnd[n]) a = {};
            if (!f) continue;
            d.is_bnd[n] = 1;
            d.bnd[n] = dft.vec(*f, mesh.rv[i], mesh.z(i, k));
        }
    for (int er = 0; er < mesh.nr; ++er)
        for (int et = 0; et < mesh.nt; ++et)
            for (int qa = 0; qa < kQ; ++qa)
                for (int qb = 0; qb < kQ; ++qb) {
                    ElemPoint p = elem_point(mesh, er, et, kGaussX[qa], kGaussX[qb]);
                    d.force.push_back(dft.vec(prob.body_force, p.r, p.z));
                    if (prob.divergence_data) d.gdat.push_back(dft.scalar(prob.divergence_data, p.r, p.z));
                }

    double global = 0.0;
    std::vector<std::array<double, 2>> scale(dft.mmax + 1);
    for (int m = 0; m <= dft.mmax; ++m)
        for (int fam = 0; fam < 2; ++fam) {
            scale[m][fam] = mode_scale(d, m, fam);
            global = std::max(global, scale[m][fam]);
        }
    for (int m = 0; m <= dft.mmax; ++m)
        for (int fam = 0; fam < 2; ++fam) {
            if (global == 0.0 || scale[m][fam] <= 1e-12 * global) continue;
            ModeResult r = solve_mode(mesh, d, prob.geom.mu(), m, fam, prob.pressure_pin);
            sol.momentum_residual = std::max(sol.momentum_residual, r.mom);
            sol.divergence_residual = std::max(sol.divergence_residual, r.div);
            sol.flux_mismatch = std::max(sol.flux_mismatch, r.flux);
            sol.residual_history.insert(sol.residual_history.end(), r.history.begin(), r.history.end());
            sol.modes_.push_back(std::move(r.sol));
        }
    return sol;
}

double neck_gradient(const StokesSolution& s) {
    const GapGeometry& g = s.geom();
    double a = std::sqrt(g.eps()), best = 0.0;
    for (double fr : {0.02, 0.25, 0.5, 0.75, 1.0})
        for (int j = 0; j < 8; ++j)
            for (int k = 0; k <= 8; ++k) {
                double r = fr * a, th = 2 * pi * j / 8;
                double z = g.bottom(r) + (g.top(r) - g.bottom(r)) * k / 8.0;
                best = std::max(best, s.gradient_norm(r * std::cos(th), r * std::sin(th), z));
            }
    return best;
}

StokesProblem model_problem(int alpha, double eps, const StokesGrid& grid) {
    StokesProblem p{GapGeometry::symmetric_default(eps), grid};
    auto chain = std::make_shared<ExpansionChain>(build_chain(make_disk(p.geom, 512, 8), alpha, 1));
    auto v = std::make_shared<VecField>(velocity(*chain, 1));
    p.top_bc = [alpha](double x1, double x2, double x3) { return rigid_motion(alpha, x1, x2, x3); };
    p.lateral_bc = [v](double x1, double x2, double x3) { return eval(*v, x1, x2, x3); };
    return p;
}

std::vector<double> default_sweep_eps() { return {1e-1, 3e-2, 1e-2, 3e-3, 1e-3}; }

BlowupSweep blowup_sweep(int alpha, const std::vector<double>& eps, const StokesGrid& grid) {
    if (eps.size() < 4) throw FitError("blow-up sweep needs at least 4 eps values");
    BlowupSweep out;
    out.alpha = alpha;
    out.eps = eps;
    out.grad_center.assign(eps.size(), 0.0);
    out.solve_seconds.assign(eps.size(), 0.0);
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        for (std::size_t i; (i = next++) < eps.size();) {
            try {
                auto t0 = std::chrono::steady_clock::now();
                StokesSolution s = solve(model_problem(alpha, eps[i], grid));
                out.grad_center[i] = neck_gradient(s);
                out.solve_seconds[i] =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            } catch (...) {
                std::lock_guard<std::mutex> lk(err_mu);
                if (!err) err = std::current_exception();
            }
        }
    };
    int nt = std::min<int>(worker_threads(), static_cast<int>(eps.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
    Samples all;
    for (std::size_t i = 0; i < eps.size(); ++i) {
        all.emplace_back(eps[i], out.grad_center[i]);
        double run = std::numeric_limits<double>::quiet_NaN();
        if (i >= 1) {
            Samples part(all.begin(), all.end());
            run = fit_decay(part, 2, 0.0).beta;
        }
        out.exponent_running.push_back(run);
    }
    out.fit = fit_decay(all, 4, 1.5);
    return out;
}

std::string sweep_csv(const BlowupSweep& s) {
    std::ostringstream os;
    os.precision(10);
    os << "eps,grad_center,exponent_running,solve_seconds\n";
    for (std::size_t i = 0; i < s.eps.size(); ++i)
        os << s.eps[i] << "," << s.grad_center[i] << "," << s.exponent_running[i] << "," << s.solve_seconds[i]
           << "\n";
    return os.str();
}

KeypropReport keyprop_check(double l_class, double alpha_class, int m, double eps, const StokesGrid& grid) {
    if (m < 0 || m > 1) throw DomainError("manufactured-data check supports m = 0 and m = 1");
    KeypropReport rep;
    rep.l_class = l_class;
    rep.alpha_class = alpha_class;
    rep.m = m;
    rep.predicted_grad = std::min(l_class + 1.0, alpha_class) - m;
    rep.predicted_energy = std::isfinite(alpha_class) ? 3.0 + 2.0 * alpha_class
                                                      : std::numeric_limits<double>::quiet_NaN();
    StokesProblem p{GapGeometry::symmetric_default(eps), grid};
    const GapGeometry geom = p.geom;
    if (std::isfinite(l_class))
        p.body_force = [geom, l_class](double x1, double x2, double) {
            return std::array<double, 3>{std::pow(geom.delta(x1, x2), l_class), 0.0, 0.0};
        };
    if (std::isfinite(alpha_class))
        p.divergence_data = [geom, alpha_class](double x1, double x2, double x3) {
            return 2.0 * geom.keller(x1, x2, x3).value * std::pow(geom.delta(x1, x2), alpha_class);
        };
    StokesSolution s = solve(p);

    auto measure = [&](double x1, double x2, double x3) {
        if (m == 0) return s.gradient_norm(x1, x2, x3);
        // Second derivatives by central differences of the gradient.
        double h = 0.05 * geom.delta(x1, x2);
        double acc = 0.0;
        std::array<double, 3> x{x1, x2, x3};
        for (int j = 0; j < 3; ++j) {
            auto xp = x, xm = x;
            xp[j] += h;
            xm[j] -= h;
            auto gp = s.gradient(xp[0], xp[1], xp[2]), gm = s.gradient(xm[0], xm[1], xm[2]);
            for (int a = 0; a < 3; ++a)
                for (int b = 0; b < 3; ++b) acc += std::pow((gp[a][b] - gm[a][b]) / (2 * h), 2);
        }
        return std::sqrt(acc);
    };

    FitWindow w;
    double dmax = geom.delta_r(w.r_max_over_R * geom.R());
    for (double dk = w.delta_min_over_eps * eps; dk <= dmax; dk *= 2.0) {
        // Center z' = (r0, 0) with delta(r0) = dk.
        double lo = 0.0, hi = w.r_max_over_R * geom.R();
        for (int it = 0; it < 200; ++it) {
            double mid = 0.5 * (lo + hi);
            (geom.delta_r(mid) < dk ? lo : hi) = mid;
        }
        double r0 = 0.5 * (lo + hi);
        double rho = 0.5 * dk, sup = 0.0;
        for (int ring = 0; ring <= 2; ++ring)
            for (int j = 0; j < (ring ? 8 : 1); ++j) {
                double x1 = r0 + ring * 0.5 * rho * std::cos(2 * pi * j / 8), x2 = ring * 0.5 * rho * std::sin(2 * pi * j / 8);
                double r = std::hypot(x1, x2);
                double zb = geom.bottom(r), zt = geom.top(r);
                // Interior heights keep the difference stencil inside the gap.
                for (int k = 0; k <= 10; ++k) {
                    double t = m == 0 ? k / 10.0 : 0.05 + 0.9 * k / 10.0;
                    double x3 = zb + t * (zt - zb);
                    sup = std::max(sup, measure(x1, x2, x3));
                    auto u = s.velocity(x1, x2, x3);
                    rep.w_max = std::max(rep.w_max, std::abs(u[0]) + std::abs(u[1]) + std::abs(u[2]));
                }
            }
        rep.grad_samples.emplace_back(dk, sup);
        if (std::isfinite(alpha_class)) {
            // Energy over the cylinder of radius delta: Gauss in radius and height, uniform in angle.
            double E = 0.0;
            for (int a = 0; a < kQ; ++a)
                for (int j = 0; j < 16; ++j)
                    for (int b = 0; b < kQ; ++b) {
                        double rr = 0.5 * dk * (kGaussX[a] + 1.0), ph = 2 * pi * j / 16;
                        double x1 = r0 + rr * std::cos(ph), x2 = rr * std::sin(ph);
                        double r = std::hypot(x1, x2);
                        double zb = geom.bottom(r), zt = geom.top(r);
                        double x3 = zb + 0.5 * (kGaussX[b] + 1.0) * (zt - zb);
                        double gn = s.gradient_norm(x1, x2, x3);
                        E += gn * gn * rr * (0.5 * dk * kGaussW[a]) * (2 * pi / 16) * (0.5 * (zt - zb) * kGaussW[b]);
                    }
            rep.energy_samples.emplace_back(dk, E);
        }
    }
    // Zero data give w = 0 identically; there is nothing to fit.
    if (rep.w_max == 0.0) return rep;
    rep.grad_fit = fit_decay(rep.grad_samples);
    if (std::isfinite(alpha_class)) rep.energy_fit = fit_decay(rep.energy_samples);
    return rep;
}

}  // namespace gapflow
