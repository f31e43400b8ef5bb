#include "gapflow/singular_elliptic.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <sstream>

namespace gapflow {

std::vector<double> solve_mode_array(const Disk& disk, int n, const std::vector<double>& f, double bc) {
    const int N = disk.n();
    const int parity = (n % 2 == 0) ? 1 : -1;
    const auto &r = disk.r(), &rs = disk.r_s(), &rss = disk.r_ss();
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b(N);
    for (int j = 0; j < N - 1; ++j) {
        double a2 = 1.0 / (rs[j] * rs[j]);
        double drift = 1.0 / r[j] + 3.0 * disk.delta_prime()[j] / disk.delta()[j];
        double a1 = -rss[j] / (rs[j] * rs[j] * rs[j]) + drift / rs[j];
        double a0 = -double(n) * n / (r[j] * r[j]);
        for (auto [i, w] : disk.s_stencil(j, 2, parity)) trip.emplace_back(j, i, a2 * w);
        for (auto [i, w] : disk.s_stencil(j, 1, parity)) trip.emplace_back(j, i, a1 * w);
        trip.emplace_back(j, j, a0);
        b[j] = f[j];
    }
    trip.emplace_back(N - 1, N - 1, 1.0);
    b[N - 1] = bc;
    Eigen::SparseMatrix<double> A(N, N);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolveError("mode " + std::to_string(n) + " factorization failed");
    Eigen::VectorXd x = lu.solve(b);
    return std::vector<double>(x.data(), x.data() + N);
}

CoeffField solve_mode(const SingularEllipticProblem& p, int n) {
    CoeffField out(p.disk);
    std::vector<double> zero(p.disk->n(), 0.0);
    CoeffField rhs = p.rhs.disk() ? p.rhs.unweighted() : CoeffField(p.disk);
    for (int s = 0; s < 2; ++s) {
        bool sine = s == 1;
        if (sine && n == 0) continue;
        bool has = rhs.has(n, sine);
        double bc = (n == 0 && !sine) ? p.bc : 0.0;
        if (!has && bc == 0.0) continue;
        const auto& f = has ? rhs.get(n, sine) : zero;
        out.ref(n, sine) = solve_mode_array(*p.disk, n, f, bc);
    }
    out.prune();
    return out;
}

CoeffField solve(const SingularEllipticProblem& p) {
    CoeffField out(p.disk);
    for (int n = 0; n <= p.disk->M(); ++n) out += solve_mode(p, n);
    return out;
}

CoeffField solve_radial_special(const SingularEllipticProblem& p, double tol) {
    using boost::math::quadrature::gauss_kronrod;
    const Disk& disk = *p.disk;
    const auto& geom = disk.geom();
    const double a = disk.scale();
    if (p.rhs.disk() && p.rhs.max_mode() > 0) throw DomainError("radial special solution needs a mode-0 right-hand side");
    std::function<double(double)> F = p.radial_rhs;
    CoeffField rhs0 = p.rhs.disk() ? p.rhs.unweighted() : CoeffField(p.disk);
    if (!F) {
        if (!rhs0.has(0, false)) return solve_mode(p, 0);
        const auto arr = rhs0.get(0, false);
        F = [&disk, arr](double r) { return disk.interp(arr, 1, r); };
    }
    // Integrands in u with r = sqrt(eps) sinh(u).
    auto inner = [&](double u) {
        double r = a * std::sinh(u), dl = geom.delta_r(r);
        return dl * dl * dl * F(r) * r * a * std::cosh(u);
    };
    auto checked = [&](auto&& fn, double lo, double hi, const char* what) {
        double err = 0.0, l1 = 0.0;
        double v = gauss_kronrod<double, 15>::integrate(fn, lo, hi, 8, 1e-10, &err, &l1);
        if (err > std::max(tol, 1e-9 * l1)) {
            std::ostringstream os;
            os << what << " quadrature did not converge on [" << lo << "," << hi << "]: refinement trace";
            for (int depth : {2, 5, 8}) {
                double e2 = 0.0;
                gauss_kronrod<double, 15>::integrate(fn, lo, hi, depth, 1e-10, &e2);
                os << " depth " << depth << " err " << e2 << ";";
            }
            throw QuadratureError(os.str());
        }
        return v;
    };
    const int N = disk.n();
    std::vector<double> ub(N + 1);
    ub[0] = 0.0;
    for (int j = 0; j < N; ++j) ub[j + 1] = disk.s_of_r(disk.r()[j]);
    std::vector<double> Icum(N + 1, 0.0);
    for (int j = 1; j <= N; ++j) Icum[j] = Icum[j - 1] + checked(inner, ub[j - 1], ub[j], "inner");
    // Outer integrand on segment [ub[j-1], ub[j]]: I(s) / (s delta(s)^3) dr/du.
    std::vector<double> seg(N + 1, 0.0);
    for (int j = 1; j <= N; ++j) {
        double base = Icum[j - 1], lo = ub[j - 1];
        auto outer = [&](double u) {
            if (u <= 0.0) return 0.0;
            double r = a * std::sinh(u), dl = geom.delta_r(r);
            double I = base + (u > lo ? checked(inner, lo, u, "inner") : 0.0);
            return I / (r * dl * dl * dl) * a * std::cosh(u);
        };
        seg[j] = checked(outer, ub[j - 1], ub[j], "outer");
    }
    std::vector<double> U(N);
    double acc = 0.0;
    U[N - 1] = p.bc;
    for (int j = N - 1; j >= 1; --j) {
        acc += seg[j + 1];  // segment from node j-1 to node j
        U[j - 1] = p.bc - acc;
    }
    return CoeffField::radial(p.disk, U);
}

CoeffField apply_operator(const CoeffField& U) {
    auto g = gap_fields(U.disk());
    return U.laplacian() + 3.0 * (g.grad_delta[0] * g.inv_delta * U.d_dx(1) + g.grad_delta[1] * g.inv_delta * U.d_dx(2));
}

double weighted_residual(const SingularEllipticProblem& p, const CoeffField& U, double r_max_over_R) {
    CoeffField res = apply_operator(U) - (p.rhs.disk() ? p.rhs : CoeffField(p.disk));
    CoeffField F = p.rhs.disk() ? p.rhs : CoeffField(p.disk);
    const Disk& disk = *p.disk;
    double num = 0.0, den = 0.0;
    const int nt = 16;
    for (int j = 0; j < disk.n(); ++j) {
        if (disk.r()[j] > r_max_over_R * disk.geom().R() * (1 + 1e-12)) break;
        double w = std::pow(disk.delta()[j], -p.gamma);
        for (int k = 0; k < nt; ++k) {
            double th = 2.0 * M_PI * k / nt;
            num = std::max(num, std::abs(res.eval_node(j, th)) * w);
            den = std::max(den, std::abs(F.eval_node(j, th)) * w);
        }
    }
    return den > 0.0 ? num / den : num;
}

Sampled2D solve_fd_2d(const SingularEllipticProblem& p, int n_r, int n_theta) {
    if (n_theta % 2 != 0) throw DomainError("polar grid needs an even number of angles");
    const auto& geom = p.disk->geom();
    const double a = std::sqrt(geom.eps());
    const double h = std::asinh(geom.outer_radius() / a) / (n_r + 0.5);
    const double ht = 2.0 * M_PI / n_theta;
    Sampled2D out;
    out.r.resize(n_r);
    out.theta.resize(n_theta);
    for (int k = 0; k < n_theta; ++k) out.theta[k] = k * ht;
    std::vector<double> rs(n_r), rss(n_r);
    for (int i = 0; i < n_r; ++i) {
        double s = (i + 0.5) * h;
        out.r[i] = a * std::sinh(s);
        rs[i] = a * std::cosh(s);
        rss[i] = out.r[i];
    }
    auto idx = [n_theta](int i, int k) { return i * n_theta + ((k % n_theta) + n_theta) % n_theta; };
    const int n = n_r * n_theta;
    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd b(n);
    for (int i = 0; i < n_r; ++i) {
        double r = out.r[i];
        double a2 = 1.0 / (rs[i] * rs[i]);
        double drift = 1.0 / r + 3.0 * geom.delta_r(r, 1) / geom.delta_r(r);
        double a1 = -rss[i] / (rs[i] * rs[i] * rs[i]) + drift / rs[i];
        double cm = a2 / (h * h) - a1 / (2 * h), cp = a2 / (h * h) + a1 / (2 * h);
        double ct = 1.0 / (r * r * ht * ht);
        for (int k = 0; k < n_theta; ++k) {
            int row = idx(i, k);
            double th = out.theta[k];
            double rhs = p.rhs.disk() ? p.rhs.eval(r * std::cos(th), r * std::sin(th)) : 0.0;
            trip.emplace_back(row, row, -2.0 * a2 / (h * h) - 2.0 * ct);
            trip.emplace_back(row, idx(i, k + 1), ct);
            trip.emplace_back(row, idx(i, k - 1), ct);
            if (i == 0)
                trip.emplace_back(row, idx(0, k + n_theta / 2), cm);
            else
                trip.emplace_back(row, idx(i - 1, k), cm);
            if (i == n_r - 1)
                rhs -= cp * p.bc;
            else
                trip.emplace_back(row, idx(i + 1, k), cp);
            b[row] = rhs;
        }
    }
    Eigen::SparseMatrix<double> A(n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(A);
    lu.factorize(A);
    if (lu.info() != Eigen::Success) throw SolveError("polar finite-difference factorization failed");
    Eigen::VectorXd x = lu.solve(b);
    out.values.assign(x.data(), x.data() + n);
    return out;
}

double relative_linf(const Sampled2D& s, const CoeffField& U) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.r.size(); ++i)
        for (std::size_t k = 0; k < s.theta.size(); ++k) {
            double u = U.eval(s.r[i] * std::cos(s.theta[k]), s.r[i] * std::sin(s.theta[k]));
            num = std::max(num, std::abs(s.at(i, k) - u));
            den = std::max(den, std::abs(u));
        }
    return den > 0.0 ? num / den : num;
}

std::vector<CoeffField> partials(const CoeffField& U, int l) {
    std::vector<CoeffField> cur{U};
    for (int k = 0; k < l; ++k) {
        std::vector<CoeffField> next;
        for (const auto& f : cur) {
            next.push_back(f.d_dx(1));
            next.push_back(f.d_dx(2));
        }
        cur = std::move(next);
    }
    return cur;
}

UEstiResult verify_u_esti(const SingularEllipticProblem& p, const CoeffField& U, int lmax, const FitWindow& w) {
    UEstiResult res;
    if (p.gamma >= -1.0) {
        res.status = Status::Warning;
        res.note = "outside proven range -3 <= gamma < -1; fits are experimental";
    } else if (p.gamma < -3.0) {
        res.status = Status::Warning;
        res.note = "gamma below the proven range -3 <= gamma < -1";
    }
    for (int l = 0; l <= lmax; ++l) {
        auto sup = node_sup(partials(U, l));
        auto s = dyadic_samples(*p.disk, sup, w);
        auto fit = fit_decay(s);
        double pred = p.gamma - 0.5 * l + 1.0;
        res.fits.push_back(fit);
        res.data.push_back(s);
        res.predicted.push_back(pred);
        bool flag = fit.beta < pred - 0.15;
        res.flagged.push_back(flag);
        if (flag && res.status == Status::Pass) res.status = Status::Fail;
    }
    return res;
}

}  // namespace gapflow
