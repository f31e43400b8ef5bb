#include "gapflow/aux_expansion.hpp"

#include <cmath>
#include <fstream>
#include <atomic>
#include <cstdlib>
#include <functional>
#include <thread>

#include <boost/math/quadrature/gauss.hpp>

#include "gapflow/singular_elliptic.hpp"

namespace gapflow {

namespace {

// Geometry fields and the gap quadratic q = x3^2 - d x3 - c = delta^2 (k^2 - 1/4).
struct Ctx {
    DiskPtr disk;
    GapFields g;
    double mu;
    PolyField q;
    CoeffField minus_d, minus_c;

    explicit Ctx(const DiskPtr& dk) : disk(dk), g(gap_fields(dk)), mu(dk->geom().mu()) {
        minus_d = -g.d;
        minus_c = -g.c;
        q = PolyField(disk, {minus_c, minus_d, CoeffField::constant(disk, 1.0)});
    }

    PolyField one() const { return PolyField::constant(CoeffField::constant(disk, 1.0)); }
    PolyField k_plus_half() const { return g.k + 0.5 * one(); }
    CoeffField inv_delta_pow(int n) const {
        CoeffField out = CoeffField::constant(disk, 1.0);
        for (int i = 0; i < n; ++i) out = out * g.inv_delta;
        return out;
    }
};

// Drops angular modes that are identically zero.
void clean(CoeffField& c) {
    if (c.disk()) c.prune();
}

void clean(PolyField& p) {
    for (auto& c : p.coeffs()) clean(c);
}

void clean(VecField& v) {
    for (auto& p : v) clean(p);
}

// Tangential cancellation: V = q P with mu d33 V = -S and V = 0 on both faces.
PolyField cancel_tangential(const Ctx& x, const PolyField& S) {
    PolyField Q0 = S.integrate_x3().integrate_x3() * (-1.0 / x.mu);
    CoeffField r1, r0;
    PolyField P = Q0.divide_monic_quadratic(x.minus_d, x.minus_c, r1, r0);
    PolyField V = P * x.q;
    clean(V);
    return V;
}

// Third component from the tangential ones: div(V1, V2, Q3) = R(x'), Q3 = 0 on both faces.
PolyField third_from_divergence(const Ctx& x, const PolyField& V1, const PolyField& V2, CoeffField& R) {
    PolyField A = -(V1.d_dxj(1) + V2.d_dxj(2)).integrate_x3();
    CoeffField r1, r0;
    PolyField P = A.divide_monic_quadratic(x.minus_d, x.minus_c, r1, r0);
    R = -r1;
    clean(R);
    PolyField Q3 = P * x.q;
    clean(Q3);
    return Q3;
}

// Tail integral -int_r^{2R} f(s) ds at every node: Gauss-Legendre per grid segment in the grid variable.
// A fixed high-order rule keeps the node values smooth, which later FD derivatives rely on.
std::vector<double> tail_integral(const Disk& disk, const std::function<double(double)>& f) {
    using GL = boost::math::quadrature::gauss<double, 30>;
    const int n = disk.n();
    double a = disk.scale();
    auto g = [&](double u) { return f(a * std::sinh(u)) * a * std::cosh(u); };
    std::vector<double> out(n, 0.0);
    for (int j = n - 2; j >= 0; --j)
        out[j] = out[j + 1] - GL::integrate(g, disk.s_of_r(disk.r()[j]), disk.s_of_r(disk.r()[j + 1]));
    return out;
}

// Divergence corrector: div(Ft1 K, Ft2 K, Ft3 K) = -R with Ft_b = delta^2 d_b p_hat / (2 mu).
VecField divergence_corrector(const Ctx& x, const CoeffField& R, CoeffField& p_hat) {
    SingularEllipticProblem p;
    p.disk = x.disk;
    p.rhs = R * x.inv_delta_pow(2) * (12.0 * x.mu);
    p.gamma = -1.5;
    if (R.is_zero()) {
        p_hat = CoeffField(x.disk);
        return zero_vec(x.disk);
    }
    p_hat = solve(p);
    clean(p_hat);
    CoeffField d2 = x.g.delta * x.g.delta * (0.5 / x.mu);
    CoeffField F1 = d2 * p_hat.d_dx(1), F2 = d2 * p_hat.d_dx(2);
    PolyField F3 = -2.0 * (x.g.k * (x.g.delta * R)) - x.g.delta_grad_k[0] * F1 - x.g.delta_grad_k[1] * F2;
    VecField v{PolyField::constant(F1) * x.g.kfac, PolyField::constant(F2) * x.g.kfac, F3 * x.g.kfac};
    clean(v);
    return v;
}

ExpansionChain new_chain(const DiskPtr& disk, int alpha, bool symmetric, int lmax) {
    if (lmax < 1) throw DomainError("lmax must be at least 1");
    ExpansionChain c;
    c.alpha = alpha;
    c.symmetric = symmetric;
    c.disk = disk;
    c.mu = disk->geom().mu();
    c.requested_l = lmax;
    return c;
}

void push_term(ExpansionChain& chain, ChainTerm t) {
    clean(t.v);
    clean(t.p_tilde);
    if (t.p_hat.disk()) clean(t.p_hat);
    chain.terms.push_back(std::move(t));
    VecField f = term_residual(chain, chain.max_l());
    if (!chain.residuals.empty()) f = chain.residuals.back() + f;
    clean(f);
    chain.residuals.push_back(std::move(f));
}

const VecField& last_residual(const ExpansionChain& chain) {
    if (chain.residuals.empty()) throw DomainError("chain has no terms yet");
    return chain.residuals.back();
}

int driver_index(int alpha) { return (alpha == 2 || alpha == 6) ? 2 : 1; }

// Generic step used by the alpha = 1, 2, 5, 6 constructions: tangential cancellation of f^(b),
// third component from the divergence, optional corrector, and p_tilde = int_0 (f^(3) + mu d33 v^(3)).
void generic_step(ExpansionChain& chain, bool with_corrector) {
    Ctx x(chain.disk);
    const VecField& f = last_residual(chain);
    ChainTerm t;
    PolyField V1 = cancel_tangential(x, f[0]), V2 = cancel_tangential(x, f[1]);
    CoeffField R;
    PolyField Q3 = third_from_divergence(x, V1, V2, R);
    t.v = {V1, V2, Q3};
    t.p_hat = CoeffField(x.disk);
    if (with_corrector) {
        t.v = t.v + divergence_corrector(x, R, t.p_hat);
        t.div_target = CoeffField(x.disk);
    } else {
        t.div_target = R;
    }
    t.p_tilde = (f[2] + x.mu * t.v[2].d_dx3().d_dx3()).integrate_x3();
    push_term(chain, std::move(t));
}

}  // namespace

// ---------------------------------------------------------------- alpha = 1, 2

void build_alpha12_term1(ExpansionChain& chain) {
    if (!chain.terms.empty()) throw DomainError("term 1 must be built first");
    Ctx x(chain.disk);
    int j = driver_index(chain.alpha);
    SingularEllipticProblem p;
    p.disk = x.disk;
    p.rhs = x.g.grad_d[j - 1] * x.inv_delta_pow(3) * (-6.0 * x.mu);
    p.gamma = -2.5;
    ChainTerm t;
    t.p_hat = p.rhs.is_zero() ? CoeffField(x.disk) : solve(p);
    CoeffField d2 = x.g.delta * x.g.delta * (0.5 / x.mu);
    CoeffField F1 = d2 * t.p_hat.d_dx(1), F2 = d2 * t.p_hat.d_dx(2);
    PolyField H = x.g.k * x.g.grad_d[j - 1] + PolyField::constant(x.g.grad_delta[j - 1] * 0.5) -
                  x.g.delta_grad_k[0] * F1 - x.g.delta_grad_k[1] * F2;
    PolyField lead = x.k_plus_half();
    t.v = {PolyField::constant(F1) * x.g.kfac, PolyField::constant(F2) * x.g.kfac, H * x.g.kfac};
    t.v[j - 1] += lead;
    t.p_tilde = (x.mu * t.v[2].d_dx3().d_dx3()).integrate_x3();
    t.div_target = CoeffField(x.disk);
    push_term(chain, std::move(t));
}

void build_alpha12_term2(ExpansionChain& chain) {
    if (chain.max_l() != 1) throw DomainError("term 2 needs exactly one previous term");
    generic_step(chain, true);
}

void build_alpha12_term3(ExpansionChain& chain) {
    if (chain.max_l() != 2) throw DomainError("term 3 needs exactly two previous terms");
    generic_step(chain, false);
}

ExpansionChain build_alpha12_chain(const DiskPtr& disk, int alpha, int lmax) {
    if (alpha != 1 && alpha != 2) throw DomainError("alpha must be 1 or 2");
    ExpansionChain c = new_chain(disk, alpha, false, lmax);
    build_alpha12_term1(c);
    if (lmax >= 2) build_alpha12_term2(c);
    if (lmax >= 3) build_alpha12_term3(c);
    if (lmax > 3) c.status = "construction limit";
    return c;
}

// ---------------------------------------------------------------- alpha = 3

ExpansionChain build_alpha3_chain(const DiskPtr& disk, int lmax) {
    ExpansionChain c = new_chain(disk, 3, false, lmax);
    Ctx x(disk);
    const double mu = x.mu;
    // Third residual component minus the deferred part, carried to the next pressure.
    PolyField S;
    {
        ChainTerm t;
        CoeffField F1 = CoeffField::coordinate(disk, 1) * x.g.inv_delta * 3.0;
        CoeffField F2 = CoeffField::coordinate(disk, 2) * x.g.inv_delta * 3.0;
        PolyField H = -2.0 * x.g.k - x.g.delta_grad_k[0] * F1 - x.g.delta_grad_k[1] * F2;
        VecField vt{PolyField::constant(F1) * x.g.kfac, PolyField::constant(F2) * x.g.kfac,
                    x.k_plus_half() + H * x.g.kfac};
        const GapGeometry& geom = disk->geom();
        auto tail = tail_integral(*disk, [&](double s) {
            double d = geom.delta_r(s);
            return s / (d * d * d);
        });
        for (auto& v : tail) v *= 6.0 * mu;
        PolyField pt = PolyField::constant(CoeffField::radial(disk, tail)) + mu * (H * x.g.kfac).d_dx3();
        VecField pre = mu * laplacian(vt) - gradient(pt);
        PolyField V1 = cancel_tangential(x, pre[0]), V2 = cancel_tangential(x, pre[1]);
        CoeffField R;
        PolyField Q3 = third_from_divergence(x, V1, V2, R);
        R = R.radial_part(1e-9);
        VecField vh = VecField{V1, V2, Q3} + divergence_corrector(x, R, t.p_hat);
        t.v = vt + vh;
        t.p_tilde = pt;
        t.div_target = CoeffField(disk);
        t.deferred = mu * vh[2].laplacian_xp();
        // f^1(3) - G_1 assembled without the cancelling pair mu Lap' vh(3) - G_1.
        S = mu * vt[2].laplacian_xp() + mu * t.v[2].d_dx3().d_dx3() - pt.d_dx3();
        push_term(c, std::move(t));
    }
    for (int l = 2; l <= lmax; ++l) {
        const VecField& f = last_residual(c);
        ChainTerm t;
        t.p_tilde = S.integrate_x3();
        PolyField T1 = f[0] - t.p_tilde.d_dxj(1), T2 = f[1] - t.p_tilde.d_dxj(2);
        PolyField V1 = cancel_tangential(x, T1), V2 = cancel_tangential(x, T2);
        CoeffField R;
        PolyField Q3 = third_from_divergence(x, V1, V2, R);
        R = R.radial_part(1e-9);
        t.v = VecField{V1, V2, Q3} + divergence_corrector(x, R, t.p_hat);
        t.div_target = CoeffField(disk);
        t.deferred = mu * t.v[2].laplacian_xp();
        // f^l(3) - G_l = G_(l-1) + mu d33 v_l(3).
        S = c.terms.back().deferred + mu * t.v[2].d_dx3().d_dx3();
        push_term(c, std::move(t));
    }
    return c;
}

// ---------------------------------------------------------------- alpha = 4

ExpansionChain build_alpha4_chain(const DiskPtr& disk, int lmax) {
    ExpansionChain c = new_chain(disk, 4, false, lmax);
    Ctx x(disk);
    {
        ChainTerm t;
        PolyField kp = x.k_plus_half();
        t.v = {kp * CoeffField::coordinate(disk, 2), -(kp * CoeffField::coordinate(disk, 1)), PolyField(disk)};
        t.p_hat = CoeffField(disk);
        t.p_tilde = PolyField(disk);
        t.div_target = CoeffField(disk);
        push_term(c, std::move(t));
    }
    for (int l = 2; l <= lmax; ++l) {
        const VecField& f = last_residual(c);
        ChainTerm t;
        t.v = {cancel_tangential(x, f[0]), cancel_tangential(x, f[1]), PolyField(disk)};
        t.p_hat = CoeffField(disk);
        t.p_tilde = PolyField(disk);
        t.div_target = CoeffField(disk);
        push_term(c, std::move(t));
    }
    return c;
}

// ---------------------------------------------------------------- alpha = 5, 6

ExpansionChain build_alpha56_chain(const DiskPtr& disk, int alpha, int lmax) {
    if (alpha != 5 && alpha != 6) throw DomainError("alpha must be 5 or 6");
    ExpansionChain c = new_chain(disk, alpha, false, lmax);
    Ctx x(disk);
    const double mu = x.mu;
    int j = driver_index(alpha);
    {
        ChainTerm t;
        CoeffField xj = CoeffField::coordinate(disk, j);
        SingularEllipticProblem p;
        p.disk = disk;
        p.rhs = xj * x.inv_delta_pow(3) * (-12.0 * mu);
        p.gamma = -2.5;
        t.p_hat = solve(p);
        CoeffField d2 = x.g.delta * x.g.delta * (0.5 / mu);
        CoeffField G1 = d2 * t.p_hat.d_dx(1), G2 = d2 * t.p_hat.d_dx(2);
        PolyField x3 = PolyField::x3(disk);
        // Particular pair for the x3-dependent part of the first-order equation.
        PolyField Fp = -3.0 * (x3 * x3 * x.g.inv_delta) - 2.0 * (x.g.k * x3);
        const PolyField& dgk = x.g.delta_grad_k[j - 1];
        PolyField Hb = 2.0 * (x.g.k * xj) - x.g.delta_grad_k[0] * G1 - x.g.delta_grad_k[1] * G2;
        PolyField Hg = -(dgk * Fp) - 2.0 * (x.g.k * dgk * x3);
        PolyField kp = x.k_plus_half();
        t.v = {PolyField::constant(G1) * x.g.kfac, PolyField::constant(G2) * x.g.kfac, (Hb + Hg) * x.g.kfac};
        t.v[j - 1] += Fp * x.g.kfac + kp * x3;
        t.v[2] -= kp * xj;
        t.p_tilde = mu * (Hb * x.g.kfac).d_dx3();
        t.div_target = CoeffField(disk);
        push_term(c, std::move(t));
    }
    if (lmax >= 2) generic_step(c, true);
    if (lmax >= 3) generic_step(c, false);
    if (lmax > 3) c.status = "construction limit";
    return c;
}

// ---------------------------------------------------------------- symmetric chain

ExpansionChain build_symmetric_chain(const DiskPtr& disk, int alpha, int lmax) {
    if (!disk->geom().is_symmetric()) throw PreconditionError("symmetric chain needs h1 = h2");
    if (alpha != 1 && alpha != 2) throw DomainError("symmetric chain supports alpha 1 and 2");
    ExpansionChain c = new_chain(disk, alpha, true, lmax);
    Ctx x(disk);
    const double mu = x.mu;
    int j = alpha;
    CoeffField bottom = x.g.delta * (-0.5);
    auto from_bottom = [&](const PolyField& A) { return A - PolyField::constant(A.at(bottom)); };
    {
        ChainTerm t;
        PolyField lead = x.k_plus_half();
        PolyField W = -lead.d_dxj(j).integrate_x3();
        t.v = {PolyField(disk), PolyField(disk), from_bottom(W)};
        t.v[j - 1] = lead;
        t.p_hat = CoeffField(disk);
        t.p_tilde = PolyField::monomial(x.g.grad_delta[j - 1] * x.inv_delta_pow(2) * mu, 1);
        t.div_target = CoeffField(disk);
        push_term(c, std::move(t));
    }
    for (int l = 2; l <= lmax; ++l) {
        const VecField& f = last_residual(c);
        ChainTerm t;
        PolyField V1 = cancel_tangential(x, f[0]), V2 = cancel_tangential(x, f[1]);
        PolyField A = -(V1.d_dxj(1) + V2.d_dxj(2)).integrate_x3();
        t.v = {V1, V2, from_bottom(A)};
        t.p_hat = CoeffField(disk);
        t.p_tilde = (f[2] + mu * t.v[2].d_dx3().d_dx3()).integrate_x3();
        t.div_target = CoeffField(disk);
        push_term(c, std::move(t));
    }
    return c;
}

ExpansionChain build_chain(const DiskPtr& disk, int alpha, int lmax, bool symmetric) {
    if (symmetric) return build_symmetric_chain(disk, alpha, lmax);
    switch (alpha) {
        case 1:
        case 2: return build_alpha12_chain(disk, alpha, lmax);
        case 3: return build_alpha3_chain(disk, lmax);
        case 4: return build_alpha4_chain(disk, lmax);
        case 5:
        case 6: return build_alpha56_chain(disk, alpha, lmax);
    }
    throw DomainError("alpha must be in 1..6");
}

// ---------------------------------------------------------------- residuals and probes

VecField term_residual(const ExpansionChain& chain, int l) {
    const ChainTerm& t = chain.terms.at(l - 1);
    VecField f = chain.mu * laplacian(t.v) - gradient(t.p_tilde);
    if (t.p_hat.disk() && !t.p_hat.is_zero()) {
        f[0] -= PolyField::constant(t.p_hat.d_dx(1));
        f[1] -= PolyField::constant(t.p_hat.d_dx(2));
    }
    return f;
}

VecField residual(const ExpansionChain& chain, int l) {
    if (l < 1 || l > chain.max_l()) throw DomainError("residual order out of range");
    VecField f = term_residual(chain, 1);
    for (int i = 2; i <= l; ++i) f = f + term_residual(chain, i);
    return f;
}

void recompute_residuals(ExpansionChain& chain) {
    chain.residuals.clear();
    for (int l = 1; l <= chain.max_l(); ++l) {
        VecField f = term_residual(chain, l);
        if (l > 1) f = chain.residuals.back() + f;
        chain.residuals.push_back(std::move(f));
    }
}

VecField velocity(const ExpansionChain& chain, int l) {
    if (l <= 0 || l > chain.max_l()) l = chain.max_l();
    VecField v = chain.terms.at(0).v;
    for (int i = 2; i <= l; ++i) v = v + chain.terms[i - 1].v;
    return v;
}

double predicted_residual_exponent(const ExpansionChain& chain, int l) {
    if (!chain.symmetric && chain.alpha == 4) return l - 1.5;
    return l - 2.0;
}

double lower_bound_probe(const ExpansionChain& chain, int m, double r) {
    if (m < 0) throw DomainError("probe order must be non-negative");
    PolyField u = velocity(chain)[0];
    double x1 = r * std::sqrt(chain.disk->geom().eps());
    if (m == 0) return std::abs(u.d_dx3().eval(x1, 0.0, 0.0));
    std::vector<PolyField> level{u.d_dx3().d_dx3()};
    for (int i = 1; i < m; ++i) {
        std::vector<PolyField> next;
        for (const auto& p : level) {
            next.push_back(p.d_dxj(1));
            next.push_back(p.d_dxj(2));
        }
        level = std::move(next);
    }
    double s = 0.0;
    for (const auto& p : level) {
        double v = p.eval(x1, 0.0, 0.0);
        s += v * v;
    }
    return std::sqrt(s);
}

// ---------------------------------------------------------------- corruption

void corrupt(ExpansionChain& chain, const Corruption& c) {
    ChainTerm& t = chain.terms.at(c.term - 1);
    auto slot = [&](PolyField& p) -> PolyField {
        auto& coeffs = p.coeffs();
        if (c.power < 0 || c.power >= static_cast<int>(coeffs.size()))
            throw DomainError("corruption slot out of range");
        PolyField old = PolyField::monomial(coeffs[c.power], c.power);
        coeffs[c.power] *= c.factor;
        return old;
    };
    // The residual is linear in each coefficient: f^l changes by (factor - 1) times the slot's own residual.
    VecField delta = zero_vec(chain.disk);
    switch (c.target) {
        case Corruption::Target::Velocity: {
            PolyField old = slot(t.v.at(c.component));
            delta[c.component] = chain.mu * old.laplacian();
            break;
        }
        case Corruption::Target::PHat: {
            CoeffField old = t.p_hat;
            t.p_hat *= c.factor;
            delta[0] = -PolyField::constant(old.d_dx(1));
            delta[1] = -PolyField::constant(old.d_dx(2));
            break;
        }
        case Corruption::Target::PTilde: delta = -1.0 * gradient(slot(t.p_tilde)); break;
    }
    delta = (c.factor - 1.0) * delta;
    for (int l = c.term; l <= static_cast<int>(chain.residuals.size()); ++l)
        chain.residuals[l - 1] = chain.residuals[l - 1] + delta;
}

std::vector<Corruption> corruption_sites(const ExpansionChain& chain, double factor) {
    std::vector<Corruption> out;
    for (int l = 1; l <= chain.max_l(); ++l) {
        const ChainTerm& t = chain.terms[l - 1];
        for (int comp = 0; comp < 3; ++comp)
            for (int i = 0; i <= t.v[comp].degree(); ++i)
                if (!t.v[comp].coeff(i).is_zero())
                    out.push_back({l, Corruption::Target::Velocity, comp, i, factor});
        if (t.p_hat.disk() && !t.p_hat.is_zero()) out.push_back({l, Corruption::Target::PHat, 0, 0, factor});
        for (int i = 0; i <= t.p_tilde.degree(); ++i)
            if (!t.p_tilde.coeff(i).is_zero()) out.push_back({l, Corruption::Target::PTilde, 0, i, factor});
    }
    return out;
}

// ---------------------------------------------------------------- structural checks

TraceErrors trace_errors(const ExpansionChain& chain, int l, int samples) {
    const VecField& v = chain.terms.at(l - 1).v;
    int alpha = chain.alpha;
    VecTarget zero = [](double, double, double) { return std::array<double, 3>{0, 0, 0}; };
    VecTarget top = l == 1 ? VecTarget([alpha](double a, double b, double z) { return rigid_motion(alpha, a, b, z); })
                           : zero;
    return {check_trace(v, Face::Top, top, samples), check_trace(v, Face::Bottom, zero, samples)};
}

double divergence_error(const ExpansionChain& chain, int l) {
    const ChainTerm& t = chain.terms.at(l - 1);
    PolyField div = divergence(t.v);
    if (t.div_target.disk() && !t.div_target.is_zero()) div -= PolyField::constant(t.div_target);
    std::vector<PolyField> parts{t.v[0].d_dxj(1), t.v[1].d_dxj(2), t.v[2].d_dx3()};
    auto err = node_sup(std::vector<PolyField>{div});
    std::vector<double> scale(err.size(), 0.0);
    for (const auto& p : parts) {
        auto s = node_sup(std::vector<PolyField>{p});
        for (std::size_t i = 0; i < s.size(); ++i) scale[i] += s[i];
    }
    FitWindow w;
    auto e = dyadic_samples(*chain.disk, err, w);
    auto s = dyadic_samples(*chain.disk, scale, w);
    double worst = 0.0;
    for (std::size_t i = 0; i < e.size(); ++i)
        if (s[i].second > 0.0) worst = std::max(worst, e[i].second / s[i].second);
    return worst;
}

double p_hat_x3_dependence(const ExpansionChain& chain, int l) {
    const ChainTerm& t = chain.terms.at(l - 1);
    if (!t.p_hat.disk()) return 0.0;
    PolyField d3 = PolyField::constant(t.p_hat).d_dx3();
    double m = 0.0;
    for (const auto& c : d3.coeffs()) m = std::max(m, c.max_abs());
    return m;
}

namespace {

void residual_fit_samples(const ExpansionChain& chain, int l, int k, const FitWindow& w, Samples& out) {
    const VecField& f = chain.residuals.at(l - 1);
    std::vector<PolyField> comps;
    if (k == 0) {
        comps.assign(f.begin(), f.end());
    } else if (k == 1) {
        for (const auto& p : f) {
            comps.push_back(p.d_dxj(1));
            comps.push_back(p.d_dxj(2));
            comps.push_back(p.d_dx3());
        }
    } else {
        throw DomainError("residual fits support k = 0 or 1");
    }
    out = dyadic_samples(*chain.disk, node_sup(comps), w);
}

}  // namespace

DecayFit residual_fit(const ExpansionChain& chain, int l, int k, const FitWindow& w, Samples* data) {
    Samples s;
    residual_fit_samples(chain, l, k, w, s);
    if (data) *data = s;
    return fit_decay(s);
}

// ---------------------------------------------------------------- inner-scaling ladder

std::vector<double> default_ladder_eps() { return {1e-3, 3e-4, 1e-4, 3e-5, 1e-5, 3e-6}; }

int worker_threads() {
    if (const char* env = std::getenv("GAPFLOW_THREADS")) {
        int n = std::atoi(env);
        if (n > 0) return n;
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

Ladder residual_ladder(const std::vector<ExpansionChain>& chains, int k, const FitWindow& w) {
    Ladder out;
    if (chains.empty()) throw DomainError("ladder needs at least one chain");
    int lmax = chains.front().max_l();
    out.samples.assign(lmax, {});
    for (const auto& c : chains) {
        out.eps.push_back(c.disk->geom().eps());
        lmax = std::min(lmax, c.max_l());
        for (int l = 1; l <= lmax; ++l) {
            Samples s;
            residual_fit_samples(c, l, k, w, s);
            if (s.empty()) throw FitError("fit window has no annulus");
            out.samples[l - 1].push_back(s.front());
        }
    }
    out.samples.resize(lmax);
    for (const auto& s : out.samples) out.fits.push_back(fit_decay(s));
    return out;
}

Ladder residual_ladder(const ChainFactory& build, const std::vector<double>& eps, int k, const FitWindow& w,
                       const ChainMutation& mutate) {
    std::vector<ExpansionChain> chains(eps.size());
    std::vector<std::exception_ptr> errors(eps.size());
    std::atomic<std::size_t> next{0};
    auto work = [&] {
        for (std::size_t i; (i = next++) < eps.size();) {
            try {
                chains[i] = build(eps[i]);
                if (mutate) mutate(chains[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    int nt = std::min<int>(worker_threads(), static_cast<int>(eps.size()));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    return residual_ladder(chains, k, w);
}

// ---------------------------------------------------------------- manifest and dumps

nlohmann::json chain_manifest(const ExpansionChain& chain) {
    nlohmann::json targets = nlohmann::json::array();
    nlohmann::json predictions = nlohmann::json::array();
    for (int l = 1; l <= chain.max_l(); ++l) {
        const ChainTerm& t = chain.terms[l - 1];
        bool zero = !t.div_target.disk() || t.div_target.is_zero();
        targets.push_back({{"term", l},
                           {"kind", zero ? "zero" : "R(x')"},
                           {"max_abs", zero ? 0.0 : t.div_target.max_abs()}});
        predictions.push_back({{"term", l}, {"residual_exponent", predicted_residual_exponent(chain, l)}});
    }
    const GapGeometry& g = chain.disk->geom();
    return {{"alpha", chain.alpha},
            {"symmetric", chain.symmetric},
            {"lmax", chain.max_l()},
            {"requested_lmax", chain.requested_l},
            {"status", chain.status},
            {"eps", g.eps()},
            {"R", g.R()},
            {"mu", g.mu()},
            {"nodes", chain.disk->n()},
            {"mode_cap", chain.disk->M()},
            {"divergence_targets", targets},
            {"exponent_predictions", predictions}};
}

namespace {

void write_dump(const std::filesystem::path& dir, const std::string& stem, const FieldDump& d) {
    std::ofstream bin(dir / (stem + ".bin"), std::ios::binary);
    bin.write(reinterpret_cast<const char*>(d.payload.data()),
              static_cast<std::streamsize>(d.payload.size() * sizeof(double)));
    std::ofstream(dir / (stem + ".json")) << d.header_json << "\n";
}

}  // namespace

void dump_chain(const ExpansionChain& chain, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    for (int l = 1; l <= chain.max_l(); ++l) {
        const ChainTerm& t = chain.terms[l - 1];
        std::string p = "term_" + std::to_string(l);
        write_dump(dir, p + "_v", dump_field(t.v));
        write_dump(dir, p + "_ptilde", dump_field(t.p_tilde));
        CoeffField ph = t.p_hat.disk() ? t.p_hat : CoeffField(chain.disk);
        write_dump(dir, p + "_phat", dump_field(PolyField::constant(ph)));
    }
    std::ofstream(dir / "manifest.json") << chain_manifest(chain).dump(2) << "\n";
}

}  // namespace gapflow
