#include "gapflow/fields.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

namespace gapflow {

std::vector<double> fd_weights(const std::vector<double>& xs, double x0, int m) {
    const int n = static_cast<int>(xs.size()) - 1;
    std::vector<std::vector<double>> c(n + 1, std::vector<double>(m + 1, 0.0));
    double c1 = 1.0, c4 = xs[0] - x0;
    c[0][0] = 1.0;
    for (int i = 1; i <= n; ++i) {
        int mn = std::min(i, m);
        double c2 = 1.0, c5 = c4;
        c4 = xs[i] - x0;
        for (int j = 0; j < i; ++j) {
            double c3 = xs[i] - xs[j];
            c2 *= c3;
            if (j == i - 1) {
                for (int k = mn; k >= 1; --k)
                    c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for (int k = mn; k >= 1; --k) c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    std::vector<double> w(n + 1);
    for (int i = 0; i <= n; ++i) w[i] = c[i][m];
    return w;
}

namespace {
constexpr int kWin = 7;
constexpr int kInterp = 8;
}  // namespace

Disk::Disk(const GapGeometry& geom, int nodes, int mode_cap) : geom_(geom), n_(nodes), M_(mode_cap) {
    if (nodes < 16) throw DomainError("radial grid needs at least 16 nodes");
    if (mode_cap < 1) throw DomainError("mode cap must be >= 1");
    a_ = std::sqrt(geom.eps());
    double smax = std::asinh(geom.outer_radius() / a_);
    h_ = smax / (n_ - 0.5);
    r_.resize(n_);
    rs_.resize(n_);
    rss_.resize(n_);
    for (int j = 0; j < n_; ++j) {
        double s = (j + 0.5) * h_;
        r_[j] = a_ * std::sinh(s);
        rs_[j] = a_ * std::cosh(s);
        rss_[j] = r_[j];
    }
    r_[n_ - 1] = geom.outer_radius();
    delta_.resize(n_);
    delta_p_.resize(n_);
    d_.resize(n_);
    d_p_.resize(n_);
    c_.resize(n_);
    for (int j = 0; j < n_; ++j) {
        delta_[j] = geom.delta_r(r_[j]);
        delta_p_[j] = geom.delta_r(r_[j], 1);
        d_[j] = geom.d_r(r_[j]);
        d_p_[j] = geom.d_r(r_[j], 1);
        c_[j] = geom.c_r(r_[j]);
    }
    std::vector<double> xs(kWin);
    for (int i = 0; i < kWin; ++i) xs[i] = i;
    for (int o = 0; o < kWin; ++o) {
        auto w1 = fd_weights(xs, o, 1);
        auto w2 = fd_weights(xs, o, 2);
        for (auto& v : w1) v /= h_;
        for (auto& v : w2) v /= h_ * h_;
        w1_.push_back(w1);
        w2_.push_back(w2);
    }
}

DiskPtr make_disk(const GapGeometry& geom, int nodes, int mode_cap) {
    return std::make_shared<const Disk>(geom, nodes, mode_cap);
}

double Disk::s_of_r(double r) const { return std::asinh(r / a_); }

int Disk::first_node_at_or_above(double r) const {
    return static_cast<int>(std::lower_bound(r_.begin(), r_.end(), r) - r_.begin());
}

std::vector<std::pair<int, double>> Disk::s_stencil(int j, int order, int parity) const {
    int start = std::min(j - 3, n_ - kWin);
    int o = j - start;
    const auto& w = (order == 1 ? w1_ : w2_)[o];
    std::vector<std::pair<int, double>> out;
    for (int k = 0; k < kWin; ++k) {
        int i = start + k;
        double wk = w[k];
        if (i < 0) {
            i = -1 - i;
            wk *= parity;
        }
        bool merged = false;
        for (auto& p : out)
            if (p.first == i) {
                p.second += wk;
                merged = true;
            }
        if (!merged) out.emplace_back(i, wk);
    }
    return out;
}

std::vector<double> Disk::d_dr(const std::vector<double>& a, int parity) const {
    std::vector<double> out(n_);
    for (int j = 0; j < n_; ++j) {
        int start = std::min(j - 3, n_ - kWin);
        const auto& w = w1_[j - start];
        // Differences against a[j] (the weights sum to zero) keep constants exact.
        double s = 0.0;
        for (int k = 0; k < kWin; ++k) {
            int i = start + k;
            double v = i >= 0 ? a[i] : parity * a[-1 - i];
            s += w[k] * (v - a[j]);
        }
        out[j] = s / rs_[j];
    }
    return out;
}

double Disk::interp(const std::vector<double>& a, int parity, double r) const {
    if (r > r_.back() * (1.0 + 1e-12)) throw DomainError("interpolation outside the disk");
    double x = s_of_r(r) / h_ - 0.5;
    int start = static_cast<int>(std::floor(x)) - kInterp / 2 + 1;
    start = std::min(start, n_ - kInterp);
    std::vector<double> xs(kInterp);
    for (int k = 0; k < kInterp; ++k) xs[k] = start + k;
    auto w = fd_weights(xs, x, 0);
    double s = 0.0;
    for (int k = 0; k < kInterp; ++k) {
        int i = start + k;
        double v = i >= 0 ? a[i] : parity * a[-1 - i];
        s += w[k] * v;
    }
    return s;
}

// ---------------------------------------------------------------- CoeffField

CoeffField::CoeffField(DiskPtr disk, double weight) : disk_(std::move(disk)), weight_(weight) {
    cos_.resize(disk_->M() + 1);
    sin_.resize(disk_->M() + 1);
}

CoeffField CoeffField::radial(DiskPtr disk, std::vector<double> a, double weight) {
    return mode(std::move(disk), 0, false, std::move(a), weight);
}

CoeffField CoeffField::mode(DiskPtr disk, int n, bool sine, std::vector<double> a, double weight) {
    CoeffField f(disk, weight);
    if (n > disk->M()) throw ModeOverflow("requested mode exceeds the cap");
    if (static_cast<int>(a.size()) != disk->n()) throw DomainError("radial array size mismatch");
    if (sine && n == 0) return f;
    (sine ? f.sin_ : f.cos_)[n] = std::move(a);
    return f;
}

CoeffField CoeffField::constant(DiskPtr disk, double c) {
    int n = disk->n();
    return radial(std::move(disk), std::vector<double>(n, c));
}

CoeffField CoeffField::from_radial_function(DiskPtr disk, int n, bool sine,
                                            const std::function<double(double)>& g) {
    std::vector<double> a(disk->n());
    for (int j = 0; j < disk->n(); ++j) a[j] = g(disk->r()[j]);
    return mode(std::move(disk), n, sine, std::move(a));
}

CoeffField CoeffField::coordinate(DiskPtr disk, int j) {
    auto r = disk->r();
    return mode(std::move(disk), 1, j == 2, r);
}

bool CoeffField::has(int n, bool sine) const {
    if (n < 0 || n > disk_->M()) return false;
    return !(sine ? sin_ : cos_)[n].empty();
}

const std::vector<double>& CoeffField::get(int n, bool sine) const { return (sine ? sin_ : cos_)[n]; }

std::vector<double>& CoeffField::ref(int n, bool sine) {
    auto& v = (sine ? sin_ : cos_)[n];
    if (v.empty()) v.assign(disk_->n(), 0.0);
    return v;
}

void CoeffField::erase(int n, bool sine) { (sine ? sin_ : cos_)[n].clear(); }

void CoeffField::prune() {
    for (auto* bank : {&cos_, &sin_})
        for (auto& v : *bank)
            if (!v.empty() && std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; })) v.clear();
}

int CoeffField::max_mode() const {
    if (!disk_) return -1;
    for (int n = disk_->M(); n >= 0; --n)
        if (has(n, false) || has(n, true)) return n;
    return -1;
}

bool CoeffField::is_zero() const { return max_mode() < 0; }

double CoeffField::max_abs() const {
    if (!disk_) return 0.0;
    double m = 0.0;
    const auto& dl = disk_->delta();
    for (const auto* bank : {&cos_, &sin_})
        for (const auto& v : *bank)
            for (std::size_t j = 0; j < v.size(); ++j)
                m = std::max(m, std::abs(v[j]) * (weight_ == 0.0 ? 1.0 : std::pow(dl[j], weight_)));
    return m;
}

CoeffField CoeffField::with_weight(double w) const {
    if (!disk_ || w == weight_) {
        CoeffField out = *this;
        out.weight_ = w;
        return out;
    }
    CoeffField out = *this;
    out.weight_ = w;
    const auto& dl = disk_->delta();
    for (auto* bank : {&out.cos_, &out.sin_})
        for (auto& v : *bank)
            for (std::size_t j = 0; j < v.size(); ++j) v[j] *= std::pow(dl[j], weight_ - w);
    return out;
}

CoeffField CoeffField::operator-() const {
    CoeffField out = *this;
    out *= -1.0;
    return out;
}

CoeffField& CoeffField::operator+=(const CoeffField& o) {
    if (!o.disk_) return *this;
    if (!disk_) {
        *this = o;
        return *this;
    }
    if (is_zero()) weight_ = o.weight_;
    const CoeffField& src = (o.weight_ == weight_) ? o : o.with_weight(weight_);
    for (int s = 0; s < 2; ++s) {
        bool sine = s == 1;
        for (int n = 0; n <= disk_->M(); ++n) {
            if (!src.has(n, sine)) continue;
            auto& dst = ref(n, sine);
            const auto& a = src.get(n, sine);
            for (std::size_t j = 0; j < a.size(); ++j) dst[j] += a[j];
        }
    }
    prune();
    return *this;
}

CoeffField& CoeffField::operator-=(const CoeffField& o) { return *this += -o; }

CoeffField& CoeffField::operator*=(double s) {
    for (auto* bank : {&cos_, &sin_})
        for (auto& v : *bank)
            for (auto& x : v) x *= s;
    return *this;
}

namespace {

// Adds coef * a .* b into mode k (k may be negative) of out.
void accumulate(CoeffField& out, int k, bool sine, double coef, const std::vector<double>& a,
                const std::vector<double>& b) {
    if (k < 0) {
        k = -k;
        if (sine) coef = -coef;
    }
    if (sine && k == 0) return;
    if (k > out.disk()->M()) {
        for (std::size_t j = 0; j < a.size(); ++j)
            if (a[j] * b[j] != 0.0)
                throw ModeOverflow("angular mode " + std::to_string(k) + " exceeds the cap " +
                                   std::to_string(out.disk()->M()));
        return;
    }
    auto& dst = out.ref(k, sine);
    for (std::size_t j = 0; j < a.size(); ++j) dst[j] += coef * a[j] * b[j];
}

void accumulate1(CoeffField& out, int k, bool sine, double coef, const std::vector<double>& a) {
    if (k < 0) {
        k = -k;
        if (sine) coef = -coef;
    }
    if (sine && k == 0) return;
    if (k > out.disk()->M()) {
        for (double x : a)
            if (x != 0.0)
                throw ModeOverflow("angular mode " + std::to_string(k) + " exceeds the cap " +
                                   std::to_string(out.disk()->M()));
        return;
    }
    auto& dst = out.ref(k, sine);
    for (std::size_t j = 0; j < a.size(); ++j) dst[j] += coef * a[j];
}

}  // namespace

CoeffField operator*(const CoeffField& a, const CoeffField& b) {
    if (!a.disk_) return a;
    if (!b.disk_) return b;
    CoeffField out(a.disk_, a.weight_ + b.weight_);
    int M = a.disk_->M();
    for (int n = 0; n <= M; ++n) {
        for (int sa = 0; sa < 2; ++sa) {
            if (!a.has(n, sa)) continue;
            const auto& av = a.get(n, sa);
            for (int m = 0; m <= M; ++m) {
                for (int sb = 0; sb < 2; ++sb) {
                    if (!b.has(m, sb)) continue;
                    const auto& bv = b.get(m, sb);
                    if (!sa && !sb) {
                        accumulate(out, n + m, false, 0.5, av, bv);
                        accumulate(out, n - m, false, 0.5, av, bv);
                    } else if (sa && sb) {
                        accumulate(out, n - m, false, 0.5, av, bv);
                        accumulate(out, n + m, false, -0.5, av, bv);
                    } else if (sa && !sb) {
                        accumulate(out, n + m, true, 0.5, av, bv);
                        accumulate(out, n - m, true, 0.5, av, bv);
                    } else {
                        accumulate(out, n + m, true, 0.5, av, bv);
                        accumulate(out, m - n, true, 0.5, av, bv);
                    }
                }
            }
        }
    }
    out.prune();
    return out;
}

CoeffField CoeffField::times_radial(const std::vector<double>& g) const {
    CoeffField out = *this;
    for (auto* bank : {&out.cos_, &out.sin_})
        for (auto& v : *bank)
            for (std::size_t j = 0; j < v.size(); ++j) v[j] *= g[j];
    return out;
}

CoeffField CoeffField::raw_d_dx(int j) const {
    CoeffField out(disk_, weight_);
    const auto& r = disk_->r();
    for (int n = 0; n <= disk_->M(); ++n) {
        for (int s = 0; s < 2; ++s) {
            bool sine = s == 1;
            if (!has(n, sine)) continue;
            const auto& a = get(n, sine);
            int parity = (n % 2 == 0) ? 1 : -1;
            auto ap = disk_->d_dr(a, parity);
            std::vector<double> minus(a.size()), plus(a.size());
            for (std::size_t i = 0; i < a.size(); ++i) {
                double aor = n == 0 ? 0.0 : n * a[i] / r[i];
                minus[i] = ap[i] - aor;
                plus[i] = ap[i] + aor;
            }
            if (j == 1) {
                accumulate1(out, n + 1, sine, 0.5, minus);
                accumulate1(out, n - 1, sine, 0.5, plus);
            } else if (!sine) {
                accumulate1(out, n + 1, true, 0.5, minus);
                accumulate1(out, n - 1, true, -0.5, plus);
            } else {
                accumulate1(out, n - 1, false, 0.5, plus);
                accumulate1(out, n + 1, false, -0.5, minus);
            }
        }
    }
    out.prune();
    return out;
}

CoeffField CoeffField::d_dx(int j) const {
    if (!disk_) return *this;
    if (j != 1 && j != 2) throw DomainError("d_dx expects j in {1, 2}");
    CoeffField out = raw_d_dx(j);
    if (weight_ != 0.0 && !is_zero()) {
        std::vector<double> g(disk_->n());
        for (int i = 0; i < disk_->n(); ++i) g[i] = disk_->delta_prime()[i] / disk_->delta()[i];
        CoeffField dlog = CoeffField::mode(disk_, 1, j == 2, g);
        CoeffField corr = (*this) * dlog;
        corr *= weight_;
        out += corr;
    }
    return out;
}

double CoeffField::eval(double x1, double x2) const {
    if (!disk_) return 0.0;
    double r = std::hypot(x1, x2);
    double th = std::atan2(x2, x1);
    double s = 0.0;
    for (int n = 0; n <= disk_->M(); ++n) {
        int parity = (n % 2 == 0) ? 1 : -1;
        if (has(n, false)) s += disk_->interp(get(n, false), parity, r) * std::cos(n * th);
        if (has(n, true)) s += disk_->interp(get(n, true), parity, r) * std::sin(n * th);
    }
    if (weight_ != 0.0) s *= std::pow(disk_->geom().delta_r(r), weight_);
    return s;
}

double CoeffField::eval_node(int j, double theta) const {
    if (!disk_) return 0.0;
    double s = 0.0;
    for (int n = 0; n <= disk_->M(); ++n) {
        if (has(n, false)) s += get(n, false)[j] * std::cos(n * theta);
        if (has(n, true)) s += get(n, true)[j] * std::sin(n * theta);
    }
    if (weight_ != 0.0) s *= std::pow(disk_->delta()[j], weight_);
    return s;
}

CoeffField CoeffField::radial_part(double tol) const {
    CoeffField out(disk_, weight_);
    double total = max_abs();
    CoeffField rest = *this;
    if (has(0, false)) {
        out.ref(0, false) = get(0, false);
        rest.erase(0, false);
    }
    if (rest.max_abs() > tol * std::max(total, 1e-300))
        throw DomainError("field is not radial within tolerance");
    return out;
}

// ---------------------------------------------------------------- PolyField

PolyField::PolyField(DiskPtr disk, std::vector<CoeffField> c) : disk_(std::move(disk)), c_(std::move(c)) {}

PolyField PolyField::constant(const CoeffField& c) { return PolyField(c.disk(), {c}); }

PolyField PolyField::monomial(const CoeffField& c, int power) {
    std::vector<CoeffField> v(power + 1, CoeffField(c.disk()));
    v[power] = c;
    return PolyField(c.disk(), v);
}

PolyField PolyField::x3(DiskPtr disk) {
    return monomial(CoeffField::constant(disk, 1.0), 1);
}

CoeffField PolyField::coeff(int i) const {
    if (i < 0 || i > degree()) return CoeffField(disk_);
    return c_[i];
}

bool PolyField::is_zero() const {
    for (const auto& c : c_)
        if (!c.is_zero()) return false;
    return true;
}

PolyField PolyField::operator-() const {
    PolyField out = *this;
    out *= -1.0;
    return out;
}

PolyField& PolyField::operator+=(const PolyField& o) {
    if (!disk_) disk_ = o.disk_;
    if (o.c_.size() > c_.size()) c_.resize(o.c_.size(), CoeffField(disk_));
    for (std::size_t i = 0; i < o.c_.size(); ++i) c_[i] += o.c_[i];
    return *this;
}

PolyField& PolyField::operator-=(const PolyField& o) { return *this += -o; }

PolyField& PolyField::operator*=(double s) {
    for (auto& c : c_) c *= s;
    return *this;
}

PolyField operator*(const PolyField& a, const PolyField& b) {
    if (a.c_.empty() || b.c_.empty()) return PolyField(a.disk_ ? a.disk_ : b.disk_);
    std::vector<CoeffField> c(a.c_.size() + b.c_.size() - 1, CoeffField(a.disk_));
    for (std::size_t i = 0; i < a.c_.size(); ++i) {
        if (a.c_[i].is_zero()) continue;
        for (std::size_t j = 0; j < b.c_.size(); ++j) {
            if (b.c_[j].is_zero()) continue;
            c[i + j] += a.c_[i] * b.c_[j];
        }
    }
    return PolyField(a.disk_, c);
}

PolyField operator*(const PolyField& a, const CoeffField& b) {
    PolyField out = a;
    for (auto& c : out.c_) c = c * b;
    return out;
}

PolyField PolyField::d_dx3() const {
    if (c_.size() <= 1) return PolyField(disk_);
    std::vector<CoeffField> c;
    for (std::size_t i = 1; i < c_.size(); ++i) c.push_back(c_[i] * static_cast<double>(i));
    return PolyField(disk_, c);
}

PolyField PolyField::d_dxj(int j) const {
    PolyField out = *this;
    for (auto& c : out.c_) c = c.d_dx(j);
    return out;
}

PolyField PolyField::integrate_x3() const {
    if (c_.empty()) return PolyField(disk_);
    std::vector<CoeffField> c(c_.size() + 1, CoeffField(disk_));
    for (std::size_t i = 0; i < c_.size(); ++i) c[i + 1] = c_[i] * (1.0 / (i + 1.0));
    return PolyField(disk_, c);
}

PolyField PolyField::laplacian_xp() const {
    PolyField out = *this;
    for (auto& c : out.c_) c = c.laplacian();
    return out;
}

PolyField PolyField::laplacian() const { return laplacian_xp() + d_dx3().d_dx3(); }

CoeffField PolyField::at(const CoeffField& z) const {
    CoeffField s(disk_);
    for (int i = degree(); i >= 0; --i) s = s * z + c_[i];
    return s;
}

PolyField PolyField::divide_monic_quadratic(const CoeffField& b1, const CoeffField& b0, CoeffField& r1,
                                            CoeffField& r0) const {
    std::vector<CoeffField> rem = c_;
    int D = degree();
    while (static_cast<int>(rem.size()) < 2) rem.emplace_back(disk_);
    if (D < 2) {
        r1 = rem[1];
        r0 = rem[0];
        return PolyField(disk_);
    }
    std::vector<CoeffField> q(D - 1, CoeffField(disk_));
    for (int i = D; i >= 2; --i) {
        q[i - 2] = rem[i];
        if (rem[i].is_zero()) continue;
        rem[i - 1] -= rem[i] * b1;
        rem[i - 2] -= rem[i] * b0;
    }
    r1 = rem[1];
    r0 = rem[0];
    return PolyField(disk_, q);
}

double PolyField::eval(double x1, double x2, double x3) const {
    double s = 0.0;
    for (int i = degree(); i >= 0; --i) s = s * x3 + c_[i].eval(x1, x2);
    return s;
}

double PolyField::eval_node(int j, double theta, double x3) const {
    double s = 0.0;
    for (int i = degree(); i >= 0; --i) s = s * x3 + c_[i].eval_node(j, theta);
    return s;
}

int PolyField::max_mode() const {
    int m = -1;
    for (const auto& c : c_) m = std::max(m, c.max_mode());
    return m;
}

VecField operator+(const VecField& a, const VecField& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
VecField operator-(const VecField& a, const VecField& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
VecField operator*(double s, const VecField& a) { return {s * a[0], s * a[1], s * a[2]}; }

VecField zero_vec(const DiskPtr& disk) { return {PolyField(disk), PolyField(disk), PolyField(disk)}; }

PolyField divergence(const VecField& v) { return v[0].d_dxj(1) + v[1].d_dxj(2) + v[2].d_dx3(); }

VecField laplacian(const VecField& v) { return {v[0].laplacian(), v[1].laplacian(), v[2].laplacian()}; }

VecField gradient(const PolyField& p) { return {p.d_dxj(1), p.d_dxj(2), p.d_dx3()}; }

std::array<double, 3> eval(const VecField& v, double x1, double x2, double x3) {
    return {v[0].eval(x1, x2, x3), v[1].eval(x1, x2, x3), v[2].eval(x1, x2, x3)};
}

GapFields gap_fields(const DiskPtr& disk) {
    GapFields g;
    const int n = disk->n();
    std::vector<double> inv(n), dl_over(n);
    for (int j = 0; j < n; ++j) {
        inv[j] = 1.0 / disk->delta()[j];
        dl_over[j] = disk->delta_prime()[j] / disk->delta()[j];
    }
    g.delta = CoeffField::radial(disk, disk->delta());
    g.inv_delta = CoeffField::radial(disk, inv);
    g.d = CoeffField::radial(disk, disk->dgap());
    g.c = CoeffField::radial(disk, disk->cgap());
    for (int j = 1; j <= 2; ++j) {
        g.grad_delta[j - 1] = CoeffField::mode(disk, 1, j == 2, disk->delta_prime());
        g.grad_d[j - 1] = CoeffField::mode(disk, 1, j == 2, disk->dgap_prime());
    }
    std::vector<double> k0(n), kf0(n), kf1(n), kf2(n);
    for (int j = 0; j < n; ++j) {
        double dl = disk->delta()[j];
        k0[j] = -0.5 * disk->dgap()[j] / dl;
        kf0[j] = -disk->cgap()[j] / (dl * dl);
        kf1[j] = -disk->dgap()[j] / (dl * dl);
        kf2[j] = 1.0 / (dl * dl);
    }
    g.k = PolyField(disk, {CoeffField::radial(disk, k0), g.inv_delta});
    g.kfac = PolyField(disk, {CoeffField::radial(disk, kf0), CoeffField::radial(disk, kf1),
                              CoeffField::radial(disk, kf2)});
    for (int j = 1; j <= 2; ++j) {
        // d_j k = -d_j d / (2 delta) - (d_j delta / delta) k.
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            double dl = disk->delta()[i];
            a[i] = -0.5 * disk->dgap_prime()[i] / dl - dl_over[i] * k0[i];
            b[i] = -dl_over[i] / dl;
        }
        g.grad_k[j - 1] = PolyField(disk, {CoeffField::mode(disk, 1, j == 2, a), CoeffField::mode(disk, 1, j == 2, b)});
        std::vector<double> da(n), db(n);
        for (int i = 0; i < n; ++i) {
            da[i] = a[i] * disk->delta()[i];
            db[i] = -dl_over[i];
        }
        g.delta_grad_k[j - 1] =
            PolyField(disk, {CoeffField::mode(disk, 1, j == 2, da), CoeffField::mode(disk, 1, j == 2, db)});
    }
    return g;
}

PolyField mul_kfactor(const PolyField& f, const GapFields& g) { return f * g.kfac; }

namespace {

template <class Fn>
double sup_sampled(const DiskPtr& disk, double r0, double r1, const SampleSpec& spec, Fn&& value) {
    double m = 0.0;
    const auto& geom = disk->geom();
    for (int j = 0; j < disk->n(); ++j) {
        double r = disk->r()[j];
        if (r < r0 || r > r1) continue;
        double lo = geom.bottom(r), hi = geom.top(r);
        for (int a = 0; a < spec.n_theta; ++a) {
            double th = 2.0 * M_PI * a / spec.n_theta;
            for (int b = 0; b < spec.n_x3; ++b) {
                double x3 = lo + (hi - lo) * b / (spec.n_x3 - 1);
                m = std::max(m, value(j, th, x3));
            }
        }
    }
    return m;
}

}  // namespace

double sup_on_annulus(const PolyField& f, double r0, double r1, const SampleSpec& spec) {
    return sup_sampled(f.disk(), r0, r1, spec,
                       [&](int j, double th, double x3) { return std::abs(f.eval_node(j, th, x3)); });
}

double sup_on_annulus(const VecField& f, double r0, double r1, const SampleSpec& spec) {
    const DiskPtr& disk = f[0].disk() ? f[0].disk() : (f[1].disk() ? f[1].disk() : f[2].disk());
    return sup_sampled(disk, r0, r1, spec, [&](int j, double th, double x3) {
        double s = 0.0;
        for (const auto& c : f) {
            double v = c.eval_node(j, th, x3);
            s += v * v;
        }
        return std::sqrt(s);
    });
}

namespace {

void append_poly(const PolyField& f, int degree, const DiskPtr& disk, std::vector<double>& out) {
    const int M = disk->M(), n = disk->n();
    for (int i = 0; i <= degree; ++i) {
        CoeffField c = f.coeff(i);
        if (c.disk()) c = c.unweighted();
        for (int m = 0; m <= M; ++m) {
            for (int s = 0; s < 2; ++s) {
                if (m == 0 && s == 1) continue;
                if (c.disk() && c.has(m, s == 1)) {
                    const auto& v = c.get(m, s == 1);
                    out.insert(out.end(), v.begin(), v.end());
                } else {
                    out.insert(out.end(), n, 0.0);
                }
            }
        }
    }
}

std::string dump_header(const DiskPtr& disk, int degree, int comps) {
    nlohmann::json h;
    h["M"] = disk->M();
    h["nodes"] = disk->n();
    h["weight_exponent"] = 0.0;
    h["degree"] = degree;
    h["component_count"] = comps;
    h["row_order"] = "component, x3 power, mode (cos0, cos1, sin1, ..., cosM, sinM)";
    return h.dump(2);
}

}  // namespace

FieldDump dump_field(const PolyField& f, int component_count) {
    FieldDump d;
    int deg = std::max(f.degree(), 0);
    append_poly(f, deg, f.disk(), d.payload);
    d.header_json = dump_header(f.disk(), deg, component_count);
    return d;
}

FieldDump dump_field(const VecField& f) {
    FieldDump d;
    int deg = 0;
    DiskPtr disk;
    for (const auto& c : f) {
        deg = std::max(deg, c.degree());
        if (c.disk()) disk = c.disk();
    }
    for (const auto& c : f) append_poly(c, deg, disk, d.payload);
    d.header_json = dump_header(disk, deg, 3);
    return d;
}

}  // namespace gapflow
