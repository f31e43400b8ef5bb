#include "gapflow/acceptance.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

#include "gapflow/aux_expansion.hpp"
#include "gapflow/singular_elliptic.hpp"

namespace gapflow {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int prec = 4) {
    std::ostringstream os;
    os << std::setprecision(prec) << v;
    return os.str();
}

DiskPtr disk_for(bool symmetric, double eps, int nodes = 512) {
    return make_disk(symmetric ? GapGeometry::symmetric_default(eps) : GapGeometry::asymmetric_default(eps), nodes, 8);
}

// Runs f(i) for i in [0, n) on worker_threads() threads.
template <class F>
void parallel_for(std::size_t n, F&& f) {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    auto work = [&] {
        for (std::size_t i; (i = next++) < n;) {
            try {
                f(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    int nt = std::min<int>(worker_threads(), static_cast<int>(n));
    std::vector<std::thread> pool;
    for (int t = 1; t < nt; ++t) pool.emplace_back(work);
    work();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void add_runtime(CriterionResult& r, Clock::time_point t0, double budget) {
    r.checks.push_back(grade_bound("runtime seconds", "budget", seconds_since(t0), budget));
}

// ------------------------------------------------------------ 1: singular elliptic decay

CriterionResult elliptic_decay() {
    CriterionResult r{1, "singular elliptic decay"};
    auto t0 = Clock::now();
    const double eps = 1e-3;
    auto disk = make_disk(GapGeometry::symmetric_default(eps), 512, 8);
    for (auto [gamma, l] : std::vector<std::pair<double, int>>{{-2.5, 0}, {-2.5, 1}, {-1.5, 0}, {-1.5, 1}, {-3.0, 0}}) {
        SingularEllipticProblem p;
        p.disk = disk;
        p.gamma = gamma;
        p.rhs = CoeffField::from_radial_function(disk, 0, false, [=](double x) { return std::pow(eps + x * x, gamma); });
        p.radial_rhs = [=](double x) { return std::pow(eps + x * x, gamma); };
        auto U = solve(p);
        auto res = verify_u_esti(p, U, l);
        double predicted = gamma - l / 2.0 + 1.0;
        r.checks.push_back(grade_fit("grad^" + std::to_string(l) + " U, gamma=" + fmt(gamma), "elliptic-decay",
                                     res.fits[l], predicted, 0.1, Grade::Within, res.data[l]));
    }
    add_runtime(r, t0, 10.0);
    return r;
}

// ------------------------------------------------------------ 2: chain structural invariants

CriterionResult chain_invariants() {
    CriterionResult r{2, "chain structural invariants"};
    auto t0 = Clock::now();
    const double eps = 1e-3;
    struct Job {
        bool symmetric;
        int alpha;
        double trace = 0.0, div512 = 0.0, div1024 = 0.0, phat = 0.0;
        int terms = 0;
    };
    std::vector<Job> jobs;
    for (bool sym : {true, false})
        for (int alpha = 1; alpha <= 6; ++alpha) jobs.push_back({sym, alpha});
    parallel_for(jobs.size(), [&](std::size_t i) {
        Job& j = jobs[i];
        bool green = j.symmetric && j.alpha <= 2;
        int lmax = green ? 4 : 3;
        for (int nodes : {512, 1024}) {
            auto c = build_chain(disk_for(j.symmetric, eps, nodes), j.alpha, lmax, green);
            j.terms = c.max_l();
            double div = 0.0;
            for (int l = 1; l <= c.max_l(); ++l) {
                auto t = trace_errors(c, l);
                j.trace = std::max({j.trace, t.top, t.bottom});
                div = std::max(div, divergence_error(c, l));
                j.phat = std::max(j.phat, p_hat_x3_dependence(c, l));
            }
            (nodes == 512 ? j.div512 : j.div1024) = div;
        }
    });
    for (const auto& j : jobs) {
        std::string tag = std::string(j.symmetric ? "symmetric" : "asymmetric") + " alpha=" + std::to_string(j.alpha) +
                          " L=" + std::to_string(j.terms);
        r.checks.push_back(grade_bound(tag + " face traces", "chain-traces", j.trace, 1e-10));
        auto d = grade_bound(tag + " divergence at N=512 and N=1024", "chain-divergence",
                             std::max(j.div512, j.div1024), 1e-6);
        d.detail += " N512=" + fmt(j.div512) + " N1024=" + fmt(j.div1024);
        r.checks.push_back(d);
        r.checks.push_back(grade_bound(tag + " p_hat x3 dependence", "chain-phat", j.phat, 0.0));
    }
    add_runtime(r, t0, 60.0);
    return r;
}

// ------------------------------------------------------------ 3, 4, 8: residual ladders

struct LadderCheck {
    int l;
    double predicted, tol;
    Grade grade;
};

// Ladder checks stated for each chain.
std::vector<LadderCheck> ladder_checks(int alpha, bool symmetric) {
    if (symmetric) return {{2, 0.0, 0.15, Grade::Within}, {3, 1.0, 0.2, Grade::Within}, {4, 2.0, 0.3, Grade::Within}};
    switch (alpha) {
        case 1: return {{1, -1.0, 0.15, Grade::Within}, {2, 0.0, 0.15, Grade::AtLeast}, {3, 1.0, 0.2, Grade::Within}};
        case 3: return {{1, -1.0, 0.15, Grade::Within}};
        case 4: return {{1, -0.5, 0.15, Grade::Within}};
        case 5: return {{1, -1.0, 0.15, Grade::Within}, {3, 1.0, 0.2, Grade::Within}};
    }
    return {};
}

int ladder_depth(const std::vector<LadderCheck>& checks) {
    int l = 0;
    for (const auto& c : checks) l = std::max(l, c.l);
    return l;
}

std::vector<ExpansionChain> ladder_chains(int alpha, bool symmetric, int lmax) {
    auto eps = default_ladder_eps();
    std::vector<ExpansionChain> chains(eps.size());
    parallel_for(eps.size(), [&](std::size_t i) { chains[i] = build_chain(disk_for(symmetric, eps[i]), alpha, lmax, symmetric); });
    return chains;
}

std::vector<Check> grade_ladder(const Ladder& lad, int alpha, bool symmetric) {
    std::vector<Check> out;
    for (const auto& c : ladder_checks(alpha, symmetric)) {
        std::string name = std::string(symmetric ? "symmetric" : "asymmetric") + " f_" + std::to_string(alpha) + "^" +
                           std::to_string(c.l) + " exponent";
        std::string key = std::string(symmetric ? "residual-sym-" : "residual-a") + (symmetric ? "" : std::to_string(alpha) + "-") +
                          "l" + std::to_string(c.l);
        if (c.l > static_cast<int>(lad.fits.size())) {
            Check miss;
            miss.name = name;
            miss.citation = key;
            miss.predicted = c.predicted;
            miss.status = Status::Fail;
            miss.detail = "chain has fewer terms";
            out.push_back(miss);
            continue;
        }
        out.push_back(grade_fit(name, key, lad.fits[c.l - 1], c.predicted, c.tol, c.grade, lad.samples[c.l - 1]));
    }
    return out;
}

CriterionResult residual_ladder_criterion() {
    CriterionResult r{3, "asymmetric residual cancellation ladder"};
    auto t0 = Clock::now();
    for (int alpha : {1, 3, 4, 5}) {
        auto lad = residual_ladder(ladder_chains(alpha, false, ladder_depth(ladder_checks(alpha, false))));
        for (auto& c : grade_ladder(lad, alpha, false)) r.checks.push_back(std::move(c));
    }
    add_runtime(r, t0, 120.0);
    return r;
}

CriterionResult symmetric_chain() {
    CriterionResult r{4, "symmetric Green-function chain"};
    auto t0 = Clock::now();
    auto chains = ladder_chains(1, true, 4);
    for (auto& c : grade_ladder(residual_ladder(chains), 1, true)) r.checks.push_back(std::move(c));
    const auto& c = chains.front();
    double div = 0.0;
    for (const auto& ch : chains)
        for (int l = 1; l <= ch.max_l(); ++l) div = std::max(div, divergence_error(ch, l));
    r.checks.push_back(grade_bound("divergence of every term", "residual-sym-divergence", div, 1e-10));
    // Tangential residual components are odd in x3 and the third is even, at 1000 quasi-random pairs.
    const GapGeometry& g = c.disk->geom();
    double worst = 0.0;
    for (int l = 1; l <= c.max_l(); ++l)
        for (int i = 0; i < 1000; ++i) {
            auto u = r2_sequence(i);
            double rr = 0.8 * u[0], th = 2 * M_PI * u[1], s = 0.5 * std::fmod(0.618 * i, 1.0);
            double x1 = rr * std::cos(th), x2 = rr * std::sin(th), x3 = s * (g.top(rr) - g.bottom(rr));
            auto a = eval(c.residuals[l - 1], x1, x2, x3);
            auto b = eval(c.residuals[l - 1], x1, x2, -x3);
            double scale = std::abs(a[0]) + std::abs(a[1]) + std::abs(a[2]) + 1e-300;
            worst = std::max({worst, std::abs(a[0] + b[0]) / scale, std::abs(a[1] + b[1]) / scale,
                              std::abs(a[2] - b[2]) / scale});
        }
    r.checks.push_back(grade_bound("x3 parity at 1000 point pairs", "residual-sym-parity", worst, 1e-9));
    add_runtime(r, t0, 120.0);
    return r;
}

CriterionResult negative_control(bool verbose) {
    CriterionResult r{8, "coefficient corruption flips a ladder check"};
    auto t0 = Clock::now();
    struct Case {
        int alpha;
        bool symmetric;
    };
    for (auto [alpha, symmetric] : {Case{1, false}, Case{5, false}, Case{1, true}}) {
        auto checks = ladder_checks(alpha, symmetric);
        int lmax = symmetric ? 4 : 3;
        auto base = ladder_chains(alpha, symmetric, lmax);
        auto sites = corruption_sites(base.front(), 1.01);
        std::vector<char> flipped(sites.size(), 0);
        parallel_for(sites.size(), [&](std::size_t k) {
            auto chains = base;
            for (auto& c : chains) corrupt(c, sites[k]);
            for (const auto& c : grade_ladder(residual_ladder(chains), alpha, symmetric))
                if (c.status != Status::Pass) flipped[k] = 1;
        });
        int n = static_cast<int>(std::count(flipped.begin(), flipped.end(), 1));
        std::string tag = std::string(symmetric ? "symmetric" : "asymmetric") + " alpha=" + std::to_string(alpha);
        Check c;
        c.name = tag + " corrupted slots that flip a check";
        c.citation = "corruption";
        c.predicted = static_cast<double>(sites.size());
        c.fitted = n;
        c.status = n == static_cast<int>(sites.size()) ? Status::Pass : Status::Fail;
        c.detail = std::to_string(n) + "/" + std::to_string(sites.size()) + " slots flipped";
        r.checks.push_back(c);
        std::ostringstream unflipped;
        unflipped << tag << " unflipped slots (term, target, component, x3 power):";
        for (std::size_t k = 0; k < sites.size(); ++k)
            if (!flipped[k])
                unflipped << " (" << sites[k].term << "," << static_cast<int>(sites[k].target) << ","
                          << sites[k].component << "," << sites[k].power << ")";
        r.info.push_back(unflipped.str());
        if (verbose) std::cerr << "  " << c.detail << " for " << tag << "\n";
    }
    r.info.push_back("elapsed " + fmt(seconds_since(t0)) + " s");
    return r;
}

// ------------------------------------------------------------ 5: blow-up sweeps

CriterionResult blowup(const StokesGrid& grid) {
    CriterionResult r{5, "gap-center blow-up sweeps"};
    auto t0 = Clock::now();
    for (auto [alpha, predicted, key] : std::vector<std::tuple<int, double, std::string>>{
             {1, -1.0, "model-a12:lead"}, {3, -1.5, "model-a3:lead"}, {4, -0.5, "model-a4:lead"}}) {
        auto s = blowup_sweep(alpha, default_sweep_eps(), grid);
        Samples data;
        for (std::size_t i = 0; i < s.eps.size(); ++i) data.push_back({s.eps[i], s.grad_center[i]});
        r.checks.push_back(grade_fit("alpha=" + std::to_string(alpha) + " neck gradient vs eps", key, s.fit, predicted,
                                     0.15, Grade::Within, data));
        if (alpha == 1) {
            Samples scaled;
            for (auto [e, v] : data) scaled.push_back({e, v * std::abs(std::log(e))});
            auto f = fit_decay(scaled, 4, 1.5);
            r.info.push_back("alpha=1 gradient times |ln eps| fits exponent " + fmt(f.beta) +
                             " (the model problem carries no log factor; graded on the raw gradient)");
        }
    }
    add_runtime(r, t0, 900.0);
    return r;
}

// ------------------------------------------------------------ 6: manufactured data

CriterionResult manufactured() {
    CriterionResult r{6, "manufactured-data gradient and energy rates"};
    auto t0 = Clock::now();
    const double inf = std::numeric_limits<double>::infinity();
    auto a = keyprop_check(-1.0, inf);
    r.checks.push_back(grade_fit("(l,alpha)=(-1,inf) grad w exponent", "manufactured-grad", a.grad_fit, a.predicted_grad, 0.2,
                                 Grade::Within, a.grad_samples));
    auto b = keyprop_check(inf, -0.5);
    r.checks.push_back(grade_fit("(l,alpha)=(inf,-1/2) grad w exponent", "manufactured-grad", b.grad_fit, b.predicted_grad,
                                 0.2, Grade::Within, b.grad_samples));
    r.checks.push_back(grade_fit("(l,alpha)=(inf,-1/2) local energy exponent", "manufactured-energy", b.energy_fit,
                                 b.predicted_energy, 0.3, Grade::Within, b.energy_samples));
    add_runtime(r, t0, 600.0);
    return r;
}

// ------------------------------------------------------------ 7: lower-bound probes

CriterionResult probes() {
    CriterionResult r{7, "lower-bound probes"};
    auto t0 = Clock::now();
    std::vector<double> sym, a3, literal;
    for (double e : {1e-2, 1e-3, 1e-4}) {
        sym.push_back(e * lower_bound_probe(build_symmetric_chain(disk_for(true, e), 1, 1), 0, 0.5));
        auto c = build_chain(disk_for(false, e), 3, 1);
        a3.push_back(std::pow(e, 2.5) * lower_bound_probe(c, 1, 0.5));
        literal.push_back(std::pow(e, 2.5) * lower_bound_probe(c, 2, 0.5));
    }
    auto grade = [&](const std::string& name, const std::vector<double>& v) {
        auto [lo, hi] = std::minmax_element(v.begin(), v.end());
        double ratio = *lo > 0.0 ? *hi / *lo : std::numeric_limits<double>::infinity();
        auto c = grade_bound(name, "lower-bound", ratio, 2.0);
        c.detail += " values=" + fmt(v[0]) + "," + fmt(v[1]) + "," + fmt(v[2]) + " at eps=1e-2,1e-3,1e-4";
        r.checks.push_back(c);
    };
    grade("symmetric alpha=1 eps |d3 v| max/min", sym);
    grade("alpha=3 eps^(5/2) |d3^2 v| max/min", a3);
    r.info.push_back("alpha=3 eps^(5/2) |grad' d3^2 v| = " + fmt(literal[0]) + ", " + fmt(literal[1]) + ", " +
                     fmt(literal[2]) + " at eps=1e-2,1e-3,1e-4 (one more tangential derivative; not graded)");
    add_runtime(r, t0, 60.0);
    return r;
}

}  // namespace

CriterionResult run_criterion(int id, const AcceptanceOptions& opt) {
    auto t0 = Clock::now();
    CriterionResult r;
    switch (id) {
        case 1: r = elliptic_decay(); break;
        case 2: r = chain_invariants(); break;
        case 3: r = residual_ladder_criterion(); break;
        case 4: r = symmetric_chain(); break;
        case 5: r = blowup(opt.grid); break;
        case 6: r = manufactured(); break;
        case 7: r = probes(); break;
        case 8: r = negative_control(opt.verbose); break;
        default: throw DomainError("criterion id must be in 1..8");
    }
    r.seconds = seconds_since(t0);
    r.status = Status::Pass;
    for (const auto& c : r.checks) {
        if (c.status == Status::Fail) r.status = Status::Fail;
        else if (c.status == Status::Indeterminate && r.status == Status::Pass) r.status = Status::Indeterminate;
    }
    return r;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt) {
    std::vector<CriterionResult> out;
    for (int id : opt.criteria) {
        if (opt.verbose) std::cerr << "running criterion " << id << "\n";
        out.push_back(run_criterion(id, opt));
        if (opt.verbose) std::cerr << summary_line(out.back()) << "\n";
    }
    return out;
}

std::string summary_line(const CriterionResult& r) {
    std::ostringstream os;
    os << "criterion " << r.id << " " << status_name(r.status) << " " << r.title << " (" << r.checks.size()
       << " checks, " << std::fixed << std::setprecision(1) << r.seconds << " s)";
    return os.str();
}

nlohmann::json acceptance_json(const std::string& run_id, const std::vector<CriterionResult>& results) {
    nlohmann::json j;
    j["run_id"] = run_id;
    j["criteria"] = nlohmann::json::array();
    std::size_t total = 0, passed = 0;
    for (const auto& r : results) {
        auto checks = report_json(run_id, nullptr, r.checks)["checks"];
        // Wall-clock values go to the run log only, so reports of identical runs are byte-identical.
        for (auto& c : checks)
            if (c["citation"] == "budget") {
                c["fitted"] = nullptr;
                c["detail"] = "see run log";
            }
        j["criteria"].push_back({{"id", r.id},
                                 {"title", r.title},
                                 {"status", status_name(r.status)},
                                 {"checks", checks},
                                 {"info", r.info}});
        for (const auto& c : r.checks) {
            ++total;
            passed += c.status == Status::Pass;
        }
    }
    j["checks_total"] = total;
    j["checks_passed"] = passed;
    return j;
}

}  // namespace gapflow
