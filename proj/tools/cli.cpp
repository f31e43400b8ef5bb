#include "cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <regex>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "gapflow/acceptance.hpp"
#include "gapflow/aux_expansion.hpp"
#include "gapflow/singular_elliptic.hpp"

namespace fs = std::filesystem;

namespace gapflow::cli {

namespace {

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
    return s;
}

// ------------------------------------------------------------ schema

enum class Kind { String, Number, Integer, Boolean, Object, IntList, NumberList, Grid };

struct Key {
    Kind kind;
    std::string help;
};

const std::map<std::string, Key>& top_keys() {
    static const std::map<std::string, Key> k{
        {"schema", {Kind::String, std::string("required, \"") + kSchema + "\""}},
        {"task", {Kind::String, "required, build | elliptic | sweep | verify-all"}},
        {"geometry", {Kind::Object, "geometry block"}},
        {"alpha", {Kind::IntList, "rigid-motion indices in 1..6 (integer or list)"}},
        {"lmax", {Kind::Integer, "number of chain terms, or derivative order for elliptic"}},
        {"symmetric_chain", {Kind::Boolean, "Green-function chain (alpha 1, 2, symmetric geometry)"}},
        {"eps", {Kind::NumberList, "sweep values of eps, at least 4 spanning 1.5 decades"}},
        {"grid", {Kind::Grid, "Stokes grid \"n_r x n_theta x n_t\" or {n_r, n_theta, n_t}"}},
        {"gamma", {Kind::Number, "elliptic right-hand side exponent"}},
        {"mode", {Kind::Integer, "elliptic angular mode"}},
        {"tolerance", {Kind::Number, "exponent tolerance for sweep and elliptic grading"}},
        {"criteria", {Kind::IntList, "acceptance criteria to run, 1..8"}},
        {"output", {Kind::String, "output directory"}},
    };
    return k;
}

const std::map<std::string, Key>& geometry_keys() {
    static const std::map<std::string, Key> k{
        {"preset", {Kind::String, "symmetric-default | asymmetric-default | custom"}},
        {"eps", {Kind::Number, "minimal gap distance"}},
        {"R", {Kind::Number, "patch radius"}},
        {"mu", {Kind::Number, "viscosity"}},
        {"h1", {Kind::NumberList, "top profile power-series coefficients (custom)"}},
        {"h2", {Kind::NumberList, "bottom profile power-series coefficients (custom)"}},
        {"nodes", {Kind::Integer, "radial nodes of the disk grid"}},
        {"mode_cap", {Kind::Integer, "largest angular mode kept"}},
    };
    return k;
}

std::string kind_name(Kind k) {
    switch (k) {
        case Kind::String: return "string";
        case Kind::Number: return "number";
        case Kind::Integer: return "integer";
        case Kind::Boolean: return "boolean";
        case Kind::Object: return "object";
        case Kind::IntList: return "integer or list of integers";
        case Kind::NumberList: return "list of numbers";
        case Kind::Grid: return "grid string or object";
    }
    return "?";
}

bool has_kind(const nlohmann::json& v, Kind k) {
    auto all = [&](auto pred) {
        if (!v.is_array()) return false;
        for (const auto& e : v)
            if (!pred(e)) return false;
        return true;
    };
    switch (k) {
        case Kind::String: return v.is_string();
        case Kind::Number: return v.is_number();
        case Kind::Integer: return v.is_number_integer();
        case Kind::Boolean: return v.is_boolean();
        case Kind::Object: return v.is_object();
        case Kind::IntList: return v.is_number_integer() || all([](const auto& e) { return e.is_number_integer(); });
        case Kind::NumberList: return all([](const auto& e) { return e.is_number(); });
        case Kind::Grid: return v.is_string() || v.is_object();
    }
    return false;
}

void check_keys(const nlohmann::json& j, const std::map<std::string, Key>& keys, const std::string& where,
                std::vector<std::string>& diag) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        auto k = keys.find(it.key());
        if (k == keys.end())
            diag.push_back(where + it.key() + ": unknown key");
        else if (!has_kind(it.value(), k->second.kind))
            diag.push_back(where + it.key() + ": expected " + kind_name(k->second.kind));
    }
}

std::vector<int> int_list(const nlohmann::json& v) {
    if (v.is_number_integer()) return {v.get<int>()};
    return v.get<std::vector<int>>();
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) h = (h ^ c) * 1099511628211ull;
    return h;
}

std::string run_id(const RunConfig& cfg) {
    std::ostringstream os;
    os << cfg.task << "-" << std::hex << std::setw(16) << std::setfill('0') << fnv1a(cfg.to_json().dump());
    return os.str();
}

// ------------------------------------------------------------ output helpers

class RunLog {
public:
    explicit RunLog(const fs::path& dir) : f_(dir / "run.log", std::ios::app), t0_(std::chrono::steady_clock::now()) {
        auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
        f_ << "start " << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ") << "\n";
    }
    void line(const std::string& s) {
        double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
        f_ << std::fixed << std::setprecision(3) << t << "s " << s << "\n";
    }

private:
    std::ofstream f_;
    std::chrono::steady_clock::time_point t0_;
};

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

int finish(const std::vector<Check>& checks, std::ostream& out) {
    std::vector<std::string> failing;
    for (const auto& c : checks)
        if (c.status == Status::Fail) failing.push_back(c.citation + " (" + c.name + ")");
    if (failing.empty()) return 0;
    out << "FAIL: " << join(failing, "; ") << "\n";
    return 1;
}

void print_check(std::ostream& out, const Check& c) {
    out << status_name(c.status) << " " << c.name << " [" << c.citation << "] " << c.detail << "\n";
}

// ------------------------------------------------------------ tasks

int run_build(const RunConfig& cfg, const fs::path& dir, std::ostream& out, RunLog& log) {
    auto disk = make_disk(cfg.geometry.make(), cfg.geometry.nodes, cfg.geometry.mode_cap);
    for (int alpha : cfg.alpha) {
        auto chain = build_chain(disk, alpha, cfg.lmax, cfg.symmetric_chain);
        auto sub = dir / ("alpha_" + std::to_string(alpha));
        fs::remove_all(sub);
        dump_chain(chain, sub);
        log.line("built alpha=" + std::to_string(alpha));
        out << "alpha=" << alpha << " terms=" << chain.max_l() << " status=" << chain.status << " -> " << sub.string()
            << "\n";
    }
    return 0;
}

int run_elliptic(const RunConfig& cfg, const fs::path& dir, std::ostream& out, RunLog& log) {
    const double eps = cfg.geometry.eps, gamma = cfg.gamma;
    const int n = cfg.mode;
    SingularEllipticProblem p;
    p.disk = make_disk(cfg.geometry.make(), cfg.geometry.nodes, cfg.geometry.mode_cap);
    p.gamma = gamma;
    const GapGeometry& g = p.disk->geom();
    // r^n cos(n theta) delta^(gamma - n/2) keeps the right-hand side in class gamma.
    auto f = [&g, gamma, n](double r) { return std::pow(r, n) * std::pow(g.delta_r(r), gamma - n / 2.0); };
    p.rhs = CoeffField::from_radial_function(p.disk, n, false, f);
    if (n == 0) p.radial_rhs = f;
    auto U = solve(p);
    log.line("solved");
    auto res = verify_u_esti(p, U, cfg.lmax);
    std::vector<Check> checks;
    for (int l = 0; l <= cfg.lmax; ++l) {
        double predicted = gamma - l / 2.0 + 1.0;
        checks.push_back(grade_fit("grad^" + std::to_string(l) + " U", "elliptic-decay", res.fits[l], predicted,
                                   cfg.tolerance, Grade::Within, res.data[l]));
        write_text(dir / ("elliptic_l" + std::to_string(l) + ".csv"), plot_csv(res.data[l]));
        print_check(out, checks.back());
    }
    out << "weighted residual " << weighted_residual(p, U) << "\n";
    write_text(dir / "report.json", report_json(run_id(cfg), cfg.geometry.to_json(), checks).dump(2) + "\n");
    return finish(checks, out);
}

int run_sweep(const RunConfig& cfg, const fs::path& dir, std::ostream& out, RunLog& log) {
    auto eps = cfg.eps.empty() ? default_sweep_eps() : cfg.eps;
    std::vector<Check> checks;
    for (int alpha : cfg.alpha) {
        auto s = blowup_sweep(alpha, eps, cfg.grid);
        log.line("swept alpha=" + std::to_string(alpha));
        write_text(dir / ("sweep_alpha" + std::to_string(alpha) + ".csv"), sweep_csv(s));
        Samples data;
        for (std::size_t i = 0; i < s.eps.size(); ++i) data.push_back({s.eps[i], s.grad_center[i]});
        const auto table = expectation_table(alpha, false);
        checks.push_back(grade_fit("alpha=" + std::to_string(alpha) + " neck gradient vs eps", table.front().citation,
                                   s.fit, table.front().exponent, cfg.tolerance, Grade::Within, data));
        print_check(out, checks.back());
    }
    nlohmann::json geom = {{"preset", "symmetric-default"}, {"eps", eps}};
    write_text(dir / "report.json", report_json(run_id(cfg), geom, checks).dump(2) + "\n");
    return finish(checks, out);
}

int run_verify_all(const RunConfig& cfg, const fs::path& dir, std::ostream& out, RunLog& log) {
    AcceptanceOptions opt;
    opt.grid = cfg.grid;
    opt.criteria = cfg.criteria;
    std::vector<CriterionResult> results;
    std::vector<Check> all;
    fs::create_directories(dir / "plots");
    for (int id : cfg.criteria) {
        results.push_back(run_criterion(id, opt));
        const auto& r = results.back();
        log.line(summary_line(r));
        out << summary_line(r) << "\n";
        for (std::size_t k = 0; k < r.checks.size(); ++k) {
            all.push_back(r.checks[k]);
            if (!r.checks[k].data.empty())
                write_text(dir / "plots" / ("c" + std::to_string(id) + "_" + std::to_string(k) + ".csv"),
                           plot_csv(r.checks[k].data));
        }
    }
    auto report = acceptance_json(run_id(cfg), results);
    report["geometry"] = cfg.geometry.to_json();
    write_text(dir / "report.json", report.dump(2) + "\n");
    out << report["checks_passed"] << "/" << report["checks_total"] << " checks passed\n";
    return finish(all, out);
}

}  // namespace

// ------------------------------------------------------------ config

ConfigError::ConfigError(std::vector<std::string> d)
    : std::runtime_error("invalid configuration: " + join(d, "; ")), diagnostics(std::move(d)) {}

GapGeometry GeometryConfig::make(double e) const {
    if (preset == "symmetric-default") return GapGeometry::symmetric_default(e, R, mu);
    if (preset == "asymmetric-default") return GapGeometry::asymmetric_default(e, R, mu);
    return GapGeometry(e, R, mu, RadialProfile(h1), RadialProfile(h2));
}

nlohmann::json GeometryConfig::to_json() const {
    nlohmann::json j{{"preset", preset}, {"eps", eps}, {"R", R}, {"mu", mu}, {"nodes", nodes}, {"mode_cap", mode_cap}};
    if (preset == "custom") {
        j["h1"] = h1;
        j["h2"] = h2;
    }
    return j;
}

nlohmann::json RunConfig::to_json() const {
    return {{"schema", kSchema},
            {"task", task},
            {"geometry", geometry.to_json()},
            {"alpha", alpha},
            {"lmax", lmax},
            {"symmetric_chain", symmetric_chain},
            {"eps", eps},
            {"grid", nlohmann::json{{"n_r", grid.n_r}, {"n_theta", grid.n_theta}, {"n_t", grid.n_t}}},
            {"gamma", gamma},
            {"mode", mode},
            {"tolerance", tolerance},
            {"criteria", criteria},
            {"output", output}};
}

StokesGrid parse_grid(const std::string& s) {
    std::smatch m;
    static const std::regex re(R"(\s*(\d+)\s*x\s*(\d+)\s*x\s*(\d+)\s*)");
    if (!std::regex_match(s, m, re)) throw ConfigError({"grid: expected n_r x n_theta x n_t, got \"" + s + "\""});
    return {std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
}

RunConfig parse_config(const nlohmann::json& j) {
    std::vector<std::string> diag;
    if (!j.is_object()) throw ConfigError({"config must be a JSON object"});
    check_keys(j, top_keys(), "", diag);
    if (!j.contains("schema"))
        diag.push_back(std::string("schema: missing, expected \"") + kSchema + "\"");
    else if (j["schema"].is_string() && j["schema"] != kSchema)
        diag.push_back("schema: unsupported version " + j["schema"].get<std::string>());
    if (!j.contains("task")) diag.push_back("task: missing");
    if (j.contains("geometry") && j["geometry"].is_object()) check_keys(j["geometry"], geometry_keys(), "geometry.", diag);
    if (!diag.empty()) throw ConfigError(diag);

    RunConfig c;
    c.task = j["task"];
    static const std::set<std::string> tasks{"build", "elliptic", "sweep", "verify-all"};
    if (!tasks.count(c.task)) diag.push_back("task: unknown task \"" + c.task + "\"");
    if (j.contains("geometry")) {
        const auto& g = j["geometry"];
        auto& G = c.geometry;
        G.preset = g.value("preset", G.preset);
        G.eps = g.value("eps", G.eps);
        G.R = g.value("R", G.R);
        G.mu = g.value("mu", G.mu);
        G.nodes = g.value("nodes", G.nodes);
        G.mode_cap = g.value("mode_cap", G.mode_cap);
        if (g.contains("h1")) G.h1 = g["h1"].get<std::vector<double>>();
        if (g.contains("h2")) G.h2 = g["h2"].get<std::vector<double>>();
        if (G.preset != "symmetric-default" && G.preset != "asymmetric-default" && G.preset != "custom")
            diag.push_back("geometry.preset: unknown preset \"" + G.preset + "\"");
        if (G.preset == "custom" && (G.h1.empty() || G.h2.empty()))
            diag.push_back("geometry: custom preset needs h1 and h2");
        if (G.preset != "custom" && (g.contains("h1") || g.contains("h2")))
            diag.push_back("geometry: h1 and h2 are only allowed with the custom preset");
        if (!(G.eps > 0.0)) diag.push_back("geometry.eps: must be positive");
        if (!(G.R > 0.0)) diag.push_back("geometry.R: must be positive");
        if (!(G.mu > 0.0)) diag.push_back("geometry.mu: must be positive");
        if (G.nodes < 16) diag.push_back("geometry.nodes: must be at least 16");
        if (G.mode_cap < 1) diag.push_back("geometry.mode_cap: must be at least 1");
    }
    if (j.contains("alpha")) c.alpha = int_list(j["alpha"]);
    for (int a : c.alpha)
        if (a < 1 || a > 6) diag.push_back("alpha: " + std::to_string(a) + " is outside 1..6");
    c.lmax = j.value("lmax", c.lmax);
    if (c.lmax < (c.task == "elliptic" ? 0 : 1)) diag.push_back("lmax: too small");
    c.symmetric_chain = j.value("symmetric_chain", c.symmetric_chain);
    if (j.contains("eps")) c.eps = j["eps"].get<std::vector<double>>();
    for (double e : c.eps)
        if (!(e > 0.0)) diag.push_back("eps: values must be positive");
    if (j.contains("grid")) {
        const auto& g = j["grid"];
        try {
            if (g.is_string())
                c.grid = parse_grid(g.get<std::string>());
            else {
                check_keys(g, {{"n_r", {Kind::Integer, ""}}, {"n_theta", {Kind::Integer, ""}}, {"n_t", {Kind::Integer, ""}}},
                           "grid.", diag);
                c.grid = {g.value("n_r", c.grid.n_r), g.value("n_theta", c.grid.n_theta), g.value("n_t", c.grid.n_t)};
            }
        } catch (const ConfigError& e) {
            diag.insert(diag.end(), e.diagnostics.begin(), e.diagnostics.end());
        }
    }
    if (c.grid.n_r < 2 || c.grid.n_theta < 4 || c.grid.n_t < 2) diag.push_back("grid: too coarse");
    c.gamma = j.value("gamma", c.gamma);
    c.mode = j.value("mode", c.mode);
    if (c.mode < 0) diag.push_back("mode: must be non-negative");
    c.tolerance = j.value("tolerance", c.tolerance);
    if (!(c.tolerance > 0.0)) diag.push_back("tolerance: must be positive");
    if (j.contains("criteria")) c.criteria = int_list(j["criteria"]);
    for (int id : c.criteria)
        if (id < 1 || id > 8) diag.push_back("criteria: " + std::to_string(id) + " is outside 1..8");
    c.output = j.value("output", c.output);
    if (c.output.empty()) diag.push_back("output: must not be empty");
    if (!diag.empty()) throw ConfigError(diag);
    return c;
}

nlohmann::json config_schema() {
    nlohmann::json j{{"schema", kSchema}, {"keys", nlohmann::json::object()}, {"geometry", nlohmann::json::object()}};
    for (const auto& [k, v] : top_keys()) j["keys"][k] = {{"type", kind_name(v.kind)}, {"help", v.help}};
    for (const auto& [k, v] : geometry_keys()) j["geometry"][k] = {{"type", kind_name(v.kind)}, {"help", v.help}};
    return j;
}

nlohmann::json preset_config(const std::string& name, const std::string& task) {
    if (name != "symmetric-default" && name != "asymmetric-default")
        throw ConfigError({"preset: unknown preset \"" + name + "\""});
    return {{"schema", kSchema}, {"task", task}, {"geometry", {{"preset", name}, {"eps", 1e-3}}}};
}

int run(const RunConfig& cfg, std::ostream& out) {
    fs::path dir = cfg.output;
    fs::create_directories(dir);
    RunLog log(dir);
    log.line("task " + cfg.task + " run_id " + run_id(cfg));
    int status = 0;
    if (cfg.task == "build") status = run_build(cfg, dir, out, log);
    else if (cfg.task == "elliptic") status = run_elliptic(cfg, dir, out, log);
    else if (cfg.task == "sweep") status = run_sweep(cfg, dir, out, log);
    else if (cfg.task == "verify-all") status = run_verify_all(cfg, dir, out, log);
    else throw ConfigError({"task: unknown task \"" + cfg.task + "\""});
    log.line("exit " + std::to_string(status));
    return status;
}

// ------------------------------------------------------------ command line

int main_cli(int argc, char** argv) {
    CLI::App app{"gapflow: near-contact Stokes gap expansions, solvers and rate checks"};
    app.require_subcommand(1);

    // Options shared by the task subcommands; explicit flags override the config file.
    struct Common {
        std::string config, preset, out;
    };
    auto add_common = [](CLI::App* s, Common& c) {
        s->add_option("--config", c.config, "JSON run config");
        s->add_option("--preset", c.preset, "symmetric-default or asymmetric-default");
        s->add_option("--out", c.out, "output directory");
    };

    Common cb, ce, cs, cv;
    std::vector<int> b_alpha, s_alpha, v_criteria;
    int b_lmax = 0, e_lmax = -1, e_mode = -1;
    double b_eps = 0, e_eps = 0, e_gamma = NAN;
    bool b_sym = false;
    std::vector<double> s_eps;
    std::string s_grid, v_grid;

    auto* build = app.add_subcommand("build", "build expansion chains and dump them");
    add_common(build, cb);
    build->add_option("--alpha", b_alpha, "rigid-motion indices 1..6")->delimiter(',');
    build->add_option("--lmax", b_lmax, "number of terms");
    build->add_option("--eps", b_eps, "gap distance");
    build->add_flag("--symmetric-chain", b_sym, "Green-function chain on a symmetric geometry");

    auto* elliptic = app.add_subcommand("elliptic", "solve the singular-drift elliptic equation and fit its decay");
    add_common(elliptic, ce);
    elliptic->add_option("--gamma", e_gamma, "right-hand side exponent");
    elliptic->add_option("--lmax", e_lmax, "highest derivative order fitted");
    elliptic->add_option("--eps", e_eps, "gap distance");
    elliptic->add_option("--mode", e_mode, "angular mode of the right-hand side");

    auto* sweep = app.add_subcommand("sweep", "gap-center blow-up sweep of the Stokes solver");
    add_common(sweep, cs);
    sweep->add_option("--alpha", s_alpha, "rigid-motion indices 1..6")->delimiter(',');
    sweep->add_option("--eps", s_eps, "comma-separated eps values")->delimiter(',');
    sweep->add_option("--grid", s_grid, "n_r x n_theta x n_t, e.g. 48x32x16");

    auto* verify = app.add_subcommand("verify-all", "run the acceptance suite and write one summary report");
    add_common(verify, cv);
    verify->add_option("--criteria", v_criteria, "subset of criteria 1..8")->delimiter(',');
    verify->add_option("--grid", v_grid, "Stokes grid for the blow-up sweeps");

    int x_alpha = 1;
    bool x_sym = false;
    auto* expect = app.add_subcommand("dump-expectations", "print the predicted exponent table as JSON");
    expect->add_option("--alpha", x_alpha, "0 for the full solution, 1..6 for a model component");
    expect->add_flag("--symmetric", x_sym, "symmetric geometry");

    auto* schema = app.add_subcommand("schema", "print the config schema");

    std::string r_config;
    auto* runcfg = app.add_subcommand("run", "execute the task named in a config file");
    runcfg->add_option("config", r_config, "JSON run config")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*expect) {
            nlohmann::json j = nlohmann::json::array();
            for (const auto& e : expectation_table(x_alpha, x_sym))
                j.push_back({{"quantity", e.quantity}, {"m", e.m}, {"exponent", e.exponent}, {"citation", e.citation},
                             {"note", e.note}});
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*schema) {
            std::cout << config_schema().dump(2) << "\n";
            return 0;
        }

        auto load = [](const Common& c, const std::string& task) {
            nlohmann::json j;
            if (!c.config.empty()) {
                std::ifstream f(c.config);
                if (!f) throw ConfigError({"config: cannot open " + c.config});
                try {
                    j = nlohmann::json::parse(f);
                } catch (const nlohmann::json::parse_error& e) {
                    throw ConfigError({std::string("config: ") + e.what()});
                }
                if (j.is_object() && j.contains("task") && j["task"] != task)
                    throw ConfigError({"task: config is for \"" + j["task"].get<std::string>() + "\", not \"" + task + "\""});
            } else {
                j = preset_config(c.preset.empty() ? "asymmetric-default" : c.preset, task);
            }
            if (!c.preset.empty() && j.is_object()) j["geometry"]["preset"] = c.preset;
            if (!c.out.empty() && j.is_object()) j["output"] = c.out;
            return j;
        };

        nlohmann::json j;
        if (*runcfg) {
            std::ifstream f(r_config);
            if (!f) throw ConfigError({"config: cannot open " + r_config});
            try {
                j = nlohmann::json::parse(f);
            } catch (const nlohmann::json::parse_error& e) {
                throw ConfigError({std::string("config: ") + e.what()});
            }
        } else if (*build) {
            j = load(cb, "build");
            if (!b_alpha.empty()) j["alpha"] = b_alpha;
            if (b_lmax) j["lmax"] = b_lmax;
            if (b_eps) j["geometry"]["eps"] = b_eps;
            if (b_sym) j["symmetric_chain"] = true;
        } else if (*elliptic) {
            j = load(ce, "elliptic");
            if (!std::isnan(e_gamma)) j["gamma"] = e_gamma;
            if (e_lmax >= 0) j["lmax"] = e_lmax;
            if (e_eps) j["geometry"]["eps"] = e_eps;
            if (e_mode >= 0) j["mode"] = e_mode;
            if (!j.contains("lmax")) j["lmax"] = 1;
        } else if (*sweep) {
            j = load(cs, "sweep");
            if (!s_alpha.empty()) j["alpha"] = s_alpha;
            if (!s_eps.empty()) j["eps"] = s_eps;
            if (!s_grid.empty()) j["grid"] = s_grid;
        } else if (*verify) {
            j = load(cv, "verify-all");
            if (!v_criteria.empty()) j["criteria"] = v_criteria;
            if (!v_grid.empty()) j["grid"] = v_grid;
        }
        return run(parse_config(j), std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "configuration error:\n";
        for (const auto& d : e.diagnostics) std::cerr << "  " << d << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}

}  // namespace gapflow::cli
