#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"

using namespace gapflow;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

int run_args(std::vector<std::string> args) {
    args.insert(args.begin(), "gapflow");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    return cli::main_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config validation") {
    CHECK_THROWS_AS(cli::parse_config(nlohmann::json::object()), cli::ConfigError);
    try {
        cli::parse_config({{"schema", cli::kSchema}, {"task", "build"}, {"bogus", 1}, {"geometry", {{"eps", "x"}}}});
        FAIL("expected a ConfigError");
    } catch (const cli::ConfigError& e) {
        CHECK(e.diagnostics.size() == 2);
    }
    CHECK_THROWS_AS(cli::parse_config({{"schema", "gapflow-config/0"}, {"task", "build"}}), cli::ConfigError);
    CHECK_THROWS_AS(cli::parse_config({{"schema", cli::kSchema}, {"task", "build"}, {"alpha", 7}}), cli::ConfigError);
    auto c = cli::parse_config({{"schema", cli::kSchema}, {"task", "sweep"}, {"alpha", 3}, {"grid", "24x16x8"}});
    CHECK(c.alpha == std::vector<int>{3});
    CHECK(c.grid.n_r == 24);
    CHECK(c.grid.n_t == 8);
    CHECK(cli::parse_config(c.to_json()).to_json() == c.to_json());
    CHECK_THROWS_AS(cli::parse_grid("48x32"), cli::ConfigError);
}

TEST_CASE("shipped presets validate") {
    for (const char* name : {"symmetric-default", "asymmetric-default", "sweep-alpha3"}) {
        CAPTURE(name);
        auto j = nlohmann::json::parse(std::ifstream(fs::path(GAPFLOW_PRESET_DIR) / (std::string(name) + ".json")));
        CHECK_NOTHROW(cli::parse_config(j));
    }
}

TEST_CASE("empty config exits with status 2") {
    auto p = fs::temp_directory_path() / "gapflow_empty.json";
    std::ofstream(p) << "{}";
    CHECK(run_args({"build", "--config", p.string()}) == 2);
    CHECK(run_args({"run", p.string()}) == 2);
    fs::remove(p);
}

TEST_CASE("build reruns are byte identical") {
    auto a = fs::temp_directory_path() / "gapflow_build_a", b = fs::temp_directory_path() / "gapflow_build_b";
    fs::remove_all(a);
    fs::remove_all(b);
    REQUIRE(run_args({"build", "--alpha", "4", "--lmax", "5", "--eps", "1e-2", "--out", a.string()}) == 0);
    REQUIRE(run_args({"build", "--alpha", "4", "--lmax", "5", "--eps", "1e-2", "--out", b.string()}) == 0);
    auto manifest = nlohmann::json::parse(slurp(a / "alpha_4" / "manifest.json"));
    CHECK(manifest["alpha"] == 4);
    int files = 0;
    for (const auto& e : fs::directory_iterator(a / "alpha_4")) {
        CHECK(slurp(e.path()) == slurp(b / "alpha_4" / e.path().filename()));
        ++files;
    }
    CHECK(files > 5);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("elliptic task writes a graded report") {
    auto d = fs::temp_directory_path() / "gapflow_elliptic";
    fs::remove_all(d);
    CHECK(run_args({"elliptic", "--preset", "symmetric-default", "--gamma", "-2.5", "--lmax", "1", "--out", d.string()}) ==
          0);
    auto r = nlohmann::json::parse(slurp(d / "report.json"));
    CHECK(r["checks"].size() == 2);
    CHECK(r["checks"][0]["status"] == "PASS");
    CHECK(fs::exists(d / "elliptic_l1.csv"));
    fs::remove_all(d);
}
