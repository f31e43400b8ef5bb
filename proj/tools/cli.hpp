#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapflow/gap_geometry.hpp"
#include "gapflow/stokes_fd.hpp"

namespace gapflow::cli {

inline constexpr const char* kSchema = "gapflow-config/1";

// Invalid configuration; every diagnostic is one line.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(std::vector<std::string> diagnostics);
    std::vector<std::string> diagnostics;
};

struct GeometryConfig {
    std::string preset = "asymmetric-default";  // symmetric-default, asymmetric-default or custom
    double eps = 1e-3;
    double R = 1.0;
    double mu = 1.0;
    std::vector<double> h1, h2;  // power-series coefficients, custom only
    int nodes = 512;
    int mode_cap = 8;

    GapGeometry make(double eps) const;
    GapGeometry make() const { return make(eps); }
    nlohmann::json to_json() const;
};

struct RunConfig {
    std::string task;  // build, elliptic, sweep, verify-all
    GeometryConfig geometry;
    std::vector<int> alpha{1};
    int lmax = 3;
    bool symmetric_chain = false;  // Green-function chain for alpha 1, 2 on a symmetric geometry
    std::vector<double> eps;       // sweep values; empty means the default sweep
    StokesGrid grid;
    double gamma = -2.5;  // elliptic right-hand side delta^gamma
    int mode = 0;         // elliptic angular mode
    double tolerance = 0.15;
    std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8};
    std::string output = "gapflow_out";

    nlohmann::json to_json() const;
};

// Validates against the versioned schema; unknown keys and wrong types are rejected.
RunConfig parse_config(const nlohmann::json& j);
// Description of the accepted keys and their types.
nlohmann::json config_schema();
// Named preset config (symmetric-default or asymmetric-default) for a task.
nlohmann::json preset_config(const std::string& name, const std::string& task);

// "48x32x16" -> grid.
StokesGrid parse_grid(const std::string& s);

// Executes a validated config. Returns 0, or 1 when a graded check fails. Reports go to cfg.output;
// human-readable progress to out, wall-clock timings to the run log in the output directory.
int run(const RunConfig& cfg, std::ostream& out);

// Full command line front end; returns the process exit status (2 for configuration errors).
int main_cli(int argc, char** argv);

}  // namespace gapflow::cli
