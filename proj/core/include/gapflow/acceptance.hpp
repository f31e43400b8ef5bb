#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapflow/stokes_fd.hpp"
#include "gapflow/verify.hpp"

namespace gapflow {

struct CriterionResult {
    int id = 0;
    std::string title;
    std::vector<Check> checks;
    std::vector<std::string> info;  // extra measurements that are reported but not graded
    Status status = Status::Pass;
    double seconds = 0.0;
};

struct AcceptanceOptions {
    StokesGrid grid;                        // blow-up sweeps
    std::vector<int> criteria{1, 2, 3, 4, 5, 6, 7, 8};
    bool verbose = false;                   // progress lines on stderr
};

// Criteria 1..8: elliptic decay, chain invariants, residual ladder, symmetric chain, blow-up sweeps,
// manufactured data, lower-bound probes, coefficient corruption.
CriterionResult run_criterion(int id, const AcceptanceOptions& opt = {});
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt = {});

// One line: "criterion <id> <PASS|FAIL|INDETERMINATE> <title> (<n> checks, <s> s)".
std::string summary_line(const CriterionResult& r);
nlohmann::json acceptance_json(const std::string& run_id, const std::vector<CriterionResult>& results);

}  // namespace gapflow
