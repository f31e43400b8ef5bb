#pragma once

#include <array>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapflow/fields.hpp"

namespace gapflow {

class FitError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class Status { Pass, Fail, Indeterminate, Warning };
std::string status_name(Status s);

using Samples = std::vector<std::pair<double, double>>;

// Least-squares power law value ~ Chat * x^beta on log-log data.
struct DecayFit {
    double beta = 0.0;
    double Chat = 0.0;
    double r2 = 0.0;
    double beta_se = 0.0;  // standard error of the slope
    double lo = 0.0, hi = 0.0;  // sampled abscissa range
    int samples = 0;
};

// Requires at least min_samples positive samples spanning min_decades in x.
DecayFit fit_decay(const Samples& samples, int min_samples = 6, double min_decades = 1.5);

// Dyadic delta-annuli delta_k = delta_min * 2^k up to delta(r_max).
struct FitWindow {
    double delta_min_over_eps = 4.0;
    double r_max_over_R = 0.8;
};

// Pairs each annulus with its inner delta and the largest node value inside it.
Samples dyadic_samples(const Disk& disk, const std::vector<double>& node_sup, const FitWindow& w = {});

// Per-node sup over theta (and x3 samples for PolyField) of |f|, or of the Euclidean norm of several fields.
std::vector<double> node_sup(const std::vector<CoeffField>& comps, int n_theta = 16);
std::vector<double> node_sup(const std::vector<PolyField>& comps, const SampleSpec& spec = {});

struct Expectation {
    std::string quantity;
    int m = 0;
    double exponent = 0.0;
    std::string citation;
    std::string note;
};

// alpha in 1..6 for the model components; alpha = 0 for the full solution.
std::vector<Expectation> expectation_table(int alpha, bool symmetric, int m_max = 6);

enum class Grade { Within, AtLeast, AtMost };

struct Check {
    std::string name;
    std::string citation;
    double predicted = 0.0;
    double fitted = 0.0;
    double tol = 0.0;
    Status status = Status::Indeterminate;
    std::string detail;
    Samples data;
};

// Grades a fit: r2 below 0.95 gives Indeterminate unless the 2-sigma slope interval is inside the tolerance.
Check grade_fit(std::string name, std::string citation, const DecayFit& fit, double predicted, double tol,
                Grade g = Grade::Within, Samples data = {});
// value <= limit passes.
Check grade_bound(std::string name, std::string citation, double value, double limit);

nlohmann::json report_json(const std::string& run_id, const nlohmann::json& geometry,
                           const std::vector<Check>& checks);
std::string plot_csv(const Samples& s);

// Rigid motions psi_1..psi_6.
std::array<double, 3> rigid_motion(int alpha, double x1, double x2, double x3);

enum class Face { Top, Bottom };
using VecTarget = std::function<std::array<double, 3>(double, double, double)>;

// Max deviation of v from target on a face, sampled at quasi-random (node, theta) pairs.
double check_trace(const VecField& v, Face face, const VecTarget& target, int samples = 1000);

// Quasi-random point i of the 2D R2 sequence in [0,1)^2.
std::array<double, 2> r2_sequence(int i);

}  // namespace gapflow
