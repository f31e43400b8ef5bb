#pragma once

#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gapflow/fields.hpp"
#include "gapflow/verify.hpp"

namespace gapflow {

class PreconditionError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One auxiliary pair (v_l, pbar_l) with pbar_l = p_hat(x') + p_tilde(x).
struct ChainTerm {
    VecField v;
    CoeffField p_hat;
    PolyField p_tilde;
    // Prescribed divergence of v (empty field means zero).
    CoeffField div_target;
    // Part of the third residual component deferred to the next pressure (alpha = 3 chain).
    PolyField deferred;
};

struct ExpansionChain {
    int alpha = 1;
    bool symmetric = false;
    DiskPtr disk;
    double mu = 1.0;
    std::vector<ChainTerm> terms;
    // Cumulative residuals f^l = sum_{j <= l} (mu Lap v_j - grad pbar_j), l = 1..max_l.
    std::vector<VecField> residuals;
    // "ok", or "construction limit" when more terms were requested than the construction supports.
    std::string status = "ok";
    int requested_l = 0;

    int max_l() const { return static_cast<int>(terms.size()); }
};

// General (asymmetric) constructions. alpha = 2 and 6 use the x2 driver of alpha = 1 and 5.
ExpansionChain build_alpha12_chain(const DiskPtr& disk, int alpha, int lmax);
ExpansionChain build_alpha3_chain(const DiskPtr& disk, int lmax);
ExpansionChain build_alpha4_chain(const DiskPtr& disk, int lmax);
ExpansionChain build_alpha56_chain(const DiskPtr& disk, int alpha, int lmax);
// Requires h1 = h2; alpha in {1, 2}.
ExpansionChain build_symmetric_chain(const DiskPtr& disk, int alpha, int lmax);
// Dispatches on alpha; symmetric selects the Green-function chain for alpha in {1, 2}.
ExpansionChain build_chain(const DiskPtr& disk, int alpha, int lmax, bool symmetric = false);

// Single terms of the alpha = 1, 2 construction, appended to a chain in order.
void build_alpha12_term1(ExpansionChain& chain);
void build_alpha12_term2(ExpansionChain& chain);
void build_alpha12_term3(ExpansionChain& chain);

// mu Lap v - grad pbar of one term.
VecField term_residual(const ExpansionChain& chain, int l);
// Cumulative residual f^l recomputed from the stored terms.
VecField residual(const ExpansionChain& chain, int l);
void recompute_residuals(ExpansionChain& chain);
// Sum of v over terms 1..l (l <= 0 means all).
VecField velocity(const ExpansionChain& chain, int l = 0);

// Predicted decay exponent of |f^l|.
double predicted_residual_exponent(const ExpansionChain& chain, int l);

// At (r sqrt(eps), 0, 0): |d3 v^(1)| for m = 0, else the norm of grad_x'^(m-1) d3^2 v^(1), summed over terms.
double lower_bound_probe(const ExpansionChain& chain, int m, double r);

// Scales one stored coefficient by factor and recomputes the residuals.
struct Corruption {
    enum class Target { Velocity, PHat, PTilde };
    int term = 1;
    Target target = Target::Velocity;
    int component = 0;  // velocity component 0..2
    int power = 0;      // x3 power of the coefficient
    double factor = 1.01;
};
void corrupt(ExpansionChain& chain, const Corruption& c);
// Coefficient slots that are nonzero in the chain.
std::vector<Corruption> corruption_sites(const ExpansionChain& chain, double factor = 1.01);

// Structural measurements.
struct TraceErrors {
    double top = 0.0, bottom = 0.0;
};
// Term 1 against psi_alpha on top and 0 below; later terms against 0 on both faces.
TraceErrors trace_errors(const ExpansionChain& chain, int l, int samples = 1000);
// max over dyadic annuli of sup|div v_l - target| / sup(|d1 v1| + |d2 v2| + |d3 v3|).
double divergence_error(const ExpansionChain& chain, int l);
// Largest x3 coefficient of p_hat (it is stored as an x'-only field, so this is 0 by type).
double p_hat_x3_dependence(const ExpansionChain& chain, int l);

// Decay fit of sup |f^l| (k = 0) or of sup |grad f^l| (k = 1) over dyadic delta-annuli.
DecayFit residual_fit(const ExpansionChain& chain, int l, int k = 0, const FitWindow& w = {},
                      Samples* data = nullptr);

// Inner-scaling ladder: for each eps, sup |grad^k f^l| over the first dyadic annulus of the window
// (delta in [4 eps, 8 eps) by default), fitted against that annulus' delta across the sweep.
using ChainFactory = std::function<ExpansionChain(double eps)>;
using ChainMutation = std::function<void(ExpansionChain&)>;
std::vector<double> default_ladder_eps();
struct Ladder {
    std::vector<double> eps;
    std::vector<Samples> samples;  // samples[l-1][i] for eps[i]
    std::vector<DecayFit> fits;    // fits[l-1]
};
// Chains for different eps are built concurrently (threads from GAPFLOW_THREADS, else hardware).
Ladder residual_ladder(const ChainFactory& build, const std::vector<double>& eps, int k = 0,
                       const FitWindow& w = {}, const ChainMutation& mutate = {});
// Ladder from chains that are already built (one per eps, increasing eps order not required).
Ladder residual_ladder(const std::vector<ExpansionChain>& chains, int k = 0, const FitWindow& w = {});
int worker_threads();

nlohmann::json chain_manifest(const ExpansionChain& chain);
// Writes term_<l>_v.bin/.json, term_<l>_ptilde.*, term_<l>_phat.* and manifest.json into dir.
void dump_chain(const ExpansionChain& chain, const std::filesystem::path& dir);

}  // namespace gapflow
