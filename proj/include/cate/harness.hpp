#pragma once

#include <optional>
#include <string>

#include "cate/construction.hpp"
#include "cate/estimator.hpp"
#include "cate/hellinger.hpp"

namespace cate {

// Multi-scale bump sum with a certifiable Hoelder exponent: scale m
// contributes 2^{-m*holder} times +-1 bumps on the 2^m-cell grid, signs
// hashed from (seed, m, cell). Normalized into [-1,1] so callers control the
// final amplitude directly.
double lacunary_bump_sum(const Vec& x, double holder, int scales, std::uint64_t seed);

// Synthetic data-generating process with closed-form truths. pi and mu0 share
// one shape seed so their rough parts line up; smoothing errors then push in
// one direction and the first-order product bias is systematic rather than
// averaging out.
struct SmoothScenario {
    double pi_base = 0.5, pi_lin = 0.0, pi_amp = 0.0, pi_holder = 2.0;
    double mu_base = 0.5, mu_lin = 0.0, mu_amp = 0.0, mu_holder = 2.0;
    // tau = base + lin*(x1-x0_1) + kink*|x1-x0_1| + amp * bump sum
    double tau_base = 1.0, tau_lin = 0.0, tau_kink = 0.0, tau_amp = 0.0, tau_holder = 1.0;
    int scales = 9;
    std::uint64_t shape_seed = 7;
    double noise_sd = 0.5;
};

enum class ScenarioKind { SmoothSynthetic, Construction };

struct SweepEstimator {
    Parametrization par = Parametrization::Mu0;
    bool use_tuning = true;
    double c_h = 1.0, c_k = 1.0;     // multipliers on the tuning rule
    double fixed_h = 0.25;
    long long fixed_k = 1;
    bool second_order = true;
    bool also_first_order_only = false;  // record the uncorrected fit on the same data
    double eigen_floor = 1e-8;
    int rho_degree_override = -1;
    bool known_nuisances = true;
    double split_fraction = 0.5;
    std::optional<double> pi_bandwidth, outcome_bandwidth;
    double nuisance_bw_scale = 1.0;
};

struct ExperimentConfig {
    std::string name = "sweep";
    ScenarioKind kind = ScenarioKind::SmoothSynthetic;
    int d = 1;
    double alpha = 2.0, beta = 2.0, gamma = 1.0;  // declared smoothness of the DGP
    Vec x0;                                        // defaults to the center
    SmoothScenario smooth;
    std::optional<LowerBoundConfig> construction;
    Hypothesis hypothesis = Hypothesis::P;
    SweepEstimator est;
    std::vector<long long> n_grid;
    int replications = 1;
    std::uint64_t master_seed = 1;
    double slope_band = 0.15;

    Vec center() const { return x0.size() == d ? x0 : Vec::Constant(d, 0.5); }
    void validate() const;
};

// Truth closures for one replication (for construction scenarios they depend
// on the replication's sign draw).
struct ScenarioTruth {
    std::function<double(const Vec&)> pi, mu0, tau;
    double tau_x0 = 0.0;
    StretchedDistribution f_star;  // localized covariate law for the frame
};

ScenarioTruth scenario_truth(const ExperimentConfig& cfg, const LocalizedFrame& frame,
                             const SignVector& signs);

Dataset scenario_sample(const ExperimentConfig& cfg, const ScenarioTruth& truth, int n,
                        std::uint64_t seed);

struct ReplicationRecord {
    long long n = 0;
    int rep = 0;
    double tau_hat = 0.0;
    double tau_hat_first = 0.0;  // first-order-only fit when requested
    double tau_true = 0.0;
    double abs_error = 0.0;
    double abs_error_first = 0.0;
    bool has_first = false;
    bool flagged = false;        // estimator guard tripped; errors empty
    std::string message;
};

ReplicationRecord run_replication(const ExperimentConfig& cfg, long long n, int rep);

struct AggregateRow {
    long long n = 0;
    int ok_count = 0, flagged_count = 0;
    double mae = 0.0, se = 0.0;
    double mae_first = 0.0, se_first = 0.0;
};

struct SlopeFit {
    double slope = 0.0, stderr_ = 0.0, intercept = 0.0;
};

struct RateReport {
    ExperimentConfig config;
    std::vector<ReplicationRecord> rows;
    std::vector<AggregateRow> aggregates;
    SlopeFit slope;
    std::optional<SlopeFit> slope_first;
    RateRegime theoretical;
    std::string band_verdict;  // pass / warn / fail against config.slope_band
};

// Cells are (n, rep) pairs with seeds derived from (master seed, name, n,
// rep); workers pull cells from a shared counter and write preallocated
// slots, so any worker count produces identical reports.
RateReport run_rate_sweep(const ExperimentConfig& cfg, int workers = 1);

SlopeFit fit_slope(const std::vector<double>& log_n, const std::vector<double>& log_mae);

}  // namespace cate
