#pragma once

#include <string>

#include "cate/estimator.hpp"
#include "cate/harness.hpp"
#include "cate/hellinger.hpp"

namespace cate {

// Dataset CSV: header x_1,...,x_d,a,y; one row per observation.
void write_dataset_csv(const Dataset& data, const std::string& path);
Dataset read_dataset_csv(const std::string& path);

std::string to_json_string(const LowerBoundConfig& c);
LowerBoundConfig lower_bound_config_from_json(const std::string& text);

std::string to_json_string(const ExperimentConfig& c);
ExperimentConfig experiment_config_from_json(const std::string& text);

std::string to_json_string(const FitResult& fit);
std::string to_json_string(const RateReport& report);
RateReport rate_report_from_json(const std::string& text);

std::string to_json_string(const DeltaComponents& dc);
std::string to_json_string(const HellingerBound& hb);
std::string to_json_string(const RateRegime& rr);
std::string to_json_string(const CoupledParameters& cp);

// One-dataset estimation job, fully described by a JSON config (see README
// for the schema). Known-nuisance mode supports constant plug-ins; anything
// richer goes through the fitting pipeline.
struct EstimateJob {
    std::string data_path;
    Parametrization par = Parametrization::Mu0;
    Vec x0;
    double h = 0.25;
    long long k = 0;  // 0 disables the second-order correction
    double gamma = 1.0;
    int rho_degree_override = -1;
    double eigen_floor = 1e-8;
    double split_fraction = 0.5;
    std::uint64_t split_seed = 1;
    double pi_smoothness = 1.0, outcome_smoothness = 1.0;
    std::optional<double> pi_bandwidth, outcome_bandwidth;
    CovariateMode f_mode = CovariateMode::Known;
    int histogram_cells_per_axis = 8;
    std::optional<double> pi_const, outcome_const;  // known constant nuisances
};

EstimateJob estimate_job_from_json(const std::string& text);
FitResult run_estimate_job(const EstimateJob& job);

// Lower-bound arithmetic job: the construction parameters plus the sample
// size the mixture bound and the bandwidth coupling are evaluated at.
struct LowerBoundJob {
    LowerBoundConfig config;
    double n = 10000.0;
    double lemma_constant = 1.0;
    std::optional<double> c_star_override;
};

LowerBoundJob lower_bound_job_from_json(const std::string& text);
// All lower-bound outputs in one JSON document: delta components, the
// mixture Hellinger bound at n, the coupled (h, k) for this n (or the reason
// coupling is unavailable), and the minimax rate exponent.
std::string lower_bound_report_json(const LowerBoundJob& job);

// Report files: <name>.json (full replay state), <name>_rows.csv,
// <name>_aggregates.csv, <name>.svg (log-log MAE with one reference line of
// slope -theoretical exponent, class "reference-line").
void emit_report(const RateReport& report, const std::string& out_dir,
                 bool csv, bool json, bool svg);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

}  // namespace cate
