#pragma once

#include <memory>

#include "cate/basis.hpp"
#include "cate/common.hpp"
#include "cate/data.hpp"
#include "cate/distribution.hpp"
#include "cate/hellinger.hpp"
#include "cate/nuisance.hpp"

namespace cate {

// The pointwise estimator tau-hat(x0) = rho(1/2)^T (Q1+Q2)^{-1} (R1+R2):
// a local polynomial R-learner (first-order terms) plus a U-statistic
// correction that projects the residual propensity-times-outcome products
// onto the large basis b and subtracts them.
struct EstimatorConfig {
    Parametrization par = Parametrization::Mu0;
    LocalizedFrame frame;
    std::shared_ptr<const BasisSet> second_basis;  // b, size k; null disables the correction
    double gamma = 1.0;
    int rho_degree_override = -1;  // default strict_floor(gamma)
    double eigen_floor = 1e-8;     // relative to trace/size, for Omega-hat and Q-hat

    int rho_degree() const {
        return rho_degree_override >= 0 ? rho_degree_override : strict_floor(gamma);
    }
    int q_size() const {
        TensorBasisSpec spec(frame.dim(), rho_degree());
        return spec.size();
    }
};

struct OmegaHat {
    Mat omega;
    Mat inverse;
    double min_eigen = 0.0, max_eigen = 0.0;
};

// Gram matrix of b under the physical localized measure (window_mass times
// the probability Gram). Exact: every (distribution piece x basis piece)
// overlap is integrated with a Gauss rule matched to the block degree.
OmegaHat omega_hat(const StretchedDistribution& f_star, const BasisSet& basis,
                   double eigen_floor = 1e-8);

struct FirstOrderTerms {
    Mat q1;
    Vec r1;
    int window_count = 0;
};

struct SecondOrderTerms {
    Mat q2;
    Vec r2;
    long long pair_count = 0;  // ordered in-window pairs i != j
};

FirstOrderTerms assemble_first_order(const Dataset& est, const NuisanceFit& nuis,
                                     const EstimatorConfig& cfg);

// Pair sum computed in one pass: with c_i = K_h(X_i), u_i = A_i - pi-hat_i,
// b_i = b(v_i), r_i = rho(v_i) and t_j the second-slot factor (A_2 or
// A_2 - pi-hat_2 depending on parametrization for Q, Y_2 - outcome-hat_2 for
// R), the ordered-pair U-statistic collapses to rank-one products of the
// window sums G = sum c_i u_i r_i b_i^T and m = sum c_j t_j b_j minus the
// diagonal i = j terms.
SecondOrderTerms assemble_second_order(const Dataset& est, const NuisanceFit& nuis,
                                       const OmegaHat& omega, const EstimatorConfig& cfg);

struct FitResult {
    double tau_hat = 0.0;
    Mat q_hat;        // Q1 + Q2
    Vec r_hat;        // R1 + R2
    Mat q1, q2;
    Vec r1, r2;
    int window_count = 0;
    long long pair_count = 0;
    double q_min_eigen = 0.0;
    double omega_min_eigen = 0.0, omega_max_eigen = 0.0;
    int rho_size = 0;
    int second_basis_size = 0;
};

// Assemble both orders from a ready nuisance fit and solve. Throws
// NumericalGuardError when the window is empty or Q-hat's smallest eigenvalue
// falls under eigen_floor * trace/size.
FitResult estimate_cate(const Dataset& est, const NuisanceFit& nuis, const EstimatorConfig& cfg);

// Full pipeline: split, fit nuisances on the training half, estimate on the
// other half.
struct PipelineConfig {
    double split_fraction = 0.5;
    std::uint64_t split_seed = 1;
    double pi_smoothness = 1.0;
    double outcome_smoothness = 1.0;
    std::optional<double> pi_bandwidth, outcome_bandwidth;  // default n^{-1/(2s+d)}
    CovariateMode f_mode = CovariateMode::Known;
    std::optional<StretchedDistribution> f_known;  // defaults to uniform
    int histogram_cells_per_axis = 8;
};

FitResult estimate_cate_pipeline(const Dataset& data, const PipelineConfig& pipe,
                                 const EstimatorConfig& cfg);

NuisanceFit fit_nuisances(const Dataset& train, const PipelineConfig& pipe,
                          const EstimatorConfig& cfg);

// Population projection the estimator targets: theta minimizing the
// pi(1-pi)-weighted squared distance between tau and rho^T theta over the
// stretched window, and its value at the center. S = R - Q theta vanishes
// identically and is the reference point for the moment diagnostics.
struct ProjectionOracle {
    Mat q;
    Vec r;
    Vec theta;
    double tau_h_x0 = 0.0;
};

ProjectionOracle projection_oracle(const std::function<double(const Vec&)>& pi_true,
                                   const std::function<double(const Vec&)>& tau_true,
                                   const StretchedDistribution& f_star,
                                   const LocalizedFrame& frame, int rho_degree,
                                   int quad_order = 40);

// Bandwidth / basis-size rule balancing the squared-bias and variance orders:
// low-smoothness regime h ~ n^{-(1/gamma)/E}, k ~ n^{(d/2s - d/gamma)/E} with
// E = 1 + d/2gamma + d/4s; high regime h ~ n^{-1/(2gamma+d)}, k ~ n h^d.
struct TuningChoice {
    double h = 0.0;
    long long k = 0;
    RateRegime regime;
};

TuningChoice tuning_rule(double n, double alpha, double beta, double gamma, int d,
                         Parametrization par, double c_h = 1.0, double c_k = 1.0);

}  // namespace cate
