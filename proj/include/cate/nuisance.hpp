#pragma once

#include <functional>
#include <optional>

#include "cate/basis.hpp"
#include "cate/common.hpp"
#include "cate/data.hpp"
#include "cate/distribution.hpp"
#include "cate/rng.hpp"

namespace cate {

// Disjoint train/estimation index split; the shuffle is a seeded Fisher-Yates
// so a plan is a pure function of (n, fraction, seed).
struct SplitPlan {
    std::vector<int> train;
    std::vector<int> estimation;
    std::uint64_t seed = 0;
};

SplitPlan split(int n, double fraction, std::uint64_t seed);

Dataset subset(const Dataset& data, const std::vector<int>& idx);

enum class RegressionTarget { Propensity, OutcomeControl, OutcomeAll };

// Local polynomial regression: at an evaluation point, weighted least squares
// of the target on the tensor polynomial family over the points inside the
// sup-norm window of side `bandwidth`. Box kernel; fitted value is the
// polynomial at the window center. When the local design is rank-deficient
// the fit falls back (degree-1, then bandwidth x1.5 twice) before giving up
// with an error naming the point.
class LocalPolynomialFit {
public:
    LocalPolynomialFit(const Dataset& train, RegressionTarget target, int degree,
                       double bandwidth);

    double operator()(const Vec& x) const;

    int degree() const { return degree_; }
    double bandwidth() const { return bandwidth_; }
    long long fallback_count() const { return fallbacks_; }

private:
    double solve_at(const Vec& x, int degree, double bandwidth, bool& ok) const;

    Mat x_;
    Vec y_;
    std::vector<int> order_;  // d = 1: indices sorted by x for window lookup
    int d_ = 1, degree_ = 0;
    double bandwidth_ = 0.0;
    mutable long long fallbacks_ = 0;
};

// pi-hat / outcome-hat plus the covariate distribution estimate. Functions are
// plain closures so exactly-known truths can be plugged without a fitting
// step. pi values are clipped into [clip, 1-clip] at evaluation time.
struct NuisanceFit {
    std::function<double(const Vec&)> pi_raw;
    std::function<double(const Vec&)> outcome;  // mu0-hat or eta-hat
    Parametrization par = Parametrization::Mu0;
    StretchedDistribution f_star;
    double pi_clip = 0.01;
    // metadata
    int pi_degree = -1, outcome_degree = -1;
    double pi_bandwidth = 0.0, outcome_bandwidth = 0.0;

    double pi(const Vec& x) const { return std::clamp(pi_raw(x), pi_clip, 1.0 - pi_clip); }
};

enum class CovariateMode { Known, Histogram };

// Histogram mode: equal partition of the stretched window into cells^d bins,
// cell mass (count + floor) / (total + cells^d * floor), physical mass
// estimated by the window frequency. Known mode passes the distribution
// through untouched.
StretchedDistribution fit_covariate_distribution(const Dataset& train, const LocalizedFrame& frame,
                                                 int cells_per_axis, double laplace_floor = 0.5);

// True nuisances on original coordinates plus the true localized covariate
// distribution; simulation-only.
struct NuisanceTruth {
    std::function<double(const Vec&)> pi;
    std::function<double(const Vec&)> outcome;
    StretchedDistribution f_star;
};

struct NuisanceProbe {
    double pi_l2 = 0.0;          // || pi-hat - pi ||_{L2(F*)}
    double outcome_l2 = 0.0;     // || outcome-hat - outcome ||_{L2(F*)}
    double density_ratio_sup = 0.0;  // sup over grid of |dFhat*/dF* - 1|
};

NuisanceProbe nuisance_error_probe(const NuisanceFit& fit, const NuisanceTruth& truth,
                                   const LocalizedFrame& frame, int quad_order = 24,
                                   int ratio_grid = 33);

}  // namespace cate
