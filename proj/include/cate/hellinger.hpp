#pragma once

#include "cate/common.hpp"
#include "cate/construction.hpp"

namespace cate {

// Closed-form bounds on the three per-cube discrepancy integrals
//   d1: sup_lambda int (p_lam - pbar)^2 / (p_lam p_j)   over one cube cell
//   d2: sup_lambda int (q_lam - p_lam)^2 / (p_lam p_j)
//   d3: sup_lambda int (qbar - pbar)^2 / (p_lam p_j)
// All three follow one template: when the integrand numerator is bounded by
// f^2 W^2 amp^2 (sum_j lambda_j B_j)^2 and p_lam >= eps f on the sub-cubes,
// the integral is at most 2^{d+3} W^2 (||B||_2^2 / eps) amp^2.
struct DeltaComponents {
    double delta1_bound = 0.0;
    double delta2_bound = 0.0;
    double delta3 = 0.0;
    double b_norm_sq = 0.0;
    bool coupled = false;      // h^gamma = 4 g^{2 s_eff} within tolerance
    double coupling_gap = 0.0;  // g^{2 s_eff} - h^gamma / 4
};

namespace detail {
inline double delta_template(int d, double w, double b_norm_sq, double eps, double amp) {
    return std::pow(2.0, d + 3) * w * w * (b_norm_sq / eps) * amp * amp;
}
}  // namespace detail

inline DeltaComponents delta_bounds(const LowerBoundConfig& c) {
    c.validate();
    double g = c.g(), th = std::pow(c.h, c.gamma);
    double ga = std::pow(g, c.alpha), gb = std::pow(g, c.beta);
    DeltaComponents out;
    out.b_norm_sq = bump_l2_norm_sq(c.d);
    out.coupling_gap = std::pow(g, 2.0 * c.s_eff()) - th / 4.0;
    out.coupled = std::abs(out.coupling_gap) <= 1e-12 * std::max(th / 4.0, 1e-300);
    // The marginal mismatch is constant on the support cubes, so its integral
    // is exact up to the p_lam >= eps f floor.
    out.delta3 = (4.0 / c.eps) * out.coupling_gap * out.coupling_gap;
    if (out.coupled) out.delta3 = 0.0;
    switch (c.regime) {
        case Regime::Mu0AlphaGeBeta:
        case Regime::EtaAlphaGeBeta:
            // P differs from pbar only through the outcome bumps (W = 1/2);
            // Q - P carries the propensity bumps plus the marginal mismatch.
            out.delta1_bound = detail::delta_template(c.d, 0.5, out.b_norm_sq, c.eps, gb);
            out.delta2_bound = detail::delta_template(c.d, 0.5, out.b_norm_sq, c.eps, ga);
            if (!out.coupled)
                out.delta2_bound = 2.0 * out.delta2_bound +
                                   2.0 * (4.0 / c.eps) * out.coupling_gap * out.coupling_gap;
            break;
        case Regime::Mu0BetaGeAlpha:
            // P's lambda-dependence sits in the propensity, scaled per cell by
            // (a-1/2)(1 + (2a-1)(2y-1) tau_h), so W = (1+h^gamma)/2. The
            // difference q - p collapses to (y-1/2) Dmu (1 - 4 Dpi^2) only
            // when the coupling identity tau_h/4 = Dpi Dmu holds on support.
            out.delta1_bound =
                detail::delta_template(c.d, 0.5 * (1.0 + th), out.b_norm_sq, c.eps, ga);
            if (!out.coupled)
                throw ConfigError(
                    "delta_bounds: mu0_beta_ge_alpha delta2 bound needs the exact coupling "
                    "h^gamma = 4 (h/k^{1/d})^{2s}");
            out.delta2_bound = detail::delta_template(c.d, 0.5, out.b_norm_sq, c.eps, gb);
            break;
        case Regime::EtaBetaGeAlpha:
            // P has no lambda-dependence at all, so pbar = p_lam identically.
            out.delta1_bound = 0.0;
            if (!out.coupled)
                throw ConfigError(
                    "delta_bounds: eta_beta_ge_alpha delta2 bound needs the exact coupling "
                    "h^gamma = 4 (h/k^{1/d})^{2 alpha}");
            out.delta2_bound = detail::delta_template(c.d, 0.5, out.b_norm_sq, c.eps, ga);
            break;
    }
    return out;
}

// Exact P(X in one support cube): f is constant on the support and each cube
// has side g/2.
inline double exact_subcube_probability(const LowerBoundConfig& c) {
    SupportSet sup(c);
    return sup.f_value() * std::pow(sup.supp_side(), c.d);
}

// Upper bound on the squared Hellinger distance between the n-fold product
// mixtures: C n (sum_j p_j) { n (max_j p_j) (d1 d2 + d2^2) + d3 }, evaluated
// with the envelope bounds p_j <= 2 (h/2)^d / k and sum p_j <= 2 (h/2)^d. The
// combination lemma needs pbar/p <= b and n p_j max(1, d1, d2) <= b; b here
// is (1/2)/eps, the structural bound on pbar/p over the support.
struct HellingerBound {
    double bound = 0.0;
    DeltaComponents deltas;
    double p_j_sum = 0.0;
    double p_j_max = 0.0;
    double b = 0.0;
    double lemma_constant = 1.0;
    bool hypothesis_ok = true;   // n p_j max(1, d1, d2) <= b
};

inline HellingerBound mixture_hellinger_bound(double n, const LowerBoundConfig& c,
                                              double lemma_constant = 1.0) {
    if (!(n > 0.0)) throw ConfigError("mixture_hellinger_bound: n must be positive");
    HellingerBound out;
    out.deltas = delta_bounds(c);
    double half_h_d = std::pow(c.h / 2.0, c.d);
    out.p_j_sum = 2.0 * half_h_d;
    out.p_j_max = 2.0 * half_h_d / static_cast<double>(c.k);
    out.b = 0.5 / c.eps;
    out.lemma_constant = lemma_constant;
    const DeltaComponents& dc = out.deltas;
    out.bound = lemma_constant * n * out.p_j_sum *
                (n * out.p_j_max *
                     (dc.delta1_bound * dc.delta2_bound + dc.delta2_bound * dc.delta2_bound) +
                 dc.delta3);
    out.hypothesis_ok =
        n * out.p_j_max * std::max({1.0, dc.delta1_bound, dc.delta2_bound}) <= out.b;
    return out;
}

enum class SmoothnessRegime { LowSmoothness, HighSmoothness };

inline const char* regime_label(SmoothnessRegime r) {
    return r == SmoothnessRegime::LowSmoothness ? "low_smoothness" : "high_smoothness";
}

// Pointwise estimation rate n^{-exponent} for the CATE at an interior point.
struct RateRegime {
    double exponent = 0.0;
    SmoothnessRegime label = SmoothnessRegime::HighSmoothness;
    double effective_s = 0.0;
    double elbow = 0.0;  // threshold (d/4)/(1 + d/2gamma) on effective_s
};

inline RateRegime minimax_exponent(double alpha, double beta, double gamma, int d,
                                   Parametrization par) {
    if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0))
        throw ConfigError("minimax_exponent: smoothness exponents must be positive");
    if (d < 1) throw ConfigError("minimax_exponent: dimension must be >= 1");
    RateRegime out;
    double s = 0.5 * (alpha + beta);
    out.effective_s = (par == Parametrization::Mu0) ? s : std::min(alpha, s);
    out.elbow = (d / 4.0) / (1.0 + d / (2.0 * gamma));
    if (out.effective_s < out.elbow) {
        out.label = SmoothnessRegime::LowSmoothness;
        out.exponent = 1.0 / (1.0 + d / (2.0 * gamma) + d / (4.0 * out.effective_s));
    } else {
        out.label = SmoothnessRegime::HighSmoothness;
        out.exponent = 1.0 / (2.0 + static_cast<double>(d) / gamma);
    }
    return out;
}

}  // namespace cate
