#pragma once

#include <optional>

#include "cate/common.hpp"
#include "cate/data.hpp"
#include "cate/quadrature.hpp"
#include "cate/rng.hpp"

namespace cate {

// Scalar flat-top bump: C-infinity, 1 on [-1/4,1/4], 0 outside [-1/2,1/2],
// built from g(t) = exp(-1/t) 1(t>0) as B(t) = g2/(g1+g2). The ratio form
// avoids dividing by zero where g2 vanishes (|t| >= sqrt(2)/4, where B = 0).
inline double flat_top_bump_scalar(double t) {
    double at = std::abs(t);
    if (at >= 0.5) return 0.0;
    if (at <= 0.25) return 1.0;
    double u = 16.0 * t * t;  // (4t)^2
    double g1 = (u - 1.0 > 0.0) ? std::exp(-1.0 / (u - 1.0)) : 0.0;
    double g2 = (2.0 - u > 0.0) ? std::exp(-1.0 / (2.0 - u)) : 0.0;
    if (g2 == 0.0) return 0.0;
    return g2 / (g1 + g2);
}

// Multivariate bump is the product of per-coordinate scalars; this keeps both
// defining properties (1 on the inner cube, 0 off the outer cube).
inline double flat_top_bump(const Vec& x) {
    double p = 1.0;
    for (int j = 0; j < x.size(); ++j) {
        p *= flat_top_bump_scalar(x[j]);
        if (p == 0.0) return 0.0;
    }
    return p;
}

// L2 norm squared of the bump over [-1/2,1/2]^d. The square factorizes across
// coordinates. Pieces are split at the flat top and the support edge sqrt(2)/4
// so Gauss quadrature converges fast.
inline double bump_l2_norm_sq(int d, int order = 80) {
    if (d < 1) throw ConfigError("bump_l2_norm_sq: dimension must be >= 1");
    static const double edge = std::sqrt(2.0) / 4.0;
    GaussRule r = gauss_legendre_01(order);
    double tail = 0.0;  // integral over [1/4, edge]
    for (int i = 0; i < order; ++i) {
        double t = 0.25 + (edge - 0.25) * r.nodes[i];
        double b = flat_top_bump_scalar(t);
        tail += (edge - 0.25) * r.weights[i] * b * b;
    }
    double one_d = 0.5 + 2.0 * tail;  // flat top contributes 1/2 exactly
    return std::pow(one_d, d);
}

enum class Regime { Mu0AlphaGeBeta, Mu0BetaGeAlpha, EtaAlphaGeBeta, EtaBetaGeAlpha };
enum class Hypothesis { P, Q };
enum class Parametrization { Mu0, Eta };

inline Parametrization parametrization_of(Regime r) {
    return (r == Regime::Mu0AlphaGeBeta || r == Regime::Mu0BetaGeAlpha) ? Parametrization::Mu0
                                                                        : Parametrization::Eta;
}

inline const char* regime_name(Regime r) {
    switch (r) {
        case Regime::Mu0AlphaGeBeta: return "mu0_alpha_ge_beta";
        case Regime::Mu0BetaGeAlpha: return "mu0_beta_ge_alpha";
        case Regime::EtaAlphaGeBeta: return "eta_alpha_ge_beta";
        case Regime::EtaBetaGeAlpha: return "eta_beta_ge_alpha";
    }
    return "?";
}

// Sign pattern over the k sub-cubes. Either explicit (small k) or a lazy
// Rademacher stream keyed by seed, so priors over astronomically many cubes
// never materialize a vector.
struct SignVector {
    bool is_explicit = true;
    std::vector<std::int8_t> signs;
    std::uint64_t seed = 0;

    static SignVector all_plus(long long k) {
        SignVector s;
        s.signs.assign(static_cast<std::size_t>(k), 1);
        return s;
    }
    static SignVector explicit_signs(std::vector<int> v) {
        SignVector s;
        s.signs.reserve(v.size());
        for (int e : v) {
            if (e != 1 && e != -1) throw ConfigError("SignVector: entries must be +1 or -1");
            s.signs.push_back(static_cast<std::int8_t>(e));
        }
        return s;
    }
    static SignVector prior_draw(std::uint64_t seed) {
        SignVector s;
        s.is_explicit = false;
        s.seed = seed;
        return s;
    }
    int sign(long long j) const {
        if (is_explicit) {
            if (j < 0 || j >= static_cast<long long>(signs.size()))
                throw ConfigError("SignVector: index out of range");
            return signs[static_cast<std::size_t>(j)];
        }
        return (splitmix64(seed ^ static_cast<std::uint64_t>(j + 1)) & 1u) ? 1 : -1;
    }
};

// Parameters of one lower-bound construction instance.
struct LowerBoundConfig {
    int d = 1;
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
    Regime regime = Regime::Mu0AlphaGeBeta;
    double h = 0.25;
    long long k = 1;        // j^d for integer j
    double eps = 0.05;
    Vec x0;                 // defaults to the center of [0,1]^d

    double s() const { return 0.5 * (alpha + beta); }
    // Exponent that couples the CATE bump to the nuisance bumps: s for the
    // mu0 rows, min(alpha, s) for the eta rows.
    double s_eff() const {
        switch (regime) {
            case Regime::Mu0AlphaGeBeta:
            case Regime::Mu0BetaGeAlpha: return s();
            case Regime::EtaAlphaGeBeta: return std::min(alpha, s());
            case Regime::EtaBetaGeAlpha: return std::min(alpha, s());
        }
        return s();
    }
    long long j_side() const {
        long long j = std::llround(std::pow(static_cast<double>(k), 1.0 / d));
        for (long long t = std::max(1LL, j - 1); t <= j + 1; ++t) {
            long long p = 1;
            for (int i = 0; i < d; ++i) p *= t;
            if (p == k) return t;
        }
        throw ConfigError("LowerBoundConfig: k = " + std::to_string(k) +
                          " is not an integer raised to the power d = " + std::to_string(d));
    }
    double g() const { return h / static_cast<double>(j_side()); }  // h/k^{1/d}

    Vec center() const { return x0.size() == d ? x0 : Vec::Constant(d, 0.5); }

    void validate() const;
};

// Geometry of the covariate support: the k half-width sub-cubes inside
// C_h(x0) plus everything outside C_{2h}(x0).
struct SupportSet {
    int d;
    Vec x0;
    double h;
    long long k, j;

    explicit SupportSet(const LowerBoundConfig& c)
        : d(c.d), x0(c.center()), h(c.h), k(c.k), j(c.j_side()) {}

    double part_side() const { return h / static_cast<double>(j); }   // = g
    double supp_side() const { return part_side() / 2.0; }
    // Lebesgue measure 1 - ((4^d-1)/2^d) h^d: far region 1-(2h)^d plus cube
    // union h^d/2^d.
    double measure() const {
        double hd = std::pow(h, d);
        return 1.0 - (std::pow(4.0, d) - 1.0) / std::pow(2.0, d) * hd;
    }
    double f_value() const { return 1.0 / measure(); }

    Vec midpoint(long long idx) const {
        if (idx < 0 || idx >= k) throw ConfigError("SupportSet: cube index out of range");
        Vec m(d);
        double side = part_side();
        for (int a = 0; a < d; ++a) {
            long long c = idx % j;
            idx /= j;
            m[a] = x0[a] - h / 2.0 + (static_cast<double>(c) + 0.5) * side;
        }
        return m;
    }
    // Index of the partition cube of C_h(x0) containing x, or -1.
    long long cube_of(const Vec& x) const {
        double side = part_side();
        long long idx = 0, stride = 1;
        for (int a = 0; a < d; ++a) {
            double t = x[a] - (x0[a] - h / 2.0);
            if (t < 0.0 || t > h) return -1;
            long long c = static_cast<long long>(std::floor(t / side));
            if (c >= j) c = j - 1;  // right boundary belongs to the last cell
            idx += stride * c;
            stride *= j;
        }
        return idx;
    }
    bool in_big_window(const Vec& x) const {
        for (int a = 0; a < d; ++a)
            if (std::abs(x[a] - x0[a]) > h) return false;
        return true;
    }
    bool in_support(const Vec& x) const {
        for (int a = 0; a < d; ++a)
            if (x[a] < 0.0 || x[a] > 1.0) return false;
        if (!in_big_window(x)) return true;  // far region
        long long idx = cube_of(x);
        if (idx < 0) return false;           // inside C_2h but outside C_h
        Vec m = midpoint(idx);
        for (int a = 0; a < d; ++a)
            if (std::abs(x[a] - m[a]) > supp_side() / 2.0) return false;
        return true;
    }
    // Disjoint boxes covering [0,1]^d \ C_{2h}(x0): for axis a, points whose
    // first a coordinates are inside the big window and coordinate a is not.
    std::vector<Box> far_boxes() const {
        std::vector<Box> out;
        for (int a = 0; a < d; ++a) {
            for (int side = 0; side < 2; ++side) {
                Box b;
                b.lo = Vec::Zero(d);
                b.hi = Vec::Ones(d);
                for (int p = 0; p < a; ++p) {
                    b.lo[p] = x0[p] - h;
                    b.hi[p] = x0[p] + h;
                }
                if (side == 0) {
                    b.lo[a] = 0.0;
                    b.hi[a] = x0[a] - h;
                } else {
                    b.lo[a] = x0[a] + h;
                    b.hi[a] = 1.0;
                }
                if (b.volume() > 0.0) out.push_back(b);
            }
        }
        return out;
    }
    std::vector<Box> support_cubes() const {
        if (k > 2'000'000) throw ConfigError("SupportSet: k too large to materialize cube list");
        std::vector<Box> out;
        out.reserve(static_cast<std::size_t>(k));
        for (long long i = 0; i < k; ++i) out.push_back(cube_at(midpoint(i), supp_side()));
        return out;
    }
};

// Conditional means of one hypothesis at a point. For mu0 rows `outcome` is
// mu0(x); for eta rows it is eta(x).
struct ConstructionMeans {
    double pi = 0.5;
    double outcome = 0.5;
    double tau = 0.0;
    Parametrization par = Parametrization::Mu0;

    double mu0() const { return par == Parametrization::Mu0 ? outcome : outcome - pi * tau; }
    double mu1() const {
        return par == Parametrization::Mu0 ? outcome + tau : outcome + (1.0 - pi) * tau;
    }
    double eta() const { return par == Parametrization::Mu0 ? outcome + pi * tau : outcome; }
};

namespace detail {
// sum_j lambda_j B((x - m_j)/g); at most the containing cube contributes.
inline double sign_bump_sum(const SupportSet& sup, const SignVector& lam, const Vec& x) {
    long long idx = sup.cube_of(x);
    if (idx < 0) return 0.0;
    Vec m = sup.midpoint(idx);
    double b = flat_top_bump(((x - m) / sup.part_side()).eval());
    return b == 0.0 ? 0.0 : lam.sign(idx) * b;
}
inline double bump_sq_sum(const SupportSet& sup, const Vec& x) {
    long long idx = sup.cube_of(x);
    if (idx < 0) return 0.0;
    Vec m = sup.midpoint(idx);
    double b = flat_top_bump(((x - m) / sup.part_side()).eval());
    return b * b;
}
}  // namespace detail

// CATE bump tau_h(x) = h^gamma B((x-x0)/(2h)); equal to h^gamma on C_h(x0).
inline double cate_bump(const LowerBoundConfig& c, const Vec& x) {
    Vec z = (x - c.center()) / (2.0 * c.h);
    return std::pow(c.h, c.gamma) * flat_top_bump(z);
}

// The (pi, mu0/eta, tau) triple of the requested hypothesis at x.
inline ConstructionMeans construction_means(const LowerBoundConfig& c, const SupportSet& sup,
                                            const SignVector& lam, Hypothesis hyp, const Vec& x) {
    double g = c.g();
    double S = detail::sign_bump_sum(sup, lam, x);
    double amp_a = std::pow(g, c.alpha), amp_b = std::pow(g, c.beta);
    double th = cate_bump(c, x);
    ConstructionMeans m;
    m.par = parametrization_of(c.regime);
    switch (c.regime) {
        case Regime::Mu0AlphaGeBeta:
            if (hyp == Hypothesis::P) {
                m.pi = 0.5;
                m.outcome = 0.5 + amp_b * S - th / 2.0;
                m.tau = th;
            } else {
                m.pi = 0.5 + amp_a * S;
                m.outcome = 0.5 + amp_b * S;
                m.tau = 0.0;
            }
            break;
        case Regime::Mu0BetaGeAlpha:
            if (hyp == Hypothesis::P) {
                m.pi = 0.5 + amp_a * S;
                m.outcome = 0.5 - th / 2.0;
                m.tau = th;
            } else {
                m.pi = 0.5 + amp_a * S;
                m.outcome = 0.5 + amp_b * S;
                m.tau = 0.0;
            }
            break;
        case Regime::EtaAlphaGeBeta:
            if (hyp == Hypothesis::P) {
                m.pi = 0.5;
                m.outcome = 0.5 + amp_b * S;
                m.tau = th;
            } else {
                m.pi = 0.5 + amp_a * S;
                m.outcome = 0.5 + amp_b * S;
                m.tau = 0.0;
            }
            break;
        case Regime::EtaBetaGeAlpha:
            if (hyp == Hypothesis::P) {
                m.pi = 0.5;
                m.outcome = 0.5;
                m.tau = 1.0 - th;
            } else {
                m.pi = 0.5 + amp_a * S;
                m.outcome = 0.5;
                m.tau = 1.0;
            }
            break;
    }
    return m;
}

// Joint density of (X, A, Y) through the bilinear form; identical to
// f * pi^a (1-pi)^{1-a} * mu_a^y (1-mu_a)^{1-y} whenever the conditional
// means are genuine probabilities.
inline double density_from_means(double f, const ConstructionMeans& m, int a, int y) {
    double dpi = m.pi - 0.5;
    double sgn = (2.0 * a - 1.0) * (2.0 * y - 1.0);
    if (m.par == Parametrization::Mu0) {
        double dmu = m.outcome - 0.5;
        return f * (0.25 + (a - 0.5) * dpi + (y - 0.5) * dmu +
                    sgn * (dpi * dmu + a * m.tau * (0.5 + dpi)));
    }
    double deta = m.outcome - 0.5;
    return f * (0.25 + (a - 0.5) * dpi + (y - 0.5) * deta +
                sgn * (dpi * deta + m.tau * (0.25 - dpi * dpi)));
}

inline double eval_density(const LowerBoundConfig& c, const SignVector& lam, Hypothesis hyp,
                           const Vec& x, int a, int y) {
    if (a != 0 && a != 1) throw ConfigError("eval_density: a must be 0 or 1");
    if (y != 0 && y != 1) throw ConfigError("eval_density: y must be 0 or 1");
    SupportSet sup(c);
    if (!sup.in_support(x)) return 0.0;
    return density_from_means(sup.f_value(), construction_means(c, sup, lam, hyp, x), a, y);
}

// Rademacher-prior means of the hypothesis densities in closed form. The
// lambda-linear terms vanish; the quadratic term turns (sum lambda_j B_j)^2
// into sum B_j^2 because the bumps have disjoint supports.
inline double prior_mean_density(const LowerBoundConfig& c, Hypothesis hyp, const Vec& x, int a,
                                 int y) {
    SupportSet sup(c);
    if (!sup.in_support(x)) return 0.0;
    double f = sup.f_value();
    double sgn = (2.0 * a - 1.0) * (2.0 * y - 1.0);
    double th = cate_bump(c, x);                       // h^gamma B((x-x0)/(2h))
    double sb2 = detail::bump_sq_sum(sup, x);
    double g = c.g();
    if (c.regime == Regime::EtaBetaGeAlpha) {
        double core = (hyp == Hypothesis::P) ? 0.25 - th / 4.0
                                             : 0.25 - std::pow(g, 2.0 * c.alpha) * sb2;
        return f * (0.25 + sgn * core);
    }
    double core = (hyp == Hypothesis::P) ? th / 4.0 : std::pow(g, 2.0 * c.s()) * sb2;
    return f * (0.25 + sgn * core);
}

inline void LowerBoundConfig::validate() const {
    if (d < 1) throw ConfigError("construction: dimension must be >= 1");
    if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0))
        throw ConfigError("construction: smoothness exponents must be positive");
    if (!(h > 0.0) || h > 0.25)
        throw ConfigError("construction: h must lie in (0, 1/4], got " + std::to_string(h));
    if (!(eps > 0.0) || !(eps < 0.25))
        throw ConfigError("construction: eps must lie in (0, 1/4)");
    (void)j_side();  // throws when k is not an integer^d
    Vec c0 = center();
    for (int a = 0; a < d; ++a)
        if (c0[a] - h < 0.0 || c0[a] + h > 1.0)
            throw ConfigError("construction: C_{2h}(x0) must fit inside [0,1]^d");
    bool a_ge_b = (regime == Regime::Mu0AlphaGeBeta || regime == Regime::EtaAlphaGeBeta);
    if (a_ge_b && alpha < beta - 1e-12)
        throw ConfigError("construction: regime requires alpha >= beta");
    if (!a_ge_b && beta < alpha - 1e-12)
        throw ConfigError("construction: regime requires beta >= alpha");
    double gb = std::pow(g(), beta), ga = std::pow(g(), alpha), th = std::pow(h, gamma);
    // The beta-amplitude budget only binds where outcome bumps exist; the
    // eta_beta_ge_alpha rows have a flat outcome and are constrained below.
    if (regime != Regime::EtaBetaGeAlpha && th + 2.0 * gb > 1.0 - 4.0 * eps)
        throw ConfigError("construction: validity constraint h^gamma + 2 (h/k^{1/d})^beta <= 1 - 4 eps fails");
    // Extra guards so every sampled hypothesis is a genuine distribution and
    // the density-ratio bound p_lambda/f >= eps holds where the Hellinger
    // integrands live. The base constraint controls only the beta-amplitude.
    if (regime == Regime::Mu0BetaGeAlpha) {
        if (2.0 * ga > 1.0 - 4.0 * eps)
            throw ConfigError("construction: propensity amplitude 2 (h/k^{1/d})^alpha <= 1 - 4 eps fails");
        if ((1.0 - th) * (0.25 - ga / 2.0) < eps)
            throw ConfigError("construction: density ratio floor (1-h^gamma)(1/4 - (h/k^{1/d})^alpha/2) >= eps fails");
    }
    if (regime == Regime::EtaBetaGeAlpha) {
        if (2.0 * ga > 1.0 - 4.0 * eps)
            throw ConfigError("construction: propensity amplitude 2 (h/k^{1/d})^alpha <= 1 - 4 eps fails");
        if (th < 4.0 * eps)
            throw ConfigError("construction: this regime needs h^gamma >= 4 eps so p/f >= eps on the sub-cubes");
    }
}

// Draw n observations from the hypothesis: X uniform on the support (exact
// two-stage draw, no rejection), A ~ Bernoulli(pi), Y ~ Bernoulli(mu_A).
Dataset sample(const LowerBoundConfig& c, const SignVector& lam, Hypothesis hyp, int n,
               std::uint64_t seed);

enum class ConstructionFn { Pi, Mu0, Eta, Tau };

// Max deviation of the named function from its baseline over a tensor grid on
// C_{2h}(x0) plus every sub-cube midpoint. Baselines: 1/2 for pi/mu0/eta, 0
// for tau, except the eta_beta_ge_alpha regime where tau hovers around 1.
double smoothness_envelope(const LowerBoundConfig& c, const SignVector& lam, Hypothesis hyp,
                           ConstructionFn fn, int grid_per_axis = 41);

// Output of the bandwidth/sub-cube coupling. h and k satisfy
// h^gamma = 4 (h/k^{1/d})^{2 s_eff} exactly (k re-solved after rounding), so
// the marginalized hypothesis densities coincide and delta_3 vanishes.
struct CoupledParameters {
    double h = 0.0;
    long long k = 0;
    long long j = 0;
    double g = 0.0;          // h/k^{1/d} after rounding
    double g_real = 0.0;     // pre-rounding display value (1/(C* n^2))^{1/(d+4s+2sd/gamma)}
    double h_real = 0.0;
    double k_real = 0.0;
    double c_star = 0.0;
    double separation = 0.0;  // h^gamma / 4
    double s_eff = 0.0;
};

inline CoupledParameters couple_parameters(double n, int d, double alpha, double beta, double gamma,
                                           Regime regime, double eps, double lemma_constant = 1.0,
                                           std::optional<double> c_star_override = std::nullopt) {
    LowerBoundConfig probe;
    probe.d = d;
    probe.alpha = alpha;
    probe.beta = beta;
    probe.gamma = gamma;
    probe.regime = regime;
    double s_eff = probe.s_eff();
    if (!(gamma > 2.0 * s_eff))
        throw ConfigError("couple_parameters: requires gamma > 2 s_eff (low-smoothness coupling)");
    double c_star;
    if (c_star_override) {
        c_star = *c_star_override;
    } else {
        double bn = bump_l2_norm_sq(d);
        c_star = std::pow(2.0, 2.0 * d / gamma + 5.0) * lemma_constant * (bn / eps) * (bn / eps);
    }
    double expo = d + 4.0 * s_eff + 2.0 * s_eff * d / gamma;
    CoupledParameters out;
    out.s_eff = s_eff;
    out.c_star = c_star;
    out.g_real = std::pow(1.0 / (c_star * n * n), 1.0 / expo);
    out.h_real = std::pow(4.0 * std::pow(out.g_real, 2.0 * s_eff), 1.0 / gamma);
    out.k_real = std::pow(out.h_real / out.g_real, d);
    double j_real = out.h_real / out.g_real;
    // Round the cube count up: a finer partition shrinks g = h/k^{1/d}, so the
    // re-solved pair keeps the Hellinger budget that determined C*. Relative
    // slack keeps exact integers in place (at j ~ 1e9 the quotient itself
    // carries ~1e-7 of float noise).
    long long j = static_cast<long long>(std::ceil(j_real * (1.0 - 1e-12) - 1e-9));
    if (j < 1) j = 1;
    out.j = j;
    out.k = 1;
    for (int i = 0; i < d; ++i) out.k *= j;
    // re-solve h so the coupling identity holds exactly at the rounded k
    out.h = std::exp((std::log(4.0) - 2.0 * s_eff * std::log(static_cast<double>(j))) /
                     (gamma - 2.0 * s_eff));
    // the exp can land one ulp above an exact boundary solution
    if (std::abs(out.h - 0.25) <= 1e-12 * 0.25) out.h = 0.25;
    out.g = out.h / static_cast<double>(j);
    out.separation = std::pow(out.h, gamma) / 4.0;
    if (out.h > 0.25)
        throw ConfigError("couple_parameters: n too small for this regime (h exceeds 1/4)");
    return out;
}

inline LowerBoundConfig make_coupled_config(double n, int d, double alpha, double beta, double gamma,
                                            Regime regime, double eps, double lemma_constant = 1.0,
                                            std::optional<double> c_star_override = std::nullopt) {
    CoupledParameters cp =
        couple_parameters(n, d, alpha, beta, gamma, regime, eps, lemma_constant, c_star_override);
    LowerBoundConfig c;
    c.d = d;
    c.alpha = alpha;
    c.beta = beta;
    c.gamma = gamma;
    c.regime = regime;
    c.h = cp.h;
    c.k = cp.k;
    c.eps = eps;
    c.validate();
    return c;
}

}  // namespace cate
