#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "cate/construction.hpp"
#include "cate/quadrature.hpp"
#include "cate/rng.hpp"

using namespace cate;

namespace {

LowerBoundConfig base_config(Regime r = Regime::Mu0AlphaGeBeta) {
    LowerBoundConfig c;
    c.d = 1;
    c.alpha = 0.5;
    c.beta = 0.5;
    c.gamma = 1.0;
    c.regime = r;
    c.h = 0.25;
    c.k = 4;
    c.eps = 0.05;
    return c;
}

// Independent route to the joint density: f times the Bernoulli likelihood
// pi^a (1-pi)^{1-a} mu_a^y (1-mu_a)^{1-y}. Algebraically identical to the
// bilinear form for every (pi, outcome, tau), so it cross-checks the
// coefficient bookkeeping without sharing any code path.
double bernoulli_product_density(double f, const ConstructionMeans& m, int a, int y) {
    double pi = m.pi, mu = a == 1 ? m.mu1() : m.mu0();
    double pa = a == 1 ? pi : 1.0 - pi;
    double py = y == 1 ? mu : 1.0 - mu;
    return f * pa * py;
}

}  // namespace

TEST_CASE("flat-top bump pointwise values") {
    CHECK(flat_top_bump_scalar(0.0) == 1.0);
    CHECK(flat_top_bump_scalar(0.25) == 1.0);
    CHECK(flat_top_bump_scalar(-0.25) == 1.0);
    CHECK(flat_top_bump_scalar(0.5) == 0.0);
    CHECK(flat_top_bump_scalar(std::sqrt(2.0) / 4.0) == 0.0);
    CHECK(flat_top_bump_scalar(0.36) == 0.0);  // just past sqrt(2)/4 ~ 0.3536
    // frozen reference value computed with 50-digit arithmetic
    CHECK(flat_top_bump_scalar(0.3) == doctest::Approx(0.6194025164036004).epsilon(1e-13));
    CHECK(flat_top_bump_scalar(-0.3) == flat_top_bump_scalar(0.3));
    // strictly between 0 and 1 on the shoulder, monotone down
    CHECK(flat_top_bump_scalar(0.27) > flat_top_bump_scalar(0.3));
    CHECK(flat_top_bump_scalar(0.3) > flat_top_bump_scalar(0.33));

    Vec v(2);
    v << 0.3, 0.1;
    CHECK(flat_top_bump(v) == doctest::Approx(flat_top_bump_scalar(0.3)).epsilon(1e-14));
    v << 0.3, 0.3;
    double b = flat_top_bump_scalar(0.3);
    CHECK(flat_top_bump(v) == doctest::Approx(b * b).epsilon(1e-14));
}

TEST_CASE("support geometry for d=1, h=1/4, k=4") {
    LowerBoundConfig c = base_config();
    SupportSet sup(c);
    CHECK(sup.measure() == doctest::Approx(0.625).epsilon(1e-15));
    CHECK(sup.f_value() == doctest::Approx(1.6).epsilon(1e-15));
    CHECK(c.g() == doctest::Approx(0.0625).epsilon(1e-15));

    // partition midpoints of the inner window [3/8, 5/8]
    std::vector<double> expect = {0.40625, 0.46875, 0.53125, 0.59375};
    for (long long i = 0; i < 4; ++i) {
        Vec m = sup.midpoint(i);
        CHECK(m[0] == doctest::Approx(expect[static_cast<std::size_t>(i)]).epsilon(1e-15));
        CHECK(sup.cube_of(m) == i);
        CHECK(sup.in_support(m));
    }
    // far region counts, the moat between the two windows does not
    CHECK(sup.in_support(Vec::Constant(1, 0.1)));
    CHECK(sup.in_support(Vec::Constant(1, 0.9)));
    CHECK(!sup.in_support(Vec::Constant(1, 0.3)));    // inside C_2h, outside C_h
    CHECK(!sup.in_support(Vec::Constant(1, 0.44)));   // between sub-cubes
    CHECK(!sup.in_support(Vec::Constant(1, 1.2)));    // outside the unit cube

    // sub-cube has half the partition side
    CHECK(sup.supp_side() == doctest::Approx(0.03125).epsilon(1e-15));
    CHECK(sup.in_support(Vec::Constant(1, 0.40625 + 0.015)));
    CHECK(!sup.in_support(Vec::Constant(1, 0.40625 + 0.017)));

    // support boxes tile the support measure
    double vol = 0.0;
    for (const Box& b : sup.far_boxes()) vol += b.volume();
    for (const Box& b : sup.support_cubes()) vol += b.volume();
    CHECK(vol == doctest::Approx(sup.measure()).epsilon(1e-14));
}

TEST_CASE("support geometry in two dimensions") {
    LowerBoundConfig c = base_config();
    c.d = 2;
    c.k = 4;  // j = 2 per axis
    SupportSet sup(c);
    CHECK(sup.j == 2);
    double expect_measure = 1.0 - (15.0 / 4.0) * 0.0625;  // 1 - ((4^d-1)/2^d) h^d
    CHECK(sup.measure() == doctest::Approx(expect_measure).epsilon(1e-14));
    double vol = 0.0;
    for (const Box& b : sup.far_boxes()) vol += b.volume();
    for (const Box& b : sup.support_cubes()) vol += b.volume();
    CHECK(vol == doctest::Approx(sup.measure()).epsilon(1e-14));
    // far boxes are pairwise disjoint
    auto boxes = sup.far_boxes();
    for (std::size_t a = 0; a < boxes.size(); ++a)
        for (std::size_t b = a + 1; b < boxes.size(); ++b) {
            Box dummy;
            CHECK(!intersect(boxes[a], boxes[b], dummy));
        }
}

TEST_CASE("worked joint-density value at a sub-cube midpoint") {
    // beta = 1/2, gamma = 1, first sub-cube signed +1, a = y = 1:
    // pi = 1/2, outcome = 1/2 + g^beta - h/2 = 0.625, tau = 0.25, so the
    // density is f * pi * mu1 = 1.6 * 0.5 * 0.875 = 0.7.
    LowerBoundConfig c = base_config();
    SignVector lam = SignVector::explicit_signs({1, -1, 1, -1});
    SupportSet sup(c);
    Vec m1 = sup.midpoint(0);
    CHECK(eval_density(c, lam, Hypothesis::P, m1, 1, 1) == doctest::Approx(0.7).epsilon(1e-14));
    // far region: f/4 for every cell
    Vec far = Vec::Constant(1, 0.1);
    for (int a = 0; a < 2; ++a)
        for (int y = 0; y < 2; ++y)
            CHECK(eval_density(c, lam, Hypothesis::P, far, a, y) ==
                  doctest::Approx(0.4).epsilon(1e-14));
    // off support the density vanishes
    CHECK(eval_density(c, lam, Hypothesis::P, Vec::Constant(1, 0.3), 1, 1) == 0.0);
}

TEST_CASE("bilinear form equals the Bernoulli product in every regime") {
    Rng rng(17);
    for (Regime r : {Regime::Mu0AlphaGeBeta, Regime::Mu0BetaGeAlpha, Regime::EtaAlphaGeBeta,
                     Regime::EtaBetaGeAlpha}) {
        LowerBoundConfig c = base_config(r);
        if (r == Regime::EtaBetaGeAlpha) c.gamma = 0.5;  // keep h^gamma >= 4 eps
        SupportSet sup(c);
        SignVector lam = SignVector::prior_draw(rng.below(1u << 30));
        for (int t = 0; t < 200; ++t) {
            Vec x(1);
            x[0] = rng.uniform();
            if (!sup.in_support(x)) continue;
            ConstructionMeans m = construction_means(c, sup, lam, t % 2 ? Hypothesis::P : Hypothesis::Q, x);
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y) {
                    double lhs = density_from_means(sup.f_value(), m, a, y);
                    double rhs = bernoulli_product_density(sup.f_value(), m, a, y);
                    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
                }
        }
    }
}

TEST_CASE("densities are nonnegative, floored at eps f, and integrate to one") {
    Rng rng(23);
    for (Regime r : {Regime::Mu0AlphaGeBeta, Regime::Mu0BetaGeAlpha, Regime::EtaAlphaGeBeta,
                     Regime::EtaBetaGeAlpha}) {
        LowerBoundConfig c = base_config(r);
        if (r == Regime::EtaBetaGeAlpha) c.gamma = 0.5;
        c.validate();
        SupportSet sup(c);
        SignVector lam = SignVector::explicit_signs({1, -1, -1, 1});

        auto boxes = sup.far_boxes();
        auto cubes = sup.support_cubes();
        boxes.insert(boxes.end(), cubes.begin(), cubes.end());
        double total_p = 0.0, total_q = 0.0;
        for (const Box& b : boxes)
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y)
                    for_each_tensor_node(b, 25, [&](const Vec& x, double w) {
                        total_p += w * eval_density(c, lam, Hypothesis::P, x, a, y);
                        total_q += w * eval_density(c, lam, Hypothesis::Q, x, a, y);
                    });
        CHECK(total_p == doctest::Approx(1.0).epsilon(1e-9));
        CHECK(total_q == doctest::Approx(1.0).epsilon(1e-9));

        // P-hypothesis density ratio floor where the combination argument
        // divides by p_lambda: everywhere for the first three regimes; for
        // eta_beta_ge_alpha only on the sub-cubes, since its far region has
        // Y = A almost surely and mixed cells carry no mass at all there.
        bool floor_everywhere = (r != Regime::EtaBetaGeAlpha);
        for (int t = 0; t < 500; ++t) {
            Vec x(1);
            x[0] = rng.uniform();
            if (!sup.in_support(x)) continue;
            if (!floor_everywhere && sup.cube_of(x) < 0) continue;
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y) {
                    double p = eval_density(c, lam, Hypothesis::P, x, a, y);
                    CHECK(p >= c.eps * sup.f_value() - 1e-12);
                }
        }
    }
}

TEST_CASE("pointwise cell sums equal the covariate marginal") {
    LowerBoundConfig c = base_config(Regime::EtaAlphaGeBeta);
    SupportSet sup(c);
    SignVector lam = SignVector::prior_draw(99);
    Rng rng(31);
    for (int t = 0; t < 300; ++t) {
        Vec x(1);
        x[0] = rng.uniform();
        double sum_p = 0.0, sum_q = 0.0;
        for (int a = 0; a < 2; ++a)
            for (int y = 0; y < 2; ++y) {
                sum_p += eval_density(c, lam, Hypothesis::P, x, a, y);
                sum_q += eval_density(c, lam, Hypothesis::Q, x, a, y);
            }
        double marginal = sup.in_support(x) ? sup.f_value() : 0.0;
        CHECK(sum_p == doctest::Approx(marginal).epsilon(1e-12));
        CHECK(sum_q == doctest::Approx(marginal).epsilon(1e-12));
    }
}

TEST_CASE("prior means match enumeration over all sign vectors") {
    for (Regime r : {Regime::Mu0AlphaGeBeta, Regime::EtaBetaGeAlpha}) {
        LowerBoundConfig c = base_config(r);
        if (r == Regime::EtaBetaGeAlpha) c.gamma = 0.5;
        SupportSet sup(c);
        Rng rng(47);
        for (int t = 0; t < 60; ++t) {
            Vec x(1);
            x[0] = rng.uniform();
            for (Hypothesis hyp : {Hypothesis::P, Hypothesis::Q})
                for (int a = 0; a < 2; ++a)
                    for (int y = 0; y < 2; ++y) {
                        double mean = 0.0;
                        for (int mask = 0; mask < 16; ++mask) {
                            std::vector<int> signs(4);
                            for (int j = 0; j < 4; ++j) signs[static_cast<std::size_t>(j)] = (mask >> j) & 1 ? 1 : -1;
                            mean += eval_density(c, SignVector::explicit_signs(signs), hyp, x, a, y);
                        }
                        mean /= 16.0;
                        double closed = prior_mean_density(c, hyp, x, a, y);
                        CHECK(mean == doctest::Approx(closed).epsilon(5e-13));
                    }
        }
    }
}

TEST_CASE("perturbation envelopes hit the advertised amplitudes") {
    LowerBoundConfig c = base_config(Regime::EtaAlphaGeBeta);
    c.alpha = 0.7;
    c.beta = 0.5;
    SignVector lam = SignVector::explicit_signs({1, -1, 1, 1});
    double g = c.g();
    // P: flat propensity, outcome bumps at g^beta, effect bump at h^gamma
    CHECK(smoothness_envelope(c, lam, Hypothesis::P, ConstructionFn::Pi) ==
          doctest::Approx(0.0));
    CHECK(smoothness_envelope(c, lam, Hypothesis::P, ConstructionFn::Eta) ==
          doctest::Approx(std::pow(g, c.beta)).epsilon(1e-12));
    CHECK(smoothness_envelope(c, lam, Hypothesis::P, ConstructionFn::Tau) ==
          doctest::Approx(std::pow(c.h, c.gamma)).epsilon(1e-12));
    // Q: propensity bumps at g^alpha, no effect
    CHECK(smoothness_envelope(c, lam, Hypothesis::Q, ConstructionFn::Pi) ==
          doctest::Approx(std::pow(g, c.alpha)).epsilon(1e-12));
    CHECK(smoothness_envelope(c, lam, Hypothesis::Q, ConstructionFn::Tau) ==
          doctest::Approx(0.0));
}

TEST_CASE("configuration validation rejects broken inputs") {
    CHECK_THROWS_AS([] { LowerBoundConfig c = base_config(); c.h = 0.3; c.validate(); }(),
                    ConfigError);
    CHECK_THROWS_AS([] { LowerBoundConfig c = base_config(); c.d = 2; c.k = 3; c.validate(); }(),
                    ConfigError);
    CHECK_THROWS_AS([] {
        LowerBoundConfig c = base_config();
        c.alpha = 0.3;  // alpha_ge_beta regime with alpha < beta
        c.validate();
    }(), ConfigError);
    CHECK_THROWS_AS([] {
        LowerBoundConfig c = base_config();
        c.k = 1;
        c.beta = 0.1;  // amplitude (1/4)^{0.1} ~ 0.87 breaks the validity budget
        c.alpha = 0.1;
        c.validate();
    }(), ConfigError);
    CHECK_THROWS_AS([] {
        LowerBoundConfig c = base_config(Regime::EtaBetaGeAlpha);
        c.gamma = 2.0;  // h^gamma = 1/16 < 4 eps
        c.validate();
    }(), ConfigError);
    // x0 too close to the boundary for the double window
    CHECK_THROWS_AS([] {
        LowerBoundConfig c = base_config();
        c.x0 = Vec::Constant(1, 0.2);
        c.validate();
    }(), ConfigError);
    // and a valid one passes
    base_config().validate();
}

TEST_CASE("sampler is deterministic and respects the support") {
    LowerBoundConfig c = base_config();
    SignVector lam = SignVector::prior_draw(5);
    Dataset d1 = sample(c, lam, Hypothesis::P, 500, 77);
    Dataset d2 = sample(c, lam, Hypothesis::P, 500, 77);
    CHECK((d1.x - d2.x).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d1.a - d2.a).cwiseAbs().maxCoeff() == 0.0);
    CHECK((d1.y - d2.y).cwiseAbs().maxCoeff() == 0.0);
    Dataset d3 = sample(c, lam, Hypothesis::P, 500, 78);
    CHECK((d1.x - d3.x).cwiseAbs().maxCoeff() > 0.0);

    SupportSet sup(c);
    for (int i = 0; i < d1.n(); ++i) {
        CHECK(sup.in_support(d1.point(i)));
        CHECK((d1.a[i] == 0.0 || d1.a[i] == 1.0));
        CHECK((d1.y[i] == 0.0 || d1.y[i] == 1.0));
    }

    Dataset empty = sample(c, lam, Hypothesis::P, 0, 1);
    CHECK(empty.n() == 0);
}

TEST_CASE("far-region treatment frequency is one half") {
    LowerBoundConfig c = base_config();
    SignVector lam = SignVector::prior_draw(5);
    Dataset data = sample(c, lam, Hypothesis::Q, 100000, 13);
    SupportSet sup(c);
    double sum = 0.0;
    int count = 0;
    for (int i = 0; i < data.n(); ++i) {
        if (sup.in_big_window(data.point(i))) continue;
        sum += data.a[i];
        ++count;
    }
    REQUIRE(count > 1000);
    double mean = sum / count;
    double se = 0.5 / std::sqrt(static_cast<double>(count));
    CHECK(std::abs(mean - 0.5) <= 3.0 * se);
}

TEST_CASE("one hypothesis row is a signed measure and the sampler says so") {
    // The eta_beta_ge_alpha Q hypothesis has tau = 1 with pi = 1/2 + g^alpha S,
    // forcing mu0 = -g^alpha S < 0 on positively signed sub-cubes. The
    // density arithmetic stays consistent, but no data can be drawn there.
    LowerBoundConfig c = base_config(Regime::EtaBetaGeAlpha);
    c.gamma = 0.5;
    c.validate();
    SignVector lam = SignVector::all_plus(4);
    SupportSet sup(c);
    ConstructionMeans m = construction_means(c, sup, lam, Hypothesis::Q, sup.midpoint(0));
    CHECK(m.mu0() < 0.0);
    CHECK_THROWS_AS(sample(c, lam, Hypothesis::Q, 2000, 3), NumericalGuardError);
    // the matched P hypothesis is a genuine distribution
    Dataset data = sample(c, lam, Hypothesis::P, 2000, 3);
    CHECK(data.n() == 2000);
}

TEST_CASE("bandwidth coupling reproduces the closed-form instance") {
    // alpha = beta = 0.1, gamma = 1, d = 1, C* = 1, n = 1e8: the pre-rounding
    // solution is g = 1e-10, h = 0.04, and k = 4e8 sub-cubes; separation
    // h^gamma / 4 = 0.01.
    CoupledParameters cp = couple_parameters(1e8, 1, 0.1, 0.1, 1.0, Regime::Mu0AlphaGeBeta, 0.05,
                                             1.0, 1.0);
    CHECK(cp.g_real == doctest::Approx(1e-10).epsilon(1e-12));
    CHECK(cp.h_real == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(cp.j == 400000000LL);
    CHECK(cp.k == 400000000LL);
    CHECK(cp.h == doctest::Approx(0.04).epsilon(1e-12));
    CHECK(cp.separation == doctest::Approx(0.01).epsilon(1e-12));
    // the re-solved pair satisfies the coupling identity exactly
    double lhs = std::pow(cp.h, 1.0);
    double rhs = 4.0 * std::pow(cp.g, 2.0 * cp.s_eff);
    CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));

    CHECK_THROWS_AS(couple_parameters(1e8, 1, 0.5, 0.5, 1.0, Regime::Mu0AlphaGeBeta, 0.05),
                    ConfigError);  // gamma = 2 s_eff: no low-smoothness coupling
    CHECK_THROWS_AS(couple_parameters(10.0, 1, 0.1, 0.1, 1.0, Regime::Mu0AlphaGeBeta, 0.05, 1.0, 1.0),
                    ConfigError);  // n too small
}

TEST_CASE("coupled config passes validation and keeps delta3 at zero") {
    LowerBoundConfig c =
        make_coupled_config(1e8, 1, 0.1, 0.1, 1.0, Regime::Mu0AlphaGeBeta, 0.05, 1.0, 1.0);
    double gap = std::pow(c.g(), 2.0 * c.s_eff()) - std::pow(c.h, c.gamma) / 4.0;
    CHECK(std::abs(gap) <= 1e-12 * std::pow(c.h, c.gamma) / 4.0);
}

TEST_CASE("sign vectors: explicit, constant, and hashed priors") {
    SignVector a = SignVector::all_plus(3);
    CHECK((a.sign(0) == 1 && a.sign(2) == 1));
    SignVector e = SignVector::explicit_signs({1, -1, 1});
    CHECK(e.sign(1) == -1);
    CHECK_THROWS_AS(e.sign(3), ConfigError);
    CHECK_THROWS_AS(SignVector::explicit_signs({2}), ConfigError);
    SignVector p = SignVector::prior_draw(123), q = SignVector::prior_draw(123);
    bool all_same = true, any_minus = false;
    for (long long j = 0; j < 1000; ++j) {
        all_same = all_same && p.sign(j) == q.sign(j);
        any_minus = any_minus || p.sign(j) == -1;
    }
    CHECK(all_same);
    CHECK(any_minus);
}
