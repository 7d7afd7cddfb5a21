#include "cate/construction.hpp"

namespace cate {

Dataset sample(const LowerBoundConfig& c, const SignVector& lam, Hypothesis hyp, int n,
               std::uint64_t seed) {
    c.validate();
    SupportSet sup(c);
    Rng rng(seed);
    Dataset out;
    out.reserve(n, c.d);
    std::vector<Box> far = sup.far_boxes();
    std::vector<double> far_cum;
    double far_vol = 0.0;
    for (const Box& b : far) {
        far_vol += b.volume();
        far_cum.push_back(far_vol);
    }
    double cube_vol = static_cast<double>(c.k) * std::pow(sup.supp_side(), c.d);
    double p_far = far_vol / (far_vol + cube_vol);
    for (int i = 0; i < n; ++i) {
        Vec x(c.d);
        if (rng.uniform() < p_far) {
            double u = rng.uniform() * far_vol;
            std::size_t bi = 0;
            while (bi + 1 < far_cum.size() && u > far_cum[bi]) ++bi;
            for (int a = 0; a < c.d; ++a) x[a] = rng.uniform(far[bi].lo[a], far[bi].hi[a]);
        } else {
            long long idx = static_cast<long long>(rng.below(static_cast<std::uint64_t>(c.k)));
            Vec m = sup.midpoint(idx);
            for (int a = 0; a < c.d; ++a)
                x[a] = rng.uniform(m[a] - sup.supp_side() / 2.0, m[a] + sup.supp_side() / 2.0);
        }
        ConstructionMeans cm = construction_means(c, sup, lam, hyp, x);
        double m0 = cm.mu0(), m1 = cm.mu1();
        if (cm.pi < 0.0 || cm.pi > 1.0 || m0 < -1e-12 || m0 > 1.0 + 1e-12 || m1 < -1e-12 ||
            m1 > 1.0 + 1e-12)
            throw NumericalGuardError(std::string("sample: conditional mean outside [0,1] under ") +
                                      regime_name(c.regime) +
                                      (hyp == Hypothesis::P ? " P" : " Q") +
                                      " hypothesis; this hypothesis is not samplable");
        int a = rng.bernoulli(cm.pi) ? 1 : 0;
        double mu = a == 1 ? std::clamp(m1, 0.0, 1.0) : std::clamp(m0, 0.0, 1.0);
        int yv = rng.bernoulli(mu) ? 1 : 0;
        out.x.row(i) = x.transpose();
        out.a[i] = a;
        out.y[i] = yv;
    }
    return out;
}

double smoothness_envelope(const LowerBoundConfig& c, const SignVector& lam, Hypothesis hyp,
                           ConstructionFn fn, int grid_per_axis) {
    SupportSet sup(c);
    double base = 0.5;
    if (fn == ConstructionFn::Tau) base = (c.regime == Regime::EtaBetaGeAlpha) ? 1.0 : 0.0;
    auto value = [&](const Vec& x) {
        ConstructionMeans m = construction_means(c, sup, lam, hyp, x);
        switch (fn) {
            case ConstructionFn::Pi: return m.pi;
            case ConstructionFn::Mu0: return m.mu0();
            case ConstructionFn::Eta: return m.eta();
            case ConstructionFn::Tau: return m.tau;
        }
        return 0.0;
    };
    double worst = 0.0;
    Box big = cube_at(c.center(), 2.0 * c.h);
    std::vector<int> idx(c.d, 0);
    Vec x(c.d);
    while (true) {
        for (int a = 0; a < c.d; ++a)
            x[a] = big.lo[a] + (big.hi[a] - big.lo[a]) * idx[a] / (grid_per_axis - 1.0);
        worst = std::max(worst, std::abs(value(x) - base));
        int a = 0;
        while (a < c.d && ++idx[a] == grid_per_axis) idx[a++] = 0;
        if (a == c.d) break;
    }
    if (c.k <= 100000)
        for (long long jdx = 0; jdx < c.k; ++jdx)
            worst = std::max(worst, std::abs(value(sup.midpoint(jdx)) - base));
    return worst;
}

}  // namespace cate
