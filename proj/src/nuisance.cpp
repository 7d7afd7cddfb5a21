#include "cate/nuisance.hpp"

#include <algorithm>

#include <Eigen/Dense>

namespace cate {

SplitPlan split(int n, double fraction, std::uint64_t seed) {
    if (n < 2) throw ConfigError("split: need at least 2 observations");
    if (!(fraction > 0.0) || !(fraction < 1.0))
        throw ConfigError("split: fraction must lie in (0,1)");
    std::vector<int> idx(n);
    for (int i = 0; i < n; ++i) idx[i] = i;
    Rng rng(mix_seed(seed, hash_label("split")));
    for (int i = n - 1; i > 0; --i) {
        int j = static_cast<int>(rng.below(static_cast<std::uint64_t>(i) + 1));
        std::swap(idx[i], idx[j]);
    }
    int n_train = static_cast<int>(std::llround(fraction * n));
    n_train = std::clamp(n_train, 1, n - 1);
    SplitPlan plan;
    plan.seed = seed;
    plan.train.assign(idx.begin(), idx.begin() + n_train);
    plan.estimation.assign(idx.begin() + n_train, idx.end());
    std::sort(plan.train.begin(), plan.train.end());
    std::sort(plan.estimation.begin(), plan.estimation.end());
    return plan;
}

Dataset subset(const Dataset& data, const std::vector<int>& idx) {
    Dataset out;
    out.reserve(static_cast<int>(idx.size()), data.dim());
    for (std::size_t r = 0; r < idx.size(); ++r) {
        out.x.row(static_cast<int>(r)) = data.x.row(idx[r]);
        out.a[static_cast<int>(r)] = data.a[idx[r]];
        out.y[static_cast<int>(r)] = data.y[idx[r]];
    }
    return out;
}

LocalPolynomialFit::LocalPolynomialFit(const Dataset& train, RegressionTarget target, int degree,
                                       double bandwidth)
    : d_(train.dim()), degree_(degree), bandwidth_(bandwidth) {
    if (degree < 0) throw ConfigError("LocalPolynomialFit: degree must be >= 0");
    if (!(bandwidth > 0.0)) throw ConfigError("LocalPolynomialFit: bandwidth must be positive");
    std::vector<int> rows;
    for (int i = 0; i < train.n(); ++i) {
        if (target == RegressionTarget::OutcomeControl && train.a[i] != 0.0) continue;
        rows.push_back(i);
    }
    if (rows.empty()) throw ConfigError("LocalPolynomialFit: no rows for the requested target");
    x_.resize(static_cast<int>(rows.size()), d_);
    y_.resize(static_cast<int>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        x_.row(static_cast<int>(r)) = train.x.row(rows[r]);
        y_[static_cast<int>(r)] =
            (target == RegressionTarget::Propensity) ? train.a[rows[r]] : train.y[rows[r]];
    }
    if (d_ == 1) {
        order_.resize(x_.rows());
        for (int i = 0; i < x_.rows(); ++i) order_[i] = i;
        std::sort(order_.begin(), order_.end(),
                  [&](int a, int b) { return x_(a, 0) < x_(b, 0); });
    }
}

double LocalPolynomialFit::solve_at(const Vec& x, int degree, double bandwidth, bool& ok) const {
    TensorBasisSpec spec(d_, degree);
    const int q = spec.size();
    Mat gram = Mat::Zero(q, q);
    Vec mom = Vec::Zero(q);
    LocalizedFrame frame(x, bandwidth);
    Vec phi;
    int count = 0;
    auto accumulate = [&](int row) {
        Vec xi = x_.row(row).transpose();
        if (!frame.in_window(xi)) return;
        eval_tensor_basis(spec, frame.stretch(xi), phi);
        gram.noalias() += phi * phi.transpose();
        mom.noalias() += y_[row] * phi;
        ++count;
    };
    if (d_ == 1) {
        // binary search on the sorted column for the window [x-h/2, x+h/2]
        double lo = x[0] - bandwidth / 2.0, hi = x[0] + bandwidth / 2.0;
        auto cmp = [&](int idx, double v) { return x_(idx, 0) < v; };
        auto it0 = std::lower_bound(order_.begin(), order_.end(), lo, cmp);
        for (auto it = it0; it != order_.end() && x_(*it, 0) <= hi; ++it) accumulate(*it);
    } else {
        for (int i = 0; i < x_.rows(); ++i) accumulate(i);
    }
    ok = false;
    if (count < q) return 0.0;
    Eigen::SelfAdjointEigenSolver<Mat> es(gram);
    double lam_min = es.eigenvalues().minCoeff();
    double lam_max = es.eigenvalues().maxCoeff();
    if (!(lam_max > 0.0) || lam_min <= 1e-10 * lam_max) return 0.0;
    Vec coef = es.eigenvectors() *
               (es.eigenvectors().transpose() * mom).cwiseQuotient(es.eigenvalues());
    ok = true;
    // the value at the window center: basis at v = (1/2,...,1/2)
    eval_tensor_basis(spec, Vec::Constant(d_, 0.5), phi);
    return coef.dot(phi);
}

double LocalPolynomialFit::operator()(const Vec& x) const {
    if (x.size() != d_) throw ConfigError("LocalPolynomialFit: point dimension mismatch");
    bool ok = false;
    double v = solve_at(x, degree_, bandwidth_, ok);
    if (ok) return v;
    struct Attempt {
        int deg;
        double bw;
    };
    int deg_down = std::max(degree_ - 1, 0);
    Attempt ladder[3] = {{deg_down, bandwidth_},
                         {deg_down, 1.5 * bandwidth_},
                         {deg_down, 2.25 * bandwidth_}};
    for (const Attempt& at : ladder) {
        ++fallbacks_;
        v = solve_at(x, at.deg, at.bw, ok);
        if (ok) return v;
    }
    std::string pt = "(";
    for (int j = 0; j < d_; ++j) pt += (j ? ", " : "") + std::to_string(x[j]);
    pt += ")";
    throw NumericalGuardError("LocalPolynomialFit: singular local design at " + pt +
                              " after degree/bandwidth fallbacks");
}

StretchedDistribution fit_covariate_distribution(const Dataset& train, const LocalizedFrame& frame,
                                                 int cells_per_axis, double laplace_floor) {
    if (cells_per_axis < 1) throw ConfigError("fit_covariate_distribution: cells_per_axis >= 1");
    if (laplace_floor < 0.0) throw ConfigError("fit_covariate_distribution: negative floor");
    const int d = frame.dim();
    long long cells = 1;
    for (int j = 0; j < d; ++j) cells *= cells_per_axis;
    std::vector<double> count(static_cast<std::size_t>(cells), 0.0);
    int in_window = 0;
    for (int i = 0; i < train.n(); ++i) {
        Vec xi = train.x.row(i).transpose();
        if (!frame.in_window(xi)) continue;
        ++in_window;
        Vec v = frame.stretch(xi);
        long long idx = 0, stride = 1;
        for (int j = 0; j < d; ++j) {
            long long c = static_cast<long long>(std::floor(v[j] * cells_per_axis));
            c = std::clamp(c, 0LL, static_cast<long long>(cells_per_axis) - 1);
            idx += stride * c;
            stride *= cells_per_axis;
        }
        count[static_cast<std::size_t>(idx)] += 1.0;
    }
    if (in_window == 0)
        throw ConfigError("fit_covariate_distribution: no training points in the window");
    std::vector<Box> boxes;
    std::vector<double> raw;
    double cell_vol = std::pow(1.0 / cells_per_axis, d);
    double total = in_window + laplace_floor * static_cast<double>(cells);
    for (long long c = 0; c < cells; ++c) {
        Box b;
        b.lo = Vec(d);
        b.hi = Vec(d);
        long long rem = c;
        for (int j = 0; j < d; ++j) {
            long long cj = rem % cells_per_axis;
            rem /= cells_per_axis;
            b.lo[j] = static_cast<double>(cj) / cells_per_axis;
            b.hi[j] = static_cast<double>(cj + 1) / cells_per_axis;
        }
        boxes.push_back(b);
        raw.push_back((count[static_cast<std::size_t>(c)] + laplace_floor) / (total * cell_vol));
    }
    StretchedDistribution sd = StretchedDistribution::from_physical(std::move(boxes), std::move(raw));
    // physical mass: estimated F(window) / h^d from the window frequency
    sd.window_mass = (static_cast<double>(in_window) / train.n()) / std::pow(frame.h, d);
    return sd;
}

NuisanceProbe nuisance_error_probe(const NuisanceFit& fit, const NuisanceTruth& truth,
                                   const LocalizedFrame& frame, int quad_order, int ratio_grid) {
    NuisanceProbe probe;
    auto to_x = [&](const Vec& v) {
        return (frame.x0 + frame.h * (v - Vec::Constant(frame.dim(), 0.5))).eval();
    };
    double pi_sq = integrate(truth.f_star, quad_order, [&](const Vec& v) {
        Vec x = to_x(v);
        double dd = fit.pi(x) - truth.pi(x);
        return dd * dd;
    });
    double out_sq = integrate(truth.f_star, quad_order, [&](const Vec& v) {
        Vec x = to_x(v);
        double dd = fit.outcome(x) - truth.outcome(x);
        return dd * dd;
    });
    probe.pi_l2 = std::sqrt(std::max(pi_sq, 0.0));
    probe.outcome_l2 = std::sqrt(std::max(out_sq, 0.0));
    // density ratio on a per-piece tensor grid of the truth's support
    double worst = 0.0;
    for (const Box& piece : truth.f_star.pieces) {
        std::vector<int> idx(piece.dim(), 0);
        Vec v(piece.dim());
        while (true) {
            for (int j = 0; j < piece.dim(); ++j) {
                double t = (idx[j] + 0.5) / ratio_grid;
                v[j] = piece.lo[j] + (piece.hi[j] - piece.lo[j]) * t;
            }
            double ft = truth.f_star.physical_density_at(v);
            if (ft > 0.0)
                worst = std::max(worst, std::abs(fit.f_star.physical_density_at(v) / ft - 1.0));
            int j = 0;
            while (j < piece.dim() && ++idx[j] == ratio_grid) idx[j++] = 0;
            if (j == piece.dim()) break;
        }
    }
    probe.density_ratio_sup = worst;
    return probe;
}

}  // namespace cate
