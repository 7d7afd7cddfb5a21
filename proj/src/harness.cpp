#include "cate/harness.hpp"

#include <atomic>
#include <cmath>
#include <thread>

namespace cate {

double lacunary_bump_sum(const Vec& x, double holder, int scales, std::uint64_t seed) {
    if (scales < 1) return 0.0;
    double total = 0.0, norm = 0.0;
    const int d = static_cast<int>(x.size());
    for (int m = 1; m <= scales; ++m) {
        double amp = std::pow(2.0, -m * holder);
        norm += amp;
        double side = std::pow(2.0, -m);
        long long cells = 1LL << m;
        long long idx = 0;
        Vec u(d);
        bool outside = false;
        for (int j = 0; j < d; ++j) {
            long long c = static_cast<long long>(std::floor(x[j] / side));
            c = std::clamp(c, 0LL, cells - 1);
            idx = idx * cells + c;
            u[j] = (x[j] - (static_cast<double>(c) + 0.5) * side) / side;
            if (std::abs(u[j]) >= 0.5) outside = true;
        }
        if (outside) continue;
        double b = flat_top_bump(u);
        if (b == 0.0) continue;
        std::uint64_t hash = splitmix64(seed ^ (0x9e3779b97f4a7c15ULL * m) ^
                                        static_cast<std::uint64_t>(idx));
        double sign = (hash & 1u) ? 1.0 : -1.0;
        total += amp * sign * b;
    }
    return total / norm;
}

void ExperimentConfig::validate() const {
    if (d < 1) throw ConfigError("experiment: dimension must be >= 1");
    if (replications < 1) throw ConfigError("experiment: replications must be >= 1");
    if (n_grid.empty()) throw ConfigError("experiment: empty n grid");
    for (std::size_t i = 0; i + 1 < n_grid.size(); ++i)
        if (n_grid[i] >= n_grid[i + 1])
            throw ConfigError("experiment: n grid must be strictly increasing");
    for (long long n : n_grid)
        if (n < 4) throw ConfigError("experiment: sample sizes must be >= 4");
    if (kind == ScenarioKind::Construction) {
        if (!construction) throw ConfigError("experiment: construction scenario without config");
        construction->validate();
    }
    if (!(alpha > 0.0) || !(beta > 0.0) || !(gamma > 0.0))
        throw ConfigError("experiment: smoothness exponents must be positive");
}

ScenarioTruth scenario_truth(const ExperimentConfig& cfg, const LocalizedFrame& frame,
                             const SignVector& signs) {
    ScenarioTruth truth;
    Vec x0 = cfg.center();
    if (cfg.kind == ScenarioKind::SmoothSynthetic) {
        SmoothScenario sc = cfg.smooth;
        int d = cfg.d;
        truth.pi = [sc, x0, d](const Vec& x) {
            double v = sc.pi_base + sc.pi_lin * (x[0] - x0[0]);
            if (sc.pi_amp != 0.0)
                v += sc.pi_amp * lacunary_bump_sum(x, sc.pi_holder, sc.scales, sc.shape_seed);
            (void)d;
            return v;
        };
        truth.mu0 = [sc, x0](const Vec& x) {
            double v = sc.mu_base + sc.mu_lin * (x[0] - x0[0]);
            if (sc.mu_amp != 0.0)
                v += sc.mu_amp * lacunary_bump_sum(x, sc.mu_holder, sc.scales, sc.shape_seed);
            return v;
        };
        truth.tau = [sc, x0](const Vec& x) {
            double v = sc.tau_base + sc.tau_lin * (x[0] - x0[0]) +
                       sc.tau_kink * std::abs(x[0] - x0[0]);
            if (sc.tau_amp != 0.0)
                v += sc.tau_amp *
                     lacunary_bump_sum(x, sc.tau_holder, sc.scales, sc.shape_seed ^ 0x5bf0ULL);
            return v;
        };
        truth.tau_x0 = truth.tau(x0);
        truth.f_star = StretchedDistribution::uniform01(cfg.d);
        // X is uniform; the window must sit inside [0,1]^d for mass 1
        for (int j = 0; j < cfg.d; ++j)
            if (frame.x0[j] - frame.h / 2.0 < -1e-12 ||
                frame.x0[j] + frame.h / 2.0 > 1.0 + 1e-12)
                throw ConfigError("experiment: estimation window leaves the unit cube");
    } else {
        const LowerBoundConfig& lb = *cfg.construction;
        SupportSet sup(lb);
        Hypothesis hyp = cfg.hypothesis;
        auto means_at = [lb, sup, signs, hyp](const Vec& x) {
            return construction_means(lb, sup, signs, hyp, x);
        };
        truth.pi = [means_at](const Vec& x) { return means_at(x).pi; };
        truth.mu0 = [means_at](const Vec& x) { return means_at(x).mu0(); };
        truth.tau = [means_at](const Vec& x) { return means_at(x).tau; };
        truth.tau_x0 = truth.tau(lb.center());
        truth.f_star = construction_covariate_distribution(lb, frame);
    }
    return truth;
}

Dataset scenario_sample(const ExperimentConfig& cfg, const ScenarioTruth& truth, int n,
                        std::uint64_t seed) {
    if (cfg.kind == ScenarioKind::Construction)
        throw ConfigError("scenario_sample: construction scenarios sample via their own law");
    Rng rng(seed);
    Dataset out;
    out.reserve(n, cfg.d);
    for (int i = 0; i < n; ++i) {
        Vec x(cfg.d);
        for (int j = 0; j < cfg.d; ++j) x[j] = rng.uniform();
        double p = std::clamp(truth.pi(x), 0.0, 1.0);
        int a = rng.bernoulli(p) ? 1 : 0;
        double y = truth.mu0(x) + a * truth.tau(x) + cfg.smooth.noise_sd * rng.normal();
        out.x.row(i) = x.transpose();
        out.a[i] = a;
        out.y[i] = y;
    }
    return out;
}

namespace {

struct CellSetup {
    LocalizedFrame frame;
    EstimatorConfig est;
    double h = 0.0;
    long long k = 0;
};

CellSetup cell_setup(const ExperimentConfig& cfg, long long n) {
    CellSetup s;
    double h = cfg.est.fixed_h;
    long long k = cfg.est.fixed_k;
    if (cfg.est.use_tuning) {
        TuningChoice t = tuning_rule(static_cast<double>(n), cfg.alpha, cfg.beta, cfg.gamma,
                                     cfg.d, cfg.est.par, cfg.est.c_h, cfg.est.c_k);
        h = t.h;
        k = t.k;
    }
    s.h = h;
    s.k = k;
    s.frame = LocalizedFrame(cfg.center(), h);
    s.est.par = cfg.est.par;
    s.est.frame = s.frame;
    s.est.gamma = cfg.gamma;
    s.est.rho_degree_override = cfg.est.rho_degree_override;
    s.est.eigen_floor = cfg.est.eigen_floor;
    if (cfg.est.second_order)
        s.est.second_basis = std::make_shared<TensorPrefixBasis>(cfg.d, static_cast<int>(k));
    return s;
}

}  // namespace

ReplicationRecord run_replication(const ExperimentConfig& cfg, long long n, int rep) {
    cfg.validate();
    ReplicationRecord rec;
    rec.n = n;
    rec.rep = rep;
    std::uint64_t cell_seed = mix_seed(mix_seed(cfg.master_seed, hash_label(cfg.name.c_str())),
                                       mix_seed(static_cast<std::uint64_t>(n),
                                                static_cast<std::uint64_t>(rep)));
    CellSetup setup = cell_setup(cfg, n);
    SignVector signs = SignVector::prior_draw(mix_seed(cell_seed, hash_label("signs")));
    try {
        ScenarioTruth truth = scenario_truth(cfg, setup.frame, signs);
        rec.tau_true = truth.tau_x0;
        Dataset data;
        if (cfg.kind == ScenarioKind::Construction)
            data = sample(*cfg.construction, signs, cfg.hypothesis, static_cast<int>(n),
                          mix_seed(cell_seed, hash_label("data")));
        else
            data = scenario_sample(cfg, truth, static_cast<int>(n),
                                   mix_seed(cell_seed, hash_label("data")));
        NuisanceFit nuis;
        Dataset est_split;
        if (cfg.est.known_nuisances) {
            nuis.par = cfg.est.par;
            nuis.pi_raw = truth.pi;
            auto mu0 = truth.mu0;
            auto pi = truth.pi;
            auto tau = truth.tau;
            if (cfg.est.par == Parametrization::Mu0)
                nuis.outcome = mu0;
            else
                nuis.outcome = [mu0, pi, tau](const Vec& x) {
                    return mu0(x) + pi(x) * tau(x);
                };
            nuis.f_star = truth.f_star;
            est_split = std::move(data);
        } else {
            SplitPlan plan = split(data.n(), cfg.est.split_fraction,
                                   mix_seed(cell_seed, hash_label("split")));
            Dataset train = subset(data, plan.train);
            est_split = subset(data, plan.estimation);
            PipelineConfig pipe;
            pipe.split_fraction = cfg.est.split_fraction;
            pipe.pi_smoothness = cfg.alpha;
            pipe.outcome_smoothness = cfg.beta;
            pipe.pi_bandwidth = cfg.est.pi_bandwidth;
            pipe.outcome_bandwidth = cfg.est.outcome_bandwidth;
            if (!pipe.pi_bandwidth)
                pipe.pi_bandwidth = cfg.est.nuisance_bw_scale *
                                    std::pow(static_cast<double>(train.n()),
                                             -1.0 / (2.0 * cfg.alpha + cfg.d));
            if (!pipe.outcome_bandwidth)
                pipe.outcome_bandwidth = cfg.est.nuisance_bw_scale *
                                         std::pow(static_cast<double>(train.n()),
                                                  -1.0 / (2.0 * cfg.beta + cfg.d));
            pipe.f_mode = CovariateMode::Known;
            pipe.f_known = truth.f_star;
            nuis = fit_nuisances(train, pipe, setup.est);
        }
        FitResult fit = estimate_cate(est_split, nuis, setup.est);
        rec.tau_hat = fit.tau_hat;
        rec.abs_error = std::abs(fit.tau_hat - rec.tau_true);
        if (cfg.est.also_first_order_only) {
            EstimatorConfig first_cfg = setup.est;
            first_cfg.second_basis.reset();
            FitResult fit1 = estimate_cate(est_split, nuis, first_cfg);
            rec.tau_hat_first = fit1.tau_hat;
            rec.abs_error_first = std::abs(fit1.tau_hat - rec.tau_true);
            rec.has_first = true;
        }
    } catch (const NumericalGuardError& e) {
        rec.flagged = true;
        rec.message = e.what();
    }
    return rec;
}

SlopeFit fit_slope(const std::vector<double>& log_n, const std::vector<double>& log_mae) {
    if (log_n.size() != log_mae.size() || log_n.size() < 3)
        throw ConfigError("fit_slope: need at least 3 aggregate points");
    const int m = static_cast<int>(log_n.size());
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < m; ++i) {
        mx += log_n[i];
        my += log_mae[i];
    }
    mx /= m;
    my /= m;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < m; ++i) {
        sxx += (log_n[i] - mx) * (log_n[i] - mx);
        sxy += (log_n[i] - mx) * (log_mae[i] - my);
    }
    if (!(sxx > 0.0)) throw ConfigError("fit_slope: degenerate abscissae");
    SlopeFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double rss = 0.0;
    for (int i = 0; i < m; ++i) {
        double r = log_mae[i] - (out.intercept + out.slope * log_n[i]);
        rss += r * r;
    }
    out.stderr_ = (m > 2) ? std::sqrt(rss / (m - 2) / sxx) : 0.0;
    return out;
}

RateReport run_rate_sweep(const ExperimentConfig& cfg, int workers) {
    cfg.validate();
    if (workers < 1) workers = 1;
    RateReport report;
    report.config = cfg;
    const int per_n = cfg.replications;
    const int cells = static_cast<int>(cfg.n_grid.size()) * per_n;
    report.rows.resize(cells);
    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            int cell = next.fetch_add(1);
            if (cell >= cells) return;
            long long n = cfg.n_grid[cell / per_n];
            int rep = cell % per_n;
            report.rows[static_cast<std::size_t>(cell)] = run_replication(cfg, n, rep);
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }
    // aggregates in grid order; flagged rows carry no error values
    std::vector<double> lx, ly, ly1;
    for (std::size_t g = 0; g < cfg.n_grid.size(); ++g) {
        AggregateRow ag;
        ag.n = cfg.n_grid[g];
        double s = 0.0, s1 = 0.0;
        std::vector<double> errs, errs1;
        for (int r = 0; r < per_n; ++r) {
            const ReplicationRecord& rec = report.rows[g * per_n + r];
            if (rec.flagged) {
                ++ag.flagged_count;
                continue;
            }
            ++ag.ok_count;
            s += rec.abs_error;
            errs.push_back(rec.abs_error);
            if (rec.has_first) {
                s1 += rec.abs_error_first;
                errs1.push_back(rec.abs_error_first);
            }
        }
        if (ag.ok_count > 0) {
            ag.mae = s / ag.ok_count;
            double var = 0.0;
            for (double e : errs) var += (e - ag.mae) * (e - ag.mae);
            ag.se = ag.ok_count > 1 ? std::sqrt(var / (ag.ok_count - 1) / ag.ok_count) : 0.0;
            if (!errs1.empty()) {
                ag.mae_first = s1 / static_cast<double>(errs1.size());
                double var1 = 0.0;
                for (double e : errs1) var1 += (e - ag.mae_first) * (e - ag.mae_first);
                ag.se_first = errs1.size() > 1
                                  ? std::sqrt(var1 / (errs1.size() - 1) / errs1.size())
                                  : 0.0;
            }
            if (ag.mae > 0.0) {
                lx.push_back(std::log(static_cast<double>(ag.n)));
                ly.push_back(std::log(ag.mae));
                if (!errs1.empty() && ag.mae_first > 0.0) ly1.push_back(std::log(ag.mae_first));
            }
        }
        report.aggregates.push_back(ag);
    }
    report.theoretical = minimax_exponent(cfg.alpha, cfg.beta, cfg.gamma, cfg.d, cfg.est.par);
    if (lx.size() >= 3) {
        report.slope = fit_slope(lx, ly);
        if (ly1.size() == lx.size()) report.slope_first = fit_slope(lx, ly1);
        double gap = std::abs(report.slope.slope - (-report.theoretical.exponent));
        report.band_verdict = gap <= cfg.slope_band ? "pass"
                              : gap <= 2.0 * cfg.slope_band ? "warn"
                                                            : "fail";
    } else {
        report.band_verdict = "insufficient";
    }
    return report;
}

}  // namespace cate
