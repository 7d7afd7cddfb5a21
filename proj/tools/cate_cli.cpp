#include <cstdio>
#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "cate/io.hpp"
#include "cate/quadrature.hpp"

namespace {

using namespace cate;

struct CheckFailure {};

int g_check_failures = 0;

void check(const char* name, bool ok, const std::string& detail = "") {
    std::printf("[%s] %s%s%s\n", ok ? "ok" : "FAIL", name, detail.empty() ? "" : ": ",
                detail.c_str());
    if (!ok) ++g_check_failures;
}

// Quick structural self-checks; the heavy verification lives in the test
// suite, this is a smoke pass for installed binaries.
void run_property_suite(std::uint64_t seed) {
    {
        TensorBasisSpec spec(2, 3);
        Mat gram = Mat::Zero(spec.size(), spec.size());
        Box box = unit_box(2);
        for_each_tensor_node(box, 24, [&](const Vec& u, double w) {
            Vec r = eval_tensor_basis(spec, u);
            gram += w * r * r.transpose();
        });
        double err = (gram - Mat::Identity(spec.size(), spec.size())).cwiseAbs().maxCoeff();
        check("polynomial basis orthonormal (d=2, degree 3)", err < 1e-10,
              "max deviation " + std::to_string(err));
    }
    {
        bool ok = flat_top_bump_scalar(0.0) == 1.0 && flat_top_bump_scalar(0.2) == 1.0 &&
                  flat_top_bump_scalar(0.36) == 0.0;
        double mid = flat_top_bump_scalar(0.3);
        ok = ok && mid > 0.0 && mid < 1.0;
        double bn = bump_l2_norm_sq(1);
        ok = ok && std::abs(bn - 0.5921414964097772) < 1e-12;
        check("flat-top bump values and L2 norm", ok);
    }
    LowerBoundConfig lb;
    lb.d = 1;
    lb.alpha = 0.5;
    lb.beta = 0.5;
    lb.gamma = 1.0;
    lb.h = 0.25;
    lb.k = 4;
    lb.eps = 0.05;
    lb.regime = Regime::Mu0AlphaGeBeta;
    {
        SupportSet sup(lb);
        SignVector lam = SignVector::prior_draw(seed);
        double total = 0.0;
        auto boxes = sup.far_boxes();
        auto cubes = sup.support_cubes();
        boxes.insert(boxes.end(), cubes.begin(), cubes.end());
        for (const Box& b : boxes)
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y)
                    for_each_tensor_node(b, 20, [&](const Vec& x, double w) {
                        total += w * eval_density(lb, lam, Hypothesis::P, x, a, y);
                    });
        check("construction density integrates to one", std::abs(total - 1.0) < 1e-6,
              "total " + std::to_string(total));
    }
    {
        // gamma = 2s makes the marginal coupling exact at h = 1/4, k = 4
        bool ok = true;
        double worst = 0.0;
        for (int i = 0; i <= 200; ++i) {
            Vec x = Vec::Constant(1, i / 200.0);
            for (int a = 0; a < 2; ++a)
                for (int y = 0; y < 2; ++y) {
                    double pb = prior_mean_density(lb, Hypothesis::P, x, a, y);
                    double qb = prior_mean_density(lb, Hypothesis::Q, x, a, y);
                    worst = std::max(worst, std::abs(pb - qb));
                }
        }
        ok = worst < 1e-12;
        check("prior-mean densities coincide under exact coupling", ok,
              "max gap " + std::to_string(worst));
    }
    {
        HellingerBound hb1 = mixture_hellinger_bound(100.0, lb);
        HellingerBound hb2 = mixture_hellinger_bound(200.0, lb);
        bool ok = hb1.bound > 0.0 && hb1.deltas.delta3 == 0.0 &&
                  std::abs(hb2.bound / hb1.bound - 4.0) < 1e-9;
        check("mixture bound scales like n^2 when the marginal term vanishes", ok);
    }
    {
        RateRegime low = minimax_exponent(0.1, 0.1, 1.0, 1, Parametrization::Mu0);
        RateRegime high = minimax_exponent(2.0, 2.0, 1.0, 1, Parametrization::Mu0);
        double eps = 1e-9;
        RateRegime a = minimax_exponent(1.0 / 6.0 - eps, 1.0 / 6.0 - eps, 1.0, 1,
                                        Parametrization::Mu0);
        RateRegime b = minimax_exponent(1.0 / 6.0 + eps, 1.0 / 6.0 + eps, 1.0, 1,
                                        Parametrization::Mu0);
        bool ok = low.label == SmoothnessRegime::LowSmoothness &&
                  high.label == SmoothnessRegime::HighSmoothness &&
                  std::abs(high.exponent - 1.0 / 3.0) < 1e-15 &&
                  std::abs(a.exponent - b.exponent) < 1e-6;
        check("rate exponent regimes and elbow continuity", ok);
    }
    {
        LocalizedFrame frame(Vec::Constant(1, 0.5), 0.25);
        auto pi = [](const Vec&) { return 0.5; };
        auto tau = [](const Vec& x) { return 1.0 + 2.0 * (x[0] - 0.5); };
        ProjectionOracle po =
            projection_oracle(pi, tau, StretchedDistribution::uniform01(1), frame, 1);
        check("projection oracle reproduces a linear effect", std::abs(po.tau_h_x0 - 1.0) < 1e-10,
              "value at the center " + std::to_string(po.tau_h_x0));
    }
    {
        Rng rng(seed ^ 0xabcdef);
        int n = 400;
        Dataset data;
        data.reserve(n, 1);
        for (int i = 0; i < n; ++i) {
            data.x(i, 0) = rng.uniform();
            data.a[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
            data.y[i] = 2.0 * data.a[i];
        }
        NuisanceFit nuis;
        nuis.pi_raw = [](const Vec&) { return 0.5; };
        nuis.outcome = [](const Vec&) { return 0.0; };
        nuis.par = Parametrization::Mu0;
        nuis.f_star = StretchedDistribution::uniform01(1);
        EstimatorConfig cfg;
        cfg.par = Parametrization::Mu0;
        cfg.frame = LocalizedFrame(Vec::Constant(1, 0.5), 0.25);
        cfg.second_basis = std::make_shared<TensorPrefixBasis>(1, 4);
        FitResult fit = estimate_cate(data, nuis, cfg);
        check("exact recovery when Y = 2A", std::abs(fit.tau_hat - 2.0) < 1e-9,
              "tau-hat " + std::to_string(fit.tau_hat));
    }
    {
        SplitPlan p1 = split(101, 0.5, seed);
        SplitPlan p2 = split(101, 0.5, seed);
        bool ok = p1.train == p2.train && p1.estimation == p2.estimation &&
                  p1.train.size() + p1.estimation.size() == 101;
        check("sample split is deterministic and exhaustive", ok);
    }
    {
        ExperimentConfig cfg;
        cfg.name = "smoke";
        cfg.d = 1;
        cfg.alpha = cfg.beta = 2.0;
        cfg.gamma = 1.0;
        cfg.smooth.tau_base = 1.0;
        cfg.smooth.tau_lin = 0.5;
        cfg.est.use_tuning = false;
        cfg.est.fixed_h = 0.5;
        cfg.est.fixed_k = 2;
        cfg.n_grid = {200, 400, 800};
        cfg.replications = 4;
        cfg.master_seed = seed;
        RateReport serial = run_rate_sweep(cfg, 1);
        RateReport parallel = run_rate_sweep(cfg, 3);
        check("rate sweep is worker-count invariant",
              to_json_string(serial) == to_json_string(parallel));
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Pointwise heterogeneous-effect estimation toolkit"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 1;
    std::vector<std::string> formats;

    app.add_option("--config", config_path, "Path to a JSON config file");
    app.add_option("--seed", seed, "Override the seed in the config")
        ->each([&](const std::string&) { seed_given = true; });
    app.add_option("--out", out_dir, "Output directory");
    app.add_option("--workers", workers, "Worker threads for sweeps")->check(CLI::PositiveNumber);
    app.add_option("--format", formats, "Report formats: csv, json, svg (repeatable)");

    auto* cmd_estimate = app.add_subcommand("estimate", "Fit tau-hat(x0) on one dataset");
    auto* cmd_sweep = app.add_subcommand("sweep", "Run a seeded Monte Carlo rate sweep");
    auto* cmd_lower = app.add_subcommand("lowerbound", "Evaluate the two-point lower-bound arithmetic");
    auto* cmd_check = app.add_subcommand("check", "Run the built-in property suite");
    for (auto* cmd : {cmd_estimate, cmd_sweep, cmd_lower, cmd_check}) cmd->fallthrough();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;  // bad flags are config errors; help/version exit clean
    }

    try {
        bool want_csv = formats.empty(), want_json = formats.empty(), want_svg = formats.empty();
        for (const std::string& f : formats) {
            if (f == "csv")
                want_csv = true;
            else if (f == "json")
                want_json = true;
            else if (f == "svg")
                want_svg = true;
            else
                throw cate::ConfigError("unknown format '" + f + "' (expected csv, json, or svg)");
        }

        if (cmd_check->parsed()) {
            run_property_suite(seed_given ? seed : 1);
            if (g_check_failures > 0) {
                std::printf("%d check(s) failed\n", g_check_failures);
                return 1;
            }
            std::printf("all checks passed\n");
            return 0;
        }

        if (config_path.empty()) throw cate::ConfigError("--config is required");
        std::string text = cate::read_text_file(config_path);

        if (cmd_estimate->parsed()) {
            cate::EstimateJob job = cate::estimate_job_from_json(text);
            if (seed_given) job.split_seed = seed;
            cate::FitResult fit = cate::run_estimate_job(job);
            std::string out = cate::to_json_string(fit);
            if (out_dir.empty()) {
                std::fputs(out.c_str(), stdout);
            } else {
                std::filesystem::create_directories(out_dir);
                cate::write_text_file(out_dir + "/estimate.json", out);
            }
            return 0;
        }

        if (cmd_sweep->parsed()) {
            cate::ExperimentConfig cfg = cate::experiment_config_from_json(text);
            if (seed_given) cfg.master_seed = seed;
            cate::RateReport report = cate::run_rate_sweep(cfg, workers);
            std::string dir = out_dir.empty() ? std::string("out") : out_dir;
            cate::emit_report(report, dir, want_csv, want_json, want_svg);
            std::printf("%s: slope %.4f (theory %.4f, %s), verdict %s\n",
                        report.config.name.c_str(), report.slope.slope,
                        -report.theoretical.exponent, cate::regime_label(report.theoretical.label),
                        report.band_verdict.c_str());
            return 0;
        }

        if (cmd_lower->parsed()) {
            cate::LowerBoundJob job = cate::lower_bound_job_from_json(text);
            std::string body = cate::lower_bound_report_json(job);
            if (out_dir.empty()) {
                std::fputs(body.c_str(), stdout);
            } else {
                std::filesystem::create_directories(out_dir);
                cate::write_text_file(out_dir + "/lowerbound.json", body);
            }
            return 0;
        }

        throw cate::ConfigError("no subcommand selected");
    } catch (const cate::NumericalGuardError& e) {
        std::fprintf(stderr, "numerical guard: %s\n", e.what());
        return 2;
    } catch (const cate::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
