#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "cate/harness.hpp"
#include "cate/rng.hpp"

using namespace cate;

namespace {

ExperimentConfig tiny_sweep() {
    ExperimentConfig cfg;
    cfg.name = "tiny";
    cfg.d = 1;
    cfg.alpha = cfg.beta = 2.0;
    cfg.gamma = 1.0;
    cfg.smooth.tau_base = 1.0;
    cfg.smooth.tau_lin = 0.4;
    cfg.smooth.noise_sd = 0.4;
    cfg.est.use_tuning = false;
    cfg.est.fixed_h = 0.4;
    cfg.est.fixed_k = 2;
    cfg.n_grid = {256, 512, 1024};
    cfg.replications = 6;
    cfg.master_seed = 2718;
    return cfg;
}

}  // namespace

TEST_CASE("multi-scale bump field is deterministic, bounded, and rough-but-Hoelder") {
    std::uint64_t seed = 99;
    Rng rng(31337);
    double holder = 0.6;
    for (int t = 0; t < 200; ++t) {
        Vec x(1);
        x[0] = rng.uniform();
        double v1 = lacunary_bump_sum(x, holder, 9, seed);
        double v2 = lacunary_bump_sum(x, holder, 9, seed);
        CHECK(v1 == v2);
        CHECK(std::abs(v1) <= 1.0 + 1e-12);
    }
    // the field actually varies, and different seeds decorrelate it
    Vec a = Vec::Constant(1, 0.21), b = Vec::Constant(1, 0.68);
    CHECK(lacunary_bump_sum(a, holder, 9, seed) != lacunary_bump_sum(b, holder, 9, seed));
    CHECK(lacunary_bump_sum(a, holder, 9, seed) != lacunary_bump_sum(a, holder, 9, seed + 1));

    // soft Hoelder envelope: |f(x) - f(y)| <= C |x - y|^holder with a
    // moderate constant (the normalized sum has geometric per-scale weights)
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        Vec x(1), y(1);
        x[0] = rng.uniform();
        y[0] = std::min(1.0, x[0] + 1e-4 + 0.01 * rng.uniform());
        double diff = std::abs(lacunary_bump_sum(x, holder, 9, seed) -
                               lacunary_bump_sum(y, holder, 9, seed));
        worst = std::max(worst, diff / std::pow(std::abs(x[0] - y[0]), holder));
    }
    CHECK(worst < 25.0);
    // and the field is genuinely rough: much steeper than Lipschitz
    double steep = 0.0;
    for (int t = 0; t < 500; ++t) {
        Vec x(1), y(1);
        x[0] = rng.uniform();
        y[0] = std::min(1.0, x[0] + 1e-3);
        double diff = std::abs(lacunary_bump_sum(x, 0.2, 12, seed) -
                               lacunary_bump_sum(y, 0.2, 12, seed));
        steep = std::max(steep, diff / std::abs(x[0] - y[0]));
    }
    CHECK(steep > 20.0);
}

TEST_CASE("scenario truths are consistent at the center") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.smooth.tau_kink = 0.3;
    cfg.smooth.tau_amp = 0.05;
    cfg.smooth.pi_amp = 0.1;
    cfg.smooth.pi_base = 0.45;
    LocalizedFrame frame(cfg.center(), 0.4);
    ScenarioTruth truth = scenario_truth(cfg, frame, SignVector::all_plus(1));
    CHECK(truth.tau_x0 == doctest::Approx(truth.tau(cfg.center())).epsilon(1e-14));
    // pi stays a probability on the window
    Rng rng(4);
    for (int t = 0; t < 200; ++t) {
        Vec x = Vec::Constant(1, 0.3 + 0.4 * rng.uniform());
        double p = truth.pi(x);
        CHECK(p > 0.0);
        CHECK(p < 1.0);
    }
}

TEST_CASE("sampled scenarios follow the declared propensity") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.smooth.pi_base = 0.35;
    LocalizedFrame frame(cfg.center(), 0.4);
    ScenarioTruth truth = scenario_truth(cfg, frame, SignVector::all_plus(1));
    Dataset data = scenario_sample(cfg, truth, 40000, 17);
    double mean_a = data.a.mean();
    CHECK(mean_a == doctest::Approx(0.35).epsilon(0.03));
    // X uniform: window frequency matches its width
    int in_window = 0;
    for (int i = 0; i < data.n(); ++i)
        if (frame.in_window(data.point(i))) ++in_window;
    CHECK(static_cast<double>(in_window) / data.n() == doctest::Approx(0.4).epsilon(0.05));
}

TEST_CASE("replications are reproducible cell by cell") {
    ExperimentConfig cfg = tiny_sweep();
    ReplicationRecord r1 = run_replication(cfg, 512, 3);
    ReplicationRecord r2 = run_replication(cfg, 512, 3);
    CHECK(r1.tau_hat == r2.tau_hat);  // bitwise
    CHECK(r1.tau_true == r2.tau_true);
    CHECK(!r1.flagged);

    ReplicationRecord other = run_replication(cfg, 512, 4);
    CHECK(other.tau_hat != r1.tau_hat);

    // the record carries a usable error
    CHECK(r1.abs_error == doctest::Approx(std::abs(r1.tau_hat - r1.tau_true)).epsilon(1e-15));
}

TEST_CASE("construction scenarios run end to end") {
    ExperimentConfig cfg;
    cfg.name = "lb";
    cfg.kind = ScenarioKind::Construction;
    cfg.d = 1;
    cfg.alpha = cfg.beta = 0.5;
    cfg.gamma = 1.0;
    LowerBoundConfig lb;
    lb.d = 1;
    lb.alpha = lb.beta = 0.5;
    lb.gamma = 1.0;
    lb.h = 0.25;
    lb.k = 4;
    lb.eps = 0.05;
    cfg.construction = lb;
    cfg.hypothesis = Hypothesis::P;
    cfg.est.use_tuning = false;
    cfg.est.fixed_h = 0.25;
    cfg.est.fixed_k = 4;
    cfg.n_grid = {2000};
    cfg.replications = 2;
    cfg.master_seed = 5;
    cfg.validate();

    ReplicationRecord rec = run_replication(cfg, 2000, 0);
    CHECK(!rec.flagged);
    CHECK(rec.tau_true == doctest::Approx(0.25).epsilon(1e-12));  // h^gamma at the center
    CHECK(std::abs(rec.tau_hat) < 5.0);
}

TEST_CASE("slope fit recovers exact power laws") {
    std::vector<double> ln_n, ln_mae;
    for (double n : {100.0, 200.0, 400.0, 800.0, 1600.0}) {
        ln_n.push_back(std::log(n));
        ln_mae.push_back(std::log(2.0 * std::pow(n, -0.25)));
    }
    SlopeFit fit = fit_slope(ln_n, ln_mae);
    CHECK(fit.slope == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(std::log(2.0)).epsilon(1e-10));
    CHECK(fit.stderr_ < 1e-12);

    std::vector<double> flat(5, std::log(0.7));
    SlopeFit zero = fit_slope(ln_n, flat);
    CHECK(zero.slope == doctest::Approx(0.0));

    CHECK_THROWS_AS(fit_slope({1.0, 2.0}, {0.0, 0.0}), ConfigError);
    CHECK_THROWS_AS(fit_slope({1.0, 1.0, 1.0}, {0.0, 0.0, 0.0}), ConfigError);
}

TEST_CASE("rate sweep aggregates mirror the raw rows") {
    ExperimentConfig cfg = tiny_sweep();
    RateReport report = run_rate_sweep(cfg, 1);
    REQUIRE(report.aggregates.size() == 3);
    REQUIRE(report.rows.size() == 18);
    for (const AggregateRow& agg : report.aggregates) {
        double sum = 0.0;
        int count = 0;
        for (const ReplicationRecord& rec : report.rows) {
            if (rec.n != agg.n || rec.flagged) continue;
            sum += rec.abs_error;
            ++count;
        }
        REQUIRE(count == agg.ok_count);
        CHECK(agg.mae == doctest::Approx(sum / count).epsilon(1e-14));
        CHECK(agg.flagged_count == 0);
        CHECK(agg.se > 0.0);
    }
    CHECK((report.band_verdict == "pass" || report.band_verdict == "warn" ||
           report.band_verdict == "fail"));
    CHECK(report.theoretical.exponent == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("worker count never changes the report") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.est.also_first_order_only = true;
    RateReport serial = run_rate_sweep(cfg, 1);
    for (int workers : {2, 5, 16}) {
        RateReport parallel = run_rate_sweep(cfg, workers);
        REQUIRE(parallel.rows.size() == serial.rows.size());
        for (std::size_t i = 0; i < serial.rows.size(); ++i) {
            CHECK(parallel.rows[i].tau_hat == serial.rows[i].tau_hat);  // bitwise
            CHECK(parallel.rows[i].tau_hat_first == serial.rows[i].tau_hat_first);
            CHECK(parallel.rows[i].n == serial.rows[i].n);
            CHECK(parallel.rows[i].rep == serial.rows[i].rep);
        }
        CHECK(parallel.slope.slope == serial.slope.slope);
    }
}

TEST_CASE("estimation failures are flagged rows, not crashes") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.n_grid = {4, 5, 6};  // windows this small cannot support the fit
    cfg.est.fixed_h = 0.01;
    cfg.replications = 2;
    RateReport report = run_rate_sweep(cfg, 2);
    int flagged = 0;
    for (const auto& rec : report.rows)
        if (rec.flagged) {
            ++flagged;
            CHECK(!rec.message.empty());
        }
    CHECK(flagged == static_cast<int>(report.rows.size()));
    CHECK(report.band_verdict == "insufficient");
}

TEST_CASE("experiment validation rejects malformed grids") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.n_grid = {100, 100};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_grid = {2};
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.n_grid.clear();
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_sweep();
    cfg.kind = ScenarioKind::Construction;  // no construction config attached
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = tiny_sweep();
    cfg.est.fixed_h = 2.0;  // window pokes out of the unit cube
    // only detectable once the bandwidth is realized, i.e. inside a replication
    CHECK_THROWS_AS(run_replication(cfg, 256, 0), ConfigError);
}

TEST_CASE("first-order-only companion fits ride along when requested") {
    ExperimentConfig cfg = tiny_sweep();
    cfg.est.also_first_order_only = true;
    ReplicationRecord rec = run_replication(cfg, 512, 0);
    CHECK(rec.has_first);
    CHECK(rec.tau_hat_first != rec.tau_hat);  // the correction does something
    cfg.est.also_first_order_only = false;
    ReplicationRecord plain = run_replication(cfg, 512, 0);
    CHECK(!plain.has_first);
    CHECK(plain.tau_hat == rec.tau_hat);  // companion fit does not disturb the main one
}
