#include "cate/io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace cate {

using nlohmann::json;

namespace {

json vec_to_json(const Vec& v) {
    json a = json::array();
    for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

Vec vec_from_json(const json& j) {
    Vec v(static_cast<int>(j.size()));
    int i = 0;
    for (const auto& e : j) v[i++] = e.get<double>();
    return v;
}

json mat_to_json(const Mat& m) {
    json rows = json::array();
    for (int r = 0; r < m.rows(); ++r) {
        json row = json::array();
        for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(std::move(row));
    }
    return rows;
}

const char* parametrization_name(Parametrization p) {
    return p == Parametrization::Mu0 ? "mu0" : "eta";
}

Parametrization parse_parametrization(const std::string& s) {
    if (s == "mu0") return Parametrization::Mu0;
    if (s == "eta") return Parametrization::Eta;
    throw ConfigError("unknown parametrization '" + s + "' (expected mu0 or eta)");
}

Regime parse_regime(const std::string& s) {
    for (Regime r : {Regime::Mu0AlphaGeBeta, Regime::Mu0BetaGeAlpha, Regime::EtaAlphaGeBeta,
                     Regime::EtaBetaGeAlpha})
        if (s == regime_name(r)) return r;
    throw ConfigError("unknown regime '" + s + "'");
}

const char* hypothesis_name(Hypothesis h) { return h == Hypothesis::P ? "P" : "Q"; }

Hypothesis parse_hypothesis(const std::string& s) {
    if (s == "P") return Hypothesis::P;
    if (s == "Q") return Hypothesis::Q;
    throw ConfigError("unknown hypothesis '" + s + "' (expected P or Q)");
}

const char* kind_name(ScenarioKind k) {
    return k == ScenarioKind::SmoothSynthetic ? "smooth_synthetic" : "construction";
}

ScenarioKind parse_kind(const std::string& s) {
    if (s == "smooth_synthetic") return ScenarioKind::SmoothSynthetic;
    if (s == "construction") return ScenarioKind::Construction;
    throw ConfigError("unknown scenario kind '" + s + "'");
}

json lower_bound_to_json(const LowerBoundConfig& c) {
    json j{{"d", c.d},         {"alpha", c.alpha}, {"beta", c.beta},
           {"gamma", c.gamma}, {"regime", regime_name(c.regime)},
           {"h", c.h},         {"k", c.k},         {"eps", c.eps}};
    if (c.x0.size() > 0) j["x0"] = vec_to_json(c.x0);
    return j;
}

LowerBoundConfig lower_bound_from_json(const json& j) {
    LowerBoundConfig c;
    c.d = j.value("d", c.d);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("regime")) c.regime = parse_regime(j.at("regime").get<std::string>());
    c.h = j.value("h", c.h);
    c.k = j.value("k", c.k);
    c.eps = j.value("eps", c.eps);
    if (j.contains("x0")) c.x0 = vec_from_json(j.at("x0"));
    return c;
}

json smooth_to_json(const SmoothScenario& s) {
    return json{{"pi_base", s.pi_base},       {"pi_lin", s.pi_lin},
                {"pi_amp", s.pi_amp},         {"pi_holder", s.pi_holder},
                {"mu_base", s.mu_base},       {"mu_lin", s.mu_lin},
                {"mu_amp", s.mu_amp},         {"mu_holder", s.mu_holder},
                {"tau_base", s.tau_base},     {"tau_lin", s.tau_lin},
                {"tau_kink", s.tau_kink},     {"tau_amp", s.tau_amp},
                {"tau_holder", s.tau_holder}, {"scales", s.scales},
                {"shape_seed", s.shape_seed}, {"noise_sd", s.noise_sd}};
}

SmoothScenario smooth_from_json(const json& j) {
    SmoothScenario s;
    s.pi_base = j.value("pi_base", s.pi_base);
    s.pi_lin = j.value("pi_lin", s.pi_lin);
    s.pi_amp = j.value("pi_amp", s.pi_amp);
    s.pi_holder = j.value("pi_holder", s.pi_holder);
    s.mu_base = j.value("mu_base", s.mu_base);
    s.mu_lin = j.value("mu_lin", s.mu_lin);
    s.mu_amp = j.value("mu_amp", s.mu_amp);
    s.mu_holder = j.value("mu_holder", s.mu_holder);
    s.tau_base = j.value("tau_base", s.tau_base);
    s.tau_lin = j.value("tau_lin", s.tau_lin);
    s.tau_kink = j.value("tau_kink", s.tau_kink);
    s.tau_amp = j.value("tau_amp", s.tau_amp);
    s.tau_holder = j.value("tau_holder", s.tau_holder);
    s.scales = j.value("scales", s.scales);
    s.shape_seed = j.value("shape_seed", s.shape_seed);
    s.noise_sd = j.value("noise_sd", s.noise_sd);
    return s;
}

json estimator_to_json(const SweepEstimator& e) {
    json j{{"parametrization", parametrization_name(e.par)},
           {"use_tuning", e.use_tuning},
           {"c_h", e.c_h},
           {"c_k", e.c_k},
           {"fixed_h", e.fixed_h},
           {"fixed_k", e.fixed_k},
           {"second_order", e.second_order},
           {"also_first_order_only", e.also_first_order_only},
           {"eigen_floor", e.eigen_floor},
           {"rho_degree_override", e.rho_degree_override},
           {"known_nuisances", e.known_nuisances},
           {"split_fraction", e.split_fraction},
           {"nuisance_bw_scale", e.nuisance_bw_scale}};
    if (e.pi_bandwidth) j["pi_bandwidth"] = *e.pi_bandwidth;
    if (e.outcome_bandwidth) j["outcome_bandwidth"] = *e.outcome_bandwidth;
    return j;
}

SweepEstimator estimator_from_json(const json& j) {
    SweepEstimator e;
    if (j.contains("parametrization"))
        e.par = parse_parametrization(j.at("parametrization").get<std::string>());
    e.use_tuning = j.value("use_tuning", e.use_tuning);
    e.c_h = j.value("c_h", e.c_h);
    e.c_k = j.value("c_k", e.c_k);
    e.fixed_h = j.value("fixed_h", e.fixed_h);
    e.fixed_k = j.value("fixed_k", e.fixed_k);
    e.second_order = j.value("second_order", e.second_order);
    e.also_first_order_only = j.value("also_first_order_only", e.also_first_order_only);
    e.eigen_floor = j.value("eigen_floor", e.eigen_floor);
    e.rho_degree_override = j.value("rho_degree_override", e.rho_degree_override);
    e.known_nuisances = j.value("known_nuisances", e.known_nuisances);
    e.split_fraction = j.value("split_fraction", e.split_fraction);
    if (j.contains("pi_bandwidth")) e.pi_bandwidth = j.at("pi_bandwidth").get<double>();
    if (j.contains("outcome_bandwidth"))
        e.outcome_bandwidth = j.at("outcome_bandwidth").get<double>();
    e.nuisance_bw_scale = j.value("nuisance_bw_scale", e.nuisance_bw_scale);
    return e;
}

json experiment_to_json(const ExperimentConfig& c) {
    json j{{"name", c.name},
           {"kind", kind_name(c.kind)},
           {"d", c.d},
           {"alpha", c.alpha},
           {"beta", c.beta},
           {"gamma", c.gamma},
           {"smooth", smooth_to_json(c.smooth)},
           {"hypothesis", hypothesis_name(c.hypothesis)},
           {"estimator", estimator_to_json(c.est)},
           {"n_grid", c.n_grid},
           {"replications", c.replications},
           {"master_seed", c.master_seed},
           {"slope_band", c.slope_band}};
    if (c.x0.size() > 0) j["x0"] = vec_to_json(c.x0);
    if (c.construction) j["construction"] = lower_bound_to_json(*c.construction);
    return j;
}

ExperimentConfig experiment_from_json(const json& j) {
    ExperimentConfig c;
    c.name = j.value("name", c.name);
    if (j.contains("kind")) c.kind = parse_kind(j.at("kind").get<std::string>());
    c.d = j.value("d", c.d);
    c.alpha = j.value("alpha", c.alpha);
    c.beta = j.value("beta", c.beta);
    c.gamma = j.value("gamma", c.gamma);
    if (j.contains("x0")) c.x0 = vec_from_json(j.at("x0"));
    if (j.contains("smooth")) c.smooth = smooth_from_json(j.at("smooth"));
    if (j.contains("construction")) c.construction = lower_bound_from_json(j.at("construction"));
    if (j.contains("hypothesis")) c.hypothesis = parse_hypothesis(j.at("hypothesis").get<std::string>());
    if (j.contains("estimator")) c.est = estimator_from_json(j.at("estimator"));
    if (j.contains("n_grid")) c.n_grid = j.at("n_grid").get<std::vector<long long>>();
    c.replications = j.value("replications", c.replications);
    c.master_seed = j.value("master_seed", c.master_seed);
    c.slope_band = j.value("slope_band", c.slope_band);
    return c;
}

json slope_to_json(const SlopeFit& s) {
    return json{{"slope", s.slope}, {"stderr", s.stderr_}, {"intercept", s.intercept}};
}

SlopeFit slope_from_json(const json& j) {
    SlopeFit s;
    s.slope = j.value("slope", 0.0);
    s.stderr_ = j.value("stderr", 0.0);
    s.intercept = j.value("intercept", 0.0);
    return s;
}

json rate_regime_to_json(const RateRegime& r) {
    return json{{"exponent", r.exponent},
                {"regime", regime_label(r.label)},
                {"effective_s", r.effective_s},
                {"elbow", r.elbow}};
}

json record_to_json(const ReplicationRecord& r) {
    json j{{"n", r.n},
           {"rep", r.rep},
           {"tau_hat", r.tau_hat},
           {"tau_true", r.tau_true},
           {"abs_error", r.abs_error},
           {"flagged", r.flagged}};
    if (r.has_first) {
        j["tau_hat_first"] = r.tau_hat_first;
        j["abs_error_first"] = r.abs_error_first;
    }
    if (!r.message.empty()) j["message"] = r.message;
    return j;
}

ReplicationRecord record_from_json(const json& j) {
    ReplicationRecord r;
    r.n = j.value("n", 0LL);
    r.rep = j.value("rep", 0);
    r.tau_hat = j.value("tau_hat", 0.0);
    r.tau_true = j.value("tau_true", 0.0);
    r.abs_error = j.value("abs_error", 0.0);
    r.flagged = j.value("flagged", false);
    if (j.contains("tau_hat_first")) {
        r.has_first = true;
        r.tau_hat_first = j.at("tau_hat_first").get<double>();
        r.abs_error_first = j.value("abs_error_first", 0.0);
    }
    r.message = j.value("message", std::string());
    return r;
}

json aggregate_to_json(const AggregateRow& a) {
    return json{{"n", a.n},
                {"ok_count", a.ok_count},
                {"flagged_count", a.flagged_count},
                {"mae", a.mae},
                {"se", a.se},
                {"mae_first", a.mae_first},
                {"se_first", a.se_first}};
}

AggregateRow aggregate_from_json(const json& j) {
    AggregateRow a;
    a.n = j.value("n", 0LL);
    a.ok_count = j.value("ok_count", 0);
    a.flagged_count = j.value("flagged_count", 0);
    a.mae = j.value("mae", 0.0);
    a.se = j.value("se", 0.0);
    a.mae_first = j.value("mae_first", 0.0);
    a.se_first = j.value("se_first", 0.0);
    return a;
}

json report_to_json(const RateReport& r) {
    json rows = json::array();
    for (const auto& rec : r.rows) rows.push_back(record_to_json(rec));
    json aggs = json::array();
    for (const auto& a : r.aggregates) aggs.push_back(aggregate_to_json(a));
    json j{{"config", experiment_to_json(r.config)},
           {"rows", std::move(rows)},
           {"aggregates", std::move(aggs)},
           {"slope", slope_to_json(r.slope)},
           {"theoretical", rate_regime_to_json(r.theoretical)},
           {"band_verdict", r.band_verdict}};
    if (r.slope_first) j["slope_first"] = slope_to_json(*r.slope_first);
    return j;
}

json parse_json(const std::string& text, const char* what) {
    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ConfigError(std::string(what) + ": malformed JSON");
    return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

double csv_cell(const std::string& cell, const std::string& path) {
    try {
        std::size_t pos = 0;
        double v = std::stod(cell, &pos);
        if (pos != cell.size()) throw std::invalid_argument(cell);
        return v;
    } catch (const std::exception&) {
        throw ConfigError(path + ": cannot parse numeric cell '" + cell + "'");
    }
}

}  // namespace

void write_dataset_csv(const Dataset& data, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    for (int j = 0; j < data.dim(); ++j) out << "x_" << (j + 1) << ",";
    out << "a,y\n";
    for (int i = 0; i < data.n(); ++i) {
        for (int j = 0; j < data.dim(); ++j) out << data.x(i, j) << ",";
        out << data.a[i] << "," << data.y[i] << "\n";
    }
    write_text_file(path, out.str());
}

Dataset read_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open dataset file " + path);
    std::string line;
    if (!std::getline(in, line)) throw ConfigError(path + ": empty dataset file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::vector<std::string> header;
    {
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) header.push_back(cell);
    }
    if (header.size() < 3 || header[header.size() - 2] != "a" || header.back() != "y")
        throw ConfigError(path + ": expected header x_1,...,x_d,a,y");
    int d = static_cast<int>(header.size()) - 2;
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> vals;
        while (std::getline(ss, cell, ',')) vals.push_back(csv_cell(cell, path));
        if (static_cast<int>(vals.size()) != d + 2)
            throw ConfigError(path + ": row with " + std::to_string(vals.size()) +
                              " cells, expected " + std::to_string(d + 2));
        double a = vals[static_cast<std::size_t>(d)];
        if (a != 0.0 && a != 1.0) throw ConfigError(path + ": treatment column must be 0 or 1");
        rows.push_back(std::move(vals));
    }
    if (rows.empty()) throw ConfigError(path + ": dataset has no rows");
    Dataset data;
    data.reserve(static_cast<int>(rows.size()), d);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (int j = 0; j < d; ++j) data.x(static_cast<int>(i), j) = rows[i][static_cast<std::size_t>(j)];
        data.a[static_cast<int>(i)] = rows[i][static_cast<std::size_t>(d)];
        data.y[static_cast<int>(i)] = rows[i][static_cast<std::size_t>(d) + 1];
    }
    return data;
}

std::string to_json_string(const LowerBoundConfig& c) { return dump(lower_bound_to_json(c)); }

LowerBoundConfig lower_bound_config_from_json(const std::string& text) {
    return lower_bound_from_json(parse_json(text, "lower-bound config"));
}

std::string to_json_string(const ExperimentConfig& c) { return dump(experiment_to_json(c)); }

ExperimentConfig experiment_config_from_json(const std::string& text) {
    json j = parse_json(text, "experiment config");
    // accept either a bare config or a full report (replay path)
    if (j.contains("config")) return experiment_from_json(j.at("config"));
    return experiment_from_json(j);
}

std::string to_json_string(const FitResult& fit) {
    json j{{"tau_hat", fit.tau_hat},
           {"q_hat", mat_to_json(fit.q_hat)},
           {"r_hat", vec_to_json(fit.r_hat)},
           {"q1", mat_to_json(fit.q1)},
           {"q2", mat_to_json(fit.q2)},
           {"r1", vec_to_json(fit.r1)},
           {"r2", vec_to_json(fit.r2)},
           {"window_count", fit.window_count},
           {"pair_count", fit.pair_count},
           {"q_min_eigen", fit.q_min_eigen},
           {"omega_min_eigen", fit.omega_min_eigen},
           {"omega_max_eigen", fit.omega_max_eigen},
           {"rho_size", fit.rho_size},
           {"second_basis_size", fit.second_basis_size}};
    return dump(j);
}

std::string to_json_string(const RateReport& report) { return dump(report_to_json(report)); }

RateReport rate_report_from_json(const std::string& text) {
    json j = parse_json(text, "rate report");
    RateReport r;
    r.config = experiment_from_json(j.at("config"));
    for (const auto& e : j.at("rows")) r.rows.push_back(record_from_json(e));
    for (const auto& e : j.at("aggregates")) r.aggregates.push_back(aggregate_from_json(e));
    r.slope = slope_from_json(j.at("slope"));
    if (j.contains("slope_first")) r.slope_first = slope_from_json(j.at("slope_first"));
    r.theoretical = minimax_exponent(r.config.alpha, r.config.beta, r.config.gamma, r.config.d,
                                     r.config.est.par);
    r.band_verdict = j.value("band_verdict", std::string());
    return r;
}

std::string to_json_string(const DeltaComponents& dc) {
    return dump(json{{"delta1_bound", dc.delta1_bound},
                     {"delta2_bound", dc.delta2_bound},
                     {"delta3", dc.delta3},
                     {"b_norm_sq", dc.b_norm_sq},
                     {"coupled", dc.coupled},
                     {"coupling_gap", dc.coupling_gap}});
}

std::string to_json_string(const HellingerBound& hb) {
    json j{{"bound", hb.bound},
           {"deltas", parse_json(to_json_string(hb.deltas), "deltas")},
           {"p_j_sum", hb.p_j_sum},
           {"p_j_max", hb.p_j_max},
           {"b", hb.b},
           {"lemma_constant", hb.lemma_constant},
           {"hypothesis_ok", hb.hypothesis_ok}};
    return dump(j);
}

std::string to_json_string(const RateRegime& rr) { return dump(rate_regime_to_json(rr)); }

std::string to_json_string(const CoupledParameters& cp) {
    return dump(json{{"h", cp.h},
                     {"k", cp.k},
                     {"j", cp.j},
                     {"g", cp.g},
                     {"g_real", cp.g_real},
                     {"h_real", cp.h_real},
                     {"k_real", cp.k_real},
                     {"c_star", cp.c_star},
                     {"separation", cp.separation},
                     {"s_eff", cp.s_eff}});
}

EstimateJob estimate_job_from_json(const std::string& text) {
    json j = parse_json(text, "estimate job");
    EstimateJob job;
    if (j.contains("data")) job.data_path = j.at("data").get<std::string>();
    if (j.contains("parametrization"))
        job.par = parse_parametrization(j.at("parametrization").get<std::string>());
    if (j.contains("x0")) job.x0 = vec_from_json(j.at("x0"));
    job.h = j.value("h", job.h);
    job.k = j.value("k", job.k);
    job.gamma = j.value("gamma", job.gamma);
    job.rho_degree_override = j.value("rho_degree_override", job.rho_degree_override);
    job.eigen_floor = j.value("eigen_floor", job.eigen_floor);
    job.split_fraction = j.value("split_fraction", job.split_fraction);
    job.split_seed = j.value("split_seed", job.split_seed);
    job.pi_smoothness = j.value("pi_smoothness", job.pi_smoothness);
    job.outcome_smoothness = j.value("outcome_smoothness", job.outcome_smoothness);
    if (j.contains("pi_bandwidth")) job.pi_bandwidth = j.at("pi_bandwidth").get<double>();
    if (j.contains("outcome_bandwidth"))
        job.outcome_bandwidth = j.at("outcome_bandwidth").get<double>();
    if (j.contains("covariate_mode")) {
        std::string m = j.at("covariate_mode").get<std::string>();
        if (m == "known")
            job.f_mode = CovariateMode::Known;
        else if (m == "histogram")
            job.f_mode = CovariateMode::Histogram;
        else
            throw ConfigError("unknown covariate_mode '" + m + "'");
    }
    job.histogram_cells_per_axis = j.value("histogram_cells_per_axis", job.histogram_cells_per_axis);
    if (j.contains("pi_const")) job.pi_const = j.at("pi_const").get<double>();
    if (j.contains("outcome_const")) job.outcome_const = j.at("outcome_const").get<double>();
    return job;
}

LowerBoundJob lower_bound_job_from_json(const std::string& text) {
    json j = parse_json(text, "lower-bound job");
    LowerBoundJob job;
    job.config = lower_bound_from_json(j);
    job.n = j.value("n", job.n);
    if (!(job.n > 0.0)) throw ConfigError("lower-bound job: n must be positive");
    job.lemma_constant = j.value("lemma_constant", job.lemma_constant);
    if (j.contains("c_star")) job.c_star_override = j.at("c_star").get<double>();
    return job;
}

std::string lower_bound_report_json(const LowerBoundJob& job) {
    const LowerBoundConfig& c = job.config;
    c.validate();
    json out;
    out["config"] = lower_bound_to_json(c);
    out["n"] = job.n;
    HellingerBound hb = mixture_hellinger_bound(job.n, c, job.lemma_constant);
    out["deltas"] = parse_json(to_json_string(hb.deltas), "deltas");
    out["hellinger"] = parse_json(to_json_string(hb), "hellinger");
    RateRegime rr = minimax_exponent(c.alpha, c.beta, c.gamma, c.d, parametrization_of(c.regime));
    out["rate"] = parse_json(to_json_string(rr), "rate");
    try {
        CoupledParameters cp = couple_parameters(job.n, c.d, c.alpha, c.beta, c.gamma, c.regime,
                                                 c.eps, job.lemma_constant, job.c_star_override);
        out["coupling"] = parse_json(to_json_string(cp), "coupling");
    } catch (const ConfigError& e) {
        out["coupling_error"] = e.what();
    }
    return dump(out);
}

FitResult run_estimate_job(const EstimateJob& job) {
    if (job.data_path.empty()) throw ConfigError("estimate job: missing \"data\" path");
    Dataset data = read_dataset_csv(job.data_path);
    int d = data.dim();
    Vec x0 = job.x0.size() == d ? job.x0 : Vec::Constant(d, 0.5);
    if (job.x0.size() > 0 && job.x0.size() != d)
        throw ConfigError("estimate job: x0 has dimension " + std::to_string(job.x0.size()) +
                          " but the dataset has d = " + std::to_string(d));
    EstimatorConfig cfg;
    cfg.par = job.par;
    cfg.frame = LocalizedFrame(x0, job.h);
    cfg.gamma = job.gamma;
    cfg.rho_degree_override = job.rho_degree_override;
    cfg.eigen_floor = job.eigen_floor;
    if (job.k > 0) cfg.second_basis = std::make_shared<TensorPrefixBasis>(d, job.k);
    if (job.pi_const || job.outcome_const) {
        if (!(job.pi_const && job.outcome_const))
            throw ConfigError("estimate job: pi_const and outcome_const must be given together");
        NuisanceFit nuis;
        double pc = *job.pi_const, oc = *job.outcome_const;
        nuis.pi_raw = [pc](const Vec&) { return pc; };
        nuis.outcome = [oc](const Vec&) { return oc; };
        nuis.par = job.par;
        nuis.f_star = StretchedDistribution::uniform01(d);
        return estimate_cate(data, nuis, cfg);
    }
    PipelineConfig pipe;
    pipe.split_fraction = job.split_fraction;
    pipe.split_seed = job.split_seed;
    pipe.pi_smoothness = job.pi_smoothness;
    pipe.outcome_smoothness = job.outcome_smoothness;
    pipe.pi_bandwidth = job.pi_bandwidth;
    pipe.outcome_bandwidth = job.outcome_bandwidth;
    pipe.f_mode = job.f_mode;
    pipe.histogram_cells_per_axis = job.histogram_cells_per_axis;
    return estimate_cate_pipeline(data, pipe, cfg);
}

namespace {

void write_rows_csv(const RateReport& r, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "n,rep,tau_hat,tau_true,abs_error,tau_hat_first,abs_error_first,flagged,message\n";
    for (const auto& rec : r.rows) {
        out << rec.n << "," << rec.rep << "," << rec.tau_hat << "," << rec.tau_true << ","
            << rec.abs_error << ",";
        if (rec.has_first)
            out << rec.tau_hat_first << "," << rec.abs_error_first;
        else
            out << ",";
        out << "," << (rec.flagged ? 1 : 0) << "," << rec.message << "\n";
    }
    write_text_file(path, out.str());
}

void write_aggregates_csv(const RateReport& r, const std::string& path) {
    std::ostringstream out;
    out.precision(17);
    out << "n,ok_count,flagged_count,mae,se,mae_first,se_first\n";
    for (const auto& a : r.aggregates)
        out << a.n << "," << a.ok_count << "," << a.flagged_count << "," << a.mae << "," << a.se
            << "," << a.mae_first << "," << a.se_first << "\n";
    write_text_file(path, out.str());
}

// Minimal hand-rolled log-log SVG: MAE points joined by a polyline, the OLS
// fit, and one dashed reference line with the theoretical slope (class
// "reference-line" so reports are greppable).
void write_svg(const RateReport& r, const std::string& path) {
    std::vector<double> lx, ly;
    for (const auto& a : r.aggregates)
        if (a.ok_count > 0 && a.mae > 0.0) {
            lx.push_back(std::log10(static_cast<double>(a.n)));
            ly.push_back(std::log10(a.mae));
        }
    const double wpx = 640.0, hpx = 480.0, m = 60.0;
    std::ostringstream out;
    out.precision(6);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << wpx << "\" height=\"" << hpx
        << "\" viewBox=\"0 0 " << wpx << " " << hpx << "\">\n";
    out << "<rect width=\"" << wpx << "\" height=\"" << hpx << "\" fill=\"white\"/>\n";
    if (lx.size() >= 2) {
        double x0 = lx.front(), x1 = lx.back();
        double ylo = *std::min_element(ly.begin(), ly.end());
        double yhi = *std::max_element(ly.begin(), ly.end());
        if (yhi - ylo < 1e-9) {
            ylo -= 0.5;
            yhi += 0.5;
        }
        auto X = [&](double v) { return m + (v - x0) / (x1 - x0) * (wpx - 2 * m); };
        auto Y = [&](double v) { return hpx - m - (v - ylo) / (yhi - ylo) * (hpx - 2 * m); };
        out << "<line x1=\"" << m << "\" y1=\"" << hpx - m << "\" x2=\"" << wpx - m << "\" y2=\""
            << hpx - m << "\" stroke=\"black\"/>\n";
        out << "<line x1=\"" << m << "\" y1=\"" << m << "\" x2=\"" << m << "\" y2=\"" << hpx - m
            << "\" stroke=\"black\"/>\n";
        out << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
        for (std::size_t i = 0; i < lx.size(); ++i) out << X(lx[i]) << "," << Y(ly[i]) << " ";
        out << "\"/>\n";
        for (std::size_t i = 0; i < lx.size(); ++i)
            out << "<circle cx=\"" << X(lx[i]) << "\" cy=\"" << Y(ly[i])
                << "\" r=\"4\" fill=\"steelblue\"/>\n";
        // OLS fit, anchored at the first point (log10 slope equals the ln slope)
        double s = r.slope.slope;
        double b = ly.front() - s * lx.front();
        out << "<line x1=\"" << X(x0) << "\" y1=\"" << Y(b + s * x0) << "\" x2=\"" << X(x1)
            << "\" y2=\"" << Y(b + s * x1)
            << "\" stroke=\"firebrick\" stroke-width=\"1.5\"/>\n";
        double st = -r.theoretical.exponent;
        double bt = ly.front() - st * lx.front();
        out << "<line class=\"reference-line\" x1=\"" << X(x0) << "\" y1=\"" << Y(bt + st * x0)
            << "\" x2=\"" << X(x1) << "\" y2=\"" << Y(bt + st * x1)
            << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
        out << "<text x=\"" << wpx / 2 << "\" y=\"" << hpx - m / 3
            << "\" text-anchor=\"middle\" font-size=\"14\">log10 n</text>\n";
        out << "<text x=\"" << m / 3 << "\" y=\"" << hpx / 2
            << "\" text-anchor=\"middle\" font-size=\"14\" transform=\"rotate(-90 " << m / 3 << " "
            << hpx / 2 << ")\">log10 MAE</text>\n";
        out << "<text x=\"" << wpx / 2 << "\" y=\"" << m / 2
            << "\" text-anchor=\"middle\" font-size=\"14\">" << r.config.name << ": slope "
            << r.slope.slope << ", reference " << -r.theoretical.exponent << "</text>\n";
    } else {
        out << "<line class=\"reference-line\" x1=\"" << m << "\" y1=\"" << hpx - m << "\" x2=\""
            << wpx - m << "\" y2=\"" << m << "\" stroke=\"gray\" stroke-dasharray=\"6 4\"/>\n";
        out << "<text x=\"" << wpx / 2 << "\" y=\"" << hpx / 2
            << "\" text-anchor=\"middle\" font-size=\"14\">insufficient data</text>\n";
    }
    out << "</svg>\n";
    write_text_file(path, out.str());
}

}  // namespace

void emit_report(const RateReport& report, const std::string& out_dir, bool csv, bool json_out,
                 bool svg) {
    std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + out_dir + ": " + ec.message());
    const std::string base = report.config.name;
    if (json_out) write_text_file((dir / (base + ".json")).string(), to_json_string(report));
    if (csv) {
        write_rows_csv(report, (dir / (base + "_rows.csv")).string());
        write_aggregates_csv(report, (dir / (base + "_aggregates.csv")).string());
    }
    if (svg) write_svg(report, (dir / (base + ".svg")).string());
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot write file " + path);
    out << text;
    if (!out) throw ConfigError("write failed for " + path);
}

}  // namespace cate
