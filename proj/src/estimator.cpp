#include "cate/estimator.hpp"

#include <Eigen/Dense>

namespace cate {

namespace {

// Symmetric eigendecomposition with a relative floor; returns the inverse and
// eigen range or throws naming the offending eigenvalue.
void guarded_spd_inverse(const Mat& m, double floor_rel, const char* what, Mat& inv,
                         double& lam_min, double& lam_max) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    lam_min = es.eigenvalues().minCoeff();
    lam_max = es.eigenvalues().maxCoeff();
    double scale = m.trace() / m.rows();
    if (!(scale > 0.0) || lam_min < floor_rel * scale)
        throw NumericalGuardError(std::string(what) + ": smallest eigenvalue " +
                                  std::to_string(lam_min) + " under floor " +
                                  std::to_string(floor_rel * std::max(scale, 0.0)) +
                                  " (size " + std::to_string(m.rows()) + ")");
    inv = es.eigenvectors() * es.eigenvalues().cwiseInverse().asDiagonal() *
          es.eigenvectors().transpose();
}

}  // namespace

OmegaHat omega_hat(const StretchedDistribution& f_star, const BasisSet& basis,
                   double eigen_floor) {
    const int k = basis.size();
    if (k < 1) throw ConfigError("omega_hat: basis size must be >= 1");
    if (f_star.dim() != basis.dim()) throw ConfigError("omega_hat: dimension mismatch");
    Mat omega = Mat::Zero(k, k);
    int nodes = basis.piece_degree() + 1;
    Vec b;
    for (std::size_t i = 0; i < f_star.pieces.size(); ++i) {
        if (f_star.density[i] == 0.0) continue;
        for (const Box& bp : basis.pieces()) {
            Box cut;
            if (!intersect(f_star.pieces[i], bp, cut)) continue;
            for_each_tensor_node(cut, nodes, [&](const Vec& v, double w) {
                basis.eval(v, b);
                omega.noalias() += (f_star.density[i] * w) * (b * b.transpose());
            });
        }
    }
    omega *= f_star.window_mass;
    OmegaHat out;
    out.omega = omega;
    guarded_spd_inverse(omega, eigen_floor, "omega_hat", out.inverse, out.min_eigen,
                        out.max_eigen);
    return out;
}

FirstOrderTerms assemble_first_order(const Dataset& est, const NuisanceFit& nuis,
                                     const EstimatorConfig& cfg) {
    const int d = cfg.frame.dim();
    if (est.dim() != d) throw ConfigError("assemble_first_order: dimension mismatch");
    TensorBasisSpec rho(d, cfg.rho_degree());
    FirstOrderTerms out;
    out.q1 = Mat::Zero(rho.size(), rho.size());
    out.r1 = Vec::Zero(rho.size());
    Vec r;
    const double c = std::pow(cfg.frame.h, -d);
    for (int i = 0; i < est.n(); ++i) {
        Vec xi = est.x.row(i).transpose();
        if (!cfg.frame.in_window(xi)) continue;
        ++out.window_count;
        eval_tensor_basis(rho, cfg.frame.stretch(xi), r);
        double pi_hat = nuis.pi(xi);
        double u = est.a[i] - pi_hat;
        double phi_a1 = (cfg.par == Parametrization::Mu0) ? est.a[i] * u : u * u;
        double phi_y1 = (est.y[i] - nuis.outcome(xi)) * u;
        out.q1.noalias() += (c * phi_a1) * (r * r.transpose());
        out.r1.noalias() += (c * phi_y1) * r;
    }
    out.q1 /= est.n();
    out.r1 /= est.n();
    return out;
}

SecondOrderTerms assemble_second_order(const Dataset& est, const NuisanceFit& nuis,
                                       const OmegaHat& omega, const EstimatorConfig& cfg) {
    const int d = cfg.frame.dim();
    if (est.n() < 2) throw ConfigError("assemble_second_order: need n >= 2");
    if (!cfg.second_basis) throw ConfigError("assemble_second_order: no second-order basis");
    const BasisSet& basis = *cfg.second_basis;
    TensorBasisSpec rho(d, cfg.rho_degree());
    const int q = rho.size(), k = basis.size();
    const double n = est.n();
    const double c = std::pow(cfg.frame.h, -d);

    // window pass: per-point pieces of the pair kernel
    std::vector<int> rows;
    for (int i = 0; i < est.n(); ++i) {
        Vec xi = est.x.row(i).transpose();
        if (cfg.frame.in_window(xi)) rows.push_back(i);
    }
    SecondOrderTerms out;
    out.q2 = Mat::Zero(q, q);
    out.r2 = Vec::Zero(q);
    out.pair_count = static_cast<long long>(rows.size()) *
                     (static_cast<long long>(rows.size()) - 1);
    if (rows.size() < 1) return out;

    const int nw = static_cast<int>(rows.size());
    Mat B(nw, k), R(nw, q);
    Vec u(nw), ta(nw), ty(nw);
    Vec bvec, rvec;
    Vec m_a = Vec::Zero(k), m_y = Vec::Zero(k);
    for (int w = 0; w < nw; ++w) {
        int i = rows[w];
        Vec xi = est.x.row(i).transpose();
        Vec v = cfg.frame.stretch(xi);
        basis.eval(v, bvec);
        eval_tensor_basis(rho, v, rvec);
        B.row(w) = bvec.transpose();
        R.row(w) = rvec.transpose();
        double pi_hat = nuis.pi(xi);
        u[w] = est.a[i] - pi_hat;
        ta[w] = (cfg.par == Parametrization::Mu0) ? est.a[i] : est.a[i] - pi_hat;
        ty[w] = est.y[i] - nuis.outcome(xi);
        m_a.noalias() += c * ta[w] * bvec;
        m_y.noalias() += c * ty[w] * bvec;
    }
    // s_a[w] = b_w^T Omega^{-1} m_a, etc.; diag[w] = b_w^T Omega^{-1} b_w
    Mat W = B * omega.inverse;          // nw x k
    Vec s_a = W * m_a, s_y = W * m_y;
    Vec diag = (W.array() * B.array()).rowwise().sum();
    Mat G = Mat::Zero(q, k);
    for (int w = 0; w < nw; ++w) {
        Vec rw = R.row(w).transpose();
        // full pair sum including i = j, then subtract the diagonal
        out.q2.noalias() -= (c * u[w] * s_a[w]) * (rw * rw.transpose());
        out.q2.noalias() += (c * c * u[w] * ta[w] * diag[w]) * (rw * rw.transpose());
        out.r2.noalias() += (c * c * u[w] * ty[w] * diag[w]) * rw;
        G.noalias() += (c * u[w]) * (rw * B.row(w));
    }
    out.r2.noalias() -= G * (omega.inverse * m_y);
    double norm = n * (n - 1.0);
    out.q2 /= norm;
    out.r2 /= norm;
    return out;
}

FitResult estimate_cate(const Dataset& est, const NuisanceFit& nuis, const EstimatorConfig& cfg) {
    const int d = cfg.frame.dim();
    TensorBasisSpec rho(d, cfg.rho_degree());
    FitResult fit;
    fit.rho_size = rho.size();
    FirstOrderTerms first = assemble_first_order(est, nuis, cfg);
    fit.q1 = first.q1;
    fit.r1 = first.r1;
    fit.window_count = first.window_count;
    if (first.window_count == 0)
        throw NumericalGuardError("estimate_cate: no estimation observations in the window");
    if (cfg.second_basis) {
        OmegaHat om = omega_hat(nuis.f_star, *cfg.second_basis, cfg.eigen_floor);
        fit.omega_min_eigen = om.min_eigen;
        fit.omega_max_eigen = om.max_eigen;
        fit.second_basis_size = cfg.second_basis->size();
        SecondOrderTerms second = assemble_second_order(est, nuis, om, cfg);
        fit.q2 = second.q2;
        fit.r2 = second.r2;
        fit.pair_count = second.pair_count;
        fit.q_hat = first.q1 + second.q2;
        fit.r_hat = first.r1 + second.r2;
    } else {
        fit.q2 = Mat::Zero(rho.size(), rho.size());
        fit.r2 = Vec::Zero(rho.size());
        fit.q_hat = first.q1;
        fit.r_hat = first.r1;
    }
    Mat q_inv;
    double lam_max = 0.0;
    guarded_spd_inverse(fit.q_hat, cfg.eigen_floor, "estimate_cate Q-hat", q_inv,
                        fit.q_min_eigen, lam_max);
    Vec rho_c = eval_tensor_basis(rho, Vec::Constant(d, 0.5));
    fit.tau_hat = rho_c.dot(q_inv * fit.r_hat);
    return fit;
}

NuisanceFit fit_nuisances(const Dataset& train, const PipelineConfig& pipe,
                          const EstimatorConfig& cfg) {
    const int d = train.dim();
    NuisanceFit nuis;
    nuis.par = cfg.par;
    int pi_deg = strict_floor(std::max(pipe.pi_smoothness, 1e-9));
    int out_deg = strict_floor(std::max(pipe.outcome_smoothness, 1e-9));
    pi_deg = std::max(pi_deg, 0);
    out_deg = std::max(out_deg, 0);
    double n_train = train.n();
    double pi_bw = pipe.pi_bandwidth.value_or(
        std::pow(n_train, -1.0 / (2.0 * pipe.pi_smoothness + d)));
    double out_bw = pipe.outcome_bandwidth.value_or(
        std::pow(n_train, -1.0 / (2.0 * pipe.outcome_smoothness + d)));
    auto pi_fit = std::make_shared<LocalPolynomialFit>(train, RegressionTarget::Propensity,
                                                       pi_deg, pi_bw);
    RegressionTarget out_target = (cfg.par == Parametrization::Mu0)
                                      ? RegressionTarget::OutcomeControl
                                      : RegressionTarget::OutcomeAll;
    auto out_fit = std::make_shared<LocalPolynomialFit>(train, out_target, out_deg, out_bw);
    nuis.pi_raw = [pi_fit](const Vec& x) { return (*pi_fit)(x); };
    nuis.outcome = [out_fit](const Vec& x) { return (*out_fit)(x); };
    nuis.pi_degree = pi_deg;
    nuis.outcome_degree = out_deg;
    nuis.pi_bandwidth = pi_bw;
    nuis.outcome_bandwidth = out_bw;
    if (pipe.f_mode == CovariateMode::Known)
        nuis.f_star = pipe.f_known.value_or(StretchedDistribution::uniform01(d));
    else
        nuis.f_star =
            fit_covariate_distribution(train, cfg.frame, pipe.histogram_cells_per_axis);
    return nuis;
}

FitResult estimate_cate_pipeline(const Dataset& data, const PipelineConfig& pipe,
                                 const EstimatorConfig& cfg) {
    SplitPlan plan = split(data.n(), pipe.split_fraction, pipe.split_seed);
    Dataset train = subset(data, plan.train);
    Dataset est = subset(data, plan.estimation);
    NuisanceFit nuis = fit_nuisances(train, pipe, cfg);
    return estimate_cate(est, nuis, cfg);
}

ProjectionOracle projection_oracle(const std::function<double(const Vec&)>& pi_true,
                                   const std::function<double(const Vec&)>& tau_true,
                                   const StretchedDistribution& f_star,
                                   const LocalizedFrame& frame, int rho_degree, int quad_order) {
    const int d = frame.dim();
    TensorBasisSpec rho(d, rho_degree);
    const int q = rho.size();
    ProjectionOracle out;
    out.q = Mat::Zero(q, q);
    out.r = Vec::Zero(q);
    Vec rv;
    auto to_x = [&](const Vec& v) {
        return (frame.x0 + frame.h * (v - Vec::Constant(d, 0.5))).eval();
    };
    for (std::size_t i = 0; i < f_star.pieces.size(); ++i) {
        if (f_star.density[i] == 0.0) continue;
        for_each_tensor_node(f_star.pieces[i], quad_order, [&](const Vec& v, double w) {
            Vec x = to_x(v);
            double p = pi_true(x);
            double weight = f_star.density[i] * w * p * (1.0 - p);
            eval_tensor_basis(rho, v, rv);
            out.q.noalias() += weight * (rv * rv.transpose());
            out.r.noalias() += (weight * tau_true(x)) * rv;
        });
    }
    out.q *= f_star.window_mass;
    out.r *= f_star.window_mass;
    Mat q_inv;
    double lam_min = 0.0, lam_max = 0.0;
    guarded_spd_inverse(out.q, 1e-12, "projection_oracle Q", q_inv, lam_min, lam_max);
    out.theta = q_inv * out.r;
    out.tau_h_x0 = eval_tensor_basis(rho, Vec::Constant(d, 0.5)).dot(out.theta);
    return out;
}

TuningChoice tuning_rule(double n, double alpha, double beta, double gamma, int d,
                         Parametrization par, double c_h, double c_k) {
    if (!(n > 1.0)) throw ConfigError("tuning_rule: n must exceed 1");
    TuningChoice out;
    out.regime = minimax_exponent(alpha, beta, gamma, d, par);
    double s = out.regime.effective_s;
    if (out.regime.label == SmoothnessRegime::LowSmoothness) {
        double e = 1.0 + d / (2.0 * gamma) + d / (4.0 * s);
        out.h = c_h * std::pow(n, -(1.0 / gamma) / e);
        double k_expo = (d / (2.0 * s) - d / gamma) / e;
        out.k = std::max(1LL, std::llround(c_k * std::pow(n, k_expo)));
    } else {
        out.h = c_h * std::pow(n, -1.0 / (2.0 * gamma + d));
        out.k = std::max(1LL, std::llround(c_k * n * std::pow(out.h, d)));
    }
    return out;
}

}  // namespace cate
