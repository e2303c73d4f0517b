#include "hybridcast/regsel.hpp"

#include "hybridcast/io.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace hybridcast::regsel {

namespace {

double sign(double v) { return (v > 0.0) - (v < 0.0); }

void check_design(const MatrixXd& x, const VectorXd& y, const char* who) {
    if (x.rows() != y.size()) {
        throw ShapeError(std::string(who) + ": design " + shape_string(x.rows(), x.cols()) +
                         " and response of length " + std::to_string(y.size()) + " disagree");
    }
    if (!x.allFinite() || !y.allFinite()) {
        throw DataError(std::string(who) + ": non-finite values in design or response");
    }
}

void check_scad_shape(double lambda, double a) {
    if (!(a > 2.0)) throw ParameterError("SCAD requires a > 2, got " + io::format_double(a));
    if (!(lambda >= 0.0)) throw ParameterError("lambda must be non-negative");
}

struct Centered {
    MatrixXd x;
    VectorXd y;
    VectorXd x_mean;
    double y_mean = 0.0;
};

Centered center(const MatrixXd& x, const VectorXd& y, bool intercept) {
    Centered c{x, y, VectorXd::Zero(x.cols()), 0.0};
    if (intercept) {
        c.x_mean = x.colwise().mean().transpose();
        c.y_mean = y.mean();
        c.x.rowwise() -= c.x_mean.transpose();
        c.y.array() -= c.y_mean;
    }
    return c;
}

double two_sided_p(double t, Index dof) {
    boost::math::students_t dist(static_cast<double>(dof));
    return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

// Indices whose approximate t-test rejects at the 5% level.
std::vector<Index> significant_support(const VectorXd& beta, const VectorXd& se, Index dof) {
    std::vector<Index> out;
    for (Index j = 0; j < beta.size(); ++j) {
        if (se[j] > 0.0 && two_sided_p(beta[j] / se[j], dof) < 0.05) out.push_back(j);
    }
    return out;
}

// Exact minimizer of (d/2)(b - z)^2 + scad(|b|) by comparing the stationary
// point of every branch (clipped to its interval) and the breakpoints.
double scad_coordinate(double z, double d, double lambda, double a) {
    if (std::abs(d - 1.0) <= 1e-12) return scad_threshold(z, lambda, a);
    const double m = std::abs(z);
    auto f = [&](double b) { return 0.5 * d * (b - m) * (b - m) + scad_penalty(b, lambda, a); };

    std::array<double, 6> cand{};
    std::size_t k = 0;
    cand[k++] = 0.0;
    cand[k++] = std::clamp(m - lambda / d, 0.0, lambda);
    cand[k++] = lambda;
    const double curv = d - 1.0 / (a - 1.0);
    if (curv > 0.0) {
        cand[k++] = std::clamp((d * m - a * lambda / (a - 1.0)) / curv, lambda, a * lambda);
    }
    cand[k++] = a * lambda;
    cand[k++] = std::max(m, a * lambda);

    double best = cand[0];
    double best_f = f(best);
    for (std::size_t i = 1; i < k; ++i) {
        const double fi = f(cand[i]);
        if (fi < best_f) {
            best_f = fi;
            best = cand[i];
        }
    }
    return sign(z) * best;
}

}  // namespace

std::string to_string(PenaltyKind kind) {
    switch (kind) {
        case PenaltyKind::none: return "none";
        case PenaltyKind::ridge: return "ridge";
        case PenaltyKind::lasso: return "lasso";
        case PenaltyKind::scad: return "scad";
    }
    return "none";
}

PenaltyKind penalty_kind_from_string(const std::string& s) {
    if (s == "none" || s == "ols") return PenaltyKind::none;
    if (s == "ridge" || s == "rr") return PenaltyKind::ridge;
    if (s == "lasso") return PenaltyKind::lasso;
    if (s == "scad") return PenaltyKind::scad;
    throw ParameterError("unknown penalty kind '" + s + "'");
}

void PenaltySpec::validate() const {
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("penalty lambda must be finite and non-negative");
    }
    if (kind == PenaltyKind::scad && !(a > 2.0)) {
        throw ParameterError("SCAD requires a > 2, got " + io::format_double(a));
    }
}

RegressionFit ols_fit(const MatrixXd& x, const VectorXd& y, bool intercept) {
    check_design(x, y, "ols_fit");
    const Index n = x.rows();
    const Index m = x.cols();
    const Index dof = n - m - (intercept ? 1 : 0);
    if (dof < 0) {
        throw ParameterError("ols_fit: fewer rows than parameters (n=" + std::to_string(n) +
                             ", m=" + std::to_string(m) + ")");
    }
    const Centered c = center(x, y, intercept);
    const MatrixXd gram = c.x.transpose() * c.x;

    RegressionFit fit;
    fit.penalty = {PenaltyKind::none, 0.0};
    MatrixXd gram_inv;
    try {
        fit.beta = solve_spd(gram, c.x.transpose() * c.y);
        gram_inv = solve_spd(gram, MatrixXd::Identity(m, m));
    } catch (const SingularMatrixError&) {
        throw SingularMatrixError(
            "ols_fit: X'X is singular (rank-deficient or collinear design); use ridge_fit");
    }
    fit.beta0 = intercept ? c.y_mean - c.x_mean.dot(fit.beta) : 0.0;
    const VectorXd resid = c.y - c.x * fit.beta;
    fit.dof = dof;
    fit.gram_eigenvalues = sym_eigenvalues(gram);
    // A square system interpolates the data: no residual degrees of freedom,
    // so no variance estimate and no t-tests.
    if (dof == 0) return fit;
    fit.sigma2_hat = resid.squaredNorm() / static_cast<double>(dof);
    fit.std_errors = (fit.sigma2_hat * gram_inv.diagonal().array()).max(0.0).sqrt().matrix();
    fit.support = significant_support(fit.beta, fit.std_errors, dof);
    return fit;
}

RegressionFit ridge_fit(const MatrixXd& x, const VectorXd& y, double lambda, bool intercept) {
    check_design(x, y, "ridge_fit");
    if (!(lambda > 0.0) || !std::isfinite(lambda)) {
        throw ParameterError("ridge_fit: lambda must be > 0 (use ols_fit for lambda = 0)");
    }
    const Index n = x.rows();
    const Index m = x.cols();
    const Centered c = center(x, y, intercept);
    const MatrixXd gram = c.x.transpose() * c.x;
    const MatrixXd reg = gram + lambda * MatrixXd::Identity(m, m);

    RegressionFit fit;
    fit.penalty = {PenaltyKind::ridge, lambda};
    fit.beta = solve_spd(reg, c.x.transpose() * c.y);
    fit.beta0 = intercept ? c.y_mean - c.x_mean.dot(fit.beta) : 0.0;

    const VectorXd resid = c.y - c.x * fit.beta;
    fit.dof = std::max<Index>(n - m - (intercept ? 1 : 0), 1);
    fit.sigma2_hat = resid.squaredNorm() / static_cast<double>(fit.dof);
    fit.gram_eigenvalues = sym_eigenvalues(gram);

    // Sandwich variance sigma^2 W X'X W with W = (X'X + lambda I)^{-1}.
    const MatrixXd w = solve_spd(reg, MatrixXd::Identity(m, m));
    const MatrixXd cov = fit.sigma2_hat * (w * gram * w);
    fit.std_errors = cov.diagonal().array().max(0.0).sqrt().matrix();
    fit.support = significant_support(fit.beta, fit.std_errors, fit.dof);
    return fit;
}

double estimator_mse_diagnostic(const RegressionFit& fit) {
    if (fit.gram_eigenvalues.size() == 0) {
        throw ParameterError("estimator_mse_diagnostic: fit carries no Gram eigenvalues");
    }
    if (fit.gram_eigenvalues.minCoeff() <= 1e-12) {
        throw IllConditionedError(
            "estimator_mse_diagnostic: X'X has an eigenvalue <= 1e-12; the least-squares "
            "estimator MSE is unbounded (consider ridge)");
    }
    return fit.sigma2_hat * fit.gram_eigenvalues.cwiseInverse().sum();
}

double soft_threshold(double z, double lambda) {
    return sign(z) * std::max(std::abs(z) - lambda, 0.0);
}

double scad_penalty(double beta_abs, double lambda, double a) {
    check_scad_shape(lambda, a);
    if (!(beta_abs >= 0.0)) throw ParameterError("scad_penalty: |beta| must be non-negative");
    if (beta_abs < lambda) return lambda * beta_abs;
    if (beta_abs < a * lambda) {
        return -(beta_abs * beta_abs - 2.0 * a * lambda * beta_abs + lambda * lambda) /
               (2.0 * (a - 1.0));
    }
    return (a + 1.0) * lambda * lambda / 2.0;
}

double scad_penalty_derivative(double beta_abs, double lambda, double a) {
    check_scad_shape(lambda, a);
    if (!(beta_abs >= 0.0)) {
        throw ParameterError("scad_penalty_derivative: |beta| must be non-negative");
    }
    if (beta_abs <= lambda) return lambda;
    return std::max(a * lambda - beta_abs, 0.0) / (a - 1.0);
}

double scad_threshold(double z, double lambda, double a) {
    check_scad_shape(lambda, a);
    const double m = std::abs(z);
    if (m <= 2.0 * lambda) return sign(z) * std::max(m - lambda, 0.0);
    if (m <= a * lambda) return ((a - 1.0) * z - sign(z) * a * lambda) / (a - 2.0);
    return z;
}

double penalized_objective(const MatrixXd& x, const VectorXd& y, const VectorXd& beta,
                           const PenaltySpec& penalty) {
    const double n = static_cast<double>(x.rows());
    double pen = 0.0;
    for (Index j = 0; j < beta.size(); ++j) {
        const double b = std::abs(beta[j]);
        switch (penalty.kind) {
            case PenaltyKind::lasso: pen += penalty.lambda * b; break;
            case PenaltyKind::scad: pen += scad_penalty(b, penalty.lambda, penalty.a); break;
            case PenaltyKind::ridge: pen += 0.5 * penalty.lambda * b * b; break;
            case PenaltyKind::none: break;
        }
    }
    return (y - x * beta).squaredNorm() / (2.0 * n) + pen;
}

RegressionFit penalized_fit(const MatrixXd& x, const VectorXd& y, const PenaltySpec& penalty,
                            const CoordinateDescentOptions& options) {
    check_design(x, y, "penalized_fit");
    penalty.validate();
    if (penalty.kind != PenaltyKind::lasso && penalty.kind != PenaltyKind::scad) {
        throw ParameterError("penalized_fit: penalty kind must be lasso or scad");
    }
    const Index n = x.rows();
    const Index m = x.cols();
    const double inv_n = 1.0 / static_cast<double>(n);

    VectorXd beta = VectorXd::Zero(m);
    if (options.warm_start.size() == m) {
        beta = options.warm_start;
    } else if (options.warm_start.size() != 0) {
        throw ShapeError("penalized_fit: warm start has length " +
                         std::to_string(options.warm_start.size()) + ", expected " +
                         std::to_string(m));
    } else if (penalty.kind == PenaltyKind::scad) {
        // Non-convex objective: start from the lasso solution at the same lambda.
        beta = penalized_fit(x, y, {PenaltyKind::lasso, penalty.lambda}, options).beta;
    }

    const VectorXd curvature = x.colwise().squaredNorm().transpose() * inv_n;
    VectorXd resid = y - x * beta;

    RegressionFit fit;
    fit.penalty = penalty;
    fit.converged = false;
    fit.objective_trace.push_back(penalized_objective(x, y, beta, penalty));

    for (int sweep = 1; sweep <= options.max_iter; ++sweep) {
        double max_change = 0.0;
        for (Index j = 0; j < m; ++j) {
            const double d = curvature[j];
            if (d <= 0.0) {
                beta[j] = 0.0;
                continue;
            }
            const double old = beta[j];
            const double z = x.col(j).dot(resid) * inv_n / d + old;
            const double updated = penalty.kind == PenaltyKind::lasso
                                       ? soft_threshold(z, penalty.lambda / d)
                                       : scad_coordinate(z, d, penalty.lambda, penalty.a);
            if (updated != old) {
                resid.noalias() -= (updated - old) * x.col(j);
                beta[j] = updated;
                max_change = std::max(max_change, std::abs(updated - old));
            }
        }
        double pen = 0.0;
        for (Index j = 0; j < m; ++j) {
            const double b = std::abs(beta[j]);
            pen += penalty.kind == PenaltyKind::lasso ? penalty.lambda * b
                                                      : scad_penalty(b, penalty.lambda, penalty.a);
        }
        const double obj = resid.squaredNorm() * 0.5 * inv_n + pen;
        const double prev = fit.objective_trace.back();
        if (obj > prev + 1e-12 * std::max(1.0, std::abs(prev))) fit.objective_monotone = false;
        fit.objective_trace.push_back(obj);
        fit.iterations = sweep;
        if (max_change < options.tol) {
            fit.converged = true;
            break;
        }
    }

    fit.beta = beta;
    fit.beta0 = 0.0;
    for (Index j = 0; j < m; ++j)
        if (beta[j] != 0.0) fit.support.push_back(j);
    const Index dof = n - static_cast<Index>(fit.support.size());
    fit.dof = std::max<Index>(dof, 1);
    fit.sigma2_hat = resid.squaredNorm() / static_cast<double>(fit.dof);
    return fit;
}

double lambda_max(const MatrixXd& x, const VectorXd& y) {
    check_design(x, y, "lambda_max");
    if (x.cols() == 0 || x.rows() == 0) return 0.0;
    return (x.transpose() * y).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

std::vector<double> lambda_grid(double lmax, int points, double ratio) {
    if (points < 1) throw ParameterError("lambda_grid: need at least one point");
    if (!(lmax > 0.0) || !(ratio > 0.0 && ratio <= 1.0)) {
        throw ParameterError("lambda_grid: lambda_max must be > 0 and ratio in (0, 1]");
    }
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double lo = std::log(ratio);
    for (int k = 0; k < points; ++k) {
        const double frac = points == 1 ? 0.0 : static_cast<double>(k) / (points - 1);
        grid[static_cast<std::size_t>(k)] = lmax * std::exp(frac * lo);
    }
    return grid;
}

StandardizedDesign standardize_design(const MatrixXd& x, const VectorXd& y) {
    check_design(x, y, "standardize_design");
    StandardizedDesign s;
    s.x_mean = x.colwise().mean().transpose();
    s.x = x.rowwise() - s.x_mean.transpose();
    s.x_sd = (s.x.colwise().squaredNorm().transpose() / static_cast<double>(x.rows()))
                 .array()
                 .sqrt()
                 .matrix();
    for (Index j = 0; j < x.cols(); ++j) {
        if (!(s.x_sd[j] > 0.0)) {
            throw DataError("standardize_design: column " + std::to_string(j) + " is constant");
        }
    }
    s.x = s.x * s.x_sd.cwiseInverse().asDiagonal();
    s.y_mean = y.mean();
    s.y = y.array() - s.y_mean;
    return s;
}

LambdaSearch search_lambda(const MatrixXd& x, const VectorXd& y, PenaltyKind kind, double a,
                           int points, double validation_fraction) {
    check_design(x, y, "search_lambda");
    if (kind == PenaltyKind::none) throw ParameterError("search_lambda: no penalty to tune");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ParameterError("search_lambda: validation fraction must lie in (0, 1)");
    }
    const Index n = x.rows();
    const Index n_val = std::max<Index>(
        1, static_cast<Index>(std::floor(static_cast<double>(n) * validation_fraction)));
    const Index n_fit = n - n_val;
    if (n_fit <= x.cols() + 1) throw DataError("search_lambda: too few rows for a holdout");

    const StandardizedDesign fit_part =
        standardize_design(x.topRows(n_fit), y.head(n_fit));
    const MatrixXd x_val =
        (x.bottomRows(n_val).rowwise() - fit_part.x_mean.transpose()) *
        fit_part.x_sd.cwiseInverse().asDiagonal();
    const VectorXd y_val = y.tail(n_val);

    LambdaSearch out;
    auto score = [&](const VectorXd& beta, double intercept) {
        return (y_val - (x_val * beta).array().matrix() -
                VectorXd::Constant(n_val, intercept))
                   .squaredNorm() /
               static_cast<double>(n_val);
    };

    if (kind == PenaltyKind::ridge) {
        // Per-observation strengths, rescaled by the row count of each fit.
        const std::vector<double> per_row = lambda_grid(10.0, points, 1e-4);
        double best = std::numeric_limits<double>::infinity();
        for (double g : per_row) {
            const RegressionFit f =
                ridge_fit(fit_part.x, fit_part.y, g * static_cast<double>(n_fit), false);
            const double mse = score(f.beta, fit_part.y_mean);
            out.grid.push_back(g * static_cast<double>(n));
            out.validation_mse.push_back(mse);
            if (mse < best) {
                best = mse;
                out.best_lambda = out.grid.back();
            }
        }
        return out;
    }

    const double lmax = lambda_max(fit_part.x, fit_part.y);
    if (!(lmax > 0.0)) throw DataError("search_lambda: response is uncorrelated with every column");
    out.grid = lambda_grid(lmax, points);
    double best = std::numeric_limits<double>::infinity();
    VectorXd lasso_warm = VectorXd::Zero(x.cols());
    for (double lam : out.grid) {
        CoordinateDescentOptions opts;
        opts.warm_start = lasso_warm;
        const RegressionFit lasso =
            penalized_fit(fit_part.x, fit_part.y, {PenaltyKind::lasso, lam}, opts);
        lasso_warm = lasso.beta;
        VectorXd beta = lasso.beta;
        if (kind == PenaltyKind::scad) {
            CoordinateDescentOptions sopts;
            sopts.warm_start = lasso.beta;
            beta = penalized_fit(fit_part.x, fit_part.y, {PenaltyKind::scad, lam, a}, sopts).beta;
        }
        const double mse = score(beta, fit_part.y_mean);
        out.validation_mse.push_back(mse);
        if (mse < best) {
            best = mse;
            out.best_lambda = lam;
        }
    }
    return out;
}

std::vector<std::string> SelectionReport::selected_names() const {
    std::vector<std::string> out;
    for (const auto& r : rows)
        if (r.selected) out.push_back(r.name);
    return out;
}

std::vector<std::string> SelectionReport::all_names() const {
    std::vector<std::string> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.name);
    return out;
}

Index SelectionReport::selected_count() const {
    return static_cast<Index>(selected_names().size());
}

nlohmann::json SelectionReport::to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset_label;
    j["penalty"] = {{"kind", to_string(penalty.kind)}, {"lambda", penalty.lambda}, {"a", penalty.a}};
    j["approximate_p_values"] = approximate_p_values;
    j["selected_count"] = selected_count();
    j["feature_count"] = rows.size();
    auto& feats = j["features"] = nlohmann::json::array();
    for (const auto& r : rows) {
        nlohmann::json row{{"name", r.name}, {"coef", r.coef}, {"selected", r.selected}};
        row["t"] = r.t_stat ? nlohmann::json(*r.t_stat) : nlohmann::json(nullptr);
        row["p"] = r.p_value ? nlohmann::json(*r.p_value) : nlohmann::json(nullptr);
        feats.push_back(std::move(row));
    }
    return j;
}

SelectionReport SelectionReport::from_json(const nlohmann::json& j) {
    try {
        SelectionReport r;
        r.dataset_label = j.at("dataset").get<std::string>();
        const auto& p = j.at("penalty");
        r.penalty.kind = penalty_kind_from_string(p.at("kind").get<std::string>());
        r.penalty.lambda = p.at("lambda").get<double>();
        r.penalty.a = p.value("a", kDefaultScadA);
        r.approximate_p_values = j.value("approximate_p_values", false);
        for (const auto& f : j.at("features")) {
            SelectionRow row;
            row.name = f.at("name").get<std::string>();
            row.coef = f.at("coef").get<double>();
            row.selected = f.at("selected").get<bool>();
            if (f.contains("t") && !f["t"].is_null()) row.t_stat = f["t"].get<double>();
            if (f.contains("p") && !f["p"].is_null()) row.p_value = f["p"].get<double>();
            r.rows.push_back(std::move(row));
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed selection report: ") + e.what());
    }
}

std::string SelectionReport::to_csv() const {
    std::ostringstream os;
    os << "name,coef,t,p,selected\n";
    for (const auto& r : rows) {
        os << r.name << ',' << io::format_double(r.coef) << ','
           << (r.t_stat ? io::format_double(*r.t_stat) : "") << ','
           << (r.p_value ? io::format_double(*r.p_value) : "") << ','
           << (r.selected ? "true" : "false") << '\n';
    }
    return os.str();
}

SelectionReport select_features(const RegressionFit& fit, const std::vector<std::string>& names,
                                double alpha) {
    if (static_cast<Index>(names.size()) != fit.beta.size()) {
        throw ShapeError("select_features: " + std::to_string(names.size()) + " names for " +
                         std::to_string(fit.beta.size()) + " coefficients");
    }
    SelectionReport report;
    report.penalty = fit.penalty;
    switch (fit.penalty.kind) {
        case PenaltyKind::ridge: report.dataset_label = "RR/dataset-1"; break;
        case PenaltyKind::scad: report.dataset_label = "SCAD/dataset-2"; break;
        case PenaltyKind::lasso: report.dataset_label = "LASSO"; break;
        case PenaltyKind::none: report.dataset_label = "OLS"; break;
    }
    const bool sparse =
        fit.penalty.kind == PenaltyKind::lasso || fit.penalty.kind == PenaltyKind::scad;
    report.approximate_p_values = fit.penalty.kind == PenaltyKind::ridge;

    for (Index j = 0; j < fit.beta.size(); ++j) {
        SelectionRow row;
        row.name = names[static_cast<std::size_t>(j)];
        const double scale = fit.x_scale.size() == fit.beta.size() ? fit.x_scale[j] : 1.0;
        row.coef = fit.beta[j] / scale;
        if (sparse || fit.std_errors.size() != fit.beta.size()) {
            row.selected = fit.beta[j] != 0.0;
        } else {
            const double se = fit.std_errors[j];
            if (se > 0.0) {
                row.t_stat = fit.beta[j] / se;
                row.p_value = two_sided_p(*row.t_stat, std::max<Index>(fit.dof, 1));
                row.selected = *row.p_value < alpha;
            }
        }
        report.rows.push_back(std::move(row));
    }
    return report;
}

}  // namespace hybridcast::regsel
