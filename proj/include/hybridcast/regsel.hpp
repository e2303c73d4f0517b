#pragma once

// Linear-model feature screening: OLS, ridge, LASSO and SCAD estimators,
// their diagnostics, and the per-feature selection reports that decide which
// indicators reach the neural forecaster.

#include "hybridcast/numcore.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace hybridcast::regsel {

enum class PenaltyKind { none, ridge, lasso, scad };

std::string to_string(PenaltyKind kind);
PenaltyKind penalty_kind_from_string(const std::string& s);

inline constexpr double kDefaultScadA = 3.7;

struct PenaltySpec {
    PenaltyKind kind = PenaltyKind::none;
    double lambda = 0.0;
    double a = kDefaultScadA;  // SCAD shape; ignored for other kinds

    // Throws ParameterError on lambda < 0 or (scad and a <= 2).
    void validate() const;
};

struct RegressionFit {
    VectorXd beta;      // slope coefficients, on the scale of the fitted design
    double beta0 = 0.0; // unpenalized intercept
    PenaltySpec penalty;
    double sigma2_hat = 0.0;
    VectorXd gram_eigenvalues;  // of X'X (centered when an intercept is fitted)
    std::vector<Index> support;
    bool converged = true;
    int iterations = 0;

    // Standard errors of beta for ols/ridge (empty for lasso/scad).
    VectorXd std_errors;
    Index dof = 0;

    // Column scales dividing beta back to original units (empty = unit scale).
    VectorXd x_scale;

    // Objective after each coordinate-descent sweep (lasso/scad).
    std::vector<double> objective_trace;
    bool objective_monotone = true;
};

// Least squares. With `intercept` the design is centered and beta0 recovered
// from the means. Throws SingularMatrixError for rank-deficient designs.
RegressionFit ols_fit(const MatrixXd& x, const VectorXd& y, bool intercept = true);

// Closed-form ridge, beta = (X'X + lambda I)^{-1} X'y on centered data with an
// unpenalized intercept (or on raw data when `intercept` is false).
RegressionFit ridge_fit(const MatrixXd& x, const VectorXd& y, double lambda,
                        bool intercept = true);

// sigma^2 * sum(1 / eig(X'X)). Throws IllConditionedError when an eigenvalue
// is <= 1e-12.
double estimator_mse_diagnostic(const RegressionFit& fit);

double soft_threshold(double z, double lambda);
double scad_penalty(double beta_abs, double lambda, double a);
double scad_penalty_derivative(double beta_abs, double lambda, double a);

// Univariate SCAD estimate for a unit-curvature quadratic. The small-|z|
// branch uses the positive part, sign(z) * (|z| - lambda)_+, so the map is
// continuous at |z| = 2 lambda.
double scad_threshold(double z, double lambda, double a);

struct CoordinateDescentOptions {
    double tol = 1e-8;
    int max_iter = 10000;
    // Starting coefficients; empty means zeros (lasso) or the lasso solution at
    // the same lambda (scad).
    VectorXd warm_start;
};

// Minimizes (1/2n)||y - X beta||^2 + sum_j p(|beta_j|) by cyclic coordinate
// descent. Expects standardized columns and a centered response; no
// intercept is fitted.
RegressionFit penalized_fit(const MatrixXd& x, const VectorXd& y, const PenaltySpec& penalty,
                            const CoordinateDescentOptions& options = {});

double penalized_objective(const MatrixXd& x, const VectorXd& y, const VectorXd& beta,
                           const PenaltySpec& penalty);

// max_j |x_j' y| / n: the smallest lambda that zeroes every lasso coefficient.
double lambda_max(const MatrixXd& x, const VectorXd& y);

// `points` log-spaced values from lambda_max down to ratio * lambda_max.
std::vector<double> lambda_grid(double lambda_max, int points = 20, double ratio = 1e-3);

struct LambdaSearch {
    std::vector<double> grid;
    std::vector<double> validation_mse;
    double best_lambda = 0.0;
};

// Scores every grid lambda by MSE on the trailing `validation_fraction` of
// rows after fitting on the leading rows (chronological holdout).
// The ridge grid is n * 10^[-3, 1]; lasso/scad use lambda_grid(lambda_max).
LambdaSearch search_lambda(const MatrixXd& x, const VectorXd& y, PenaltyKind kind,
                           double a = kDefaultScadA, int points = 20,
                           double validation_fraction = 0.1);

// Column-standardized copy of a design (population sd) plus the centered
// response, as required by penalized_fit.
struct StandardizedDesign {
    MatrixXd x;
    VectorXd y;
    VectorXd x_mean;
    VectorXd x_sd;
    double y_mean = 0.0;
};

StandardizedDesign standardize_design(const MatrixXd& x, const VectorXd& y);

struct SelectionRow {
    std::string name;
    double coef = 0.0;
    std::optional<double> t_stat;
    std::optional<double> p_value;
    bool selected = false;
};

struct SelectionReport {
    std::vector<SelectionRow> rows;
    PenaltySpec penalty;
    std::string dataset_label;
    bool approximate_p_values = false;

    std::vector<std::string> selected_names() const;
    std::vector<std::string> all_names() const;
    Index selected_count() const;

    nlohmann::json to_json() const;
    static SelectionReport from_json(const nlohmann::json& j);
    std::string to_csv() const;
};

// lasso/scad: selected = nonzero coefficients. ridge/none: approximate
// two-sided t-test per coefficient, selected when p < alpha.
SelectionReport select_features(const RegressionFit& fit, const std::vector<std::string>& names,
                                double alpha = 0.05);

}  // namespace hybridcast::regsel
