#include "hybridcast/regsel.hpp"

#include <doctest.h>

using namespace hybridcast;
using namespace hybridcast::regsel;

namespace {

MatrixXd random_design(Rng& rng, Index n, Index m) {
    MatrixXd x(n, m);
    for (Index i = 0; i < n; ++i)
        for (Index j = 0; j < m; ++j) x(i, j) = rng.normal();
    return x;
}

VectorXd random_vector(Rng& rng, Index n) { return random_design(rng, n, 1).col(0); }

// Columns 1..m of the 8x8 Sylvester-Hadamard matrix: +-1 entries, zero
// column means, X'X = 8 I, so the columns are standardized and orthogonal.
MatrixXd hadamard_design(Index m) {
    MatrixXd h(8, 8);
    for (int i = 0; i < 8; ++i)
        for (int j = 0; j < 8; ++j) h(i, j) = (__builtin_popcount(i & j) % 2) ? -1.0 : 1.0;
    return h.middleCols(1, m);
}

constexpr double kA = 3.7;

}  // namespace

TEST_CASE("ols_fit: identity design and exact linear data") {
    VectorXd y(2);
    y << 2, 4;
    const auto id = ols_fit(MatrixXd::Identity(2, 2), y, false);
    CHECK(id.beta[0] == doctest::Approx(2.0));
    CHECK(id.beta[1] == doctest::Approx(4.0));

    Rng rng(2);
    const MatrixXd x = random_design(rng, 40, 3);
    VectorXd truth(3);
    truth << 1.5, -2.0, 0.25;
    const VectorXd yy = (x * truth).array() + 3.0;
    const auto fit = ols_fit(x, yy);
    CHECK((fit.beta - truth).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(fit.beta0 - 3.0) <= 1e-9);
    CHECK(fit.sigma2_hat >= 0.0);
}

TEST_CASE("ols_fit: residuals orthogonal to the design") {
    Rng rng(4);
    const MatrixXd x = random_design(rng, 60, 4);
    const VectorXd y = random_vector(rng, 60);
    const auto fit = ols_fit(x, y, false);
    const VectorXd resid = y - x * fit.beta;
    CHECK((x.transpose() * resid).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("ols_fit: duplicated column is singular and the message points at ridge") {
    Rng rng(6);
    MatrixXd x = random_design(rng, 30, 3);
    x.col(2) = x.col(0);
    try {
        (void)ols_fit(x, random_vector(rng, 30));
        FAIL("expected SingularMatrixError");
    } catch (const SingularMatrixError& e) {
        CHECK(std::string(e.what()).find("ridge") != std::string::npos);
    }
}

TEST_CASE("ridge_fit: identity design halves y; huge lambda shrinks to zero") {
    VectorXd y(2);
    y << 2, 4;
    const auto fit = ridge_fit(MatrixXd::Identity(2, 2), y, 1.0, false);
    CHECK(fit.beta[0] == doctest::Approx(1.0));
    CHECK(fit.beta[1] == doctest::Approx(2.0));

    Rng rng(1);
    const MatrixXd x = random_design(rng, 50, 5);
    const VectorXd yy = random_vector(rng, 50);
    CHECK(ridge_fit(x, yy, 1e9).beta.norm() < 1e-6);
    CHECK_THROWS_AS(ridge_fit(x, yy, 0.0), ParameterError);
    CHECK_THROWS_AS(ridge_fit(x, yy, -1.0), ParameterError);
}

TEST_CASE("ridge_fit: normal equations, stationarity and shrinkage order") {
    Rng rng(12);
    for (int rep = 0; rep < 100; ++rep) {
        const MatrixXd x = random_design(rng, 50, 5);
        const VectorXd y = random_vector(rng, 50);
        const double lambda = std::exp(rng.uniform(-3.0, 3.0));
        const auto fit = ridge_fit(x, y, lambda, false);
        const MatrixXd lhs = (x.transpose() * x + lambda * MatrixXd::Identity(5, 5)) * fit.beta;
        CHECK((lhs - x.transpose() * y).cwiseAbs().maxCoeff() <= 1e-8);
        CHECK((x.transpose() * (x * fit.beta - y) + lambda * fit.beta).cwiseAbs().maxCoeff() <= 1e-8);

        const double n1 = ridge_fit(x, y, 0.1).beta.norm();
        const double n2 = ridge_fit(x, y, 1.0).beta.norm();
        const double n3 = ridge_fit(x, y, 10.0).beta.norm();
        CHECK(n1 >= n2);
        CHECK(n2 >= n3);
    }
}

TEST_CASE("ridge_fit approaches ols_fit as lambda goes to zero") {
    Rng rng(13);
    for (int rep = 0; rep < 20; ++rep) {
        const MatrixXd x = random_design(rng, 50, 5);
        const VectorXd y = random_vector(rng, 50);
        const auto r = ridge_fit(x, y, 1e-8);
        const auto o = ols_fit(x, y);
        CHECK((r.beta - o.beta).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(std::abs(r.beta0 - o.beta0) <= 1e-6);
    }
}

TEST_CASE("ridge intercept is unpenalized") {
    Rng rng(14);
    const MatrixXd x = random_design(rng, 30, 2);
    const VectorXd y = (random_vector(rng, 30).array() + 100.0).matrix();
    const auto fit = ridge_fit(x, y, 1e6);
    CHECK(fit.beta.norm() < 1e-3);
    CHECK(fit.beta0 == doctest::Approx(y.mean()).epsilon(1e-4));
}

TEST_CASE("estimator_mse_diagnostic") {
    RegressionFit fit;
    fit.gram_eigenvalues = VectorXd::Ones(3);
    fit.sigma2_hat = 1.0;
    CHECK(estimator_mse_diagnostic(fit) == doctest::Approx(3.0));
    fit.sigma2_hat = 0.0;
    CHECK(estimator_mse_diagnostic(fit) == 0.0);
    fit.gram_eigenvalues << 1e-14, 1, 1;
    CHECK_THROWS_AS(estimator_mse_diagnostic(fit), IllConditionedError);

    // Orthonormal design through the fitting path: X'X = I.
    const MatrixXd q = hadamard_design(3) / std::sqrt(8.0);
    VectorXd y(8);
    y << 1, -2, 0.5, 3, -1, 0, 2, 1;
    const auto ols = ols_fit(q, y, false);
    CHECK(estimator_mse_diagnostic(ols) == doctest::Approx(3.0 * ols.sigma2_hat));
}

TEST_CASE("soft_threshold") {
    CHECK(soft_threshold(3, 1) == 2);
    CHECK(soft_threshold(-0.5, 1) == 0);
    CHECK(soft_threshold(-3, 1) == -2);
}

TEST_CASE("scad_penalty: branch values and parameter errors") {
    CHECK(scad_penalty(0.5, 1, kA) == doctest::Approx(0.5));
    CHECK(scad_penalty(1.0, 1, kA) == doctest::Approx(1.0));
    CHECK(scad_penalty(3.7, 1, kA) == doctest::Approx(2.35));
    CHECK(scad_penalty(100.0, 1, kA) == doctest::Approx(2.35));
    CHECK_THROWS_AS(scad_penalty(1.0, 1.0, 2.0), ParameterError);
    CHECK_THROWS_AS(scad_penalty_derivative(1.0, 1.0, 1.5), ParameterError);
    CHECK_THROWS_AS(scad_threshold(1.0, 1.0, 2.0), ParameterError);
}

TEST_CASE("scad_penalty is continuous at lambda and a*lambda") {
    for (double lambda : {0.3, 1.0, 2.5}) {
        for (double knot : {lambda, kA * lambda}) {
            const double below = std::nextafter(knot, 0.0);
            CHECK(std::abs(scad_penalty(knot, lambda, kA) - scad_penalty(below, lambda, kA)) <= 1e-12);
        }
        // Closed-form branch values at the knots.
        CHECK(std::abs(lambda * lambda - scad_penalty(lambda, lambda, kA)) <= 1e-12);
        CHECK(std::abs((kA + 1) * lambda * lambda / 2 - scad_penalty(kA * lambda, lambda, kA)) <= 1e-12);
    }
}

TEST_CASE("scad_penalty_derivative: examples and finite differences") {
    CHECK(scad_penalty_derivative(0.5, 1, kA) == doctest::Approx(1.0));
    CHECK(scad_penalty_derivative(2.0, 1, kA) == doctest::Approx(1.7 / 2.7));
    CHECK(scad_penalty_derivative(5.0, 1, kA) == 0.0);

    Rng rng(21);
    const double lambda = 1.0, h = 1e-6;
    int checked = 0;
    while (checked < 100) {
        const double b = rng.uniform(0.0, 5.0);
        if (std::abs(b - lambda) < 1e-3 || std::abs(b - kA * lambda) < 1e-3 || b < 1e-3) continue;
        const double fd = (scad_penalty(b + h, lambda, kA) - scad_penalty(b - h, lambda, kA)) / (2 * h);
        CHECK(std::abs(fd - scad_penalty_derivative(b, lambda, kA)) <= 1e-6);
        ++checked;
    }
}

TEST_CASE("scad_threshold: branch examples") {
    CHECK(scad_threshold(0.5, 1, kA) == 0.0);
    CHECK(scad_threshold(3.0, 1, kA) == doctest::Approx((2.7 * 3 - 3.7) / 1.7));
    CHECK(scad_threshold(5.0, 1, kA) == 5.0);
    CHECK(scad_threshold(2.0, 1, kA) == doctest::Approx(1.0));
    // Middle-branch formula evaluated at the boundary agrees.
    CHECK((2.7 * 2.0 - 3.7) / 1.7 == doctest::Approx(1.0));
}

TEST_CASE("scad_threshold: continuity, oddness, non-expansiveness, identity tail") {
    for (double lambda : {0.2, 1.0, 3.0}) {
        for (double knot : {2.0 * lambda, kA * lambda}) {
            const double left = scad_threshold(knot, lambda, kA);
            const double right = scad_threshold(std::nextafter(knot, 1e9), lambda, kA);
            CHECK(std::abs(left - right) <= 1e-12);
        }
        CHECK(std::abs(scad_threshold(2 * lambda, lambda, kA) - lambda) <= 1e-12);
        CHECK(std::abs(scad_threshold(kA * lambda, lambda, kA) - kA * lambda) <= 1e-12);
    }
    Rng rng(22);
    for (int i = 0; i < 1000; ++i) {
        const double z = rng.uniform(-10.0, 10.0);
        const double lambda = rng.uniform(0.0, 3.0);
        const double f = scad_threshold(z, lambda, kA);
        CHECK(scad_threshold(-z, lambda, kA) == -f);
        CHECK(std::abs(f) <= std::abs(z));
        if (std::abs(z) >= kA * lambda) CHECK(f == z);
    }
}

TEST_CASE("penalized_fit equals univariate thresholds under orthonormal design") {
    const MatrixXd x = hadamard_design(5);
    Rng rng(30);
    for (int rep = 0; rep < 20; ++rep) {
        VectorXd y = random_vector(rng, 8) * 3.0;
        y.array() -= y.mean();
        const VectorXd z = x.transpose() * y / 8.0;  // OLS estimates
        const double lambda = rng.uniform(0.05, 1.5);

        CoordinateDescentOptions opts;
        opts.tol = 1e-12;
        const auto lasso = penalized_fit(x, y, {PenaltyKind::lasso, lambda}, opts);
        const auto scad = penalized_fit(x, y, {PenaltyKind::scad, lambda, kA}, opts);
        CHECK(lasso.converged);
        CHECK(scad.converged);
        for (Index j = 0; j < 5; ++j) {
            CHECK(std::abs(lasso.beta[j] - soft_threshold(z[j], lambda)) <= 1e-10);
            CHECK(std::abs(scad.beta[j] - scad_threshold(z[j], lambda, kA)) <= 1e-10);
        }
    }
}

TEST_CASE("penalized_fit: lambda_max zeroes lasso; objective monotone; max_iter reported") {
    Rng rng(31);
    const MatrixXd raw = random_design(rng, 80, 10);
    VectorXd y = raw.col(0) * 2.0 - raw.col(3) + random_vector(rng, 80);
    const auto sd = standardize_design(raw, y);

    const double lmax = lambda_max(sd.x, sd.y);
    const auto zero = penalized_fit(sd.x, sd.y, {PenaltyKind::lasso, lmax});
    CHECK(zero.beta.cwiseAbs().maxCoeff() == 0.0);
    CHECK(zero.support.empty());

    const auto fit = penalized_fit(sd.x, sd.y, {PenaltyKind::lasso, 0.05 * lmax});
    CHECK(fit.objective_monotone);
    for (std::size_t k = 1; k < fit.objective_trace.size(); ++k)
        CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1] + 1e-12);
    CHECK(fit.support.size() >= 2);

    CoordinateDescentOptions one;
    one.max_iter = 1;
    one.tol = 0.0;
    CHECK_FALSE(penalized_fit(sd.x, sd.y, {PenaltyKind::lasso, 0.01 * lmax}, one).converged);
    CHECK_THROWS_AS(penalized_fit(sd.x, sd.y, {PenaltyKind::ridge, 1.0}), ParameterError);
}

TEST_CASE("SCAD coordinate descent never increases the objective from its lasso start") {
    Rng rng(32);
    for (int rep = 0; rep < 10; ++rep) {
        const MatrixXd raw = random_design(rng, 60, 8);
        const VectorXd y = raw.col(1) * 1.5 + raw.col(5) * 0.5 + random_vector(rng, 60);
        const auto sd = standardize_design(raw, y);
        const double lambda = 0.1 * lambda_max(sd.x, sd.y);
        const auto lasso = penalized_fit(sd.x, sd.y, {PenaltyKind::lasso, lambda});
        const PenaltySpec spec{PenaltyKind::scad, lambda, kA};
        const auto scad = penalized_fit(sd.x, sd.y, spec);
        CHECK(penalized_objective(sd.x, sd.y, scad.beta, spec) <=
              penalized_objective(sd.x, sd.y, lasso.beta, spec) + 1e-12);
    }
}

TEST_CASE("lambda grid and search") {
    const auto grid = lambda_grid(2.0, 20);
    REQUIRE(grid.size() == 20);
    CHECK(grid.front() == doctest::Approx(2.0));
    CHECK(grid.back() == doctest::Approx(2e-3));
    for (std::size_t k = 1; k < grid.size(); ++k) CHECK(grid[k] < grid[k - 1]);

    Rng rng(33);
    const MatrixXd x = random_design(rng, 200, 6);
    const VectorXd y = x.col(0) - x.col(1) + 0.3 * random_vector(rng, 200);
    for (auto kind : {PenaltyKind::ridge, PenaltyKind::lasso, PenaltyKind::scad}) {
        const auto s = search_lambda(x, y, kind);
        CHECK(s.grid.size() == 20);
        CHECK(s.validation_mse.size() == 20);
        CHECK(s.best_lambda > 0.0);
        const auto best = std::min_element(s.validation_mse.begin(), s.validation_mse.end());
        CHECK(s.grid[static_cast<std::size_t>(best - s.validation_mse.begin())] == s.best_lambda);
    }
    CHECK_THROWS_AS(search_lambda(x, y, PenaltyKind::none), ParameterError);
}

TEST_CASE("standardize_design: unit population sd, centered response, constant column rejected") {
    Rng rng(34);
    MatrixXd x = random_design(rng, 25, 3) * 4.0;
    x.col(1).array() += 10.0;
    const VectorXd y = random_vector(rng, 25);
    const auto s = standardize_design(x, y);
    for (Index j = 0; j < 3; ++j) {
        CHECK(std::abs(s.x.col(j).mean()) <= 1e-12);
        CHECK(s.x.col(j).squaredNorm() / 25.0 == doctest::Approx(1.0));
    }
    CHECK(std::abs(s.y.mean()) <= 1e-12);
    x.col(2).setConstant(5.0);
    CHECK_THROWS_AS(standardize_design(x, y), DataError);
}

TEST_CASE("select_features: sparse support, ridge significance, serialization") {
    RegressionFit scad;
    scad.penalty = {PenaltyKind::scad, 0.5, kA};
    scad.beta.resize(4);
    scad.beta << 0, 1.2, 0, -0.4;
    const auto rep = select_features(scad, {"a", "b", "c", "d"});
    CHECK(rep.selected_names() == std::vector<std::string>{"b", "d"});
    CHECK(rep.selected_count() == 2);
    CHECK(rep.dataset_label == "SCAD/dataset-2");
    CHECK_FALSE(rep.rows[1].p_value.has_value());

    // Strongly predictive design: every coefficient is clearly nonzero.
    Rng rng(35);
    const MatrixXd x = random_design(rng, 300, 6);
    VectorXd w(6);
    w << 1.0, -0.8, 0.7, 0.9, -0.6, 0.5;
    const VectorXd y = x * w + 0.3 * random_vector(rng, 300);
    const auto sd = standardize_design(x, y);
    auto fit = ridge_fit(sd.x, sd.y, 1.0);
    fit.x_scale = sd.x_sd;
    const std::vector<std::string> names{"x0", "x1", "x2", "x3", "x4", "x5"};
    const auto ridge = select_features(fit, names, 0.05);
    CHECK(ridge.rows.size() == 6);
    CHECK(ridge.selected_count() > 3);
    CHECK(ridge.approximate_p_values);
    CHECK(ridge.dataset_label == "RR/dataset-1");
    for (const auto& r : ridge.rows) {
        REQUIRE(r.p_value.has_value());
        CHECK((*r.p_value >= 0.0 && *r.p_value <= 1.0));
    }
    // Coefficients come back on the original column scale.
    CHECK(ridge.rows[0].coef == doctest::Approx(fit.beta[0] / sd.x_sd[0]));

    const auto back = SelectionReport::from_json(ridge.to_json());
    CHECK(back.to_json() == ridge.to_json());
    CHECK(back.selected_names() == ridge.selected_names());
    const std::string csv = ridge.to_csv();
    CHECK(csv.rfind("name,coef,t,p,selected\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);

    CHECK_THROWS_AS(select_features(scad, {"a"}), ShapeError);
}

TEST_CASE("penalty kinds parse and validate") {
    CHECK(penalty_kind_from_string("scad") == PenaltyKind::scad);
    CHECK(to_string(PenaltyKind::ridge) == "ridge");
    CHECK_THROWS_AS(penalty_kind_from_string("elastic"), ParameterError);
    CHECK_THROWS_AS((PenaltySpec{PenaltyKind::lasso, -1.0}.validate()), ParameterError);
    CHECK_THROWS_AS((PenaltySpec{PenaltyKind::scad, 1.0, 2.0}.validate()), ParameterError);
}
