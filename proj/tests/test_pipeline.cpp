#include "hybridcast/pipeline.hpp"
#include "hybridcast/synth.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

using namespace hybridcast;
using namespace hybridcast::pipeline;

namespace {

TimeSeriesFrame make_frame(const std::vector<std::string>& names, const MatrixXd& values,
                           const std::string& target) {
    TimeSeriesFrame f;
    f.dates = synth::weekday_calendar(parse_date("2020-01-06"), values.rows());
    f.names = names;
    f.values = values;
    f.target_name = target;
    return f;
}

TimeSeriesFrame random_frame(Rng& rng, Index rows, Index features) {
    std::vector<std::string> names;
    for (Index j = 0; j < features; ++j) names.push_back("x" + std::to_string(j));
    names.push_back("close");
    MatrixXd v(rows, features + 1);
    for (Index i = 0; i < v.size(); ++i) v.data()[i] = rng.uniform(-2.0, 2.0);
    v.col(features).array() += 20.0;
    return make_frame(names, v, "close");
}

std::vector<double> random_vector(Rng& rng, std::size_t n, double lo, double hi) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

std::filesystem::path temp_csv(const std::string& name, const std::string& text) {
    const auto dir = std::filesystem::temp_directory_path() / "hybridcast_test_pipeline";
    std::filesystem::create_directories(dir);
    const auto path = dir / name;
    std::ofstream(path) << text;
    return path;
}

synth::SyntheticPanel small_panel(std::uint64_t seed = 7, Index days = 400) {
    synth::SyntheticSpec spec;
    spec.n_days = days;
    spec.seed = seed;
    return synth::generate_synthetic_panel(spec);
}

std::vector<std::string> features(const synth::SyntheticPanel& p, std::initializer_list<std::size_t> idx) {
    std::vector<std::string> out;
    for (auto i : idx) out.push_back(p.truth.feature_names[i]);
    return out;
}

neural::ModelConfig small_config(neural::Variant v, int epochs) {
    auto c = neural::ModelConfig::for_variant(v);
    c.channels = 4;
    c.hidden = 8;
    c.epochs = epochs;
    return c;
}

}  // namespace

TEST_CASE("scaler: [1,3] gives mean 2 and sd sqrt(2)") {
    MatrixXd v(2, 1);
    v << 1, 3;
    const auto f = make_frame({"p"}, v, "p");
    const auto s = StandardScaler::fit(f, 2);
    CHECK(s.mean()[0] == 2.0);
    CHECK(s.sd()[0] == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
    const auto z = s.transform(f);
    CHECK(z.values(0, 0) == doctest::Approx(-0.7071067811865476).epsilon(1e-12));
    CHECK(z.values(1, 0) == doctest::Approx(0.7071067811865476).epsilon(1e-12));
    CHECK(s.inverse(z).values == f.values);
}

TEST_CASE("scaler: constant column is rejected by name; short span rejected") {
    MatrixXd v(3, 2);
    v << 1, 5, 2, 5, 3, 5;
    const auto f = make_frame({"a", "flat"}, v, "a");
    try {
        (void)StandardScaler::fit(f, 3);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("flat") != std::string::npos);
    }
    CHECK_THROWS_AS(StandardScaler::fit(f.select({"a"}), 1), DataError);
}

TEST_CASE("scaler: inverse(transform(x)) round-trips to 1e-10; JSON round trip") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        auto f = random_frame(rng, 50, 4);
        f.values *= rng.uniform(0.1, 1000.0);
        const auto s = StandardScaler::fit(f, 40);
        const auto back = s.inverse(s.transform(f));
        CHECK((back.values - f.values).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, f.values.cwiseAbs().maxCoeff()));
        const auto j = StandardScaler::from_json(s.to_json());
        CHECK(j.mean() == s.mean());
        CHECK(j.sd() == s.sd());
    }
}

TEST_CASE("scaler leakage canary: statistics come from the training span only") {
    Rng rng(2);
    auto f = random_frame(rng, 100, 3);
    const auto train_only = StandardScaler::fit(f, 80);
    // Shifting only the test rows must not move the fitted statistics.
    auto shifted = f;
    shifted.values.bottomRows(20).array() += 50.0;
    const auto after = StandardScaler::fit(shifted, 80);
    CHECK(after.mean() == train_only.mean());
    CHECK(after.sd() == train_only.sd());
    // Refitting on all rows changes the test-span transform.
    const auto full = StandardScaler::fit(shifted, 100);
    const MatrixXd a = train_only.transform(shifted).values.bottomRows(20);
    const MatrixXd b = full.transform(shifted).values.bottomRows(20);
    CHECK((a - b).cwiseAbs().maxCoeff() > 1.0);
}

TEST_CASE("make_windows: counts, target rows, insufficient data") {
    Rng rng(3);
    const auto f10 = random_frame(rng, 10, 2);
    CHECK(make_windows(f10, 5, 1).size() == 5);
    const auto f6 = random_frame(rng, 6, 2);
    const auto w6 = make_windows(f6, 5, 1);
    REQUIRE(w6.size() == 1);
    CHECK(w6.targets[0] == f6.values(5, 2));
    CHECK(w6.target_dates[0] == f6.dates[5]);
    CHECK(w6.inputs.dim(1) == 5);
    CHECK(w6.inputs.dim(2) == 3);
    CHECK(w6.inputs(0, 0, 0) == f6.values(0, 0));
    CHECK(w6.inputs(0, 4, 2) == f6.values(4, 2));
    try {
        (void)make_windows(random_frame(rng, 5, 2), 5, 1);
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("insufficient data") != std::string::npos);
    }
}

TEST_CASE("no lookahead on every window of random and synthetic frames") {
    Rng rng(4);
    for (Index n : {6, 7, 30, 200}) {
        const auto b = make_windows(random_frame(rng, n, 2), 5, 1);
        CHECK(no_lookahead(b));
        for (Index i = 0; i < b.size(); ++i) {
            CHECK(b.last_input_dates[static_cast<std::size_t>(i)] < b.target_dates[static_cast<std::size_t>(i)]);
        }
    }
    const auto p = small_panel();
    const auto b = make_windows(p.frame, 5, 1);
    CHECK(no_lookahead(b));
    CHECK(b.size() == p.frame.rows() - 5);
}

TEST_CASE("chrono_split: floor rule and order") {
    Rng rng(5);
    const auto b100 = make_windows(random_frame(rng, 105, 1), 5, 1);
    REQUIRE(b100.size() == 100);
    const auto s = chrono_split(b100, 0.9);
    CHECK(s.train.size() == 90);
    CHECK(s.test.size() == 10);
    const auto b10 = make_windows(random_frame(rng, 15, 1), 5, 1);
    const auto s10 = chrono_split(b10, 0.9);
    CHECK(s10.train.size() == 9);
    CHECK(s10.test.size() == 1);
    CHECK(train_count(37, 0.9) == 33);

    for (std::size_t i = 0; i + 1 < s.train.start_rows.size(); ++i)
        CHECK(s.train.start_rows[i] < s.train.start_rows[i + 1]);
    for (std::size_t i = 0; i + 1 < s.test.start_rows.size(); ++i)
        CHECK(s.test.start_rows[i] < s.test.start_rows[i + 1]);
    CHECK(s.train.start_rows.back() < s.test.start_rows.front());
    // Partition is exact.
    for (Index i = 0; i < 90; ++i) CHECK(s.train.targets[static_cast<std::size_t>(i)] == b100.targets[static_cast<std::size_t>(i)]);
    for (Index i = 0; i < 10; ++i) CHECK(s.test.targets[static_cast<std::size_t>(i)] == b100.targets[static_cast<std::size_t>(90 + i)]);

    CHECK_THROWS_AS(chrono_split(b10.slice(0, 1), 0.9), DataError);
    CHECK_THROWS_AS(chrono_split(b10, 1.0), ParameterError);
}

TEST_CASE("evaluate: hand-computed examples") {
    const auto same = evaluate({1, 2, 3}, {1, 2, 3});
    CHECK(same.mse == 0.0);
    CHECK(same.mae == 0.0);
    CHECK(*same.mape == 0.0);

    const auto m = evaluate({2, 2, 2}, {1, 2, 3});
    CHECK(std::abs(m.mse - 2.0 / 3.0) <= 1e-9);
    CHECK(std::abs(m.mae - 2.0 / 3.0) <= 1e-9);
    CHECK(std::abs(*m.mape - (1.0 + 0.0 + 1.0 / 3.0) / 3.0) <= 1e-9);
    CHECK(std::abs(*m.mape - 0.4444) <= 1e-4);

    const auto one = evaluate({110}, {100});
    CHECK(one.mae == 10.0);
    CHECK(one.mse == 100.0);
    CHECK(std::abs(*one.mape - 0.1) <= 1e-15);

    const auto zero = evaluate({1, 1}, {0, 2});
    CHECK_FALSE(zero.mape.has_value());
    CHECK(zero.mse == 1.0);
    CHECK(zero.mae == 1.0);

    CHECK_THROWS_AS(evaluate({1, 2}, {1}), ShapeError);
    CHECK_THROWS_AS(evaluate({}, {}), ParameterError);
}

TEST_CASE("evaluate: scale invariance, homogeneity, single-point identity") {
    Rng rng(6);
    for (int rep = 0; rep < 100; ++rep) {
        const std::size_t n = 1 + rng.below(20);
        const auto y = random_vector(rng, n, 0.5, 50.0);
        const auto p = random_vector(rng, n, 0.5, 50.0);
        const double k = rng.uniform(0.01, 100.0);
        std::vector<double> ky(n), kp(n);
        for (std::size_t i = 0; i < n; ++i) {
            ky[i] = k * y[i];
            kp[i] = k * p[i];
        }
        const auto a = evaluate(p, y);
        const auto b = evaluate(kp, ky);
        CHECK(std::abs(*b.mape - *a.mape) <= 1e-12 * std::max(1.0, *a.mape));
        CHECK(std::abs(b.mae - k * a.mae) <= 1e-12 * std::max(1.0, k * a.mae));
        CHECK(a.mse >= 0.0);
        const auto single = evaluate({p[0]}, {y[0]});
        CHECK(std::abs(single.mse - single.mae * single.mae) <= 1e-12 * std::max(1.0, single.mse));
    }
}

TEST_CASE("load_csv_series: basic, duplicates, bad cells, missing file") {
    const auto ok = load_csv_series(temp_csv("ok.csv", "date,price\n2020-01-03,3\n2020-01-01,1\n2020-01-02,2\n"));
    CHECK(ok.rows() == 3);
    CHECK(ok.values(0, 0) == 1.0);
    CHECK(format_date(ok.dates[0]) == "2020-01-01");
    CHECK(ok.target_name == "price");

    try {
        (void)load_csv_series(temp_csv("dup.csv", "date,price\n2020-01-01,1\n2020-01-01,2\n"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("2020-01-01") != std::string::npos);
    }
    try {
        (void)load_csv_series(temp_csv("abc.csv", "date,price\n2020-01-01,1\n2020-01-02,abc\n"));
        FAIL("expected DataError");
    } catch (const DataError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("price") != std::string::npos);
        CHECK(msg.find("3") != std::string::npos);
    }
    CHECK_THROWS_AS(load_csv_series(temp_csv("date.csv", "date,price\n2020-13-01,1\n")), DataError);
    try {
        (void)load_csv_series("/nonexistent/dir/prices.csv");
        FAIL("expected DataError");
    } catch (const DataError& e) {
        CHECK(std::string(e.what()).find("/nonexistent/dir/prices.csv") != std::string::npos);
    }
    const auto gaps = parse_csv_series("date,a\n2020-01-01,\n2020-01-02,4\n", "mem");
    CHECK(std::isnan(gaps.values(0, 0)));
}

TEST_CASE("align_series: pass-through, forward fill, leading drop, coverage") {
    const auto target = parse_csv_series("date,close\n2020-01-01,10\n2020-01-02,11\n2020-01-03,12\n", "t");
    const auto full = parse_csv_series("date,x\n2020-01-01,1\n2020-01-02,2\n2020-01-03,3\n", "x");
    const auto a = align_series(target, {full});
    CHECK(a.rows() == 3);
    CHECK(a.column("x") == (VectorXd(3) << 1, 2, 3).finished());
    CHECK(a.target_name == "close");

    const auto gap = parse_csv_series("date,x\n2020-01-01,1\n2020-01-03,3\n", "x");
    const auto b = align_series(target, {gap});
    CHECK(b.column("x") == (VectorXd(3) << 1, 1, 3).finished());

    const auto late = parse_csv_series("date,y\n2020-01-03,5\n", "y");
    const auto c = align_series(target, {full, late});
    CHECK(c.rows() == 1);
    CHECK(format_date(c.dates[0]) == "2020-01-03");
    CHECK(c.values(0, c.column_index("y")) == 5.0);
    CHECK(c.values(0, c.column_index("x")) == 3.0);

    const auto outside = parse_csv_series("date,z\n2021-05-01,5\n", "z");
    CHECK_THROWS_AS(align_series(target, {outside}), DataError);
}

TEST_CASE("train_model: zero init with 0 epochs predicts the training mean") {
    const auto p = small_panel();
    auto c = small_config(neural::Variant::dilated_cnn_lstm, 0);
    c.init = neural::InitMode::zero;
    const auto r = train_model(p.frame, features(p, {3, 15}), c, "RR");
    const double mean = r.scaler.mean()[0];
    CHECK(r.columns.front() == synth::kTargetName);
    REQUIRE_FALSE(r.predictions.predicted.empty());
    for (double v : r.predictions.predicted) CHECK(v == doctest::Approx(mean).epsilon(1e-12));
    std::vector<double> baseline(r.predictions.actual.size(), mean);
    const auto oracle = evaluate(baseline, r.predictions.actual);
    CHECK(r.row.metrics.mse == doctest::Approx(oracle.mse).epsilon(1e-12));
    CHECK(r.row.metrics.mae == doctest::Approx(oracle.mae).epsilon(1e-12));
    CHECK(r.row.label == "RR-DILATED_CNN-LSTM");
    const Index windows = p.frame.rows() - 5;
    CHECK(static_cast<Index>(r.predictions.actual.size()) == windows - train_count(windows));
}

TEST_CASE("train_model: training lowers the loss and is deterministic") {
    const auto p = small_panel(7, 1060);
    std::vector<std::string> feats;
    for (const auto& n : p.truth.support_names) feats.push_back(n);
    auto c = neural::ModelConfig::for_variant(neural::Variant::dilated_cnn_lstm);
    c.epochs = 5;
    c.seed = 7;
    const auto a = train_model(p.frame, feats, c, "RR");
    CHECK(a.final_train_loss < a.initial_train_loss);
    CHECK(a.epoch_losses.size() == 5);
    const auto b = train_model(p.frame, feats, c, "RR");
    CHECK(a.row.metrics.mse == b.row.metrics.mse);
    CHECK(a.row.metrics.mae == b.row.metrics.mae);
    CHECK(a.predictions.predicted == b.predictions.predicted);
    CHECK(a.model.to_json() == b.model.to_json());

    const auto again = predict_test_span(a.model, a.scaler, a.columns, p.frame);
    CHECK(again.predicted == a.predictions.predicted);
}

TEST_CASE("train_model: a huge learning rate is reported as divergence") {
    const auto p = small_panel();
    auto c = neural::ModelConfig::for_variant(neural::Variant::dilated_cnn_lstm);
    c.epochs = 3;
    c.learning_rate = 10.0;
    try {
        (void)train_model(p.frame, p.truth.feature_names, c, "RR");
        FAIL("expected DivergenceError");
    } catch (const DivergenceError& e) {
        CHECK(e.epoch() >= 1);
        CHECK(std::string(e.what()).find("epoch") != std::string::npos);
    }
}

TEST_CASE("compare_variants: labels, finite metrics, win rate, determinism") {
    const auto p = small_panel(3, 300);
    const auto rr = features(p, {3, 15, 27, 40, 47, 1});
    const auto scad = features(p, {3, 15});
    const auto base = small_config(neural::Variant::dilated_cnn_lstm, 2);
    const auto a = compare_variants(p.frame, rr, scad, base, {11, 12}, 2);
    REQUIRE(a.rows.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(a.rows[i].label == comparison_labels()[i]);
        CHECK(std::isfinite(a.rows[i].metrics.mse));
        CHECK(a.rows[i].metrics.mse >= 0.0);
        CHECK(std::isfinite(a.rows[i].metrics.mae));
        REQUIRE(a.rows[i].metrics.mape.has_value());
        CHECK(std::isfinite(*a.rows[i].metrics.mape));
    }
    CHECK(a.per_seed.size() == 2);
    REQUIRE(a.dilated_win_rate.has_value());
    CHECK(*a.dilated_win_rate >= 0.0);
    CHECK(*a.dilated_win_rate <= 1.0);
    CHECK(a.dataset_label == "RR/dataset-1 + SCAD/dataset-2");
    const double mean_mse = (a.per_seed[0].rows[3].metrics.mse + a.per_seed[1].rows[3].metrics.mse) / 2;
    CHECK(a.rows[3].metrics.mse == doctest::Approx(mean_mse).epsilon(1e-14));

    const auto b = compare_variants(p.frame, rr, scad, base, {11, 12}, 1);
    CHECK(a.to_json().dump() == b.to_json().dump());
    const std::string table = a.to_table();
    for (const auto& l : comparison_labels()) CHECK(table.find(l) != std::string::npos);
    CHECK(table.find("MAPE") != std::string::npos);
}

TEST_CASE("selection stage on the synthetic panel") {
    const auto p = small_panel(7, 1060);
    const auto r = run_selection(p.frame, SelectionConfig{});
    CHECK(r.ridge.rows.size() == 53);
    CHECK(dataset_features(r.ridge, true).size() == 53);
    const auto kept = r.scad.selected_names();
    CHECK(kept.size() < 53);
    for (const auto& s : p.truth.support_names) CHECK(std::find(kept.begin(), kept.end(), s) != kept.end());

    const auto d = build_selection_design(p.frame, 1, 100);
    CHECK(d.x.rows() == 99);
    CHECK(d.y[0] == p.frame.values(1, p.frame.column_index(synth::kTargetName)));
    CHECK(d.x(0, 0) == p.frame.values(0, 0));

    auto cfg = SelectionConfig{};
    const auto j = cfg.to_json();
    CHECK(SelectionConfig::from_json(j).to_json() == j);
    auto bad = j;
    bad["alpha"] = 1.5;
    CHECK_THROWS_AS(SelectionConfig::from_json(bad), ConfigError);
}
