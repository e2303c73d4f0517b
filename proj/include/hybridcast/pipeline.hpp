#pragma once

// End-to-end forecasting procedure: screen indicators, standardize on the
// training span, window, split chronologically, train, predict, restore the
// original scale and score. Also the five-row variant comparison harness.

#include "hybridcast/frame.hpp"
#include "hybridcast/model.hpp"
#include "hybridcast/regsel.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hybridcast::pipeline {

// Per-column z-score fitted on rows [0, train_end) only.
class StandardScaler {
public:
    StandardScaler() = default;
    StandardScaler(std::vector<std::string> names, VectorXd mean, VectorXd sd);

    // Sample (n - 1) standard deviation. Throws DataError naming a constant
    // column or when train_end < 2.
    static StandardScaler fit(const TimeSeriesFrame& frame, Index train_end);

    TimeSeriesFrame transform(const TimeSeriesFrame& frame) const;
    TimeSeriesFrame inverse(const TimeSeriesFrame& frame) const;
    double transform_value(const std::string& column, double v) const;
    double inverse_value(const std::string& column, double z) const;

    const std::vector<std::string>& names() const { return names_; }
    const VectorXd& mean() const { return mean_; }
    const VectorXd& sd() const { return sd_; }

    nlohmann::json to_json() const;
    static StandardScaler from_json(const nlohmann::json& j);

private:
    Index index_of(const std::string& column) const;

    std::vector<std::string> names_;
    VectorXd mean_;
    VectorXd sd_;
};

// Sample i reads rows [start_i, start_i + T) and predicts row
// start_i + T - 1 + horizon of the target column.
struct WindowBatch {
    Tensor inputs;  // samples x T x F
    std::vector<double> targets;
    std::vector<double> original_targets;
    std::vector<Index> start_rows;
    std::vector<Date> last_input_dates;
    std::vector<Date> target_dates;
    Index window = 0;

    Index size() const { return static_cast<Index>(targets.size()); }
    // Samples [begin, end) as a new batch.
    WindowBatch slice(Index begin, Index end) const;
    // Gathers the listed samples in order.
    WindowBatch gather(const std::vector<Index>& samples) const;
};

// `frame` must already be standardized; the target column is located by
// frame.target_name. Original-scale targets are recovered with `scaler`
// when given, else copied from the standardized values.
WindowBatch make_windows(const TimeSeriesFrame& frame, Index window = 5, Index horizon = 1,
                         const StandardScaler* scaler = nullptr);

// True when every input row of every sample precedes its target date.
bool no_lookahead(const WindowBatch& batch);

struct Split {
    WindowBatch train;
    WindowBatch test;
};

// First floor(fraction * n) samples train, the rest test, order kept.
Split chrono_split(const WindowBatch& batch, double train_fraction = 0.9);

// Number of training samples for n windows.
Index train_count(Index samples, double train_fraction = 0.9);

struct Metrics {
    double mse = 0.0;
    double mae = 0.0;
    std::optional<double> mape;  // empty when an actual value is zero
};

// MAPE is a fraction (no x100).
Metrics evaluate(const std::vector<double>& predicted, const std::vector<double>& actual);

// Options for the indicator-screening stage.
struct SelectionConfig {
    Index lag = 1;
    double alpha = 0.05;
    double scad_a = regsel::kDefaultScadA;
    std::optional<double> ridge_lambda;  // empty: validation grid
    std::optional<double> scad_lambda;
    int grid_points = 20;
    double validation_fraction = 0.1;
    double tol = 1e-8;
    int max_iter = 10000;
    // Ridge dataset fed to the forecaster: every screened indicator ("all")
    // or only those passing the approximate t-test ("significant").
    bool rr_keep_all = true;

    nlohmann::json to_json() const;
    static SelectionConfig from_json(const nlohmann::json& j);
    static SelectionConfig from_json(const nlohmann::json& j, const SelectionConfig& base);
};

// Exogenous indicators at t - lag against the target at t, restricted to
// target rows < row_end.
struct SelectionDesign {
    MatrixXd x;
    VectorXd y;
    std::vector<std::string> names;
};

SelectionDesign build_selection_design(const TimeSeriesFrame& frame, Index lag, Index row_end);

struct SelectionResult {
    regsel::SelectionReport ridge;
    regsel::SelectionReport scad;
    regsel::RegressionFit ridge_fit;
    regsel::RegressionFit scad_fit;
};

// Ridge and SCAD screening on the rows that precede the test span.
SelectionResult run_selection(const TimeSeriesFrame& frame, const SelectionConfig& config,
                              Index window = 5, double train_fraction = 0.9);

// Indicator names forwarded to the forecaster for a report.
std::vector<std::string> dataset_features(const regsel::SelectionReport& report, bool keep_all);

struct Predictions {
    std::vector<Date> dates;
    std::vector<double> actual;
    std::vector<double> predicted;

    std::string to_csv() const;
};

struct MetricsRow {
    std::string label;
    Metrics metrics;
};

struct TrainOptions {
    double train_fraction = 0.9;
    // Epoch loss above this multiple of the initial loss counts as divergence.
    double divergence_factor = 100.0;
};

struct TrainResult {
    neural::Model model;
    StandardScaler scaler;
    std::vector<std::string> columns;  // target first, then indicators
    MetricsRow row;
    Predictions predictions;
    double initial_train_loss = 0.0;
    double final_train_loss = 0.0;
    std::vector<double> epoch_losses;
};

// Report label for a dataset prefix ("RR", "SCAD", "ALL") and variant.
std::string row_label(const std::string& dataset_prefix, neural::Variant variant);

// Standardize -> window -> split -> Adam mini-batches -> predict the test
// span -> restore the target scale -> evaluate. The target's own history is
// always the first input column. Throws DivergenceError on a non-finite or
// exploding loss.
TrainResult train_model(const TimeSeriesFrame& frame, const std::vector<std::string>& features,
                        const neural::ModelConfig& config, const std::string& dataset_prefix = "ALL",
                        const TrainOptions& options = {});

// Scores a trained model on the test span of `frame`, using the scaler and
// columns it was trained with.
Predictions predict_test_span(const neural::Model& model, const StandardScaler& scaler,
                              const std::vector<std::string>& columns,
                              const TimeSeriesFrame& frame, double train_fraction = 0.9);

struct SeedDetail {
    std::uint64_t seed = 0;
    std::vector<MetricsRow> rows;
};

struct MetricsReport {
    std::string dataset_label;
    std::vector<std::uint64_t> seeds;
    std::vector<MetricsRow> rows;  // means over seeds
    std::vector<SeedDetail> per_seed;
    // Share of seeds where RR-DILATED_CNN-LSTM beats RR-CNN-LSTM on MSE.
    std::optional<double> dilated_win_rate;
    double runtime_seconds = 0.0;  // informational; not serialized

    nlohmann::json to_json() const;
    // Aligned text table: label, MSE, MAE, MAPE.
    std::string to_table() const;
};

// One-row report for a single trained model.
MetricsReport single_report(const MetricsRow& row, const std::string& dataset_label,
                            std::uint64_t seed);

// The five labelled rows RR-CNN, RR-LSTM, RR-CNN-LSTM, RR-DILATED_CNN-LSTM
// (RR features) and SCAD-DILATED_CNN-LSTM (SCAD features), for each seed.
// Cell k of a seed trains with seed + k. `threads` <= 1 runs sequentially.
MetricsReport compare_variants(const TimeSeriesFrame& frame,
                               const std::vector<std::string>& rr_features,
                               const std::vector<std::string>& scad_features,
                               const neural::ModelConfig& base_config,
                               const std::vector<std::uint64_t>& seeds, unsigned threads = 1,
                               const TrainOptions& options = {});

inline const std::vector<std::string>& comparison_labels() {
    static const std::vector<std::string> labels{"RR-CNN", "RR-LSTM", "RR-CNN-LSTM",
                                                 "RR-DILATED_CNN-LSTM", "SCAD-DILATED_CNN-LSTM"};
    return labels;
}

}  // namespace hybridcast::pipeline
