#include "hybridcast/pipeline.hpp"

#include "hybridcast/io.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

namespace hybridcast::pipeline {

namespace {

Tensor gather_inputs(const Tensor& inputs, const std::vector<Index>& samples) {
    const Index per = inputs.dim(1) * inputs.dim(2);
    Tensor out({static_cast<Index>(samples.size()), inputs.dim(1), inputs.dim(2)});
    for (std::size_t k = 0; k < samples.size(); ++k) {
        std::copy_n(inputs.data() + samples[k] * per, per, out.data() + static_cast<Index>(k) * per);
    }
    return out;
}

// Forward pass in fixed-size chunks so that training and checkpoint
// evaluation see identical matrix shapes (and therefore identical sums).
Eigen::RowVectorXd predict_chunked(const neural::Model& model, const Tensor& inputs) {
    const Index n = inputs.dim(0);
    const Index chunk = std::max<Index>(model.config().batch_size, 1);
    Eigen::RowVectorXd out(n);
    std::vector<Index> idx;
    for (Index start = 0; start < n; start += chunk) {
        const Index end = std::min(n, start + chunk);
        idx.resize(static_cast<std::size_t>(end - start));
        std::iota(idx.begin(), idx.end(), start);
        out.segment(start, end - start) = model.forward(gather_inputs(inputs, idx));
    }
    return out;
}

double train_mse(const neural::Model& model, const WindowBatch& train) {
    const Eigen::RowVectorXd pred = predict_chunked(model, train.inputs);
    const Eigen::Map<const Eigen::RowVectorXd> target(train.targets.data(), train.size());
    return (pred - target).squaredNorm() / static_cast<double>(train.size());
}

std::vector<std::string> model_columns(const TimeSeriesFrame& frame,
                                       const std::vector<std::string>& features) {
    std::vector<std::string> cols{frame.target_name};
    for (const auto& f : features) {
        if (f == frame.target_name) continue;
        frame.column_index(f);
        if (std::find(cols.begin(), cols.end(), f) == cols.end()) cols.push_back(f);
    }
    return cols;
}

nlohmann::json metrics_json(const MetricsRow& r) {
    return {{"label", r.label},
            {"mse", r.metrics.mse},
            {"mae", r.metrics.mae},
            {"mape", r.metrics.mape ? nlohmann::json(*r.metrics.mape) : nlohmann::json(nullptr)}};
}

}  // namespace

// --- StandardScaler ---------------------------------------------------------

StandardScaler::StandardScaler(std::vector<std::string> names, VectorXd mean, VectorXd sd)
    : names_(std::move(names)), mean_(std::move(mean)), sd_(std::move(sd)) {
    if (static_cast<Index>(names_.size()) != mean_.size() || mean_.size() != sd_.size()) {
        throw ShapeError("StandardScaler: names, means and sds differ in length");
    }
}

StandardScaler StandardScaler::fit(const TimeSeriesFrame& frame, Index train_end) {
    if (train_end < 2) throw DataError("StandardScaler: need at least two training rows");
    if (train_end > frame.rows()) throw DataError("StandardScaler: training span exceeds frame");
    const auto span = frame.values.topRows(train_end);
    VectorXd mean = span.colwise().mean().transpose();
    VectorXd sd(frame.cols());
    for (Index c = 0; c < frame.cols(); ++c) {
        const double ss = (span.col(c).array() - mean[c]).square().sum();
        sd[c] = std::sqrt(ss / static_cast<double>(train_end - 1));
        if (!(sd[c] > 0.0) || !std::isfinite(sd[c])) {
            throw DataError("cannot scale column '" + frame.names[static_cast<std::size_t>(c)] +
                            "': constant over the training span");
        }
    }
    return StandardScaler(frame.names, std::move(mean), std::move(sd));
}

Index StandardScaler::index_of(const std::string& column) const {
    const auto it = std::find(names_.begin(), names_.end(), column);
    if (it == names_.end()) throw DataError("scaler has no column '" + column + "'");
    return static_cast<Index>(it - names_.begin());
}

TimeSeriesFrame StandardScaler::transform(const TimeSeriesFrame& frame) const {
    TimeSeriesFrame out = frame;
    for (Index c = 0; c < frame.cols(); ++c) {
        const Index k = index_of(frame.names[static_cast<std::size_t>(c)]);
        out.values.col(c) = (frame.values.col(c).array() - mean_[k]) / sd_[k];
    }
    return out;
}

TimeSeriesFrame StandardScaler::inverse(const TimeSeriesFrame& frame) const {
    TimeSeriesFrame out = frame;
    for (Index c = 0; c < frame.cols(); ++c) {
        const Index k = index_of(frame.names[static_cast<std::size_t>(c)]);
        out.values.col(c) = frame.values.col(c).array() * sd_[k] + mean_[k];
    }
    return out;
}

double StandardScaler::transform_value(const std::string& column, double v) const {
    const Index k = index_of(column);
    return (v - mean_[k]) / sd_[k];
}

double StandardScaler::inverse_value(const std::string& column, double z) const {
    const Index k = index_of(column);
    return z * sd_[k] + mean_[k];
}

nlohmann::json StandardScaler::to_json() const {
    return {{"columns", names_},
            {"mean", std::vector<double>(mean_.data(), mean_.data() + mean_.size())},
            {"sd", std::vector<double>(sd_.data(), sd_.data() + sd_.size())}};
}

StandardScaler StandardScaler::from_json(const nlohmann::json& j) {
    try {
        const auto mean = j.at("mean").get<std::vector<double>>();
        const auto sd = j.at("sd").get<std::vector<double>>();
        return StandardScaler(j.at("columns").get<std::vector<std::string>>(),
                              Eigen::Map<const VectorXd>(mean.data(), static_cast<Index>(mean.size())),
                              Eigen::Map<const VectorXd>(sd.data(), static_cast<Index>(sd.size())));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed scaler: ") + e.what());
    }
}

// --- Windows and split --------------------------------------------------------

WindowBatch WindowBatch::slice(Index begin, Index end) const {
    std::vector<Index> idx(static_cast<std::size_t>(end - begin));
    std::iota(idx.begin(), idx.end(), begin);
    return gather(idx);
}

WindowBatch WindowBatch::gather(const std::vector<Index>& samples) const {
    WindowBatch out;
    out.window = window;
    out.inputs = gather_inputs(inputs, samples);
    for (Index s : samples) {
        const auto k = static_cast<std::size_t>(s);
        out.targets.push_back(targets[k]);
        out.original_targets.push_back(original_targets[k]);
        out.start_rows.push_back(start_rows[k]);
        out.last_input_dates.push_back(last_input_dates[k]);
        out.target_dates.push_back(target_dates[k]);
    }
    return out;
}

WindowBatch make_windows(const TimeSeriesFrame& frame, Index window, Index horizon,
                         const StandardScaler* scaler) {
    if (window < 1 || horizon < 1) throw ParameterError("make_windows: window and horizon must be >= 1");
    const Index n = frame.rows();
    const Index samples = n - window - horizon + 1;
    if (samples < 1) {
        throw DataError("insufficient data: " + std::to_string(n) + " rows for window " +
                        std::to_string(window) + " and horizon " + std::to_string(horizon));
    }
    const Index target_col = frame.column_index(frame.target_name);
    const Index features = frame.cols();

    WindowBatch batch;
    batch.window = window;
    batch.inputs = Tensor({samples, window, features});
    for (Index i = 0; i < samples; ++i) {
        batch.inputs.matrix(window, features, i) = frame.values.middleRows(i, window);
        const Index target_row = i + window - 1 + horizon;
        const double z = frame.values(target_row, target_col);
        batch.targets.push_back(z);
        batch.original_targets.push_back(scaler ? scaler->inverse_value(frame.target_name, z) : z);
        batch.start_rows.push_back(i);
        batch.last_input_dates.push_back(frame.dates[static_cast<std::size_t>(i + window - 1)]);
        batch.target_dates.push_back(frame.dates[static_cast<std::size_t>(target_row)]);
    }
    return batch;
}

bool no_lookahead(const WindowBatch& batch) {
    for (Index i = 0; i < batch.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!(batch.last_input_dates[k] < batch.target_dates[k])) return false;
    }
    return true;
}

Index train_count(Index samples, double train_fraction) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ParameterError("train fraction must lie in (0, 1)");
    }
    return static_cast<Index>(std::floor(train_fraction * static_cast<double>(samples)));
}

Split chrono_split(const WindowBatch& batch, double train_fraction) {
    const Index n = batch.size();
    if (n < 2) throw DataError("chrono_split: need at least two samples, got " + std::to_string(n));
    const Index n_train = train_count(n, train_fraction);
    if (n_train < 1 || n_train >= n) {
        throw DataError("chrono_split: split leaves an empty train or test set");
    }
    return {batch.slice(0, n_train), batch.slice(n_train, n)};
}

// --- Metrics -----------------------------------------------------------------

Metrics evaluate(const std::vector<double>& predicted, const std::vector<double>& actual) {
    if (predicted.size() != actual.size()) {
        throw ShapeError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                         std::to_string(actual.size()) + " actual values");
    }
    if (actual.empty()) throw ParameterError("evaluate: empty input");
    const double n = static_cast<double>(actual.size());
    Metrics m;
    double ape = 0.0;
    bool mape_defined = true;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        const double err = actual[i] - predicted[i];
        m.mse += err * err;
        m.mae += std::abs(err);
        if (actual[i] == 0.0) mape_defined = false;
        else ape += std::abs(err) / actual[i];
    }
    m.mse /= n;
    m.mae /= n;
    if (mape_defined) m.mape = ape / n;
    return m;
}

// --- Selection stage ----------------------------------------------------------

nlohmann::json SelectionConfig::to_json() const {
    nlohmann::json j{{"lag", lag},
                     {"alpha", alpha},
                     {"a", scad_a},
                     {"grid_points", grid_points},
                     {"validation_fraction", validation_fraction},
                     {"tol", tol},
                     {"max_iter", max_iter},
                     {"rr_dataset", rr_keep_all ? "all" : "significant"}};
    j["ridge_lambda"] = ridge_lambda ? nlohmann::json(*ridge_lambda) : nlohmann::json(nullptr);
    j["scad_lambda"] = scad_lambda ? nlohmann::json(*scad_lambda) : nlohmann::json(nullptr);
    return j;
}

SelectionConfig SelectionConfig::from_json(const nlohmann::json& j) { return from_json(j, SelectionConfig{}); }

SelectionConfig SelectionConfig::from_json(const nlohmann::json& j, const SelectionConfig& base) {
    SelectionConfig c = base;
    try {
        c.lag = j.value("lag", c.lag);
        c.alpha = j.value("alpha", c.alpha);
        c.scad_a = j.value("a", c.scad_a);
        c.grid_points = j.value("grid_points", c.grid_points);
        c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
        c.tol = j.value("tol", c.tol);
        c.max_iter = j.value("max_iter", c.max_iter);
        if (j.contains("ridge_lambda") && !j["ridge_lambda"].is_null())
            c.ridge_lambda = j["ridge_lambda"].get<double>();
        if (j.contains("scad_lambda") && !j["scad_lambda"].is_null())
            c.scad_lambda = j["scad_lambda"].get<double>();
        if (j.contains("rr_dataset")) {
            const auto s = j["rr_dataset"].get<std::string>();
            if (s == "all") c.rr_keep_all = true;
            else if (s == "significant") c.rr_keep_all = false;
            else throw ConfigError("selection: rr_dataset must be 'all' or 'significant'");
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("selection config: ") + e.what());
    }
    if (c.lag < 1) throw ConfigError("selection: lag must be >= 1");
    if (!(c.alpha > 0.0 && c.alpha < 1.0)) throw ConfigError("selection: alpha must lie in (0, 1)");
    if (!(c.scad_a > 2.0)) throw ConfigError("selection: SCAD a must be > 2");
    if (c.ridge_lambda && !(*c.ridge_lambda > 0.0)) throw ConfigError("selection: ridge_lambda must be > 0");
    if (c.scad_lambda && !(*c.scad_lambda >= 0.0)) throw ConfigError("selection: scad_lambda must be >= 0");
    return c;
}

SelectionDesign build_selection_design(const TimeSeriesFrame& frame, Index lag, Index row_end) {
    if (lag < 1) throw ParameterError("selection design: lag must be >= 1");
    row_end = std::min(row_end, frame.rows());
    const Index n = row_end - lag;
    SelectionDesign d;
    for (const auto& name : frame.names)
        if (name != frame.target_name) d.names.push_back(name);
    if (d.names.empty()) throw DataError("selection design: frame has no indicator columns");
    if (n <= static_cast<Index>(d.names.size()) + 2) {
        throw DataError("selection design: " + std::to_string(n) + " rows for " +
                        std::to_string(d.names.size()) + " indicators");
    }
    d.x.resize(n, static_cast<Index>(d.names.size()));
    for (std::size_t k = 0; k < d.names.size(); ++k)
        d.x.col(static_cast<Index>(k)) = frame.values.col(frame.column_index(d.names[k])).segment(0, n);
    d.y = frame.values.col(frame.column_index(frame.target_name)).segment(lag, n);
    return d;
}

SelectionResult run_selection(const TimeSeriesFrame& frame, const SelectionConfig& config,
                              Index window, double train_fraction) {
    const Index samples = frame.rows() - window;
    if (samples < 2) throw DataError("run_selection: frame too short for windowing");
    const Index row_end = train_count(samples, train_fraction) + window;
    const SelectionDesign design = build_selection_design(frame, config.lag, row_end);
    const regsel::StandardizedDesign std_design = regsel::standardize_design(design.x, design.y);

    SelectionResult out;
    const double ridge_lambda =
        config.ridge_lambda ? *config.ridge_lambda
                            : regsel::search_lambda(design.x, design.y, regsel::PenaltyKind::ridge,
                                                    config.scad_a, config.grid_points,
                                                    config.validation_fraction)
                                  .best_lambda;
    out.ridge_fit = regsel::ridge_fit(std_design.x, std_design.y, ridge_lambda, true);
    out.ridge_fit.x_scale = std_design.x_sd;
    out.ridge = regsel::select_features(out.ridge_fit, design.names, config.alpha);

    const double scad_lambda =
        config.scad_lambda ? *config.scad_lambda
                           : regsel::search_lambda(design.x, design.y, regsel::PenaltyKind::scad,
                                                   config.scad_a, config.grid_points,
                                                   config.validation_fraction)
                                 .best_lambda;
    regsel::CoordinateDescentOptions opts;
    opts.tol = config.tol;
    opts.max_iter = config.max_iter;
    out.scad_fit = regsel::penalized_fit(std_design.x, std_design.y,
                                         {regsel::PenaltyKind::scad, scad_lambda, config.scad_a}, opts);
    out.scad_fit.x_scale = std_design.x_sd;
    out.scad = regsel::select_features(out.scad_fit, design.names, config.alpha);
    return out;
}

std::vector<std::string> dataset_features(const regsel::SelectionReport& report, bool keep_all) {
    return keep_all ? report.all_names() : report.selected_names();
}

// --- Training -----------------------------------------------------------------

std::string Predictions::to_csv() const {
    std::ostringstream os;
    os << "date,actual,predicted\n";
    for (std::size_t i = 0; i < dates.size(); ++i) {
        os << format_date(dates[i]) << ',' << io::format_double(actual[i]) << ','
           << io::format_double(predicted[i]) << '\n';
    }
    return os.str();
}

std::string row_label(const std::string& dataset_prefix, neural::Variant variant) {
    return dataset_prefix + "-" + neural::variant_label(variant);
}

Predictions predict_test_span(const neural::Model& model, const StandardScaler& scaler,
                              const std::vector<std::string>& columns,
                              const TimeSeriesFrame& frame, double train_fraction) {
    const TimeSeriesFrame scaled = scaler.transform(frame.select(columns));
    const WindowBatch batch = make_windows(scaled, model.config().window, 1, &scaler);
    const Split split = chrono_split(batch, train_fraction);
    const Eigen::RowVectorXd z = predict_chunked(model, split.test.inputs);
    Predictions p;
    p.dates = split.test.target_dates;
    p.actual = split.test.original_targets;
    for (Index i = 0; i < z.size(); ++i) p.predicted.push_back(scaler.inverse_value(frame.target_name, z[i]));
    return p;
}

TrainResult train_model(const TimeSeriesFrame& frame, const std::vector<std::string>& features,
                        const neural::ModelConfig& config, const std::string& dataset_prefix,
                        const TrainOptions& options) {
    config.validate();
    frame.validate();
    const std::vector<std::string> columns = model_columns(frame, features);
    const TimeSeriesFrame sub = frame.select(columns);

    const Index samples = sub.rows() - config.window;
    if (samples < 2) {
        throw DataError("insufficient data: " + std::to_string(sub.rows()) +
                        " rows for window " + std::to_string(config.window));
    }
    const Index n_train = train_count(samples, options.train_fraction);
    const StandardScaler scaler = StandardScaler::fit(sub, n_train + config.window);
    const WindowBatch batch = make_windows(scaler.transform(sub), config.window, 1, &scaler);
    const Split split = chrono_split(batch, options.train_fraction);

    TrainResult result{neural::Model(config, static_cast<Index>(columns.size())), scaler, columns,
                       {}, {}, 0.0, 0.0, {}};
    neural::Model& model = result.model;
    Rng rng(config.seed);
    if (config.init == neural::InitMode::uniform) model.initialize(rng);

    result.initial_train_loss = train_mse(model, split.train);
    const double blowup = options.divergence_factor * std::max(result.initial_train_loss, 1.0);

    neural::AdamState adam;
    std::vector<Index> order(static_cast<std::size_t>(split.train.size()));
    std::iota(order.begin(), order.end(), Index(0));
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(order);
        double weighted = 0.0;
        for (Index start = 0; start < split.train.size(); start += config.batch_size) {
            const Index end = std::min(split.train.size(), start + config.batch_size);
            std::vector<Index> idx(order.begin() + start, order.begin() + end);
            const Tensor inputs = gather_inputs(split.train.inputs, idx);
            Eigen::RowVectorXd target(end - start);
            for (Index k = 0; k < end - start; ++k)
                target[k] = split.train.targets[static_cast<std::size_t>(idx[static_cast<std::size_t>(k)])];

            neural::ModelCache cache;
            const auto pred = model.forward(inputs, &cache);
            const auto loss = neural::mse_loss(pred, target);
            if (!std::isfinite(loss.value)) throw DivergenceError(epoch, loss.value);
            model.backward(cache, loss.grad);
            const auto params = model.parameters();
            neural::adam_step(adam, params, config.adam());
            weighted += loss.value * static_cast<double>(end - start);
        }
        const double epoch_loss = weighted / static_cast<double>(split.train.size());
        if (!std::isfinite(epoch_loss) || epoch_loss > blowup) throw DivergenceError(epoch, epoch_loss);
        result.epoch_losses.push_back(epoch_loss);
    }
    result.final_train_loss = train_mse(model, split.train);
    if (!std::isfinite(result.final_train_loss)) {
        throw DivergenceError(config.epochs, result.final_train_loss);
    }

    result.predictions = predict_test_span(model, scaler, columns, frame, options.train_fraction);
    result.row = {row_label(dataset_prefix, config.variant),
                  evaluate(result.predictions.predicted, result.predictions.actual)};
    return result;
}

// --- Reports and comparison ---------------------------------------------------

nlohmann::json MetricsReport::to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset_label;
    j["seeds"] = seeds;
    auto& rj = j["rows"] = nlohmann::json::array();
    for (const auto& r : rows) rj.push_back(metrics_json(r));
    if (!per_seed.empty()) {
        auto& pj = j["per_seed"] = nlohmann::json::array();
        for (const auto& s : per_seed) {
            nlohmann::json e{{"seed", s.seed}, {"rows", nlohmann::json::array()}};
            for (const auto& r : s.rows) e["rows"].push_back(metrics_json(r));
            pj.push_back(std::move(e));
        }
    }
    if (dilated_win_rate) j["dilated_win_rate"] = *dilated_win_rate;
    return j;
}

std::string MetricsReport::to_table() const {
    std::size_t width = 5;
    for (const auto& r : rows) width = std::max(width, r.label.size());
    auto pad = [](std::string s, std::size_t w) {
        s.resize(std::max(s.size(), w), ' ');
        return s;
    };
    auto num = [](double v) {
        std::string s = io::format_fixed(v, 6);
        return std::string(std::max<std::size_t>(12, s.size()) - s.size(), ' ') + s;
    };
    std::ostringstream os;
    os << pad("Penalty", 8) << "  " << pad("Model", width) << "  " << std::string(9, ' ') << "MSE"
       << std::string(9, ' ') << "MAE" << std::string(8, ' ') << "MAPE\n";
    for (const auto& r : rows) {
        std::string pen = "-";
        if (r.label.rfind("RR-", 0) == 0) pen = "L2";
        else if (r.label.rfind("SCAD-", 0) == 0) pen = "L1";
        os << pad(pen, 8) << "  " << pad(r.label, width) << "  " << num(r.metrics.mse)
           << num(r.metrics.mae)
           << (r.metrics.mape ? num(*r.metrics.mape) : std::string(9, ' ') + "n/a") << '\n';
    }
    if (dilated_win_rate) {
        os << "DILATED_CNN-LSTM vs CNN-LSTM win rate (MSE): "
           << io::format_fixed(*dilated_win_rate, 3) << " over " << seeds.size() << " seed(s)\n";
    }
    return os.str();
}

MetricsReport single_report(const MetricsRow& row, const std::string& dataset_label,
                            std::uint64_t seed) {
    MetricsReport r;
    r.dataset_label = dataset_label;
    r.seeds = {seed};
    r.rows = {row};
    return r;
}

MetricsReport compare_variants(const TimeSeriesFrame& frame,
                               const std::vector<std::string>& rr_features,
                               const std::vector<std::string>& scad_features,
                               const neural::ModelConfig& base_config,
                               const std::vector<std::uint64_t>& seeds, unsigned threads,
                               const TrainOptions& options) {
    if (rr_features.empty() || scad_features.empty()) {
        throw DataError("compare_variants: both feature selections must be nonempty");
    }
    if (seeds.empty()) throw ConfigError("compare_variants: no seeds given");
    const auto t0 = std::chrono::steady_clock::now();

    struct Cell {
        std::string prefix;
        neural::Variant variant;
        const std::vector<std::string>* features;
    };
    const std::vector<Cell> cells{
        {"RR", neural::Variant::cnn, &rr_features},
        {"RR", neural::Variant::lstm, &rr_features},
        {"RR", neural::Variant::cnn_lstm, &rr_features},
        {"RR", neural::Variant::dilated_cnn_lstm, &rr_features},
        {"SCAD", neural::Variant::dilated_cnn_lstm, &scad_features},
    };
    const std::size_t total = seeds.size() * cells.size();
    std::vector<MetricsRow> results(total);
    std::vector<std::exception_ptr> errors(total);

    auto run_cell = [&](std::size_t job) {
        const std::size_t s = job / cells.size();
        const std::size_t k = job % cells.size();
        neural::ModelConfig cfg = base_config;
        cfg.variant = cells[k].variant;
        cfg.dilation = cells[k].variant == neural::Variant::dilated_cnn_lstm
                           ? std::max<Index>(base_config.dilation, 2)
                           : 1;
        cfg.seed = seeds[s] + static_cast<std::uint64_t>(k);
        try {
            results[job] = train_model(frame, *cells[k].features, cfg, cells[k].prefix, options).row;
        } catch (...) {
            errors[job] = std::current_exception();
        }
    };

    const unsigned workers = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(total)));
    if (workers == 1) {
        for (std::size_t job = 0; job < total; ++job) run_cell(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t job = next++; job < total; job = next++) run_cell(job);
            });
        }
        for (auto& t : pool) t.join();
    }
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);

    MetricsReport report;
    report.dataset_label = "RR/dataset-1 + SCAD/dataset-2";
    report.seeds = seeds;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
        SeedDetail d{seeds[s], {}};
        for (std::size_t k = 0; k < cells.size(); ++k) d.rows.push_back(results[s * cells.size() + k]);
        report.per_seed.push_back(std::move(d));
    }
    std::size_t wins = 0;
    for (const auto& d : report.per_seed)
        if (d.rows[3].metrics.mse < d.rows[2].metrics.mse) ++wins;
    report.dilated_win_rate = static_cast<double>(wins) / static_cast<double>(seeds.size());

    for (std::size_t k = 0; k < cells.size(); ++k) {
        MetricsRow mean{report.per_seed.front().rows[k].label, {}};
        double mape_sum = 0.0;
        bool mape_ok = true;
        for (const auto& d : report.per_seed) {
            const Metrics& m = d.rows[k].metrics;
            mean.metrics.mse += m.mse;
            mean.metrics.mae += m.mae;
            if (m.mape) mape_sum += *m.mape;
            else mape_ok = false;
        }
        const double n = static_cast<double>(seeds.size());
        mean.metrics.mse /= n;
        mean.metrics.mae /= n;
        if (mape_ok) mean.metrics.mape = mape_sum / n;
        report.rows.push_back(std::move(mean));
    }
    report.runtime_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return report;
}

}  // namespace hybridcast::pipeline
