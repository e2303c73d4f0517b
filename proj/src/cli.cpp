#include "hybridcast/cli.hpp"

#include "hybridcast/error.hpp"
#include "hybridcast/experiment.hpp"
#include "hybridcast/gradcheck.hpp"
#include "hybridcast/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iomanip>
#include <optional>
#include <ostream>

namespace hybridcast::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
    std::string config;
    std::string out = "out";
    std::optional<std::uint64_t> seed;
    std::optional<int> seeds;
    std::optional<int> epochs;
    std::optional<Index> dilation;
    std::optional<double> lambda;
    std::optional<double> ridge_lambda;
    std::optional<double> a;
    std::optional<double> lr;
    std::optional<std::string> variant;
    std::optional<std::string> init;
    std::optional<unsigned> threads;
    std::optional<Index> lag;

    bool all_features = false;
    std::string dataset = "rr";
    std::string selection;
    std::string checkpoint;
    std::string corrupt_block;
    std::optional<Index> n_days;
    std::optional<double> noise_sd;
};

void write_json(const fs::path& path, const nlohmann::json& j) {
    io::write_file_atomic(path, j.dump(2) + "\n");
}

nlohmann::json read_json(const fs::path& path, const std::string& what) {
    if (!fs::exists(path)) throw DataError(what + " not found: " + path.string());
    try {
        return nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": invalid JSON: " + e.what());
    }
}

// Config file (or built-in synthetic defaults) with command-line overrides.
// Overrides go through the same validation as the fields they replace.
ExperimentConfig resolve_config(const Options& o, bool synth_lag) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment(o.config);
    if (o.variant) {
        const auto v = neural::variant_from_string(*o.variant);
        if (v != c.model.variant) {
            c.model.variant = v;
            c.model.dilation = neural::ModelConfig::for_variant(v).dilation;
        }
    }
    if (o.seed) c.model.seed = *o.seed;
    if (o.seeds) c.seed_count = *o.seeds;
    if (o.epochs) c.model.epochs = *o.epochs;
    if (o.dilation) c.model.dilation = *o.dilation;
    if (o.lr) c.model.learning_rate = *o.lr;
    if (o.threads) c.threads = *o.threads;
    if (o.init) {
        if (*o.init == "uniform") c.model.init = neural::InitMode::uniform;
        else if (*o.init == "zero") c.model.init = neural::InitMode::zero;
        else throw ConfigError("--init must be 'uniform' or 'zero'");
    }
    if (o.lag) {
        if (synth_lag) c.synthetic.lag = *o.lag;
        else c.selection.lag = *o.lag;
    }
    if (o.n_days) c.synthetic.n_days = *o.n_days;
    if (o.noise_sd) c.synthetic.noise_sd = *o.noise_sd;
    // Round-trip the selection block through its validating parser.
    nlohmann::json sel = c.selection.to_json();
    if (o.lambda) sel["scad_lambda"] = *o.lambda;
    if (o.ridge_lambda) sel["ridge_lambda"] = *o.ridge_lambda;
    if (o.a) sel["a"] = *o.a;
    c.selection = pipeline::SelectionConfig::from_json(sel);
    if (!synth_lag) c.validate();
    return c;
}

void print_selection(std::ostream& out, const regsel::SelectionReport& r, std::size_t forwarded) {
    out << r.dataset_label << ": " << r.selected_count() << " of " << r.rows.size()
        << " indicators selected (lambda " << io::format_double(r.penalty.lambda) << "), "
        << forwarded << " forwarded to the forecaster\n";
}

int cmd_select(const Options& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(o, false);
    const TimeSeriesFrame frame = cfg.load_frame();
    const auto res = pipeline::run_selection(frame, cfg.selection, cfg.model.window, cfg.train_fraction);
    const fs::path dir = o.out;
    write_json(dir / "rr_selection.json", res.ridge.to_json());
    io::write_file_atomic(dir / "rr_selection.csv", res.ridge.to_csv());
    write_json(dir / "scad_selection.json", res.scad.to_json());
    io::write_file_atomic(dir / "scad_selection.csv", res.scad.to_csv());
    print_selection(out, res.ridge, pipeline::dataset_features(res.ridge, cfg.selection.rr_keep_all).size());
    print_selection(out, res.scad, res.scad.selected_count());
    if (res.scad.selected_count() == 0) {
        err << "warning: SCAD selected no indicators at lambda "
            << io::format_double(res.scad.penalty.lambda) << "\n";
    }
    return kOk;
}

struct FeatureChoice {
    std::vector<std::string> features;
    std::string prefix;
    std::string dataset_label;
};

FeatureChoice choose_features(const Options& o, const ExperimentConfig& cfg,
                              const TimeSeriesFrame& frame) {
    FeatureChoice fc;
    if (o.all_features) {
        for (const auto& n : frame.names)
            if (n != frame.target_name) fc.features.push_back(n);
        fc.prefix = "ALL";
        fc.dataset_label = "all-indicators";
        return fc;
    }
    const fs::path path = o.selection.empty() ? fs::path(o.out) / (o.dataset + "_selection.json")
                                              : fs::path(o.selection);
    const auto report = regsel::SelectionReport::from_json(read_json(path, "selection file"));
    const bool ridge = report.penalty.kind == regsel::PenaltyKind::ridge;
    fc.features = pipeline::dataset_features(report, ridge && cfg.selection.rr_keep_all);
    fc.prefix = ridge ? "RR" : "SCAD";
    fc.dataset_label = report.dataset_label;
    return fc;
}

nlohmann::json checkpoint_json(const pipeline::TrainResult& r, const FeatureChoice& fc,
                               double train_fraction) {
    nlohmann::json j = r.model.to_json();
    j["scaler"] = r.scaler.to_json();
    j["columns"] = r.columns;
    j["train_fraction"] = train_fraction;
    j["label"] = r.row.label;
    j["dataset"] = fc.dataset_label;
    return j;
}

void print_row(std::ostream& out, const pipeline::MetricsRow& row) {
    out << row.label << "  MSE " << io::format_fixed(row.metrics.mse, 6) << "  MAE "
        << io::format_fixed(row.metrics.mae, 6) << "  MAPE "
        << (row.metrics.mape ? io::format_fixed(*row.metrics.mape, 6) : std::string("n/a")) << "\n";
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
    if (o.dataset != "rr" && o.dataset != "scad") throw ConfigError("--dataset must be 'rr' or 'scad'");
    const ExperimentConfig cfg = resolve_config(o, false);
    const TimeSeriesFrame frame = cfg.load_frame();
    const FeatureChoice fc = choose_features(o, cfg, frame);
    if (fc.features.empty()) err << "warning: no indicators selected; training on the target history only\n";

    const auto r = pipeline::train_model(frame, fc.features, cfg.model, fc.prefix, cfg.train_options());
    const fs::path dir = o.out;
    write_json(dir / "checkpoint.json", checkpoint_json(r, fc, cfg.train_fraction));
    write_json(dir / "metrics.json",
               pipeline::single_report(r.row, fc.dataset_label, cfg.model.seed).to_json());
    io::write_file_atomic(dir / "predictions.csv", r.predictions.to_csv());
    write_json(dir / "training_log.json", {{"label", r.row.label},
                                           {"epochs", cfg.model.epochs},
                                           {"initial_train_loss", r.initial_train_loss},
                                           {"final_train_loss", r.final_train_loss},
                                           {"epoch_losses", r.epoch_losses}});
    print_row(out, r.row);
    return kOk;
}

int cmd_evaluate(const Options& o, std::ostream& out, std::ostream&) {
    const ExperimentConfig cfg = resolve_config(o, false);
    const fs::path dir = o.out;
    const fs::path ckpt = o.checkpoint.empty() ? dir / "checkpoint.json" : fs::path(o.checkpoint);
    const nlohmann::json j = read_json(ckpt, "checkpoint");
    const neural::Model model = neural::Model::from_json(j);
    pipeline::StandardScaler scaler;
    std::vector<std::string> columns;
    double train_fraction = 0.0;
    std::string label, dataset;
    try {
        scaler = pipeline::StandardScaler::from_json(j.at("scaler"));
        columns = j.at("columns").get<std::vector<std::string>>();
        train_fraction = j.at("train_fraction").get<double>();
        label = j.at("label").get<std::string>();
        dataset = j.at("dataset").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(ckpt.string() + ": malformed checkpoint: " + e.what());
    }
    const TimeSeriesFrame frame = cfg.load_frame();
    const auto preds = pipeline::predict_test_span(model, scaler, columns, frame, train_fraction);
    const pipeline::MetricsRow row{label, pipeline::evaluate(preds.predicted, preds.actual)};
    write_json(dir / "eval_metrics.json",
               pipeline::single_report(row, dataset, model.config().seed).to_json());
    io::write_file_atomic(dir / "eval_predictions.csv", preds.to_csv());
    print_row(out, row);
    return kOk;
}

int cmd_compare(const Options& o, std::ostream& out, std::ostream& err) {
    const ExperimentConfig cfg = resolve_config(o, false);
    const TimeSeriesFrame frame = cfg.load_frame();
    const fs::path dir = o.out;
    const fs::path rr_path = dir / "rr_selection.json";
    const fs::path scad_path = dir / "scad_selection.json";

    regsel::SelectionReport rr, scad;
    if (fs::exists(rr_path) && fs::exists(scad_path)) {
        rr = regsel::SelectionReport::from_json(read_json(rr_path, "selection file"));
        scad = regsel::SelectionReport::from_json(read_json(scad_path, "selection file"));
        err << "using selections from " << dir.string() << "\n";
    } else {
        const auto res =
            pipeline::run_selection(frame, cfg.selection, cfg.model.window, cfg.train_fraction);
        rr = res.ridge;
        scad = res.scad;
        write_json(rr_path, rr.to_json());
        io::write_file_atomic(dir / "rr_selection.csv", rr.to_csv());
        write_json(scad_path, scad.to_json());
        io::write_file_atomic(dir / "scad_selection.csv", scad.to_csv());
    }
    const auto rr_features = pipeline::dataset_features(rr, cfg.selection.rr_keep_all);
    const auto scad_features = pipeline::dataset_features(scad, false);
    if (rr_features.empty() || scad_features.empty()) {
        throw DataError("compare needs nonempty RR and SCAD selections (RR " +
                        std::to_string(rr_features.size()) + ", SCAD " +
                        std::to_string(scad_features.size()) + ")");
    }

    const auto report = pipeline::compare_variants(frame, rr_features, scad_features, cfg.model,
                                                   cfg.seeds(), cfg.threads, cfg.train_options());
    write_json(dir / "compare.json", report.to_json());
    io::write_file_atomic(dir / "compare.txt", report.to_table());
    out << report.to_table();
    out << "runtime " << io::format_fixed(report.runtime_seconds, 1) << " s\n";
    return kOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out, std::ostream& err) {
    neural::GradCheckOptions opts;
    if (o.seed) opts.seed = *o.seed;
    opts.corrupt_block = o.corrupt_block;
    const auto report = neural::run_gradient_checks(opts);
    if (!o.corrupt_block.empty()) {
        const bool known = std::any_of(report.blocks.begin(), report.blocks.end(),
                                       [&](const auto& b) { return b.block == o.corrupt_block; });
        if (!known) throw ConfigError("--corrupt-block: no block named '" + o.corrupt_block + "'");
    }
    std::size_t width = 5;
    for (const auto& b : report.blocks) width = std::max(width, b.block.size());
    out << std::left << std::setw(static_cast<int>(width)) << "block" << "  max_rel_error  entries  status\n";
    for (const auto& b : report.blocks) {
        char err_buf[32];
        std::snprintf(err_buf, sizeof err_buf, "%13.3e", b.max_rel_error);
        out << std::left << std::setw(static_cast<int>(width)) << b.block << "  " << err_buf << "  "
            << std::right << std::setw(7) << b.entries << "  " << (b.passed ? "ok" : "FAIL") << "\n";
    }
    if (report.passed()) {
        out << "all " << report.blocks.size() << " blocks within " << io::format_double(report.tolerance) << "\n";
        return kOk;
    }
    std::string failed;
    for (const auto& name : report.failed_blocks()) failed += (failed.empty() ? "" : ", ") + name;
    err << "error: gradient check failed for: " << failed << "\n";
    return kNumericalError;
}

int cmd_synth(const Options& o, std::ostream& out, std::ostream&) {
    ExperimentConfig cfg = resolve_config(o, true);
    if (o.seed) cfg.synthetic.seed = *o.seed;
    const auto panel = synth::generate_synthetic_panel(cfg.synthetic);
    const fs::path dir = o.out;
    io::write_file_atomic(dir / "synthetic_panel.csv", panel.frame.to_csv());
    write_json(dir / "ground_truth.json", panel.truth.to_json());
    out << "wrote " << panel.frame.rows() << " rows x " << panel.frame.cols() + 1 << " columns to "
        << (dir / "synthetic_panel.csv").string() << "\n";
    return kOk;
}

int fail(std::ostream& err, int code, const std::string& msg) {
    err << "error: " << msg << "\n";
    return code;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    Options o;
    CLI::App app{"Indicator screening (ridge / SCAD) and CNN/LSTM price forecasting", "hybridcast"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    app.add_option("--config", o.config, "Experiment config JSON (default: built-in synthetic panel)");
    app.add_option("--out", o.out, "Output directory")->capture_default_str();
    app.add_option("--seed", o.seed, "Model seed (synth: panel seed, gradcheck: probe seed)");
    app.add_option("--seeds", o.seeds, "Number of comparison seeds");
    app.add_option("--epochs", o.epochs, "Training epochs");
    app.add_option("--dilation", o.dilation, "Convolution dilation");
    app.add_option("--lambda", o.lambda, "SCAD penalty strength");
    app.add_option("--ridge-lambda", o.ridge_lambda, "Ridge penalty strength");
    app.add_option("--a", o.a, "SCAD shape parameter (> 2)");
    app.add_option("--lr", o.lr, "Adam learning rate");
    app.add_option("--variant", o.variant, "cnn | lstm | cnn_lstm | dilated_cnn_lstm");
    app.add_option("--init", o.init, "Initialization: uniform | zero");
    app.add_option("--threads", o.threads, "Worker threads for compare");
    app.add_option("--lag", o.lag, "Indicator lag (select/compare) or panel lag (synth)");

    auto* select = app.add_subcommand("select", "Ridge and SCAD indicator screening");
    auto* train = app.add_subcommand("train", "Train one forecaster and score its test span");
    train->add_flag("--all-features", o.all_features, "Use every indicator, skipping selection");
    train->add_option("--dataset", o.dataset, "Selection to use: rr | scad")->capture_default_str();
    train->add_option("--selection", o.selection, "Selection report path (overrides --dataset)");
    auto* evaluate = app.add_subcommand("evaluate", "Re-score a saved checkpoint");
    evaluate->add_option("--checkpoint", o.checkpoint, "Checkpoint path (default OUT/checkpoint.json)");
    auto* compare = app.add_subcommand("compare", "Five-row variant comparison over seeds");
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every gradient");
    gradcheck->add_option("--corrupt-block", o.corrupt_block, "Test hook: perturb one block's gradient");
    auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic panel and its ground truth");
    synth_cmd->add_option("--n-days", o.n_days, "Rows in the panel");
    synth_cmd->add_option("--noise-sd", o.noise_sd, "Target noise scale");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsageError;
    }

    try {
        if (select->parsed()) return cmd_select(o, out, err);
        if (train->parsed()) return cmd_train(o, out, err);
        if (evaluate->parsed()) return cmd_evaluate(o, out, err);
        if (compare->parsed()) return cmd_compare(o, out, err);
        if (gradcheck->parsed()) return cmd_gradcheck(o, out, err);
        if (synth_cmd->parsed()) return cmd_synth(o, out, err);
        return fail(err, kUsageError, "no subcommand");
    } catch (const ConfigError& e) {
        return fail(err, kUsageError, e.what());
    } catch (const ParameterError& e) {
        return fail(err, kUsageError, e.what());
    } catch (const DataError& e) {
        return fail(err, kDataError, e.what());
    } catch (const ShapeError& e) {
        return fail(err, kDataError, e.what());
    } catch (const DivergenceError& e) {
        return fail(err, kNumericalError, e.what());
    } catch (const SingularMatrixError& e) {
        return fail(err, kNumericalError, e.what());
    } catch (const IllConditionedError& e) {
        return fail(err, kNumericalError, e.what());
    } catch (const fs::filesystem_error& e) {
        return fail(err, kDataError, e.what());
    } catch (const std::exception& e) {
        return fail(err, kNumericalError, e.what());
    }
}

}  // namespace hybridcast::cli
