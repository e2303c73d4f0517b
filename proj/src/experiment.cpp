#include "hybridcast/experiment.hpp"

#include "hybridcast/io.hpp"

namespace hybridcast {

namespace {

DataSource source_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
    DataSource s;
    if (j.is_string()) {
        s.path = j.get<std::string>();
    } else {
        s.path = j.at("path").get<std::string>();
        if (j.contains("column")) s.columns = {j["column"].get<std::string>()};
        if (j.contains("columns")) s.columns = j["columns"].get<std::vector<std::string>>();
    }
    if (s.path.is_relative() && !base_dir.empty()) s.path = base_dir / s.path;
    return s;
}

nlohmann::json source_to_json(const DataSource& s) {
    return {{"path", s.path.generic_string()}, {"columns", s.columns}};
}

}  // namespace

std::vector<std::uint64_t> ExperimentConfig::seeds() const {
    std::vector<std::uint64_t> out;
    for (int s = 0; s < seed_count; ++s) out.push_back(model.seed + 100u * static_cast<std::uint64_t>(s));
    return out;
}

void ExperimentConfig::validate() const {
    model.validate();
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
        throw ConfigError("train_fraction must lie in (0, 1)");
    }
    if (!(divergence_factor > 1.0)) throw ConfigError("divergence_factor must exceed 1");
    if (seed_count < 1) throw ConfigError("seeds must be >= 1");
    if (threads < 1) throw ConfigError("threads must be >= 1");
    if (uses_files() && target.columns.size() > 1) {
        throw ConfigError("data.target must name exactly one column");
    }
    if (!uses_files()) {
        try {
            synthetic.validate();
        } catch (const ParameterError& e) {
            throw ConfigError(e.what());
        }
    }
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j,
                                             const std::filesystem::path& base_dir) {
    if (!j.is_object()) throw ConfigError("experiment config must be a JSON object");
    ExperimentConfig c;
    try {
        if (j.contains("data")) {
            const auto& d = j["data"];
            c.date_column = d.value("date_column", c.date_column);
            c.target = source_from_json(d.at("target"), base_dir);
            for (const auto& e : d.value("exogenous", nlohmann::json::array()))
                c.exogenous.push_back(source_from_json(e, base_dir));
        }
        if (j.contains("synthetic")) c.synthetic = synth::SyntheticSpec::from_json(j["synthetic"]);
        if (j.contains("model")) c.model = neural::ModelConfig::from_json(j["model"]);
        if (j.contains("selection")) c.selection = pipeline::SelectionConfig::from_json(j["selection"]);
        if (j.contains("seed")) c.model.seed = j["seed"].get<std::uint64_t>();
        c.seed_count = j.value("seeds", c.seed_count);
        c.threads = j.value("threads", c.threads);
        c.train_fraction = j.value("train_fraction", c.train_fraction);
        c.divergence_factor = j.value("divergence_factor", c.divergence_factor);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("experiment config: ") + e.what());
    }
    c.validate();
    return c;
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json j;
    if (uses_files()) {
        nlohmann::json exo = nlohmann::json::array();
        for (const auto& e : exogenous) exo.push_back(source_to_json(e));
        j["data"] = {{"date_column", date_column}, {"target", source_to_json(target)}, {"exogenous", exo}};
    } else {
        j["synthetic"] = synthetic.to_json();
    }
    j["model"] = model.to_json();
    j["selection"] = selection.to_json();
    j["seed"] = model.seed;
    j["seeds"] = seed_count;
    j["threads"] = threads;
    j["train_fraction"] = train_fraction;
    j["divergence_factor"] = divergence_factor;
    return j;
}

TimeSeriesFrame ExperimentConfig::load_frame() const {
    if (!uses_files()) return synth::generate_synthetic_panel(synthetic).frame;
    TimeSeriesFrame tgt = load_csv_series(target.path, date_column, target.columns);
    // Without an explicit column the first value column is the target.
    if (tgt.cols() > 1) tgt = tgt.select({tgt.target_name});
    std::vector<TimeSeriesFrame> exo;
    for (const auto& e : exogenous) exo.push_back(load_csv_series(e.path, date_column, e.columns));
    return align_series(tgt, exo);
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw ConfigError("config file not found: " + path.string());
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(io::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": invalid JSON: " + e.what());
    }
    return ExperimentConfig::from_json(j, path.parent_path());
}

}  // namespace hybridcast
