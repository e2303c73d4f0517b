#pragma once

// Experiment configuration: where the data comes from, the model and
// selection settings, and the seeds. One JSON document drives every CLI
// command; command-line flags only override fields of it.

#include "hybridcast/pipeline.hpp"
#include "hybridcast/synth.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace hybridcast {

// One CSV file and the value columns to take from it (empty: all).
struct DataSource {
    std::filesystem::path path;
    std::vector<std::string> columns;
};

struct ExperimentConfig {
    // Used when `target` has no path.
    synth::SyntheticSpec synthetic;
    DataSource target;  // exactly one column: the forecast target
    std::vector<DataSource> exogenous;
    std::string date_column = "date";

    neural::ModelConfig model;
    pipeline::SelectionConfig selection;
    double train_fraction = 0.9;
    double divergence_factor = 100.0;
    // Comparison seeds are model.seed + 100 * s for s < seed_count.
    int seed_count = 1;
    unsigned threads = 1;

    bool uses_files() const { return !target.path.empty(); }
    std::vector<std::uint64_t> seeds() const;
    pipeline::TrainOptions train_options() const { return {train_fraction, divergence_factor}; }

    // Throws ConfigError on inconsistent settings.
    void validate() const;

    // Relative data paths resolve against `base_dir`.
    static ExperimentConfig from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir = {});
    nlohmann::json to_json() const;

    // Synthetic panel, or the target CSV aligned with every exogenous CSV.
    TimeSeriesFrame load_frame() const;
};

// Reads and parses a config file. A missing file is a ConfigError naming it.
ExperimentConfig load_experiment(const std::filesystem::path& path);

}  // namespace hybridcast
