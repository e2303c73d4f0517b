#pragma once

// Synthetic stand-in for a 53-indicator, three-cluster panel with a known
// sparse predictive support, so selection and forecasting can be scored.

#include "hybridcast/frame.hpp"

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace hybridcast::synth {

inline constexpr Index kIndicatorCount = 53;

struct SyntheticSpec {
    Index n_days = 1060;
    // macro, financial/energy, blockchain.
    std::vector<Index> cluster_sizes{13, 25, 15};
    std::vector<Index> true_support{3, 15, 27, 40, 47};
    std::vector<double> weights{1.0, -0.8, 0.7, 0.9, -0.6};
    double noise_sd = 0.5;
    Index lag = 1;
    double ar_coef = 0.3;       // weight on target_{t-1}
    double persistence = 0.9;   // AR(1) coefficient of every indicator
    double cluster_corr = 0.5;  // shock correlation inside a cluster
    double base_level = 30.0;   // unconditional target mean
    std::uint64_t seed = 7;

    Index feature_count() const;
    // Throws ParameterError when the spec is inconsistent.
    void validate() const;

    nlohmann::json to_json() const;
    static SyntheticSpec from_json(const nlohmann::json& j);
    static SyntheticSpec from_json(const nlohmann::json& j, const SyntheticSpec& base);
};

struct GroundTruth {
    SyntheticSpec spec;
    std::vector<std::string> feature_names;
    std::vector<std::string> support_names;
    std::string target_name;

    nlohmann::json to_json() const;
};

struct SyntheticPanel {
    TimeSeriesFrame frame;  // columns: indicators..., then the target
    GroundTruth truth;
};

inline constexpr const char* kTargetName = "close";

// Indicators: x_t = phi x_{t-1} + s_t, where each shock mixes a cluster
// factor and an idiosyncratic draw so same-cluster shocks correlate at
// `cluster_corr`. Target: base (1 - ar) + sum_j w_j x_{j,t-lag}
// + ar * target_{t-1} + eps_t. Dates are consecutive weekdays from
// 2017-04-28.
SyntheticPanel generate_synthetic_panel(const SyntheticSpec& spec);

// Consecutive Monday-Friday dates starting at `start` (moved forward to a
// weekday if needed).
std::vector<Date> weekday_calendar(Date start, Index count);

struct SupportScore {
    double precision = 0.0;
    double recall = 0.0;
    bool contains_support = false;
};

SupportScore score_support(const GroundTruth& truth, const std::vector<std::string>& selected);

}  // namespace hybridcast::synth
