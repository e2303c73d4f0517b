#include "hybridcast/synth.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace hybridcast::synth {

namespace {

const char* const kClusterPrefix[] = {"macro", "fin_energy", "blockchain"};

std::vector<std::string> feature_names(const SyntheticSpec& spec) {
    std::vector<std::string> names;
    for (std::size_t c = 0; c < spec.cluster_sizes.size(); ++c) {
        const std::string prefix = c < 3 ? kClusterPrefix[c] : "cluster" + std::to_string(c);
        for (Index k = 0; k < spec.cluster_sizes[c]; ++k) {
            char buf[16];
            std::snprintf(buf, sizeof buf, "_%02d", static_cast<int>(k + 1));
            names.push_back(prefix + buf);
        }
    }
    return names;
}

}  // namespace

Index SyntheticSpec::feature_count() const {
    Index n = 0;
    for (Index s : cluster_sizes) n += s;
    return n;
}

void SyntheticSpec::validate() const {
    auto fail = [](const std::string& m) { throw ParameterError("synthetic spec: " + m); };
    if (cluster_sizes.empty()) fail("need at least one cluster");
    for (Index s : cluster_sizes)
        if (s < 1) fail("cluster sizes must be positive");
    if (feature_count() != kIndicatorCount)
        fail("cluster sizes must sum to " + std::to_string(kIndicatorCount) + ", got " +
             std::to_string(feature_count()));
    if (lag < 1) fail("lag must be >= 1");
    if (n_days < lag + 10) {
        fail("n_days (" + std::to_string(n_days) + ") must be at least lag + 10");
    }
    if (!(noise_sd >= 0.0)) fail("noise_sd must be non-negative");
    if (weights.size() != true_support.size()) fail("one weight per support index required");
    std::set<Index> seen;
    for (Index j : true_support) {
        if (j < 0 || j >= feature_count()) fail("support index " + std::to_string(j) + " out of range");
        if (!seen.insert(j).second) fail("duplicate support index " + std::to_string(j));
    }
    if (!(std::abs(persistence) < 1.0)) fail("persistence must lie in (-1, 1)");
    if (!(cluster_corr >= 0.0 && cluster_corr <= 1.0)) fail("cluster_corr must lie in [0, 1]");
    if (!std::isfinite(ar_coef) || !std::isfinite(base_level)) fail("non-finite coefficients");
}

nlohmann::json SyntheticSpec::to_json() const {
    return {{"n_days", n_days},           {"cluster_sizes", cluster_sizes},
            {"true_support", true_support}, {"weights", weights},
            {"noise_sd", noise_sd},       {"lag", lag},
            {"ar_coef", ar_coef},         {"persistence", persistence},
            {"cluster_corr", cluster_corr}, {"base_level", base_level},
            {"seed", seed}};
}

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j) { return from_json(j, SyntheticSpec{}); }

SyntheticSpec SyntheticSpec::from_json(const nlohmann::json& j, const SyntheticSpec& base) {
    SyntheticSpec s = base;
    try {
        s.n_days = j.value("n_days", s.n_days);
        s.cluster_sizes = j.value("cluster_sizes", s.cluster_sizes);
        s.true_support = j.value("true_support", s.true_support);
        s.weights = j.value("weights", s.weights);
        s.noise_sd = j.value("noise_sd", s.noise_sd);
        s.lag = j.value("lag", s.lag);
        s.ar_coef = j.value("ar_coef", s.ar_coef);
        s.persistence = j.value("persistence", s.persistence);
        s.cluster_corr = j.value("cluster_corr", s.cluster_corr);
        s.base_level = j.value("base_level", s.base_level);
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("synthetic spec: ") + e.what());
    }
    return s;
}

nlohmann::json GroundTruth::to_json() const {
    return {{"spec", spec.to_json()},
            {"target", target_name},
            {"features", feature_names},
            {"support", support_names}};
}

std::vector<Date> weekday_calendar(Date start, Index count) {
    using namespace std::chrono;
    std::vector<Date> out;
    out.reserve(static_cast<std::size_t>(count));
    sys_days day{start};
    while (static_cast<Index>(out.size()) < count) {
        const weekday wd{day};
        if (wd != Saturday && wd != Sunday) out.emplace_back(day);
        day += days{1};
    }
    return out;
}

SyntheticPanel generate_synthetic_panel(const SyntheticSpec& spec) {
    spec.validate();
    const Index n = spec.n_days;
    const Index m = spec.feature_count();
    Rng rng(spec.seed);

    std::vector<Index> cluster_of;
    for (std::size_t c = 0; c < spec.cluster_sizes.size(); ++c)
        for (Index k = 0; k < spec.cluster_sizes[c]; ++k) cluster_of.push_back(static_cast<Index>(c));

    const double common = std::sqrt(spec.cluster_corr);
    const double idio = std::sqrt(1.0 - spec.cluster_corr);
    const double phi = spec.persistence;
    const double stationary_sd = 1.0 / std::sqrt(1.0 - phi * phi);

    MatrixXd x(n, m);
    const auto n_clusters = static_cast<Index>(spec.cluster_sizes.size());
    VectorXd factor(n_clusters);
    for (Index t = 0; t < n; ++t) {
        for (Index c = 0; c < n_clusters; ++c) factor[c] = rng.normal();
        for (Index j = 0; j < m; ++j) {
            const double shock = common * factor[cluster_of[static_cast<std::size_t>(j)]] + idio * rng.normal();
            x(t, j) = t == 0 ? stationary_sd * shock : phi * x(t - 1, j) + shock;
        }
    }

    VectorXd target(n);
    const double intercept = spec.base_level * (1.0 - spec.ar_coef);
    for (Index t = 0; t < n; ++t) {
        const double eps = spec.noise_sd * rng.normal();
        if (t < spec.lag) {
            target[t] = spec.base_level + eps;
            continue;
        }
        double signal = intercept + spec.ar_coef * target[t - 1];
        for (std::size_t k = 0; k < spec.true_support.size(); ++k)
            signal += spec.weights[k] * x(t - spec.lag, spec.true_support[k]);
        target[t] = signal + eps;
    }

    SyntheticPanel panel;
    const auto names = feature_names(spec);
    panel.frame.dates = weekday_calendar(
        Date{std::chrono::year{2017}, std::chrono::April, std::chrono::day{28}}, n);
    panel.frame.names = names;
    panel.frame.names.push_back(kTargetName);
    panel.frame.target_name = kTargetName;
    panel.frame.values.resize(n, m + 1);
    panel.frame.values.leftCols(m) = x;
    panel.frame.values.col(m) = target;

    panel.truth.spec = spec;
    panel.truth.feature_names = names;
    panel.truth.target_name = kTargetName;
    for (Index j : spec.true_support) panel.truth.support_names.push_back(names[static_cast<std::size_t>(j)]);
    return panel;
}

SupportScore score_support(const GroundTruth& truth, const std::vector<std::string>& selected) {
    const std::set<std::string> support(truth.support_names.begin(), truth.support_names.end());
    std::size_t hits = 0;
    for (const auto& s : selected) hits += support.count(s);
    SupportScore score;
    score.precision = selected.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(selected.size());
    score.recall = support.empty() ? 1.0 : static_cast<double>(hits) / static_cast<double>(support.size());
    score.contains_support = hits == support.size();
    return score;
}

}  // namespace hybridcast::synth
