#pragma once

// The four forecaster wirings (CNN, LSTM, CNN-LSTM, dilated CNN-LSTM) built
// from the layer primitives, with a versioned JSON checkpoint.

#include "hybridcast/neural.hpp"

#include <json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace hybridcast::neural {

enum class Variant { cnn, lstm, cnn_lstm, dilated_cnn_lstm };

std::string to_string(Variant v);
// Accepts the snake_case names and the report labels ("DILATED_CNN-LSTM").
Variant variant_from_string(const std::string& s);
// Report label: "CNN", "LSTM", "CNN-LSTM", "DILATED_CNN-LSTM".
std::string variant_label(Variant v);

enum class InitMode { uniform, zero };

struct ModelConfig {
    Variant variant = Variant::dilated_cnn_lstm;
    Index dilation = 2;
    // Negative: shape-preserving padding (p = dilation).
    Index padding = -1;
    Index window = 5;
    Index channels = 16;
    Index hidden = 32;
    double learning_rate = 1e-3;
    Index batch_size = 64;
    int epochs = 100;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    InitMode init = InitMode::uniform;
    std::uint64_t seed = 7;

    // Defaults for a variant: dilation 2 for the dilated wiring, 1 otherwise.
    static ModelConfig for_variant(Variant v);

    Index effective_padding() const { return padding < 0 ? dilation : padding; }
    AdamOptions adam() const { return {learning_rate, beta1, beta2, epsilon}; }

    // Throws ConfigError on inconsistent fields (e.g. dilated with d < 2).
    void validate() const;

    nlohmann::json to_json() const;
    static ModelConfig from_json(const nlohmann::json& j);
    static ModelConfig from_json(const nlohmann::json& j, const ModelConfig& base);
};

struct ModelCache {
    Conv2dCache conv;
    Tensor conv_out;
    std::vector<MatrixXd> lstm_inputs;
    std::vector<LstmState> lstm_states;
    MatrixXd head_input;
    Index batch = 0;
};

struct ModelGrads {
    Conv2dGrads conv;
    LstmGrads lstm;
    DenseGrads dense;
};

class Model {
public:
    Model(const ModelConfig& config, Index features);

    const ModelConfig& config() const { return config_; }
    Index features() const { return features_; }
    bool uses_conv() const { return config_.variant != Variant::lstm; }
    bool uses_lstm() const { return config_.variant != Variant::cnn; }

    // windows: batch x T x F. Returns one prediction per window.
    Eigen::RowVectorXd forward(const Tensor& windows, ModelCache* cache = nullptr) const;

    // Gradients of a loss whose derivative w.r.t. the predictions is
    // `grad_pred`, stored in grads().
    void backward(const ModelCache& cache, const Eigen::RowVectorXd& grad_pred);

    // Parameter blocks in a fixed order: conv.weight, conv.bias, lstm.W_f,
    // lstm.W_i, lstm.W_g, lstm.W_o, lstm.b_f, lstm.b_i, lstm.b_g, lstm.b_o,
    // dense.weight, dense.bias (absent layers skipped).
    std::vector<ParamView> parameters();
    std::vector<std::string> parameter_names() const;

    Conv2dLayer& conv() { return conv_; }
    const Conv2dLayer& conv() const { return conv_; }
    LstmParams& lstm() { return lstm_; }
    const LstmParams& lstm() const { return lstm_; }
    DenseLayer& dense() { return dense_; }
    const DenseLayer& dense() const { return dense_; }
    ModelGrads& grads() { return grads_; }

    // Re-draws every parameter uniformly in +-1/sqrt(fan_in).
    void initialize(Rng& rng);

    nlohmann::json to_json() const;
    static Model from_json(const nlohmann::json& j);

private:
    Index conv_rows() const;
    Index conv_cols() const;
    Index head_inputs() const;

    ModelConfig config_;
    Index features_;
    Conv2dLayer conv_;
    LstmParams lstm_;
    DenseLayer dense_;
    ModelGrads grads_;
};

inline constexpr int kCheckpointVersion = 1;
inline constexpr const char* kCheckpointFormat = "hybridcast-checkpoint";

}  // namespace hybridcast::neural
