#include "hybridcast/model.hpp"

#include <cmath>

namespace hybridcast::neural {

namespace {

void fill_uniform(Rng& rng, double* data, Index n, double bound) {
    for (Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

nlohmann::json block_json(const double* data, Index rows, Index cols) {
    // Stored row-major regardless of the in-memory layout.
    std::vector<double> flat;
    flat.reserve(static_cast<std::size_t>(rows * cols));
    const Eigen::Map<const MatrixXd> m(data, rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) flat.push_back(m(r, c));
    return {{"shape", {rows, cols}}, {"data", flat}};
}

void read_block(const nlohmann::json& j, double* data, Index rows, Index cols,
                const std::string& name) {
    const auto shape = j.at("shape").get<std::vector<Index>>();
    const auto flat = j.at("data").get<std::vector<double>>();
    if (shape.size() != 2 || shape[0] != rows || shape[1] != cols ||
        static_cast<Index>(flat.size()) != rows * cols) {
        throw ShapeError("checkpoint block " + name + " has shape incompatible with " +
                         shape_string(rows, cols));
    }
    Eigen::Map<MatrixXd> m(data, rows, cols);
    for (Index r = 0; r < rows; ++r)
        for (Index c = 0; c < cols; ++c) m(r, c) = flat[static_cast<std::size_t>(r * cols + c)];
}

std::span<double> span_of(MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<const double> cspan_of(const MatrixXd& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> cspan_of(const VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}

}  // namespace

std::string to_string(Variant v) {
    switch (v) {
        case Variant::cnn: return "cnn";
        case Variant::lstm: return "lstm";
        case Variant::cnn_lstm: return "cnn_lstm";
        case Variant::dilated_cnn_lstm: return "dilated_cnn_lstm";
    }
    return "cnn";
}

Variant variant_from_string(const std::string& s) {
    if (s == "cnn" || s == "CNN") return Variant::cnn;
    if (s == "lstm" || s == "LSTM") return Variant::lstm;
    if (s == "cnn_lstm" || s == "CNN-LSTM") return Variant::cnn_lstm;
    if (s == "dilated_cnn_lstm" || s == "DILATED_CNN-LSTM") return Variant::dilated_cnn_lstm;
    throw ConfigError("unknown model variant '" + s + "'");
}

std::string variant_label(Variant v) {
    switch (v) {
        case Variant::cnn: return "CNN";
        case Variant::lstm: return "LSTM";
        case Variant::cnn_lstm: return "CNN-LSTM";
        case Variant::dilated_cnn_lstm: return "DILATED_CNN-LSTM";
    }
    return "CNN";
}

ModelConfig ModelConfig::for_variant(Variant v) {
    ModelConfig c;
    c.variant = v;
    c.dilation = v == Variant::dilated_cnn_lstm ? 2 : 1;
    return c;
}

void ModelConfig::validate() const {
    auto fail = [](const std::string& msg) { throw ConfigError("model config: " + msg); };
    if (window < 1) fail("window must be >= 1");
    if (channels < 1) fail("channels must be >= 1");
    if (hidden < 1) fail("hidden must be >= 1");
    if (batch_size < 1) fail("batch_size must be >= 1");
    if (epochs < 0) fail("epochs must be >= 0");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) fail("learning_rate must be > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
        fail("adam betas must lie in [0, 1)");
    }
    if (!(epsilon > 0.0)) fail("adam epsilon must be > 0");
    if (dilation < 1) fail("dilation must be >= 1");
    if (padding < -1) fail("padding must be >= 0 (or -1 for shape-preserving)");
    if (variant == Variant::dilated_cnn_lstm && dilation < 2) {
        fail("dilated_cnn_lstm requires dilation >= 2");
    }
    if ((variant == Variant::cnn_lstm || variant == Variant::cnn) && dilation != 1) {
        fail(to_string(variant) + " requires dilation = 1");
    }
}

nlohmann::json ModelConfig::to_json() const {
    return {{"variant", to_string(variant)},
            {"dilation", dilation},
            {"padding", padding},
            {"window", window},
            {"channels", channels},
            {"hidden", hidden},
            {"learning_rate", learning_rate},
            {"batch_size", batch_size},
            {"epochs", epochs},
            {"adam", {{"beta1", beta1}, {"beta2", beta2}, {"epsilon", epsilon}}},
            {"init", init == InitMode::zero ? "zero" : "uniform"},
            {"seed", seed}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) { return from_json(j, ModelConfig{}); }

ModelConfig ModelConfig::from_json(const nlohmann::json& j, const ModelConfig& base) {
    ModelConfig c = base;
    try {
        if (j.contains("variant")) {
            c.variant = variant_from_string(j.at("variant").get<std::string>());
            if (!j.contains("dilation")) c.dilation = for_variant(c.variant).dilation;
        }
        c.dilation = j.value("dilation", c.dilation);
        c.padding = j.value("padding", c.padding);
        c.window = j.value("window", c.window);
        c.channels = j.value("channels", c.channels);
        c.hidden = j.value("hidden", c.hidden);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.epochs = j.value("epochs", c.epochs);
        if (j.contains("adam")) {
            const auto& a = j.at("adam");
            c.beta1 = a.value("beta1", c.beta1);
            c.beta2 = a.value("beta2", c.beta2);
            c.epsilon = a.value("epsilon", c.epsilon);
        }
        if (j.contains("init")) {
            const auto s = j.at("init").get<std::string>();
            if (s == "zero") c.init = InitMode::zero;
            else if (s == "uniform") c.init = InitMode::uniform;
            else throw ConfigError("model config: init must be 'uniform' or 'zero'");
        }
        c.seed = j.value("seed", c.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    return c;
}

Model::Model(const ModelConfig& config, Index features) : config_(config), features_(features) {
    config_.validate();
    if (features < 1) throw ParameterError("Model: need at least one input feature");
    if (uses_conv()) {
        conv_ = Conv2dLayer(1, config_.channels, config_.dilation, config_.effective_padding());
        if (conv_rows() <= 0 || conv_cols() <= 0) {
            throw ShapeError("Model: window " + shape_string(config_.window, features) +
                             " is smaller than the dilated kernel extent");
        }
        grads_.conv = {Tensor(), MatrixXd::Zero(conv_.weight.rows(), conv_.weight.cols()),
                       VectorXd::Zero(conv_.out_channels)};
    }
    if (uses_lstm()) {
        const Index in = uses_conv() ? config_.channels * conv_cols() : features_;
        lstm_ = LstmParams::zeros(config_.hidden, in);
        grads_.lstm = LstmGrads::zeros_like(lstm_, 0, 0);
    }
    dense_.weight = VectorXd::Zero(head_inputs());
    dense_.bias = 0.0;
    grads_.dense.weight = VectorXd::Zero(head_inputs());
}

Index Model::conv_rows() const { return conv_.output_extent(config_.window); }
Index Model::conv_cols() const { return conv_.output_extent(features_); }

Index Model::head_inputs() const {
    if (uses_lstm()) return config_.hidden;
    return config_.channels * conv_rows() * conv_cols();
}

void Model::initialize(Rng& rng) {
    if (uses_conv()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(conv_.weight.cols()));
        fill_uniform(rng, conv_.weight.data(), conv_.weight.size(), bound);
        fill_uniform(rng, conv_.bias.data(), conv_.bias.size(), bound);
    }
    if (uses_lstm()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(lstm_.w_f.cols()));
        for (MatrixXd* w : {&lstm_.w_f, &lstm_.w_i, &lstm_.w_g, &lstm_.w_o})
            fill_uniform(rng, w->data(), w->size(), bound);
        for (VectorXd* b : {&lstm_.b_f, &lstm_.b_i, &lstm_.b_g, &lstm_.b_o})
            fill_uniform(rng, b->data(), b->size(), bound);
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(dense_.weight.size()));
    fill_uniform(rng, dense_.weight.data(), dense_.weight.size(), bound);
    dense_.bias = rng.uniform(-bound, bound);
}

Eigen::RowVectorXd Model::forward(const Tensor& windows, ModelCache* cache) const {
    if (windows.rank() != 3 || windows.dim(1) != config_.window || windows.dim(2) != features_) {
        throw ShapeError("Model::forward: expected batch x " + std::to_string(config_.window) +
                         " x " + std::to_string(features_) + " windows, got " +
                         windows.shape_str());
    }
    const Index batch = windows.dim(0);
    ModelCache local;
    ModelCache& c = cache ? *cache : local;
    c.batch = batch;
    c.lstm_inputs.clear();
    c.lstm_states.clear();

    if (uses_conv()) {
        const Tensor image({batch, 1, config_.window, features_}, windows.values());
        c.conv_out = conv2d_forward(conv_, image, &c.conv);
    }

    if (config_.variant == Variant::cnn) {
        const Index flat = head_inputs();
        c.head_input = Eigen::Map<const MatrixXd>(c.conv_out.data(), flat, batch);
        return dense_forward(dense_, c.head_input);
    }

    if (uses_conv()) {
        const Index steps = conv_rows();
        const Index cols = conv_cols();
        const Index ch = config_.channels;
        for (Index t = 0; t < steps; ++t) {
            MatrixXd x(ch * cols, batch);
            for (Index b = 0; b < batch; ++b)
                for (Index o = 0; o < ch; ++o)
                    x.col(b).segment(o * cols, cols) = Eigen::Map<const VectorXd>(
                        c.conv_out.data() + ((b * ch + o) * steps + t) * cols, cols);
            c.lstm_inputs.push_back(std::move(x));
        }
    } else {
        for (Index t = 0; t < config_.window; ++t) {
            MatrixXd x(features_, batch);
            for (Index b = 0; b < batch; ++b)
                for (Index f = 0; f < features_; ++f) x(f, b) = windows(b, t, f);
            c.lstm_inputs.push_back(std::move(x));
        }
    }

    c.lstm_states.push_back(LstmState::zeros(config_.hidden, batch));
    for (const auto& x : c.lstm_inputs) c.lstm_states.push_back(lstm_step(lstm_, x, c.lstm_states.back()));
    c.head_input = c.lstm_states.back().h;
    return dense_forward(dense_, c.head_input);
}

void Model::backward(const ModelCache& cache, const Eigen::RowVectorXd& grad_pred) {
    if (grad_pred.size() != cache.batch) {
        throw ShapeError("Model::backward: gradient length does not match cached batch");
    }
    grads_.dense = dense_backward(dense_, cache.head_input, grad_pred);
    if (!uses_conv() && !uses_lstm()) return;

    Tensor conv_grad;
    if (uses_lstm()) {
        const std::size_t steps = cache.lstm_inputs.size();
        std::vector<MatrixXd> grad_h(steps, MatrixXd::Zero(config_.hidden, cache.batch));
        grad_h.back() = grads_.dense.input;
        grads_.lstm = lstm_backward(lstm_, cache.lstm_inputs, cache.lstm_states, grad_h);
        if (!uses_conv()) return;

        const Index cols = conv_cols();
        const Index ch = config_.channels;
        conv_grad = Tensor(cache.conv_out.shape());
        for (std::size_t t = 0; t < steps; ++t) {
            const MatrixXd& gx = grads_.lstm.inputs[t];
            const auto rows = static_cast<Index>(steps);
            for (Index b = 0; b < cache.batch; ++b)
                for (Index o = 0; o < ch; ++o)
                    Eigen::Map<VectorXd>(conv_grad.data() +
                                             ((b * ch + o) * rows + static_cast<Index>(t)) * cols,
                                         cols) = gx.col(b).segment(o * cols, cols);
        }
    } else {
        conv_grad = Tensor(cache.conv_out.shape());
        Eigen::Map<MatrixXd>(conv_grad.data(), grads_.dense.input.rows(), cache.batch) =
            grads_.dense.input;
    }
    grads_.conv = conv2d_backward(conv_, cache.conv, conv_grad);
}

std::vector<ParamView> Model::parameters() {
    std::vector<ParamView> out;
    if (uses_conv()) {
        out.push_back({"conv.kernel", span_of(conv_.weight), cspan_of(grads_.conv.weight)});
        out.push_back({"conv.bias", span_of(conv_.bias), cspan_of(grads_.conv.bias)});
    }
    if (uses_lstm()) {
        auto& g = grads_.lstm;
        if (g.w_f.size() != lstm_.w_f.size()) g = LstmGrads::zeros_like(lstm_, 0, 0);
        out.push_back({"lstm.W_f", span_of(lstm_.w_f), cspan_of(g.w_f)});
        out.push_back({"lstm.W_i", span_of(lstm_.w_i), cspan_of(g.w_i)});
        out.push_back({"lstm.W_g", span_of(lstm_.w_g), cspan_of(g.w_g)});
        out.push_back({"lstm.W_o", span_of(lstm_.w_o), cspan_of(g.w_o)});
        out.push_back({"lstm.b_f", span_of(lstm_.b_f), cspan_of(g.b_f)});
        out.push_back({"lstm.b_i", span_of(lstm_.b_i), cspan_of(g.b_i)});
        out.push_back({"lstm.b_g", span_of(lstm_.b_g), cspan_of(g.b_g)});
        out.push_back({"lstm.b_o", span_of(lstm_.b_o), cspan_of(g.b_o)});
    }
    out.push_back({"dense.weight", span_of(dense_.weight), cspan_of(grads_.dense.weight)});
    out.push_back({"dense.bias", {&dense_.bias, 1}, {&grads_.dense.bias, 1}});
    return out;
}

std::vector<std::string> Model::parameter_names() const {
    std::vector<std::string> names;
    for (const auto& p : const_cast<Model*>(this)->parameters()) names.push_back(p.name);
    return names;
}

nlohmann::json Model::to_json() const {
    nlohmann::json params = nlohmann::json::object();
    if (uses_conv()) {
        params["conv.kernel"] = block_json(conv_.weight.data(), conv_.weight.rows(), conv_.weight.cols());
        params["conv.bias"] = block_json(conv_.bias.data(), conv_.bias.size(), 1);
    }
    if (uses_lstm()) {
        params["lstm.W_f"] = block_json(lstm_.w_f.data(), lstm_.w_f.rows(), lstm_.w_f.cols());
        params["lstm.W_i"] = block_json(lstm_.w_i.data(), lstm_.w_i.rows(), lstm_.w_i.cols());
        params["lstm.W_g"] = block_json(lstm_.w_g.data(), lstm_.w_g.rows(), lstm_.w_g.cols());
        params["lstm.W_o"] = block_json(lstm_.w_o.data(), lstm_.w_o.rows(), lstm_.w_o.cols());
        params["lstm.b_f"] = block_json(lstm_.b_f.data(), lstm_.b_f.size(), 1);
        params["lstm.b_i"] = block_json(lstm_.b_i.data(), lstm_.b_i.size(), 1);
        params["lstm.b_g"] = block_json(lstm_.b_g.data(), lstm_.b_g.size(), 1);
        params["lstm.b_o"] = block_json(lstm_.b_o.data(), lstm_.b_o.size(), 1);
    }
    params["dense.weight"] = block_json(dense_.weight.data(), dense_.weight.size(), 1);
    params["dense.bias"] = block_json(&dense_.bias, 1, 1);
    return {{"format", kCheckpointFormat},
            {"version", kCheckpointVersion},
            {"config", config_.to_json()},
            {"features", features_},
            {"seed", config_.seed},
            {"parameters", params}};
}

Model Model::from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != kCheckpointFormat) {
            throw ConfigError("not a hybridcast checkpoint");
        }
        const int version = j.at("version").get<int>();
        if (version != kCheckpointVersion) {
            throw ConfigError("unsupported checkpoint version " + std::to_string(version));
        }
        Model m(ModelConfig::from_json(j.at("config")), j.at("features").get<Index>());
        const auto& p = j.at("parameters");
        if (m.uses_conv()) {
            read_block(p.at("conv.kernel"), m.conv_.weight.data(), m.conv_.weight.rows(),
                       m.conv_.weight.cols(), "conv.kernel");
            read_block(p.at("conv.bias"), m.conv_.bias.data(), m.conv_.bias.size(), 1, "conv.bias");
        }
        if (m.uses_lstm()) {
            auto& l = m.lstm_;
            read_block(p.at("lstm.W_f"), l.w_f.data(), l.w_f.rows(), l.w_f.cols(), "lstm.W_f");
            read_block(p.at("lstm.W_i"), l.w_i.data(), l.w_i.rows(), l.w_i.cols(), "lstm.W_i");
            read_block(p.at("lstm.W_g"), l.w_g.data(), l.w_g.rows(), l.w_g.cols(), "lstm.W_g");
            read_block(p.at("lstm.W_o"), l.w_o.data(), l.w_o.rows(), l.w_o.cols(), "lstm.W_o");
            read_block(p.at("lstm.b_f"), l.b_f.data(), l.b_f.size(), 1, "lstm.b_f");
            read_block(p.at("lstm.b_i"), l.b_i.data(), l.b_i.size(), 1, "lstm.b_i");
            read_block(p.at("lstm.b_g"), l.b_g.data(), l.b_g.size(), 1, "lstm.b_g");
            read_block(p.at("lstm.b_o"), l.b_o.data(), l.b_o.size(), 1, "lstm.b_o");
        }
        read_block(p.at("dense.weight"), m.dense_.weight.data(), m.dense_.weight.size(), 1,
                   "dense.weight");
        read_block(p.at("dense.bias"), &m.dense_.bias, 1, 1, "dense.bias");
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("malformed checkpoint: ") + e.what());
    }
}

}  // namespace hybridcast::neural
