#include "hybridcast/gradcheck.hpp"

#include "hybridcast/model.hpp"
#include "hybridcast/neural.hpp"

#include <cmath>

namespace hybridcast::neural {

namespace {

void fill(Rng& rng, double* data, Index n, double bound = 1.0) {
    for (Index i = 0; i < n; ++i) data[i] = rng.uniform(-bound, bound);
}

MatrixXd random_matrix(Rng& rng, Index rows, Index cols) {
    MatrixXd m(rows, cols);
    fill(rng, m.data(), m.size());
    return m;
}

class Checker {
public:
    explicit Checker(const GradCheckOptions& o) : opts_(o) { report_.tolerance = o.tolerance; }

    void compare(const std::string& block, std::span<double> values,
                 std::span<const double> analytic, const std::function<double()>& loss) {
        if (values.size() != analytic.size()) {
            throw ShapeError("gradcheck: analytic gradient size mismatch in " + block);
        }
        const double corrupt = block == opts_.corrupt_block ? 1.1 : 1.0;
        const std::vector<double> numeric = numeric_gradient(values, loss, opts_.step);
        BlockCheck bc{block, 0.0, static_cast<Index>(values.size()), false};
        for (std::size_t i = 0; i < values.size(); ++i) {
            bc.max_rel_error =
                std::max(bc.max_rel_error, relative_error(corrupt * analytic[i], numeric[i]));
        }
        bc.passed = bc.max_rel_error <= opts_.tolerance;
        report_.blocks.push_back(bc);
    }

    GradCheckReport take() { return std::move(report_); }

private:
    GradCheckOptions opts_;
    GradCheckReport report_;
};

std::span<double> span_of(MatrixXd& m) { return {m.data(), static_cast<std::size_t>(m.size())}; }
std::span<double> span_of(VectorXd& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }
std::span<double> span_of(Tensor& t) { return {t.data(), static_cast<std::size_t>(t.size())}; }
std::span<const double> cspan(const MatrixXd& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
}
std::span<const double> cspan(const VectorXd& v) {
    return {v.data(), static_cast<std::size_t>(v.size())};
}
std::span<const double> cspan(const Tensor& t) {
    return {t.data(), static_cast<std::size_t>(t.size())};
}

void check_conv(Checker& checker, Rng& rng) {
    Conv2dLayer layer(1, 3, 2, 2);
    fill(rng, layer.weight.data(), layer.weight.size());
    fill(rng, layer.bias.data(), layer.bias.size());
    Tensor input({2, 1, 6, 6});
    fill(rng, input.data(), input.size());

    Conv2dCache cache;
    const Tensor out = conv2d_forward(layer, input, &cache);
    Tensor upstream(out.shape());
    fill(rng, upstream.data(), upstream.size());
    const Conv2dGrads g = conv2d_backward(layer, cache, upstream);

    auto loss = [&] {
        const Tensor o = conv2d_forward(layer, input);
        double s = 0.0;
        for (Index i = 0; i < o.size(); ++i) s += o.data()[i] * upstream.data()[i];
        return s;
    };
    checker.compare("conv.kernel", span_of(layer.weight), cspan(g.weight), loss);
    checker.compare("conv.bias", span_of(layer.bias), cspan(g.bias), loss);
    checker.compare("conv.input", span_of(input), cspan(g.input), loss);
}

void check_lstm(Checker& checker, Rng& rng) {
    const Index hidden = 4, in = 3, batch = 2, steps = 5;
    LstmParams p = LstmParams::zeros(hidden, in);
    for (MatrixXd* w : {&p.w_f, &p.w_i, &p.w_g, &p.w_o}) fill(rng, w->data(), w->size());
    for (VectorXd* b : {&p.b_f, &p.b_i, &p.b_g, &p.b_o}) fill(rng, b->data(), b->size());
    std::vector<MatrixXd> xs, upstream;
    for (Index t = 0; t < steps; ++t) {
        xs.push_back(random_matrix(rng, in, batch));
        upstream.push_back(random_matrix(rng, hidden, batch));
    }

    auto run = [&] {
        std::vector<LstmState> states{LstmState::zeros(hidden, batch)};
        for (const auto& x : xs) states.push_back(lstm_step(p, x, states.back()));
        return states;
    };
    auto loss = [&] {
        const auto states = run();
        double s = 0.0;
        for (Index t = 0; t < steps; ++t)
            s += states[static_cast<std::size_t>(t + 1)].h.cwiseProduct(upstream[static_cast<std::size_t>(t)]).sum();
        return s;
    };
    const LstmGrads g = lstm_backward(p, xs, run(), upstream);
    checker.compare("lstm.W_f", span_of(p.w_f), cspan(g.w_f), loss);
    checker.compare("lstm.W_i", span_of(p.w_i), cspan(g.w_i), loss);
    checker.compare("lstm.W_g", span_of(p.w_g), cspan(g.w_g), loss);
    checker.compare("lstm.W_o", span_of(p.w_o), cspan(g.w_o), loss);
    checker.compare("lstm.b_f", span_of(p.b_f), cspan(g.b_f), loss);
    checker.compare("lstm.b_i", span_of(p.b_i), cspan(g.b_i), loss);
    checker.compare("lstm.b_g", span_of(p.b_g), cspan(g.b_g), loss);
    checker.compare("lstm.b_o", span_of(p.b_o), cspan(g.b_o), loss);
    for (Index t = 0; t < steps; ++t) {
        auto& x = xs[static_cast<std::size_t>(t)];
        checker.compare("lstm.input[" + std::to_string(t) + "]", span_of(x),
                        cspan(g.inputs[static_cast<std::size_t>(t)]), loss);
    }
}

void check_dense(Checker& checker, Rng& rng) {
    DenseLayer layer{VectorXd(6), 0.0};
    fill(rng, layer.weight.data(), layer.weight.size());
    layer.bias = rng.uniform(-1.0, 1.0);
    MatrixXd input = random_matrix(rng, 6, 3);
    Eigen::RowVectorXd upstream(3);
    fill(rng, upstream.data(), upstream.size());
    const DenseGrads g = dense_backward(layer, input, upstream);
    auto loss = [&] { return dense_forward(layer, input).dot(upstream); };
    checker.compare("dense.weight", span_of(layer.weight), cspan(g.weight), loss);
    checker.compare("dense.bias", {&layer.bias, 1}, {&g.bias, 1}, loss);
    checker.compare("dense.input", span_of(input), cspan(g.input), loss);
}

void check_model(Checker& checker, Rng& rng, Variant variant) {
    ModelConfig cfg = ModelConfig::for_variant(variant);
    cfg.window = 5;
    cfg.hidden = 4;
    cfg.channels = 2;
    const Index features = 3, batch = 3;
    Model model(cfg, features);
    model.initialize(rng);
    // Larger weights than the default init exercise the nonlinearities.
    for (auto& p : model.parameters())
        for (double& v : p.value) v *= 2.0;

    Tensor windows({batch, cfg.window, features});
    fill(rng, windows.data(), windows.size());
    Eigen::RowVectorXd target(batch);
    fill(rng, target.data(), target.size());

    ModelCache cache;
    const auto pred = model.forward(windows, &cache);
    model.backward(cache, mse_loss(pred, target).grad);

    auto loss = [&] { return mse_loss(model.forward(windows), target).value; };
    const std::string prefix = "model[" + to_string(variant) + "].";
    for (auto& p : model.parameters()) {
        const std::vector<double> analytic(p.grad.begin(), p.grad.end());
        checker.compare(prefix + p.name, p.value, analytic, loss);
    }
}

}  // namespace

bool GradCheckReport::passed() const {
    return !blocks.empty() &&
           std::all_of(blocks.begin(), blocks.end(), [](const BlockCheck& b) { return b.passed; });
}

std::vector<std::string> GradCheckReport::failed_blocks() const {
    std::vector<std::string> out;
    for (const auto& b : blocks)
        if (!b.passed) out.push_back(b.block);
    return out;
}

double relative_error(double analytic, double numeric) {
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    return std::abs(analytic - numeric) / denom;
}

std::vector<double> numeric_gradient(std::span<double> values, const std::function<double()>& loss,
                                     double step) {
    std::vector<double> grad(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double orig = values[i];
        values[i] = orig + step;
        const double up = loss();
        values[i] = orig - step;
        const double down = loss();
        values[i] = orig;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

GradCheckReport run_gradient_checks(const GradCheckOptions& options) {
    Checker checker(options);
    Rng rng(options.seed);
    check_conv(checker, rng);
    check_lstm(checker, rng);
    check_dense(checker, rng);
    for (Variant v : {Variant::cnn, Variant::lstm, Variant::cnn_lstm, Variant::dilated_cnn_lstm}) {
        check_model(checker, rng, v);
    }
    return checker.take();
}

}  // namespace hybridcast::neural
