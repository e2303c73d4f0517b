#include "hybridcast/neural.hpp"

#include <cmath>

namespace hybridcast::neural {

namespace {

MatrixXd sigmoid(const MatrixXd& a) {
    return (1.0 + (-a.array()).exp()).inverse().matrix();
}

void require(bool ok, const std::string& what) {
    if (!ok) throw ShapeError(what);
}

// Pre-activation W [h; x] + b for one gate.
MatrixXd gate_input(const MatrixXd& w, const VectorXd& b, const MatrixXd& h, const MatrixXd& x) {
    const Index hidden = h.rows();
    MatrixXd a = w.leftCols(hidden) * h;
    a.noalias() += w.rightCols(x.rows()) * x;
    a.colwise() += b;
    return a;
}

}  // namespace

Index receptive_field(Index kernel, Index dilation) {
    if (dilation < 1) throw ParameterError("receptive_field: dilation must be >= 1");
    if (kernel < 1) throw ParameterError("receptive_field: kernel must be >= 1");
    return dilation * (kernel - 1) + 1;
}

Conv2dLayer::Conv2dLayer(Index in_ch, Index out_ch, Index dil, Index pad, Index k)
    : in_channels(in_ch), out_channels(out_ch), kernel(k), stride(1), dilation(dil),
      padding(pad), weight(MatrixXd::Zero(out_ch, in_ch * k * k)), bias(VectorXd::Zero(out_ch)) {
    if (in_ch < 1 || out_ch < 1 || k < 1) throw ParameterError("Conv2dLayer: empty layer");
    if (dil < 1) throw ParameterError("Conv2dLayer: dilation must be >= 1");
    if (pad < 0) throw ParameterError("Conv2dLayer: padding must be >= 0");
}

Index Conv2dLayer::output_extent(Index extent) const {
    const Index span = extent + 2 * padding - dilation * (kernel - 1) - 1;
    if (span < 0) return 0;
    return span / stride + 1;
}

namespace {

// Row r = (b * out_h + y) * out_w + x holds the taps (c, u, v) feeding output
// (b, y, x); taps falling in the zero padding stay 0.
MatrixXd im2col(const Conv2dLayer& layer, const Tensor& input, Index out_h, Index out_w) {
    const Index batch = input.dim(0), height = input.dim(2), width = input.dim(3);
    const Index k = layer.kernel, d = layer.dilation, p = layer.padding, s = layer.stride;
    MatrixXd cols = MatrixXd::Zero(batch * out_h * out_w, layer.in_channels * k * k);
    const double* in = input.data();
    for (Index c = 0; c < layer.in_channels; ++c)
        for (Index u = 0; u < k; ++u)
            for (Index v = 0; v < k; ++v) {
                double* col = cols.col((c * k + u) * k + v).data();
                for (Index b = 0; b < batch; ++b) {
                    const double* plane = in + (b * layer.in_channels + c) * height * width;
                    for (Index y = 0; y < out_h; ++y) {
                        const Index iy = y * s + u * d - p;
                        if (iy < 0 || iy >= height) continue;
                        double* dst = col + (b * out_h + y) * out_w;
                        for (Index x = 0; x < out_w; ++x) {
                            const Index ix = x * s + v * d - p;
                            if (ix >= 0 && ix < width) dst[x] = plane[iy * width + ix];
                        }
                    }
                }
            }
    return cols;
}

}  // namespace

Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& input, Conv2dCache* cache) {
    require(input.rank() == 4 && input.dim(1) == layer.in_channels,
            "conv2d_forward: expected batch x " + std::to_string(layer.in_channels) +
                " x H x W input, got " + input.shape_str());
    require(layer.weight.rows() == layer.out_channels &&
                layer.weight.cols() == layer.in_channels * layer.kernel * layer.kernel &&
                layer.bias.size() == layer.out_channels,
            "conv2d_forward: layer parameters have inconsistent shapes");
    const Index batch = input.dim(0);
    const Index out_h = layer.output_extent(input.dim(2));
    const Index out_w = layer.output_extent(input.dim(3));
    if (out_h <= 0 || out_w <= 0) {
        throw ShapeError("conv2d_forward: input " + input.shape_str() +
                         " is smaller than the dilated kernel extent " +
                         std::to_string(receptive_field(layer.kernel, layer.dilation)));
    }
    MatrixXd cols = im2col(layer, input, out_h, out_w);
    MatrixXd y = cols * layer.weight.transpose();  // positions x out_channels
    y.rowwise() += layer.bias.transpose();

    const Index plane = out_h * out_w;
    Tensor out({batch, layer.out_channels, out_h, out_w});
    for (Index b = 0; b < batch; ++b)
        Eigen::Map<MatrixXd>(out.data() + b * layer.out_channels * plane, plane, layer.out_channels) =
            y.middleRows(b * plane, plane);
    if (cache) {
        cache->input = input;
        cache->columns = std::move(cols);
    }
    return out;
}

Conv2dGrads conv2d_backward(const Conv2dLayer& layer, const Conv2dCache& cache,
                            const Tensor& grad_out) {
    const Tensor& input = cache.input;
    require(input.rank() == 4, "conv2d_backward: cache holds no input");
    const Index batch = input.dim(0);
    const Index height = input.dim(2);
    const Index width = input.dim(3);
    const Index out_h = layer.output_extent(height);
    const Index out_w = layer.output_extent(width);
    require(grad_out.rank() == 4 && grad_out.dim(0) == batch &&
                grad_out.dim(1) == layer.out_channels && grad_out.dim(2) == out_h &&
                grad_out.dim(3) == out_w,
            "conv2d_backward: gradient " + grad_out.shape_str() +
                " does not match forward output");
    const Index k = layer.kernel;
    const Index d = layer.dilation;
    const Index p = layer.padding;
    const Index s = layer.stride;
    const Index plane = out_h * out_w;
    require(cache.columns.rows() == batch * plane && cache.columns.cols() == layer.weight.cols(),
            "conv2d_backward: cache holds no column matrix");

    MatrixXd g(batch * plane, layer.out_channels);
    for (Index b = 0; b < batch; ++b)
        g.middleRows(b * plane, plane) = Eigen::Map<const MatrixXd>(
            grad_out.data() + b * layer.out_channels * plane, plane, layer.out_channels);

    Conv2dGrads grads{Tensor(input.shape()), g.transpose() * cache.columns,
                      g.colwise().sum().transpose()};
    const MatrixXd gcols = g * layer.weight;
    double* gin = grads.input.data();
    for (Index c = 0; c < layer.in_channels; ++c)
        for (Index u = 0; u < k; ++u)
            for (Index v = 0; v < k; ++v) {
                const double* col = gcols.col((c * k + u) * k + v).data();
                for (Index b = 0; b < batch; ++b) {
                    double* plane_in = gin + (b * layer.in_channels + c) * height * width;
                    for (Index y = 0; y < out_h; ++y) {
                        const Index iy = y * s + u * d - p;
                        if (iy < 0 || iy >= height) continue;
                        const double* src = col + (b * out_h + y) * out_w;
                        for (Index x = 0; x < out_w; ++x) {
                            const Index ix = x * s + v * d - p;
                            if (ix >= 0 && ix < width) plane_in[iy * width + ix] += src[x];
                        }
                    }
                }
            }
    return grads;
}

LstmParams LstmParams::zeros(Index hidden, Index input) {
    LstmParams p;
    for (MatrixXd* w : {&p.w_f, &p.w_i, &p.w_g, &p.w_o}) *w = MatrixXd::Zero(hidden, hidden + input);
    for (VectorXd* b : {&p.b_f, &p.b_i, &p.b_g, &p.b_o}) *b = VectorXd::Zero(hidden);
    return p;
}

LstmState LstmState::zeros(Index hidden, Index batch) {
    LstmState s;
    s.h = MatrixXd::Zero(hidden, batch);
    s.c = MatrixXd::Zero(hidden, batch);
    return s;
}

LstmState lstm_step(const LstmParams& params, const MatrixXd& x, const LstmState& prev) {
    const Index hidden = params.hidden_size();
    require(prev.h.rows() == hidden && prev.c.rows() == hidden && prev.h.cols() == x.cols() &&
                prev.c.cols() == x.cols(),
            "lstm_step: state " + shape_string(prev.h.rows(), prev.h.cols()) +
                " does not match hidden size " + std::to_string(hidden) + " and batch " +
                std::to_string(x.cols()));
    require(x.rows() == params.input_size(),
            "lstm_step: input has " + std::to_string(x.rows()) + " features, expected " +
                std::to_string(params.input_size()));

    LstmState next;
    next.f = sigmoid(gate_input(params.w_f, params.b_f, prev.h, x));
    next.i = sigmoid(gate_input(params.w_i, params.b_i, prev.h, x));
    next.z = gate_input(params.w_g, params.b_g, prev.h, x).array().tanh().matrix();
    next.o = sigmoid(gate_input(params.w_o, params.b_o, prev.h, x));
    next.c = next.f.cwiseProduct(prev.c) + next.i.cwiseProduct(next.z);
    next.h = next.o.cwiseProduct(next.c.array().tanh().matrix());
    return next;
}

LstmGrads LstmGrads::zeros_like(const LstmParams& p, Index steps, Index batch) {
    LstmGrads g;
    for (MatrixXd* w : {&g.w_f, &g.w_i, &g.w_g, &g.w_o}) *w = MatrixXd::Zero(p.w_f.rows(), p.w_f.cols());
    for (VectorXd* b : {&g.b_f, &g.b_i, &g.b_g, &g.b_o}) *b = VectorXd::Zero(p.hidden_size());
    g.inputs.assign(static_cast<std::size_t>(steps), MatrixXd::Zero(p.input_size(), batch));
    g.h0 = MatrixXd::Zero(p.hidden_size(), batch);
    g.c0 = MatrixXd::Zero(p.hidden_size(), batch);
    return g;
}

LstmGrads lstm_backward(const LstmParams& params, const std::vector<MatrixXd>& inputs,
                        const std::vector<LstmState>& states,
                        const std::vector<MatrixXd>& grad_h) {
    const std::size_t steps = inputs.size();
    require(states.size() == steps + 1 && grad_h.size() == steps && steps > 0,
            "lstm_backward: expected T inputs, T+1 states and T gradients");
    const Index hidden = params.hidden_size();
    const Index in = params.input_size();
    const Index batch = inputs.front().cols();
    for (std::size_t t = 0; t < steps; ++t) {
        require(inputs[t].rows() == in && inputs[t].cols() == batch,
                "lstm_backward: input shape mismatch at step " + std::to_string(t));
        require(grad_h[t].rows() == hidden && grad_h[t].cols() == batch,
                "lstm_backward: gradient shape mismatch at step " + std::to_string(t));
    }

    LstmGrads g = LstmGrads::zeros_like(params, static_cast<Index>(steps), batch);
    MatrixXd dh_next = MatrixXd::Zero(hidden, batch);
    MatrixXd dc_next = MatrixXd::Zero(hidden, batch);

    for (std::size_t t = steps; t-- > 0;) {
        const LstmState& cur = states[t + 1];
        const LstmState& prev = states[t];
        const MatrixXd& x = inputs[t];
        const auto tanh_c = cur.c.array().tanh();

        const MatrixXd dh = grad_h[t] + dh_next;
        const MatrixXd d_o = dh.cwiseProduct(tanh_c.matrix());
        const MatrixXd dc =
            dc_next + dh.cwiseProduct(cur.o).cwiseProduct((1.0 - tanh_c.square()).matrix());

        const MatrixXd da_f = (dc.array() * prev.c.array() * cur.f.array() * (1.0 - cur.f.array())).matrix();
        const MatrixXd da_i = (dc.array() * cur.z.array() * cur.i.array() * (1.0 - cur.i.array())).matrix();
        const MatrixXd da_g = (dc.array() * cur.i.array() * (1.0 - cur.z.array().square())).matrix();
        const MatrixXd da_o = (d_o.array() * cur.o.array() * (1.0 - cur.o.array())).matrix();

        dh_next.setZero();
        g.inputs[t].setZero();
        auto accumulate = [&](const MatrixXd& da, const MatrixXd& w, MatrixXd& dw, VectorXd& db) {
            dw.leftCols(hidden).noalias() += da * prev.h.transpose();
            dw.rightCols(in).noalias() += da * x.transpose();
            db += da.rowwise().sum();
            dh_next.noalias() += w.leftCols(hidden).transpose() * da;
            g.inputs[t].noalias() += w.rightCols(in).transpose() * da;
        };
        accumulate(da_f, params.w_f, g.w_f, g.b_f);
        accumulate(da_i, params.w_i, g.w_i, g.b_i);
        accumulate(da_g, params.w_g, g.w_g, g.b_g);
        accumulate(da_o, params.w_o, g.w_o, g.b_o);
        dc_next = dc.cwiseProduct(cur.f);
    }
    g.h0 = dh_next;
    g.c0 = dc_next;
    return g;
}

Eigen::RowVectorXd dense_forward(const DenseLayer& layer, const MatrixXd& input) {
    require(input.rows() == layer.weight.size(),
            "dense_forward: input has " + std::to_string(input.rows()) + " features, weights " +
                std::to_string(layer.weight.size()));
    Eigen::RowVectorXd out = layer.weight.transpose() * input;
    out.array() += layer.bias;
    return out;
}

DenseGrads dense_backward(const DenseLayer& layer, const MatrixXd& input,
                          const Eigen::RowVectorXd& grad_out) {
    require(input.rows() == layer.weight.size() && input.cols() == grad_out.size(),
            "dense_backward: shape mismatch");
    DenseGrads g;
    g.weight = input * grad_out.transpose();
    g.bias = grad_out.sum();
    g.input = layer.weight * grad_out;
    return g;
}

LossResult mse_loss(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& target) {
    require(pred.size() == target.size(),
            "mse_loss: prediction length " + std::to_string(pred.size()) +
                " != target length " + std::to_string(target.size()));
    if (pred.size() == 0) throw ParameterError("mse_loss: empty input");
    const double n = static_cast<double>(pred.size());
    const Eigen::RowVectorXd diff = pred - target;
    return {diff.squaredNorm() / n, 2.0 * diff / n};
}

void adam_step(AdamState& state, std::span<const ParamView> params, const AdamOptions& options) {
    if (state.m.empty()) {
        for (const auto& p : params) {
            state.m.emplace_back(p.value.size(), 0.0);
            state.v.emplace_back(p.value.size(), 0.0);
        }
    }
    require(state.m.size() == params.size(), "adam_step: parameter block count changed");
    for (std::size_t k = 0; k < params.size(); ++k) {
        require(params[k].value.size() == params[k].grad.size() &&
                    params[k].value.size() == state.m[k].size(),
                "adam_step: size mismatch in block " + params[k].name);
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const double c1 = 1.0 - std::pow(options.beta1, t);
    const double c2 = 1.0 - std::pow(options.beta2, t);
    for (std::size_t k = 0; k < params.size(); ++k) {
        auto value = params[k].value;
        auto grad = params[k].grad;
        auto& m = state.m[k];
        auto& v = state.v[k];
        for (std::size_t i = 0; i < value.size(); ++i) {
            const double g = grad[i];
            m[i] = options.beta1 * m[i] + (1.0 - options.beta1) * g;
            v[i] = options.beta2 * v[i] + (1.0 - options.beta2) * g * g;
            const double m_hat = m[i] / c1;
            const double v_hat = v[i] / c2;
            value[i] -= options.learning_rate * m_hat / (std::sqrt(v_hat) + options.epsilon);
        }
    }
}

}  // namespace hybridcast::neural
