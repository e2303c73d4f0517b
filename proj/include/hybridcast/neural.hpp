#pragma once

// Layer primitives for the forecaster: dilated 2-D convolution, the LSTM
// cell and its backpropagation through time, a dense head, the MSE loss and
// Adam. Every layer works on a batch; a single sample is a batch of one.

#include "hybridcast/numcore.hpp"

#include <span>
#include <string>
#include <vector>

namespace hybridcast::neural {

// Effective extent of a k-tap kernel with taps spaced `dilation` apart.
Index receptive_field(Index kernel, Index dilation);

struct Conv2dLayer {
    Index in_channels = 1;
    Index out_channels = 16;
    Index kernel = 3;
    Index stride = 1;
    Index dilation = 1;
    Index padding = 1;
    // out_channels x (in_channels * kernel * kernel); taps ordered (c, u, v).
    MatrixXd weight;
    VectorXd bias;

    Conv2dLayer() = default;
    Conv2dLayer(Index in_ch, Index out_ch, Index dilation, Index padding, Index kernel = 3);

    // floor((extent + 2p - d(k-1) - 1) / stride) + 1.
    Index output_extent(Index extent) const;
};

struct Conv2dCache {
    Tensor input;      // batch x in_channels x H x W
    MatrixXd columns;  // im2col: (batch * H' * W') x (in_channels * k * k)
};

// input: batch x in_channels x H x W (zero padded). Returns
// batch x out_channels x H' x W'.
Tensor conv2d_forward(const Conv2dLayer& layer, const Tensor& input, Conv2dCache* cache = nullptr);

struct Conv2dGrads {
    Tensor input;
    MatrixXd weight;
    VectorXd bias;
};

Conv2dGrads conv2d_backward(const Conv2dLayer& layer, const Conv2dCache& cache,
                            const Tensor& grad_out);

// Gate weights act on the concatenation [h_{t-1}; x_t]: the first `hidden`
// columns multiply the previous hidden state, the rest the input.
struct LstmParams {
    MatrixXd w_f, w_i, w_g, w_o;
    VectorXd b_f, b_i, b_g, b_o;

    static LstmParams zeros(Index hidden, Index input);
    Index hidden_size() const { return w_f.rows(); }
    Index input_size() const { return w_f.cols() - w_f.rows(); }
};

// Columns are batch entries.
struct LstmState {
    MatrixXd h, c;
    MatrixXd f, i, z, o;  // gate activations of the step that produced h, c

    static LstmState zeros(Index hidden, Index batch);
};

LstmState lstm_step(const LstmParams& params, const MatrixXd& x, const LstmState& prev);

struct LstmGrads {
    MatrixXd w_f, w_i, w_g, w_o;
    VectorXd b_f, b_i, b_g, b_o;
    std::vector<MatrixXd> inputs;  // dL/dx_t per step
    MatrixXd h0, c0;

    static LstmGrads zeros_like(const LstmParams& p, Index steps, Index batch);
};

// Backpropagation through time. `states` holds T + 1 entries (initial state
// first), `inputs` the T inputs, `grad_h` the T upstream gradients dL/dh_t.
LstmGrads lstm_backward(const LstmParams& params, const std::vector<MatrixXd>& inputs,
                        const std::vector<LstmState>& states,
                        const std::vector<MatrixXd>& grad_h);

struct DenseLayer {
    VectorXd weight;
    double bias = 0.0;
};

struct DenseGrads {
    VectorXd weight;
    double bias = 0.0;
    MatrixXd input;
};

// input: features x batch. Returns one prediction per column.
Eigen::RowVectorXd dense_forward(const DenseLayer& layer, const MatrixXd& input);
DenseGrads dense_backward(const DenseLayer& layer, const MatrixXd& input,
                          const Eigen::RowVectorXd& grad_out);

struct LossResult {
    double value = 0.0;
    Eigen::RowVectorXd grad;
};

LossResult mse_loss(const Eigen::RowVectorXd& pred, const Eigen::RowVectorXd& target);

// Mutable view of one parameter block and its gradient.
struct ParamView {
    std::string name;
    std::span<double> value;
    std::span<const double> grad;
};

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct AdamState {
    std::vector<std::vector<double>> m;
    std::vector<std::vector<double>> v;
    long step = 0;
};

// One bias-corrected Adam update over every block. Moments are allocated on
// the first call and checked against block sizes afterwards.
void adam_step(AdamState& state, std::span<const ParamView> params, const AdamOptions& options);

}  // namespace hybridcast::neural
