#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ocsvdd/matrix.hpp"
#include "ocsvdd/rng.hpp"

namespace ocsvdd {

// Fully connected layer y = x W^T + b. weight is (out x in), bias is (1 x out).
struct DenseLayer {
    Matrix weight;
    Matrix bias;

    std::size_t in_dim() const noexcept { return weight.cols(); }
    std::size_t out_dim() const noexcept { return weight.rows(); }
    friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Zero-filled layer stack with the same shapes as `like`.
std::vector<DenseLayer> zeros_like(std::span<const DenseLayer> like);

// Intermediate values of a layer stack forward pass, kept for backprop.
// activations[0] is the input; activations[k + 1] is the output of layer k.
struct StackCache {
    std::vector<Matrix> pre_activations;
    std::vector<Matrix> activations;
    bool relu_last = true;

    const Matrix& output() const { return activations.back(); }
};

// Forward through the stack with ReLU after every layer except, when
// relu_last is false, the last one. An empty stack is the identity map.
StackCache stack_forward(const Matrix& x, std::span<const DenseLayer> layers, bool relu_last);

// Accumulates parameter gradients into `grads` (same shapes as `layers`) for
// upstream gradient `upstream` on the stack output. Returns the gradient with
// respect to the stack input. ReLU'(0) is taken as 0.
Matrix stack_backward(const StackCache& cache, std::span<const DenseLayer> layers,
                      const Matrix& upstream, std::span<DenseLayer> grads);

struct EncoderConfig {
    std::size_t input_dim = 16;
    std::vector<std::size_t> hidden_dims = {64};
    std::size_t latent_dim = 32;
    bool final_bias = false;

    // Throws ConfigError unless every dimension is at least 1.
    void validate() const;
    // Width of the layer feeding the final linear map.
    std::size_t feature_dim() const noexcept {
        return hidden_dims.empty() ? input_dim : hidden_dims.back();
    }
    friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

// Trunk theta (ReLU hidden layers) followed by a linear final layer w.
struct EncoderParams {
    std::vector<DenseLayer> trunk;
    Matrix final_weight;               // latent_dim x feature_dim
    std::optional<Matrix> final_bias;  // 1 x latent_dim, present iff config.final_bias

    // Every parameter matrix in serialization order: trunk weight/bias pairs,
    // final weight, final bias.
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    friend bool operator==(const EncoderParams&, const EncoderParams&) = default;
};

EncoderParams zeros_like(const EncoderParams& like);

// Hidden weights ~ N(0, 2/fan_in), final weights ~ N(0, 1/fan_in), biases 0.
EncoderParams init_params(const EncoderConfig& config, Rng& rng);

// Checks that params have the shapes `config` implies.
void check_shapes(const EncoderConfig& config, const EncoderParams& params);

// z = h W^T (+ b).
Matrix apply_final(const Matrix& features, const Matrix& weight, const Matrix* bias);

Matrix encode(const Matrix& x, const EncoderParams& params);

struct EncoderGradients {
    EncoderParams params;
    std::optional<Matrix> input;
};

// Exact gradients of sum(upstream .* encode(x, params)).
EncoderGradients encode_backward(const Matrix& x, const EncoderParams& params,
                                 const Matrix& upstream, bool want_input_grad = false);

}  // namespace ocsvdd
