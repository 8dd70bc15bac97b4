#include "ocsvdd/encoder.hpp"

#include <cmath>
#include <string>

namespace ocsvdd {

namespace {

void relu_inplace(Matrix& m) {
    for (double& x : m.data())
        if (!(x > 0.0)) x = 0.0;
}

DenseLayer make_layer(std::size_t in, std::size_t out, double stddev, Rng& rng) {
    DenseLayer layer{gaussian_sample(rng, out, in), Matrix(1, out)};
    layer.weight *= stddev;
    return layer;
}

}  // namespace

std::vector<DenseLayer> zeros_like(std::span<const DenseLayer> like) {
    std::vector<DenseLayer> out;
    out.reserve(like.size());
    for (const auto& l : like) {
        out.push_back({Matrix(l.weight.rows(), l.weight.cols()), Matrix(1, l.bias.cols())});
    }
    return out;
}

StackCache stack_forward(const Matrix& x, std::span<const DenseLayer> layers, bool relu_last) {
    StackCache cache;
    cache.relu_last = relu_last;
    cache.activations.reserve(layers.size() + 1);
    cache.pre_activations.reserve(layers.size());
    cache.activations.push_back(x);
    for (std::size_t k = 0; k < layers.size(); ++k) {
        Matrix z = matmul_nt(cache.activations.back(), layers[k].weight);
        add_row(z, layers[k].bias);
        Matrix a = z;
        if (relu_last || k + 1 < layers.size()) relu_inplace(a);
        cache.pre_activations.push_back(std::move(z));
        cache.activations.push_back(std::move(a));
    }
    return cache;
}

Matrix stack_backward(const StackCache& cache, std::span<const DenseLayer> layers,
                      const Matrix& upstream, std::span<DenseLayer> grads) {
    if (grads.size() != layers.size() || cache.pre_activations.size() != layers.size()) {
        throw DimensionError("stack_backward: layer count mismatch");
    }
    if (!upstream.same_shape(cache.output())) {
        throw DimensionError("stack_backward: upstream gradient shape does not match output");
    }
    Matrix delta = upstream;
    for (std::size_t k = layers.size(); k-- > 0;) {
        if (cache.relu_last || k + 1 < layers.size()) {
            const auto pre = cache.pre_activations[k].data();
            auto d = delta.data();
            for (std::size_t i = 0; i < d.size(); ++i)
                if (!(pre[i] > 0.0)) d[i] = 0.0;
        }
        add_matmul_tn(delta, cache.activations[k], grads[k].weight);
        grads[k].bias += column_sums(delta);
        delta = matmul(delta, layers[k].weight);
    }
    return delta;
}

void EncoderConfig::validate() const {
    if (input_dim < 1) throw ConfigError("encoder: input_dim must be >= 1");
    if (latent_dim < 1) throw ConfigError("encoder: latent_dim must be >= 1");
    for (std::size_t h : hidden_dims)
        if (h < 1) throw ConfigError("encoder: hidden layer widths must be >= 1");
}

std::vector<Matrix*> EncoderParams::tensors() {
    std::vector<Matrix*> out;
    for (auto& l : trunk) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&final_weight);
    if (final_bias) out.push_back(&*final_bias);
    return out;
}

std::vector<const Matrix*> EncoderParams::tensors() const {
    std::vector<const Matrix*> out;
    for (const auto& l : trunk) {
        out.push_back(&l.weight);
        out.push_back(&l.bias);
    }
    out.push_back(&final_weight);
    if (final_bias) out.push_back(&*final_bias);
    return out;
}

EncoderParams zeros_like(const EncoderParams& like) {
    EncoderParams out;
    out.trunk = zeros_like(like.trunk);
    out.final_weight = Matrix(like.final_weight.rows(), like.final_weight.cols());
    if (like.final_bias) out.final_bias = Matrix(1, like.final_bias->cols());
    return out;
}

EncoderParams init_params(const EncoderConfig& config, Rng& rng) {
    config.validate();
    EncoderParams p;
    std::size_t fan_in = config.input_dim;
    for (std::size_t width : config.hidden_dims) {
        p.trunk.push_back(make_layer(fan_in, width, std::sqrt(2.0 / static_cast<double>(fan_in)), rng));
        fan_in = width;
    }
    p.final_weight = gaussian_sample(rng, config.latent_dim, fan_in);
    p.final_weight *= std::sqrt(1.0 / static_cast<double>(fan_in));
    if (config.final_bias) p.final_bias = Matrix(1, config.latent_dim);
    return p;
}

void check_shapes(const EncoderConfig& config, const EncoderParams& params) {
    auto fail = [](const std::string& what) { throw DimensionError("encoder params: " + what); };
    if (params.trunk.size() != config.hidden_dims.size()) fail("trunk depth does not match config");
    std::size_t fan_in = config.input_dim;
    for (std::size_t k = 0; k < params.trunk.size(); ++k) {
        const auto& l = params.trunk[k];
        const std::size_t width = config.hidden_dims[k];
        if (l.weight.rows() != width || l.weight.cols() != fan_in || l.bias.rows() != 1 ||
            l.bias.cols() != width) {
            fail("layer " + std::to_string(k) + " shape does not match config");
        }
        fan_in = width;
    }
    if (params.final_weight.rows() != config.latent_dim || params.final_weight.cols() != fan_in) {
        fail("final weight shape does not match config");
    }
    if (params.final_bias.has_value() != config.final_bias) fail("final bias presence does not match config");
    if (params.final_bias && (params.final_bias->rows() != 1 || params.final_bias->cols() != config.latent_dim)) {
        fail("final bias shape does not match config");
    }
}

Matrix apply_final(const Matrix& features, const Matrix& weight, const Matrix* bias) {
    Matrix z = matmul_nt(features, weight);
    if (bias) add_row(z, *bias);
    return z;
}

Matrix encode(const Matrix& x, const EncoderParams& params) {
    const std::size_t expected = params.trunk.empty() ? params.final_weight.cols() : params.trunk.front().in_dim();
    if (x.cols() != expected) {
        throw DimensionError("encode: input has " + std::to_string(x.cols()) + " columns, encoder expects " +
                             std::to_string(expected));
    }
    const StackCache cache = stack_forward(x, params.trunk, true);
    return apply_final(cache.output(), params.final_weight, params.final_bias ? &*params.final_bias : nullptr);
}

EncoderGradients encode_backward(const Matrix& x, const EncoderParams& params, const Matrix& upstream,
                                 bool want_input_grad) {
    const StackCache cache = stack_forward(x, params.trunk, true);
    const Matrix& features = cache.output();
    if (upstream.rows() != x.rows() || upstream.cols() != params.final_weight.rows()) {
        throw DimensionError("encode_backward: upstream gradient must be batch x latent_dim");
    }
    EncoderGradients g;
    g.params = zeros_like(params);
    g.params.final_weight = matmul_tn(upstream, features);
    if (params.final_bias) g.params.final_bias = column_sums(upstream);
    const Matrix d_features = matmul(upstream, params.final_weight);
    Matrix d_input = stack_backward(cache, params.trunk, d_features, g.params.trunk);
    if (want_input_grad) g.input = std::move(d_input);
    return g;
}

}  // namespace ocsvdd
