#include "ocsvdd/svdd.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <utility>

#include "ocsvdd/adam.hpp"

namespace ocsvdd {

Center init_center(const Matrix& data, const EncoderParams& params, double floor) {
    if (data.rows() == 0) throw InputError("init_center: no samples");
    Matrix c = column_means(encode(data, params));
    for (double& v : c.data()) {
        if (std::abs(v) < floor) v = v < 0.0 ? -floor : floor;
    }
    return {std::move(c)};
}

LossWithGrad ocsvdd_loss(const Matrix& latents, const Center& center) {
    if (latents.rows() == 0) throw InputError("ocsvdd_loss: empty batch");
    if (center.value.rows() != 1 || center.value.cols() != latents.cols()) {
        throw DimensionError("ocsvdd_loss: latents have " + std::to_string(latents.cols()) +
                             " columns, center has " + std::to_string(center.value.cols()));
    }
    const double inv_n = 1.0 / static_cast<double>(latents.rows());
    LossWithGrad out{0.0, Matrix(latents.rows(), latents.cols())};
    for (std::size_t i = 0; i < latents.rows(); ++i) {
        double dist = 0.0;
        for (std::size_t j = 0; j < latents.cols(); ++j) {
            const double d = latents(i, j) - center.value(0, j);
            dist += d * d;
            out.grad(i, j) = 2.0 * inv_n * d;
        }
        out.loss += dist;
    }
    out.loss *= inv_n;
    if (!std::isfinite(out.loss)) throw NumericError("ocsvdd_loss: non-finite loss");
    return out;
}

ObjectiveWithGrad ocsvdd_objective(const Matrix& x, const EncoderParams& params, const Center& center) {
    const Matrix z = encode(x, params);
    LossWithGrad lg = ocsvdd_loss(z, center);
    return {lg.loss, encode_backward(x, params, lg.grad).params};
}

void TrainConfig::validate() const {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (epochs < 1) throw ConfigError("epochs must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("lr must be > 0");
    if (!(center_floor >= 0.0)) throw ConfigError("center_floor must be >= 0");
}

TrainResult train_ocsvdd(const Matrix& train_data, const TrainConfig& config,
                         const EncoderConfig& encoder_config) {
    config.validate();
    encoder_config.validate();
    if (train_data.rows() == 0) throw InputError("train_ocsvdd: no training samples");
    if (train_data.cols() != encoder_config.input_dim) {
        throw DimensionError("train_ocsvdd: data has " + std::to_string(train_data.cols()) +
                             " features, encoder expects " + std::to_string(encoder_config.input_dim));
    }

    Rng init_rng(config.seed);
    TrainResult result;
    SvddModel& model = result.model;
    model.config = encoder_config;
    model.params = init_params(encoder_config, init_rng);
    model.center = init_center(train_data, model.params, config.center_floor);
    result.initial_loss = ocsvdd_loss(encode(train_data, model.params), model.center).loss;

    const std::vector<Matrix*> params = model.params.tensors();
    std::vector<const Matrix*> shapes(params.begin(), params.end());
    AdamState adam(AdamConfig{config.lr}, shapes);

    const std::size_t n = train_data.rows();
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng shuffle_rng(config.seed + epoch);
        shuffle_rng.shuffle(order);

        double epoch_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += config.batch_size, ++batch_index) {
            const std::size_t stop = std::min(n, start + config.batch_size);
            const std::span<const std::size_t> idx(order.data() + start, stop - start);
            const Matrix batch = gather_rows(train_data, idx);
            ObjectiveWithGrad obj;
            try {
                obj = ocsvdd_objective(batch, model.params, model.center);
            } catch (const NumericError& e) {
                throw NumericError("train_ocsvdd: epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ": " + e.what());
            }
            epoch_loss += obj.loss * static_cast<double>(idx.size());
            const std::vector<const Matrix*> grads = std::as_const(obj.grad).tensors();
            try {
                adam.update(params, grads);
            } catch (const NumericError& e) {
                throw NumericError("train_ocsvdd: epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(batch_index) + ": " + e.what());
            }
        }
        result.epoch_losses.push_back(epoch_loss / static_cast<double>(n));
    }
    return result;
}

std::vector<double> score(const Matrix& x, const SvddModel& model) {
    if (x.cols() != model.config.input_dim) {
        throw DimensionError("score: data has " + std::to_string(x.cols()) + " features, model expects " +
                             std::to_string(model.config.input_dim));
    }
    return row_sq_distances(encode(x, model.params), model.center.value);
}

ModelFile to_model_file(const SvddModel& model) {
    return ModelFile{model.config, model.params, model.center.value, std::nullopt};
}

SvddModel svdd_model_from_file(const ModelFile& file) {
    if (file.inference) throw InputError("model file holds a meta model, not an OC-SVDD model");
    if (!file.center) throw InputError("model file has no center");
    return {file.config, file.params, Center{*file.center}};
}

}  // namespace ocsvdd
