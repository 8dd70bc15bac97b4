#pragma once

#include <cstdint>
#include <vector>

#include "ocsvdd/encoder.hpp"
#include "ocsvdd/model_io.hpp"

namespace ocsvdd {

// Hypersphere center c, a 1 x latent_dim row vector. Fixed once initialized.
struct Center {
    Matrix value;
    friend bool operator==(const Center&, const Center&) = default;
};

// Mean of encode(data), then coordinates with |c_i| < floor are pushed to
// floor * sign(c_i) with sign(0) = +1. floor = 0 disables the adjustment.
Center init_center(const Matrix& data, const EncoderParams& params, double floor = 0.1);

struct LossWithGrad {
    double loss = 0.0;
    Matrix grad;  // d loss / d latents
};

// (1/N) sum_i ||z_i - c||^2 and its gradient (2/N)(z_i - c).
LossWithGrad ocsvdd_loss(const Matrix& latents, const Center& center);

struct ObjectiveWithGrad {
    double loss = 0.0;
    EncoderParams grad;
};

// OC-SVDD loss of encode(x, params) against a fixed center, with gradients
// for every encoder parameter.
ObjectiveWithGrad ocsvdd_objective(const Matrix& x, const EncoderParams& params, const Center& center);

struct TrainConfig {
    std::size_t batch_size = 64;
    double lr = 1e-4;
    std::size_t epochs = 100;
    std::uint64_t seed = 0;
    double center_floor = 0.1;

    void validate() const;
};

struct SvddModel {
    EncoderConfig config;
    EncoderParams params;
    Center center;

    friend bool operator==(const SvddModel&, const SvddModel&) = default;
};

struct TrainResult {
    SvddModel model;
    double initial_loss = 0.0;        // full-data loss right after center init
    std::vector<double> epoch_losses;  // per-sample mean over each epoch's batches
};

// Deep SVDD on in-distribution rows only. Params are seeded from config.seed,
// the center comes from the first forward pass, and each epoch shuffles with
// Rng(seed + epoch). Throws NumericError naming epoch and batch on divergence.
TrainResult train_ocsvdd(const Matrix& train_data, const TrainConfig& config,
                         const EncoderConfig& encoder_config);

// ||encode(x_i) - c||^2 per row; larger is more anomalous.
std::vector<double> score(const Matrix& x, const SvddModel& model);

ModelFile to_model_file(const SvddModel& model);
// Throws InputError if the file has no center or is a meta model.
SvddModel svdd_model_from_file(const ModelFile& file);

}  // namespace ocsvdd
