#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ocsvdd/encoder.hpp"
#include "ocsvdd/model_io.hpp"
#include "ocsvdd/task.hpp"

namespace ocsvdd {

struct MetaConfig {
    std::size_t samples = 10;        // L, posterior draws per episode
    std::size_t meta_batch = 5;      // tasks per accumulated update
    double eta = 1.0;                // weight of the out-of-distribution term
    std::size_t support_size = 10;
    std::size_t query_in = 20;       // in-distribution query rows per episode (upper bound)
    std::size_t query_out = 20;      // out-of-distribution query rows per episode (upper bound)
    double lr = 1e-4;
    std::size_t meta_steps = 500;
    std::uint64_t seed = 0;
    std::vector<std::size_t> inference_hidden = {64, 64};
    double inverse_eps = 1e-6;       // added to out-of-distribution distances before inverting
    double initial_logvar = -4.0;

    void validate() const;
};

// Shared trunk theta plus the amortized inference network phi. The final
// layer is never stored; it is drawn from q_phi(. | support) per task.
struct MetaModel {
    EncoderConfig config;
    std::vector<DenseLayer> trunk;
    std::vector<DenseLayer> inference;

    // Number of final-layer parameters the posterior covers.
    std::size_t final_param_count() const noexcept;
    std::vector<Matrix*> tensors();
    std::vector<const Matrix*> tensors() const;
    friend bool operator==(const MetaModel&, const MetaModel&) = default;
};

// Same tensor layout as MetaModel, holding gradients.
struct MetaGradients {
    std::vector<DenseLayer> trunk;
    std::vector<DenseLayer> inference;

    static MetaGradients zeros_like(const MetaModel& model);
    MetaGradients& operator+=(const MetaGradients& other);
    std::vector<const Matrix*> tensors() const;
    friend bool operator==(const MetaGradients&, const MetaGradients&) = default;
};

// Trunk as in init_params; inference net hidden layers He-initialized, output
// layer zero weights with bias 0 on the mean half and initial_logvar on the
// log-variance half.
MetaModel init_meta_model(const EncoderConfig& config, const MetaConfig& meta, Rng& rng);

ModelFile to_model_file(const MetaModel& model);
MetaModel meta_model_from_file(const ModelFile& file);

struct FinalLayer {
    Matrix weight;               // latent_dim x feature_dim
    std::optional<Matrix> bias;  // 1 x latent_dim
    friend bool operator==(const FinalLayer&, const FinalLayer&) = default;
};

// Diagonal Gaussian over the final layer, log-variance clamped to [-10, 10].
struct FinalLayerPosterior {
    FinalLayer mean;
    FinalLayer logvar;
    friend bool operator==(const FinalLayerPosterior&, const FinalLayerPosterior&) = default;
};

struct Episode {
    std::string task_id;
    Matrix support;                // in-distribution only
    Matrix query;                  // in-distribution rows first, then out-of-distribution
    std::vector<int> query_labels;

    std::size_t query_positives() const;
    std::size_t query_negatives() const;
};

// Support drawn without replacement from the task's +1 rows; the query takes
// up to query_in of the remaining +1 rows and up to query_out -1 rows.
Episode sample_episode(const TaskDataset& task, Rng& rng, const MetaConfig& config);

FinalLayerPosterior infer_posterior(const Matrix& support, const MetaModel& model);

// w = mu + exp(logvar / 2) * noise, with noise in the posterior's layout.
FinalLayer sample_function(const FinalLayerPosterior& posterior, const FinalLayer& noise);
FinalLayer sample_function(const FinalLayerPosterior& posterior, Rng& rng);
// Standard normal draw shaped like the final layer.
FinalLayer draw_noise(const FinalLayerPosterior& posterior, Rng& rng);

// Latent-space center for an episode: mean of support latents under the
// posterior-mean final layer.
Matrix episode_center(const Matrix& support, const MetaModel& model, const FinalLayerPosterior& posterior);

struct MetaLoss {
    double loss = 0.0;
    MetaGradients grad;
};

// Semi-supervised SVDD loss on the episode query, averaged over the given
// posterior draws (noise.size() plays L):
//   (1/L) sum_l [ sum_pos ||f_l(x) - c||^2 + eta sum_neg 1/(||f_l(x) - c||^2 + eps) ] / (N + M + L)
// with gradients for every trunk and inference-net parameter.
MetaLoss meta_svdd_loss(const Episode& episode, const MetaModel& model, const MetaConfig& config,
                        std::span<const FinalLayer> noise);
// Draws config.samples noise tensors from rng.
MetaLoss meta_svdd_loss(const Episode& episode, const MetaModel& model, const MetaConfig& config, Rng& rng);

// Sums per-episode losses and gradients in episode order.
MetaLoss accumulate_meta_loss(std::span<const Episode> episodes, const MetaModel& model, const MetaConfig& config,
                              std::span<const std::vector<FinalLayer>> noise);

struct MetaTrainResult {
    MetaModel model;
    std::vector<double> step_losses;  // mean episode loss per meta-step
};

// Episodic meta-training over every task whose id is not in holdout_ids.
MetaTrainResult meta_train(std::span<const TaskDataset> tasks, std::span<const std::string> holdout_ids,
                           const EncoderConfig& encoder_config, const MetaConfig& config);

struct AdaptOptions {
    // When set, average scores over this many posterior draws instead of using
    // the posterior mean.
    std::optional<std::size_t> sampled_scorers;
    std::uint64_t seed = 0;
};

// Infers the posterior from `support` and scores each query row by its squared
// distance to the support-mean center. Never modifies the model.
std::vector<double> adapt_and_score(const Matrix& support, const Matrix& queries, const MetaModel& model,
                                    const AdaptOptions& options = {});

}  // namespace ocsvdd
