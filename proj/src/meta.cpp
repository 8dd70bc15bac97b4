#include "ocsvdd/meta.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "ocsvdd/adam.hpp"

namespace ocsvdd {

namespace {

constexpr double kLogvarMin = -10.0;
constexpr double kLogvarMax = 10.0;

// Final-layer parameters in flat order: weight row-major, then bias.
struct FinalLayout {
    std::size_t latent;
    std::size_t features;
    bool bias;

    std::size_t size() const { return latent * features + (bias ? latent : 0); }

    FinalLayer unpack(std::span<const double> flat) const {
        FinalLayer out;
        out.weight = Matrix(latent, features);
        std::copy_n(flat.begin(), latent * features, out.weight.data().begin());
        if (bias) {
            out.bias = Matrix(1, latent);
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(latent * features), latent, out.bias->data().begin());
        }
        return out;
    }

    // Accumulates weight(/bias) gradients into flat.
    void add_into(std::span<double> flat, const Matrix& d_weight, const Matrix* d_bias) const {
        const auto w = d_weight.data();
        for (std::size_t k = 0; k < w.size(); ++k) flat[k] += w[k];
        if (bias && d_bias) {
            const auto b = d_bias->data();
            for (std::size_t k = 0; k < b.size(); ++k) flat[latent * features + k] += b[k];
        }
    }
};

FinalLayout layout_of(const EncoderConfig& config) {
    return {config.latent_dim, config.feature_dim(), config.final_bias};
}

std::vector<double> pack(const FinalLayer& layer) {
    std::vector<double> out(layer.weight.data().begin(), layer.weight.data().end());
    if (layer.bias) out.insert(out.end(), layer.bias->data().begin(), layer.bias->data().end());
    return out;
}

DenseLayer he_layer(std::size_t in, std::size_t out, Rng& rng) {
    DenseLayer l{gaussian_sample(rng, out, in), Matrix(1, out)};
    l.weight *= std::sqrt(2.0 / static_cast<double>(in));
    return l;
}

std::vector<FinalLayer> draw_noise_set(const FinalLayout& layout, std::size_t count, Rng& rng) {
    std::vector<FinalLayer> out;
    out.reserve(count);
    for (std::size_t l = 0; l < count; ++l) {
        FinalLayer eps;
        eps.weight = gaussian_sample(rng, layout.latent, layout.features);
        if (layout.bias) eps.bias = gaussian_sample(rng, 1, layout.latent);
        out.push_back(std::move(eps));
    }
    return out;
}

const Matrix* bias_ptr(const FinalLayer& l) { return l.bias ? &*l.bias : nullptr; }

void check_model(const MetaModel& model) {
    model.config.validate();
    if (model.trunk.size() != model.config.hidden_dims.size()) throw DimensionError("meta model: trunk depth mismatch");
    if (model.inference.empty()) throw DimensionError("meta model: empty inference network");
    if (model.inference.front().in_dim() != model.config.feature_dim()) {
        throw DimensionError("meta model: inference network input does not match trunk width");
    }
    if (model.inference.back().out_dim() != 2 * model.final_param_count()) {
        throw DimensionError("meta model: inference network output is not 2 x final-layer size");
    }
}

void add_layers(std::vector<DenseLayer>& into, const std::vector<DenseLayer>& from) {
    if (into.size() != from.size()) throw DimensionError("gradient layer count mismatch");
    for (std::size_t k = 0; k < into.size(); ++k) {
        into[k].weight += from[k].weight;
        into[k].bias += from[k].bias;
    }
}

}  // namespace

void MetaConfig::validate() const {
    if (samples < 1) throw ConfigError("L (posterior samples) must be >= 1");
    if (meta_batch < 1) throw ConfigError("meta_batch must be >= 1");
    if (!(eta > 0.0)) throw ConfigError("eta must be > 0");
    if (support_size < 1) throw ConfigError("support size must be >= 1");
    if (query_in < 1 || query_out < 1) throw ConfigError("query sizes must be >= 1");
    if (!(lr > 0.0)) throw ConfigError("meta lr must be > 0");
    if (!(inverse_eps > 0.0)) throw ConfigError("inverse_eps must be > 0");
    if (inference_hidden.size() != 2) throw ConfigError("inference network takes exactly two hidden widths");
    for (std::size_t h : inference_hidden)
        if (h < 1) throw ConfigError("inference hidden widths must be >= 1");
}

std::size_t MetaModel::final_param_count() const noexcept { return layout_of(config).size(); }

std::vector<Matrix*> MetaModel::tensors() {
    std::vector<Matrix*> out;
    for (auto* layers : {&trunk, &inference}) {
        for (auto& l : *layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    return out;
}

std::vector<const Matrix*> MetaModel::tensors() const {
    std::vector<const Matrix*> out;
    for (const auto* layers : {&trunk, &inference}) {
        for (const auto& l : *layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    return out;
}

MetaGradients MetaGradients::zeros_like(const MetaModel& model) {
    return {ocsvdd::zeros_like(model.trunk), ocsvdd::zeros_like(model.inference)};
}

MetaGradients& MetaGradients::operator+=(const MetaGradients& other) {
    add_layers(trunk, other.trunk);
    add_layers(inference, other.inference);
    return *this;
}

std::vector<const Matrix*> MetaGradients::tensors() const {
    std::vector<const Matrix*> out;
    for (const auto* layers : {&trunk, &inference}) {
        for (const auto& l : *layers) {
            out.push_back(&l.weight);
            out.push_back(&l.bias);
        }
    }
    return out;
}

MetaModel init_meta_model(const EncoderConfig& config, const MetaConfig& meta, Rng& rng) {
    config.validate();
    meta.validate();
    MetaModel m;
    m.config = config;
    m.trunk = init_params(config, rng).trunk;

    const std::size_t p = layout_of(config).size();
    std::size_t fan_in = config.feature_dim();
    for (std::size_t width : meta.inference_hidden) {
        m.inference.push_back(he_layer(fan_in, width, rng));
        fan_in = width;
    }
    DenseLayer out{Matrix(2 * p, fan_in), Matrix(1, 2 * p)};
    for (std::size_t k = p; k < 2 * p; ++k) out.bias(0, k) = meta.initial_logvar;
    m.inference.push_back(std::move(out));
    return m;
}

ModelFile to_model_file(const MetaModel& model) {
    check_model(model);
    ModelFile f;
    f.config = model.config;
    f.params.trunk = model.trunk;
    // Placeholder: the final layer is amortized per task.
    f.params.final_weight = Matrix(model.config.latent_dim, model.config.feature_dim());
    if (model.config.final_bias) f.params.final_bias = Matrix(1, model.config.latent_dim);
    f.inference = model.inference;
    return f;
}

MetaModel meta_model_from_file(const ModelFile& file) {
    if (!file.inference) throw InputError("model file is not a meta model (flag bit2 unset)");
    MetaModel m{file.config, file.params.trunk, *file.inference};
    check_model(m);
    return m;
}

std::size_t Episode::query_positives() const {
    return static_cast<std::size_t>(std::count(query_labels.begin(), query_labels.end(), 1));
}

std::size_t Episode::query_negatives() const {
    return static_cast<std::size_t>(std::count(query_labels.begin(), query_labels.end(), -1));
}

Episode sample_episode(const TaskDataset& task, Rng& rng, const MetaConfig& config) {
    const auto pos = task.indices_with_label(1);
    const auto neg = task.indices_with_label(-1);
    if (pos.size() <= config.support_size) {
        throw InputError("task " + task.task_id + ": " + std::to_string(pos.size()) +
                         " in-distribution rows, need more than support size " +
                         std::to_string(config.support_size) + " to form a disjoint query");
    }
    if (neg.empty()) throw InputError("task " + task.task_id + ": no out-of-distribution rows for the query");

    const auto pos_order = rng.sample_without_replacement(pos.size(), pos.size());
    const std::size_t n_query_in = std::min(config.query_in, pos.size() - config.support_size);
    const auto neg_order = rng.sample_without_replacement(neg.size(), std::min(config.query_out, neg.size()));

    std::vector<std::size_t> support_rows;
    std::vector<std::size_t> query_rows;
    for (std::size_t k = 0; k < config.support_size; ++k) support_rows.push_back(pos[pos_order[k]]);
    for (std::size_t k = 0; k < n_query_in; ++k) query_rows.push_back(pos[pos_order[config.support_size + k]]);
    for (std::size_t k : neg_order) query_rows.push_back(neg[k]);

    Episode ep;
    ep.task_id = task.task_id;
    ep.support = gather_rows(task.features, support_rows);
    ep.query = gather_rows(task.features, query_rows);
    ep.query_labels.assign(n_query_in, 1);
    ep.query_labels.resize(query_rows.size(), -1);
    return ep;
}

FinalLayerPosterior infer_posterior(const Matrix& support, const MetaModel& model) {
    check_model(model);
    if (support.rows() == 0) throw InputError("infer_posterior: empty support set");
    const Matrix pooled = column_means(stack_forward(support, model.trunk, true).output());
    const Matrix out = stack_forward(pooled, model.inference, false).output();
    const FinalLayout layout = layout_of(model.config);
    const std::size_t p = layout.size();
    const auto flat = out.data();
    std::vector<double> logvar(flat.begin() + static_cast<std::ptrdiff_t>(p), flat.end());
    for (double& v : logvar) v = std::clamp(v, kLogvarMin, kLogvarMax);
    return {layout.unpack(flat.first(p)), layout.unpack(logvar)};
}

FinalLayer sample_function(const FinalLayerPosterior& posterior, const FinalLayer& noise) {
    if (!noise.weight.same_shape(posterior.mean.weight) || noise.bias.has_value() != posterior.mean.bias.has_value()) {
        throw DimensionError("sample_function: noise does not match the posterior layout");
    }
    auto draw = [](const Matrix& mu, const Matrix& logvar, const Matrix& eps) {
        Matrix w(mu.rows(), mu.cols());
        for (std::size_t k = 0; k < w.size(); ++k) {
            w.data()[k] = mu.data()[k] + std::exp(0.5 * logvar.data()[k]) * eps.data()[k];
        }
        return w;
    };
    FinalLayer out;
    out.weight = draw(posterior.mean.weight, posterior.logvar.weight, noise.weight);
    if (posterior.mean.bias) out.bias = draw(*posterior.mean.bias, *posterior.logvar.bias, *noise.bias);
    return out;
}

FinalLayer draw_noise(const FinalLayerPosterior& posterior, Rng& rng) {
    FinalLayer eps;
    eps.weight = gaussian_sample(rng, posterior.mean.weight.rows(), posterior.mean.weight.cols());
    if (posterior.mean.bias) eps.bias = gaussian_sample(rng, 1, posterior.mean.bias->cols());
    return eps;
}

FinalLayer sample_function(const FinalLayerPosterior& posterior, Rng& rng) {
    return sample_function(posterior, draw_noise(posterior, rng));
}

Matrix episode_center(const Matrix& support, const MetaModel& model, const FinalLayerPosterior& posterior) {
    const Matrix features = stack_forward(support, model.trunk, true).output();
    return column_means(apply_final(features, posterior.mean.weight, bias_ptr(posterior.mean)));
}

MetaLoss meta_svdd_loss(const Episode& episode, const MetaModel& model, const MetaConfig& config,
                        std::span<const FinalLayer> noise) {
    check_model(model);
    if (!(config.eta > 0.0)) throw ConfigError("eta must be > 0");
    if (noise.empty()) throw ConfigError("meta_svdd_loss: need at least one posterior sample");
    if (episode.support.rows() == 0) throw InputError("meta_svdd_loss: empty support set");
    if (episode.query_labels.size() != episode.query.rows()) {
        throw DimensionError("meta_svdd_loss: query labels do not match query rows");
    }
    const std::size_t n_pos = episode.query_positives();
    const std::size_t n_neg = episode.query_negatives();
    if (n_pos == 0) throw InputError("meta_svdd_loss: task " + episode.task_id + " has no in-distribution query rows");

    const FinalLayout layout = layout_of(model.config);
    const std::size_t p = layout.size();
    const std::size_t n_samples = noise.size();
    const std::size_t n_support = episode.support.rows();

    // Support path: trunk -> mean pool -> inference net -> (mu, logvar).
    const StackCache support_cache = stack_forward(episode.support, model.trunk, true);
    const Matrix& support_features = support_cache.output();
    const Matrix pooled = column_means(support_features);
    const StackCache inference_cache = stack_forward(pooled, model.inference, false);
    const auto raw = inference_cache.output().data();

    std::vector<double> logvar(raw.begin() + static_cast<std::ptrdiff_t>(p), raw.end());
    for (double& v : logvar) v = std::clamp(v, kLogvarMin, kLogvarMax);
    std::vector<double> sigma(p);
    for (std::size_t k = 0; k < p; ++k) sigma[k] = std::exp(0.5 * logvar[k]);
    const FinalLayer mean = layout.unpack(raw.first(p));

    const Matrix center = column_means(apply_final(support_features, mean.weight, bias_ptr(mean)));

    const StackCache query_cache = stack_forward(episode.query, model.trunk, true);
    const Matrix& query_features = query_cache.output();

    const double scale = 1.0 / (static_cast<double>(n_samples) * static_cast<double>(n_pos + n_neg + n_samples));
    std::vector<double> d_mean(p, 0.0);
    std::vector<double> d_logvar(p, 0.0);
    Matrix d_query_features(query_features.rows(), query_features.cols());
    Matrix d_center(1, center.cols());
    double loss = 0.0;

    std::vector<double> w(p);
    for (std::size_t l = 0; l < n_samples; ++l) {
        const std::vector<double> eps = pack(noise[l]);
        if (eps.size() != p) throw DimensionError("meta_svdd_loss: noise does not match the posterior layout");
        for (std::size_t k = 0; k < p; ++k) w[k] = raw[k] + sigma[k] * eps[k];
        const FinalLayer f = layout.unpack(w);
        const Matrix z = apply_final(query_features, f.weight, bias_ptr(f));

        Matrix d_z(z.rows(), z.cols());
        double bracket = 0.0;
        for (std::size_t i = 0; i < z.rows(); ++i) {
            double dist = 0.0;
            for (std::size_t j = 0; j < z.cols(); ++j) {
                const double d = z(i, j) - center(0, j);
                dist += d * d;
            }
            double g;
            if (episode.query_labels[i] == 1) {
                bracket += dist;
                g = 1.0;
            } else {
                const double inv = 1.0 / (dist + config.inverse_eps);
                bracket += config.eta * inv;
                g = -config.eta * inv * inv;
            }
            for (std::size_t j = 0; j < z.cols(); ++j) {
                const double dz = scale * g * 2.0 * (z(i, j) - center(0, j));
                d_z(i, j) = dz;
                d_center(0, j) -= dz;
            }
        }
        loss += scale * bracket;

        const Matrix d_w = matmul_tn(d_z, query_features);
        const Matrix d_b = column_sums(d_z);
        d_query_features += matmul(d_z, f.weight);

        std::vector<double> d_sample(p, 0.0);
        layout.add_into(d_sample, d_w, &d_b);
        for (std::size_t k = 0; k < p; ++k) {
            d_mean[k] += d_sample[k];
            d_logvar[k] += d_sample[k] * eps[k] * 0.5 * sigma[k];
        }
    }
    if (!std::isfinite(loss)) throw NumericError("meta_svdd_loss: non-finite loss on task " + episode.task_id);

    // Center path: c = mean_s(h_s W_mu^T + b_mu).
    Matrix d_support_latents(n_support, center.cols());
    for (std::size_t i = 0; i < n_support; ++i)
        for (std::size_t j = 0; j < center.cols(); ++j)
            d_support_latents(i, j) = d_center(0, j) / static_cast<double>(n_support);
    const Matrix d_center_w = matmul_tn(d_support_latents, support_features);
    const Matrix d_center_b = column_sums(d_support_latents);
    layout.add_into(d_mean, d_center_w, &d_center_b);
    Matrix d_support_features = matmul(d_support_latents, mean.weight);

    Matrix d_raw(1, 2 * p);
    for (std::size_t k = 0; k < p; ++k) {
        d_raw(0, k) = d_mean[k];
        const double r = raw[p + k];
        d_raw(0, p + k) = (r > kLogvarMin && r < kLogvarMax) ? d_logvar[k] : 0.0;
    }

    MetaLoss out{loss, MetaGradients::zeros_like(model)};
    const Matrix d_pooled = stack_backward(inference_cache, model.inference, d_raw, out.grad.inference);
    for (std::size_t i = 0; i < n_support; ++i)
        for (std::size_t j = 0; j < pooled.cols(); ++j)
            d_support_features(i, j) += d_pooled(0, j) / static_cast<double>(n_support);
    stack_backward(support_cache, model.trunk, d_support_features, out.grad.trunk);
    stack_backward(query_cache, model.trunk, d_query_features, out.grad.trunk);
    return out;
}

MetaLoss meta_svdd_loss(const Episode& episode, const MetaModel& model, const MetaConfig& config, Rng& rng) {
    config.validate();
    const auto noise = draw_noise_set(layout_of(model.config), config.samples, rng);
    return meta_svdd_loss(episode, model, config, noise);
}

MetaLoss accumulate_meta_loss(std::span<const Episode> episodes, const MetaModel& model, const MetaConfig& config,
                              std::span<const std::vector<FinalLayer>> noise) {
    if (noise.size() != episodes.size()) throw DimensionError("accumulate_meta_loss: one noise set per episode");
    MetaLoss total{0.0, MetaGradients::zeros_like(model)};
    for (std::size_t e = 0; e < episodes.size(); ++e) {
        const MetaLoss one = meta_svdd_loss(episodes[e], model, config, noise[e]);
        total.loss += one.loss;
        total.grad += one.grad;
    }
    return total;
}

MetaTrainResult meta_train(std::span<const TaskDataset> tasks, std::span<const std::string> holdout_ids,
                           const EncoderConfig& encoder_config, const MetaConfig& config) {
    config.validate();
    encoder_config.validate();
    const std::set<std::string> holdout(holdout_ids.begin(), holdout_ids.end());
    std::vector<const TaskDataset*> pool;
    for (const auto& t : tasks) {
        if (holdout.count(t.task_id)) continue;
        if (t.dim() != encoder_config.input_dim) {
            throw DimensionError("meta_train: task " + t.task_id + " has " + std::to_string(t.dim()) +
                                 " features, encoder expects " + std::to_string(encoder_config.input_dim));
        }
        pool.push_back(&t);
    }
    if (pool.empty()) throw InputError("meta_train: no tasks left after excluding holdouts");
    if (pool.size() < 2) throw InputError("meta_train: need at least 2 training tasks, have " + std::to_string(pool.size()));

    Rng init_rng(config.seed);
    MetaTrainResult result;
    result.model = init_meta_model(encoder_config, config, init_rng);
    MetaModel& model = result.model;

    const std::vector<Matrix*> params = model.tensors();
    const std::vector<const Matrix*> shapes(params.begin(), params.end());
    AdamState adam(AdamConfig{config.lr}, shapes);

    Rng rng(config.seed ^ 0x6d657461ULL);
    std::vector<Episode> episodes;
    std::vector<std::vector<FinalLayer>> noise;
    for (std::size_t step = 0; step < config.meta_steps; ++step) {
        std::vector<std::size_t> picks;
        if (pool.size() >= config.meta_batch) {
            picks = rng.sample_without_replacement(pool.size(), config.meta_batch);
        } else {
            for (std::size_t b = 0; b < config.meta_batch; ++b) picks.push_back(static_cast<std::size_t>(rng.below(pool.size())));
        }
        episodes.clear();
        noise.clear();
        for (std::size_t idx : picks) {
            episodes.push_back(sample_episode(*pool[idx], rng, config));
            noise.push_back(draw_noise_set(layout_of(encoder_config), config.samples, rng));
        }
        MetaLoss total;
        try {
            total = accumulate_meta_loss(episodes, model, config, noise);
        } catch (const NumericError& e) {
            throw NumericError("meta_train: step " + std::to_string(step) + ": " + e.what());
        }
        result.step_losses.push_back(total.loss / static_cast<double>(episodes.size()));
        adam.update(params, total.grad.tensors());
    }
    return result;
}

std::vector<double> adapt_and_score(const Matrix& support, const Matrix& queries, const MetaModel& model,
                                    const AdaptOptions& options) {
    if (support.rows() == 0) throw InputError("adapt_and_score: empty support set");
    if (queries.cols() != model.config.input_dim || support.cols() != model.config.input_dim) {
        throw DimensionError("adapt_and_score: feature width does not match the model input");
    }
    const FinalLayerPosterior posterior = infer_posterior(support, model);
    const Matrix center = episode_center(support, model, posterior);
    const Matrix features = stack_forward(queries, model.trunk, true).output();

    if (!options.sampled_scorers) {
        return row_sq_distances(apply_final(features, posterior.mean.weight, bias_ptr(posterior.mean)), center);
    }
    const std::size_t n = *options.sampled_scorers;
    if (n < 1) throw ConfigError("adapt_and_score: sampled scorer count must be >= 1");
    Rng rng(options.seed);
    std::vector<double> scores(queries.rows(), 0.0);
    for (std::size_t l = 0; l < n; ++l) {
        const FinalLayer f = sample_function(posterior, rng);
        const auto d = row_sq_distances(apply_final(features, f.weight, bias_ptr(f)), center);
        for (std::size_t i = 0; i < d.size(); ++i) scores[i] += d[i] / static_cast<double>(n);
    }
    return scores;
}

}  // namespace ocsvdd
