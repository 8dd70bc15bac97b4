#include "ocsvdd/fidelity.hpp"

#include <algorithm>

#include "ocsvdd/meta.hpp"
#include "ocsvdd/svdd.hpp"

namespace ocsvdd {

namespace {

GradCheckResult check_ocsvdd(std::uint64_t seed, bool final_bias, double h) {
    Rng rng(seed);
    EncoderConfig cfg{8, {16}, 4, final_bias};
    EncoderParams params = init_params(cfg, rng);
    if (params.final_bias) {
        for (double& v : params.final_bias->data()) v = 0.3 * rng.normal();
    }
    for (auto& l : params.trunk)
        for (double& v : l.bias.data()) v = 0.1 * rng.normal();
    const Matrix x = gaussian_sample(rng, 6, cfg.input_dim);
    const Center center = init_center(x, params);
    Matrix shift = gaussian_sample(rng, 1, cfg.latent_dim);
    Center c{center.value};
    c.value += shift;

    const ObjectiveWithGrad obj = ocsvdd_objective(x, params, c);
    const std::vector<double> analytic = flatten(std::as_const(obj.grad).tensors());
    const std::vector<double> p0 = flatten(std::as_const(params).tensors());
    EncoderParams work = params;
    const std::vector<Matrix*> slots = work.tensors();
    auto loss = [&](std::span<const double> p) {
        unflatten(p, slots);
        return ocsvdd_loss(encode(x, work), c).loss;
    };
    return grad_check(loss, p0, analytic, h);
}

GradCheckResult check_meta(std::uint64_t seed, double h) {
    Rng rng(seed + 1000);
    EncoderConfig cfg{8, {16}, 4, false};
    MetaConfig meta;
    meta.samples = 2;
    meta.inference_hidden = {16, 16};
    MetaModel model = init_meta_model(cfg, meta, rng);
    // Randomize the zero-initialized output layer so every path carries gradient.
    auto& out = model.inference.back();
    for (double& v : out.weight.data()) v = 0.05 * rng.normal();
    const std::size_t p = model.final_param_count();
    for (std::size_t k = 0; k < p; ++k) out.bias(0, k) = 0.5 * rng.normal();
    for (std::size_t k = p; k < 2 * p; ++k) out.bias(0, k) = -1.0 + 0.3 * rng.normal();
    for (auto& l : model.trunk)
        for (double& v : l.bias.data()) v = 0.1 * rng.normal();

    Episode ep;
    ep.task_id = "gradcheck";
    ep.support = gaussian_sample(rng, 5, cfg.input_dim);
    Matrix pos = gaussian_sample(rng, 4, cfg.input_dim);
    Matrix neg = gaussian_sample(rng, 4, cfg.input_dim);
    for (double& v : neg.data()) v += 1.5;
    ep.query = vstack(pos, neg);
    ep.query_labels = {1, 1, 1, 1, -1, -1, -1, -1};

    const FinalLayerPosterior posterior = infer_posterior(ep.support, model);
    std::vector<FinalLayer> noise;
    for (std::size_t l = 0; l < meta.samples; ++l) noise.push_back(draw_noise(posterior, rng));

    const MetaLoss ml = meta_svdd_loss(ep, model, meta, noise);
    const std::vector<double> analytic = flatten(ml.grad.tensors());
    const std::vector<double> p0 = flatten(std::as_const(model).tensors());
    MetaModel work = model;
    const std::vector<Matrix*> slots = work.tensors();
    auto loss = [&](std::span<const double> params) {
        unflatten(params, slots);
        return meta_svdd_loss(ep, work, meta, noise).loss;
    };
    return grad_check(loss, p0, analytic, h);
}

}  // namespace

double FidelityReport::worst() const {
    return std::max({ocsvdd.max_rel_error, ocsvdd_bias.max_rel_error, meta.max_rel_error});
}

FidelityReport gradient_fidelity(std::uint64_t seed, double h) {
    return {check_ocsvdd(seed, false, h), check_ocsvdd(seed, true, h), check_meta(seed, h)};
}

}  // namespace ocsvdd
