#include <doctest.h>

#include <cmath>
#include <numeric>

#include "ocsvdd/grad_check.hpp"
#include "ocsvdd/meta.hpp"
#include "ocsvdd/svdd.hpp"
#include "ocsvdd/synth.hpp"
#include "test_util.hpp"

using namespace ocsvdd;

namespace {

// Identity trunk (no hidden layers) and an inference net whose output is
// fixed by its last bias, so the posterior is (mu, logvar) for any support.
MetaModel fixed_posterior_model(std::size_t dim, std::vector<double> mu, double logvar) {
    MetaConfig meta;
    meta.inference_hidden = {2, 2};
    EncoderConfig enc{dim, {}, dim, false};
    Rng rng(0);
    MetaModel m = init_meta_model(enc, meta, rng);
    auto& out = m.inference.back();
    for (std::size_t k = 0; k < mu.size(); ++k) out.bias(0, k) = mu[k];
    for (std::size_t k = mu.size(); k < 2 * mu.size(); ++k) out.bias(0, k) = logvar;
    return m;
}

TaskDataset toy_task(Rng& rng, std::size_t n_pos, std::size_t n_neg, std::size_t dim, std::string id = "toy") {
    TaskDataset t;
    t.task_id = std::move(id);
    t.features = testing::random_matrix(rng, n_pos + n_neg, dim);
    for (std::size_t i = n_pos; i < n_pos + n_neg; ++i)
        for (std::size_t j = 0; j < dim; ++j) t.features(i, j) += 3.0;
    t.labels.assign(n_pos, 1);
    t.labels.resize(n_pos + n_neg, -1);
    return t;
}

MetaModel random_meta_model(Rng& rng, const EncoderConfig& enc, const MetaConfig& meta) {
    MetaModel m = init_meta_model(enc, meta, rng);
    auto& out = m.inference.back();
    out.weight = testing::random_matrix(rng, out.weight.rows(), out.weight.cols(), 0.1);
    for (std::size_t k = 0; k < out.bias.cols(); ++k) out.bias(0, k) = 0.3 * rng.normal() + (k < m.final_param_count() ? 0.0 : -2.0);
    for (auto& l : m.trunk) l.bias = testing::random_matrix(rng, 1, l.bias.cols(), 0.2);
    return m;
}

std::vector<FinalLayer> zero_noise(const MetaModel& m, std::size_t count) {
    std::vector<FinalLayer> out;
    for (std::size_t l = 0; l < count; ++l) {
        FinalLayer z{Matrix(m.config.latent_dim, m.config.feature_dim()), std::nullopt};
        if (m.config.final_bias) z.bias = Matrix(1, m.config.latent_dim);
        out.push_back(std::move(z));
    }
    return out;
}

}  // namespace

TEST_SUITE("episodes") {
    TEST_CASE("support is in-distribution and disjoint from the query") {
        Rng rng(1);
        TaskDataset t = toy_task(rng, 30, 25, 3);
        MetaConfig cfg;
        Rng r(7);
        const Episode ep = sample_episode(t, r, cfg);
        CHECK(ep.support.rows() == cfg.support_size);
        CHECK(ep.query_positives() == 20);
        CHECK(ep.query_negatives() == 20);
        for (std::size_t i = 0; i + 1 < ep.query_labels.size(); ++i) CHECK(ep.query_labels[i] >= ep.query_labels[i + 1]);
        // Every support row is a +1 row and none reappears in the query.
        for (std::size_t s = 0; s < ep.support.rows(); ++s) {
            bool found_pos = false;
            for (std::size_t i = 0; i < 30; ++i)
                found_pos |= std::equal(ep.support.row(s).begin(), ep.support.row(s).end(), t.features.row(i).begin());
            CHECK(found_pos);
            for (std::size_t q = 0; q < ep.query.rows(); ++q)
                CHECK_FALSE(std::equal(ep.support.row(s).begin(), ep.support.row(s).end(), ep.query.row(q).begin()));
        }
    }

    TEST_CASE("query sizes shrink to what the task has") {
        Rng rng(2);
        TaskDataset t = toy_task(rng, 13, 4, 2);
        Rng r(1);
        const Episode ep = sample_episode(t, r, MetaConfig{});
        CHECK(ep.query_positives() == 3);
        CHECK(ep.query_negatives() == 4);
    }

    TEST_CASE("same seed gives the same episode") {
        Rng rng(3);
        TaskDataset t = toy_task(rng, 40, 40, 4);
        Rng a(5), b(5);
        const Episode e1 = sample_episode(t, a, MetaConfig{});
        const Episode e2 = sample_episode(t, b, MetaConfig{});
        CHECK(e1.support == e2.support);
        CHECK(e1.query == e2.query);
        CHECK(e1.query_labels == e2.query_labels);
    }

    TEST_CASE("insufficient rows name the task") {
        Rng rng(4);
        MetaConfig cfg;
        TaskDataset exact = toy_task(rng, cfg.support_size, 5, 2, "tiny");
        Rng r(0);
        try {
            sample_episode(exact, r, cfg);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("tiny") != std::string::npos);
        }
        TaskDataset no_neg = toy_task(rng, 30, 0, 2, "pure");
        CHECK_THROWS_AS(sample_episode(no_neg, r, cfg), InputError);
    }
}

TEST_SUITE("posterior") {
    TEST_CASE("initial posterior has zero mean and the initial log-variance") {
        MetaConfig meta;
        EncoderConfig enc{4, {6}, 3, true};
        Rng rng(1);
        const MetaModel m = init_meta_model(enc, meta, rng);
        CHECK(m.final_param_count() == 3 * 6 + 3);
        const auto post = infer_posterior(testing::random_matrix(rng, 5, 4), m);
        CHECK(post.mean.weight == Matrix(3, 6));
        CHECK(post.mean.bias.value() == Matrix(1, 3));
        CHECK(post.logvar.weight == Matrix(3, 6, -4.0));
        CHECK(post.logvar.bias.value() == Matrix(1, 3, -4.0));
    }

    TEST_CASE("mean pooling feeds the inference net") {
        // Identity trunk, support {(1,2),(3,4)}: the first inference layer
        // sees the pooled vector (2,3).
        MetaModel m = fixed_posterior_model(2, {0, 0, 0, 0}, -4);
        auto& first = m.inference.front();
        first.weight = Matrix(2, 2, {1, 0, 0, 1});
        first.bias = Matrix(1, 2);
        auto& second = m.inference[1];
        second.weight = Matrix(2, 2, {1, 0, 0, 1});
        second.bias = Matrix(1, 2);
        auto& out = m.inference.back();
        out.weight = Matrix(8, 2);
        out.weight(0, 0) = 1.0;  // mu[0] = pooled[0]
        out.weight(1, 1) = 1.0;  // mu[1] = pooled[1]
        const auto post = infer_posterior(Matrix(2, 2, {1, 2, 3, 4}), m);
        CHECK(post.mean.weight(0, 0) == 2.0);
        CHECK(post.mean.weight(0, 1) == 3.0);
        CHECK_THROWS_AS(infer_posterior(Matrix(0, 2), m), InputError);
    }

    TEST_CASE("log-variance is clamped") {
        CHECK(infer_posterior(Matrix(1, 1, {1}), fixed_posterior_model(1, {0}, -25)).logvar.weight(0, 0) == -10.0);
        CHECK(infer_posterior(Matrix(1, 1, {1}), fixed_posterior_model(1, {0}, 25)).logvar.weight(0, 0) == 10.0);
    }

    TEST_CASE("posterior is invariant to support order") {
        MetaConfig meta;
        EncoderConfig enc{5, {8}, 3, false};
        Rng rng(9);
        const MetaModel m = random_meta_model(rng, enc, meta);
        const Matrix s = testing::random_matrix(rng, 6, 5);
        const std::vector<std::size_t> perm = {3, 5, 0, 1, 4, 2};
        const auto a = infer_posterior(s, m);
        const auto b = infer_posterior(gather_rows(s, perm), m);
        for (std::size_t k = 0; k < a.mean.weight.size(); ++k) {
            CHECK(a.mean.weight.data()[k] == doctest::Approx(b.mean.weight.data()[k]).epsilon(1e-13));
            CHECK(a.logvar.weight.data()[k] == doctest::Approx(b.logvar.weight.data()[k]).epsilon(1e-13));
        }
    }
}

TEST_SUITE("sampling") {
    TEST_CASE("reparameterization example") {
        FinalLayerPosterior post{{Matrix(1, 1, {1.0}), std::nullopt}, {Matrix(1, 1, {0.0}), std::nullopt}};
        const FinalLayer eps{Matrix(1, 1, {0.5}), std::nullopt};
        CHECK(sample_function(post, eps).weight(0, 0) == 1.5);
        const FinalLayer wrong{Matrix(1, 2), std::nullopt};
        CHECK_THROWS_AS(sample_function(post, wrong), DimensionError);
    }

    TEST_CASE("samples at the clamp floor stay near the mean") {
        FinalLayerPosterior post{{Matrix(1, 1, {2.0}), std::nullopt}, {Matrix(1, 1, {-10.0}), std::nullopt}};
        Rng rng(3);
        for (int i = 0; i < 1000; ++i) CHECK(std::abs(sample_function(post, rng).weight(0, 0) - 2.0) < 0.03);
    }

    TEST_CASE("sample moments") {
        const double mu = -0.7, logvar = 0.4;
        FinalLayerPosterior post{{Matrix(1, 1, {mu}), std::nullopt}, {Matrix(1, 1, {logvar}), std::nullopt}};
        Rng rng(8);
        const int n = 10000;
        double s = 0, sq = 0;
        for (int i = 0; i < n; ++i) {
            const double w = sample_function(post, rng).weight(0, 0);
            s += w;
            sq += w * w;
        }
        const double mean = s / n;
        const double var = sq / n - mean * mean;
        const double sigma = std::exp(0.5 * logvar);
        CHECK(std::abs(mean - mu) <= 4.0 * sigma / 100.0);
        CHECK(std::abs(var - sigma * sigma) <= 0.1 * sigma * sigma);
    }
}

TEST_SUITE("meta_loss") {
    TEST_CASE("hand evaluated example") {
        // Identity trunk, final weight 1, support {0} so c = 0. One in-dist query
        // at squared distance 4, one out-of-distribution at squared distance 2.
        const MetaModel m = fixed_posterior_model(1, {1.0}, -10);
        Episode ep{"hand", Matrix(1, 1, {0.0}), Matrix(2, 1, {2.0, std::sqrt(2.0)}), {1, -1}};
        MetaConfig cfg;
        const auto noise = zero_noise(m, 1);
        const double expect = (4.0 + 1.0 / (2.0 + 1e-6)) / 3.0;
        CHECK(meta_svdd_loss(ep, m, cfg, noise).loss == doctest::Approx(expect).epsilon(1e-12));
        CHECK(expect == doctest::Approx(1.5).epsilon(1e-6));
    }

    TEST_CASE("all query latents at the center with no negatives") {
        const MetaModel m = fixed_posterior_model(2, {1, 0, 0, 1}, -10);
        Episode ep{"zero", Matrix(2, 2, {1, 1, 3, 3}), Matrix(3, 2, 2.0), {1, 1, 1}};
        CHECK(meta_svdd_loss(ep, m, MetaConfig{}, zero_noise(m, 1)).loss == 0.0);
    }

    TEST_CASE("reduces to the one-class loss without negatives") {
        MetaConfig cfg;
        cfg.inference_hidden = {16, 16};
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(seed);
            EncoderConfig enc{8, {16}, 4, seed % 2 == 1};
            const MetaModel m = random_meta_model(rng, enc, cfg);
            const std::size_t n = 1 + rng.below(8);
            Episode ep{"r", testing::random_matrix(rng, 5, 8), testing::random_matrix(rng, n, 8),
                       std::vector<int>(n, 1)};
            const double meta = meta_svdd_loss(ep, m, cfg, zero_noise(m, 1)).loss;

            const auto post = infer_posterior(ep.support, m);
            EncoderParams p{m.trunk, post.mean.weight, post.mean.bias};
            const Center c{episode_center(ep.support, m, post)};
            const double oc = ocsvdd_loss(encode(ep.query, p), c).loss;
            CHECK(std::abs(meta - static_cast<double>(n) / static_cast<double>(n + 1) * oc) <= 1e-12);
        }
    }

    TEST_CASE("penalty is monotone in query distances") {
        const MetaModel m = fixed_posterior_model(1, {1.0}, -10);
        const MetaConfig cfg;
        const auto noise = zero_noise(m, 1);
        auto loss = [&](double in_x, double out_x) {
            Episode ep{"mono", Matrix(1, 1, {0.0}), Matrix(2, 1, {in_x, out_x}), {1, -1}};
            return meta_svdd_loss(ep, m, cfg, noise).loss;
        };
        CHECK(loss(1.0, 2.0) > loss(1.0, 3.0));
        CHECK(loss(1.0, 3.0) > loss(1.0, 5.0));
        CHECK(loss(1.0, 2.0) < loss(1.5, 2.0));
        CHECK(loss(1.5, 2.0) < loss(3.0, 2.0));
    }

    TEST_CASE("loss is affine in eta") {
        MetaConfig cfg;
        cfg.inference_hidden = {6, 6};
        Rng rng(4);
        const MetaModel m = random_meta_model(rng, EncoderConfig{3, {5}, 2, false}, cfg);
        TaskDataset t = toy_task(rng, 30, 30, 3);
        Rng er(1);
        const Episode ep = sample_episode(t, er, cfg);
        Rng nr(2);
        const auto post = infer_posterior(ep.support, m);
        std::vector<FinalLayer> noise;
        for (int l = 0; l < 3; ++l) noise.push_back(draw_noise(post, nr));
        auto at = [&](double eta) {
            MetaConfig c = cfg;
            c.eta = eta;
            return meta_svdd_loss(ep, m, c, noise).loss;
        };
        const double l1 = at(1.0), l2 = at(2.0), l5 = at(5.0);
        const double slope = l2 - l1;
        CHECK(slope > 0.0);
        CHECK(l5 == doctest::Approx(l1 + 4.0 * slope).epsilon(1e-12));
    }

    TEST_CASE("gradients match finite differences with noise held fixed") {
        for (std::uint64_t seed : {0, 1, 2}) {
            MetaConfig cfg;
            cfg.inference_hidden = {16, 16};
            cfg.support_size = 5;
            cfg.query_in = 4;
            cfg.query_out = 4;
            cfg.samples = 2;
            Rng rng(seed);
            const MetaModel m = random_meta_model(rng, EncoderConfig{8, {16}, 4, false}, cfg);
            TaskDataset t = toy_task(rng, 12, 6, 8);
            const Episode ep = sample_episode(t, rng, cfg);
            const auto post = infer_posterior(ep.support, m);
            std::vector<FinalLayer> noise;
            for (int l = 0; l < 2; ++l) noise.push_back(draw_noise(post, rng));
            const auto res = meta_svdd_loss(ep, m, cfg, noise);
            const ScalarFn f = [&](std::span<const double> v) {
                MetaModel q = m;
                unflatten(v, q.tensors());
                return meta_svdd_loss(ep, q, cfg, noise).loss;
            };
            CHECK(grad_check(f, flatten(m.tensors()), flatten(res.grad.tensors())).max_rel_error <= 1e-4);
        }
    }

    TEST_CASE("accumulation equals the ordered sum of episode gradients") {
        MetaConfig cfg;
        cfg.inference_hidden = {8, 8};
        Rng rng(6);
        const MetaModel m = random_meta_model(rng, EncoderConfig{4, {6}, 3, false}, cfg);
        std::vector<Episode> eps;
        std::vector<std::vector<FinalLayer>> noise;
        for (int k = 0; k < 5; ++k) {
            TaskDataset t = toy_task(rng, 25, 25, 4, "t" + std::to_string(k));
            eps.push_back(sample_episode(t, rng, cfg));
            const auto post = infer_posterior(eps.back().support, m);
            std::vector<FinalLayer> ns;
            for (std::size_t l = 0; l < cfg.samples; ++l) ns.push_back(draw_noise(post, rng));
            noise.push_back(std::move(ns));
        }
        const MetaLoss total = accumulate_meta_loss(eps, m, cfg, noise);
        MetaGradients sum = MetaGradients::zeros_like(m);
        double loss = 0.0;
        for (std::size_t k = 0; k < eps.size(); ++k) {
            const MetaLoss one = meta_svdd_loss(eps[k], m, cfg, noise[k]);
            sum += one.grad;
            loss += one.loss;
        }
        CHECK(total.grad == sum);
        CHECK(total.loss == loss);
    }

    TEST_CASE("errors") {
        const MetaModel m = fixed_posterior_model(1, {1.0}, -10);
        Episode no_pos{"np", Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0}), {-1}};
        CHECK_THROWS_AS(meta_svdd_loss(no_pos, m, MetaConfig{}, zero_noise(m, 1)), InputError);
        Episode ep{"ok", Matrix(1, 1, {0.0}), Matrix(1, 1, {1.0}), {1}};
        CHECK_THROWS_AS(meta_svdd_loss(ep, m, MetaConfig{}, std::vector<FinalLayer>{}), ConfigError);
        MetaConfig bad;
        bad.eta = 0.0;
        CHECK_THROWS_AS(meta_svdd_loss(ep, m, bad, zero_noise(m, 1)), ConfigError);
    }
}

TEST_SUITE("meta_training") {
    std::vector<TaskDataset> small_suite() {
        SynthConfig s;
        s.n_tasks = 4;
        s.dim = 4;
        s.samples_per_class = 40;
        s.seed = 3;
        return generate_synthetic(s);
    }

    TEST_CASE("same seed gives identical parameters") {
        const auto tasks = small_suite();
        MetaConfig cfg;
        cfg.meta_steps = 15;
        cfg.inference_hidden = {8, 8};
        const EncoderConfig enc{4, {8}, 3, false};
        const std::vector<std::string> hold = {"task_03"};
        const auto a = meta_train(tasks, hold, enc, cfg);
        const auto b = meta_train(tasks, hold, enc, cfg);
        CHECK(a.model == b.model);
        CHECK(a.step_losses == b.step_losses);
        cfg.seed = 1;
        CHECK_FALSE(meta_train(tasks, hold, enc, cfg).model == a.model);
    }

    TEST_CASE("holdout tasks never influence training") {
        auto tasks = small_suite();
        MetaConfig cfg;
        cfg.meta_steps = 10;
        cfg.inference_hidden = {8, 8};
        const EncoderConfig enc{4, {8}, 3, false};
        const std::vector<std::string> hold = {"task_01"};
        const auto a = meta_train(tasks, hold, enc, cfg);
        tasks[1].features *= -3.0;
        CHECK(meta_train(tasks, hold, enc, cfg).model == a.model);
    }

    TEST_CASE("loss decreases over training") {
        SynthConfig s;
        s.seed = 7;
        const auto tasks = generate_synthetic(s);
        MetaConfig cfg;
        const EncoderConfig enc{16, {64}, 32, false};
        const auto r = meta_train(tasks, std::vector<std::string>{}, enc, cfg);
        REQUIRE(r.step_losses.size() == 500);
        const double first = std::accumulate(r.step_losses.begin(), r.step_losses.begin() + 50, 0.0) / 50.0;
        const double last = std::accumulate(r.step_losses.end() - 50, r.step_losses.end(), 0.0) / 50.0;
        CHECK(last < first);
    }

    TEST_CASE("pool errors") {
        const auto tasks = small_suite();
        const EncoderConfig enc{4, {8}, 3, false};
        const std::vector<std::string> all = {"task_00", "task_01", "task_02", "task_03"};
        CHECK_THROWS_AS(meta_train(tasks, all, enc, MetaConfig{}), InputError);
        const std::vector<std::string> three = {"task_00", "task_01", "task_02"};
        CHECK_THROWS_AS(meta_train(tasks, three, enc, MetaConfig{}), InputError);
        CHECK_THROWS_AS(meta_train(tasks, std::vector<std::string>{}, EncoderConfig{5, {8}, 3, false}, MetaConfig{}),
                        DimensionError);
    }
}

TEST_SUITE("adaptation") {
    TEST_CASE("scoring is pure and row-wise") {
        MetaConfig cfg;
        cfg.inference_hidden = {8, 8};
        Rng rng(2);
        const MetaModel m = random_meta_model(rng, EncoderConfig{4, {6}, 3, false}, cfg);
        const MetaModel before = m;
        const Matrix support = testing::random_matrix(rng, 10, 4);
        const Matrix q = testing::random_matrix(rng, 7, 4);
        const auto s1 = adapt_and_score(support, q, m);
        const auto s2 = adapt_and_score(support, q, m);
        CHECK(s1 == s2);
        CHECK(m == before);
        const std::vector<std::size_t> perm = {6, 0, 5, 1, 4, 2, 3};
        const auto sp = adapt_and_score(support, gather_rows(q, perm), m);
        for (std::size_t i = 0; i < perm.size(); ++i) CHECK(sp[i] == s1[perm[i]]);
    }

    TEST_CASE("a query at the center scores zero") {
        const MetaModel m = fixed_posterior_model(2, {1, 0, 0, 1}, -10);
        const Matrix support(2, 2, {0, 0, 2, 2});
        const auto s = adapt_and_score(support, Matrix(2, 2, {1, 1, 4, 1}), m);
        CHECK(s[0] == 0.0);
        CHECK(s[1] == 9.0);
    }

    TEST_CASE("sampled scorers are seeded") {
        const MetaModel m = fixed_posterior_model(2, {1, 0, 0, 1}, -1);
        const Matrix support(3, 2, {0, 0, 2, 2, 1, 0});
        const Matrix q(2, 2, {1, 1, 4, 1});
        AdaptOptions o;
        o.sampled_scorers = 5;
        o.seed = 3;
        CHECK(adapt_and_score(support, q, m, o) == adapt_and_score(support, q, m, o));
        o.sampled_scorers = 0;
        CHECK_THROWS_AS(adapt_and_score(support, q, m, o), ConfigError);
        CHECK_THROWS_AS(adapt_and_score(Matrix(0, 2), q, m), InputError);
        CHECK_THROWS_AS(adapt_and_score(support, Matrix(1, 3), m), DimensionError);
    }

    TEST_CASE("meta model file round trip") {
        MetaConfig cfg;
        cfg.inference_hidden = {8, 8};
        Rng rng(5);
        const MetaModel m = random_meta_model(rng, EncoderConfig{4, {6}, 3, true}, cfg);
        const ModelFile f = to_model_file(m);
        CHECK_FALSE(f.center.has_value());
        CHECK(meta_model_from_file(deserialize_model(serialize_model(f))) == m);
        ModelFile plain = f;
        plain.inference.reset();
        CHECK_THROWS_AS(meta_model_from_file(plain), InputError);
    }
}
