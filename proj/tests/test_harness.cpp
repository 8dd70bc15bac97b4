#include <doctest.h>

#include <cmath>

#include "ocsvdd/auc.hpp"
#include "ocsvdd/config_file.hpp"
#include "ocsvdd/loo.hpp"
#include "ocsvdd/model_io.hpp"
#include "ocsvdd/synth.hpp"
#include "ocsvdd/task.hpp"
#include "test_util.hpp"

using namespace ocsvdd;

namespace {

// Definition of the statistic, evaluated over every (neg, pos) pair.
double brute_force_auc(const std::vector<double>& s, const std::vector<int>& y) {
    double wins = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (y[i] != -1) continue;
        for (std::size_t j = 0; j < s.size(); ++j) {
            if (y[j] != 1) continue;
            ++pairs;
            if (s[i] > s[j]) wins += 1.0;
            else if (s[i] == s[j]) wins += 0.5;
        }
    }
    return wins / static_cast<double>(pairs);
}

std::size_t parse_error_line(const std::string& text) {
    try {
        parse_task(text, "t", "t.csv");
    } catch (const ParseError& e) {
        return e.line();
    }
    return 0;
}

LooConfig quick_loo() {
    LooConfig cfg;
    cfg.encoder.hidden_dims = {8};
    cfg.encoder.latent_dim = 4;
    cfg.train.epochs = 3;
    cfg.meta.meta_steps = 5;
    cfg.meta.inference_hidden = {8, 8};
    cfg.meta.samples = 2;
    return cfg;
}

std::vector<TaskDataset> small_suite(std::size_t n = 3) {
    SynthConfig s;
    s.n_tasks = n;
    s.dim = 3;
    s.samples_per_class = 30;
    s.seed = 1;
    return generate_synthetic(s);
}

}  // namespace

TEST_SUITE("task_files") {
    TEST_CASE("two-row example") {
        const auto t = parse_task("1,0.5,0.25\n-1,3.0,3.1", "ex", "ex.csv");
        CHECK(t.task_id == "ex");
        CHECK(t.dim() == 2);
        CHECK(t.labels == std::vector<int>{1, -1});
        CHECK(t.features == Matrix(2, 2, {0.5, 0.25, 3.0, 3.1}));
    }

    TEST_CASE("malformed input reports its line") {
        CHECK(parse_error_line("1,0.5,0.25\n-1,1,2,3\n") == 2);
        CHECK(parse_error_line("") == 1);
        CHECK(parse_error_line("1,1\n\n2,1\n") == 3);
        CHECK(parse_error_line("1,1\nx,1\n") == 2);
        CHECK(parse_error_line("1,1\n-1,abc\n") == 2);
        CHECK(parse_error_line("1,1\n1,nan\n") == 2);
        CHECK(parse_error_line("1\n") == 1);
        CHECK(parse_error_line("-1,1\n-1,2\n") > 0);
        try {
            parse_task("1,1\n0,2\n", "t", "data/t.csv");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).rfind("data/t.csv:2:", 0) == 0);
        }
    }

    TEST_CASE("blank lines and CRLF are tolerated") {
        const auto t = parse_task("1,1,2\r\n\r\n-1,3,4\r\n", "t", "t.csv");
        CHECK(t.features.rows() == 2);
        CHECK(t.features(1, 1) == 4.0);
    }

    TEST_CASE("file round trip and directory loading") {
        const auto dir = testing::scratch_dir("tasks");
        Rng rng(3);
        TaskDataset t{"b_task", testing::random_matrix(rng, 4, 3), {1, -1, 1, -1}};
        save_task(t, dir / "b_task.csv");
        const auto back = load_task(dir / "b_task.csv");
        CHECK(back.task_id == "b_task");
        CHECK(back.features == t.features);
        CHECK(back.labels == t.labels);
        save_task(TaskDataset{"a_task", Matrix(1, 3, 1.0), {1}}, dir / "a_task.csv");
        write_file(dir / "notes.txt", "ignored");
        const auto all = load_task_dir(dir);
        REQUIRE(all.size() == 2);
        CHECK(all[0].task_id == "a_task");
        CHECK(all[1].task_id == "b_task");
        save_task(TaskDataset{"c_task", Matrix(1, 2, 1.0), {1}}, dir / "c_task.csv");
        CHECK_THROWS_AS(load_task_dir(dir), InputError);
        CHECK_THROWS_AS(load_task(dir / "missing.csv"), InputError);
        CHECK_THROWS_AS(load_task_dir(dir / "nowhere"), InputError);
    }

    TEST_CASE("format_double round trips") {
        for (double v : {0.1, -3.0, 1e-300, 123456.789, 2.0 / 3.0}) CHECK(std::stod(format_double(v)) == v);
    }
}

TEST_SUITE("auc") {
    TEST_CASE("documented examples") {
        CHECK(auc(std::vector<double>{0.9, 0.1}, std::vector<int>{-1, 1}) == 1.0);
        CHECK(auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<int>{-1, 1, 1}) == 0.5);
        CHECK(auc(std::vector<double>{0.8, 0.2, 0.6, 0.1}, std::vector<int>{-1, -1, 1, 1}) == 0.75);
        CHECK(auc(std::vector<double>{0.1, 0.9}, std::vector<int>{-1, 1}) == 0.0);
    }

    TEST_CASE("matches brute force on random instances with ties") {
        Rng rng(21);
        for (int trial = 0; trial < 200; ++trial) {
            const std::size_t n = 2 + rng.below(60);
            std::vector<double> s(n);
            std::vector<int> y(n);
            for (std::size_t i = 0; i < n; ++i) {
                s[i] = static_cast<double>(rng.below(6));  // coarse grid forces ties
                y[i] = rng.uniform() < 0.5 ? 1 : -1;
            }
            y[0] = 1;
            y[1] = -1;
            CHECK(std::abs(auc(s, y) - brute_force_auc(s, y)) <= 1e-12);
        }
    }

    TEST_CASE("negating scores complements the value") {
        Rng rng(5);
        for (int trial = 0; trial < 50; ++trial) {
            std::vector<double> s(30), neg(30);
            std::vector<int> y(30);
            for (std::size_t i = 0; i < 30; ++i) {
                s[i] = std::round(rng.normal() * 2.0);
                neg[i] = -s[i];
                y[i] = i % 3 == 0 ? -1 : 1;
            }
            CHECK(auc(s, y) + auc(neg, y) == 1.0);
        }
    }

    TEST_CASE("invariant under increasing transforms") {
        Rng rng(6);
        std::vector<double> s(40), t(40);
        std::vector<int> y(40);
        for (std::size_t i = 0; i < 40; ++i) {
            s[i] = rng.normal();
            t[i] = std::exp(3.0 * s[i]) + 7.0;
            y[i] = i % 2 ? 1 : -1;
        }
        CHECK(auc(s, y) == auc(t, y));
    }

    TEST_CASE("errors") {
        CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{1, 1}), InputError);
        CHECK_THROWS_AS(auc(std::vector<double>{1, 2}, std::vector<int>{1, 0}), InputError);
        CHECK_THROWS_AS(auc(std::vector<double>{1}, std::vector<int>{1, -1}), DimensionError);
        CHECK_THROWS_AS(auc(std::vector<double>{1, NAN}, std::vector<int>{1, -1}), NumericError);
    }
}

TEST_SUITE("synthetic") {
    TEST_CASE("layout and separation") {
        SynthConfig cfg;
        cfg.n_tasks = 4;
        cfg.dim = 5;
        cfg.samples_per_class = 50;
        const auto tasks = generate_synthetic(cfg);
        REQUIRE(tasks.size() == 4);
        CHECK(tasks[0].task_id == "task_00");
        CHECK(tasks[3].task_id == "task_03");
        std::vector<Matrix> means;
        for (const auto& t : tasks) {
            CHECK(t.features.rows() == 100);
            CHECK(t.labels.front() == 1);
            CHECK(t.labels.back() == -1);
            CHECK(t.indices_with_label(1).size() == 50);
            means.push_back(column_means(t.rows_with_label(1)));
        }
        // Sample means of 50 unit-variance points sit within ~1 of the true mean.
        for (std::size_t a = 0; a < means.size(); ++a)
            for (std::size_t b = a + 1; b < means.size(); ++b)
                CHECK(std::sqrt(row_sq_distances(means[a], means[b])[0]) > cfg.separation - 2.0);
    }

    TEST_CASE("same seed gives byte-identical files") {
        SynthConfig cfg;
        cfg.n_tasks = 3;
        cfg.dim = 2;
        cfg.samples_per_class = 20;
        cfg.seed = 4;
        const auto d1 = testing::scratch_dir("synth_a");
        const auto d2 = testing::scratch_dir("synth_b");
        write_synthetic(cfg, d1);
        write_synthetic(cfg, d2);
        for (const char* f : {"task_00.csv", "task_01.csv", "task_02.csv"}) CHECK(read_file(d1 / f) == read_file(d2 / f));
        cfg.seed = 5;
        CHECK(format_task(generate_synthetic(cfg)[0]) != read_file(d1 / "task_00.csv"));
    }

    TEST_CASE("config errors") {
        SynthConfig cfg;
        cfg.n_tasks = 1;
        CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
        cfg = {};
        cfg.separation = 0.0;
        CHECK_THROWS_AS(generate_synthetic(cfg), ConfigError);
        // Thirty points on a line with one try each will not all keep their distance.
        cfg = {};
        cfg.dim = 1;
        cfg.n_tasks = 30;
        cfg.placement_attempts = 1;
        try {
            generate_synthetic(cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            CHECK(std::string(e.what()).find("smaller separation") != std::string::npos);
        }
    }

    TEST_CASE("well separated low-dimensional suite is easy for OC-SVDD") {
        SynthConfig s;
        s.n_tasks = 3;
        s.dim = 2;
        s.separation = 8.0;
        s.samples_per_class = 100;
        LooConfig cfg;
        cfg.encoder.latent_dim = 8;
        cfg.train.epochs = 30;
        for (const auto& t : generate_synthetic(s)) CHECK(evaluate_oc_task(t, cfg) >= 0.95);
    }
}

TEST_SUITE("leave_one_out") {
    TEST_CASE("one row per task, sorted, deterministic") {
        auto tasks = small_suite(4);
        std::swap(tasks[0], tasks[3]);
        const LooConfig cfg = quick_loo();
        const AucTable a = eval_loo(tasks, cfg);
        REQUIRE(a.rows.size() == 4);
        for (std::size_t i = 0; i < 4; ++i) CHECK(a.rows[i].task_id == "task_0" + std::to_string(i));
        for (const auto& r : a.rows) {
            CHECK(r.oc_svdd_auc >= 0.0);
            CHECK(r.oc_svdd_auc <= 1.0);
            CHECK(r.meta_svdd_auc >= 0.0);
            CHECK(r.meta_svdd_auc <= 1.0);
        }
        CHECK(format_results(a) == format_results(eval_loo(tasks, cfg)));
    }

    TEST_CASE("results file format") {
        AucTable t;
        t.rows = {{"a", 1.0, 0.91234}, {"b", 0.5, 0.12345}};
        CHECK(format_results(t) == "task_id,oc_svdd_auc,meta_svdd_auc\na,1.0000,0.9123\nb,0.5000,0.1235\n");
        CHECK(t.mean_oc() == 0.75);
    }

    TEST_CASE("directory overload writes the table") {
        const auto dir = testing::scratch_dir("loo_dir");
        SynthConfig s;
        s.n_tasks = 3;
        s.dim = 3;
        s.samples_per_class = 30;
        write_synthetic(s, dir / "data");
        LooConfig cfg = quick_loo();
        cfg.shared_meta = true;
        const AucTable t = eval_loo(dir / "data", cfg, dir / "results.csv");
        CHECK(read_file(dir / "results.csv") == format_results(t));
    }

    TEST_CASE("held-out rows do not influence the adapted model") {
        const auto tasks = small_suite(3);
        const LooConfig cfg = quick_loo();
        MetaConfig meta = cfg.meta;
        EncoderConfig enc = cfg.encoder;
        enc.input_dim = 3;
        const std::vector<std::string> hold = {"task_00"};
        const MetaModel model = meta_train(tasks, hold, enc, meta).model;
        const MetaAdaptation base = adapt_to_task(tasks[0], model, cfg);

        // Rewriting every non-support row of the held-out task, and the task's
        // contribution to meta-training, must leave the posterior untouched.
        auto perturbed = tasks;
        for (std::size_t r : base.query_rows)
            for (double& v : perturbed[0].features.row(r)) v = v * -2.0 + 5.0;
        CHECK(meta_train(perturbed, hold, enc, meta).model == model);
        const MetaAdaptation again = adapt_to_task(perturbed[0], model, cfg);
        CHECK(again.support_rows == base.support_rows);
        CHECK(again.posterior == base.posterior);
    }

    TEST_CASE("needs three tasks and annotates errors with the task") {
        const auto two = small_suite(2);
        CHECK_THROWS_AS(eval_loo(two, quick_loo()), InputError);
        auto tasks = small_suite(3);
        LooConfig cfg = quick_loo();
        cfg.meta.support_size = 100;
        try {
            eval_loo(tasks, cfg);
            FAIL("expected InputError");
        } catch (const InputError& e) {
            CHECK(std::string(e.what()).find("task_00") != std::string::npos);
        }
    }

    TEST_CASE("per-task seeds") {
        CHECK(task_seed(0, "a") == stable_hash("a"));
        CHECK(task_seed(5, "a") == stable_hash("a") + 5);
    }
}

TEST_SUITE("config_files") {
    TEST_CASE("parsing") {
        const auto s = parse_config("# header\nseed = 3\n  latent=8  # trailing\n\nhidden = 16, 8\n", "c.cfg");
        REQUIRE(s.size() == 3);
        CHECK(s[0] == Setting{"seed", "3"});
        CHECK(s[1] == Setting{"latent", "8"});
        CHECK(s[2] == Setting{"hidden", "16, 8"});
        try {
            parse_config("seed = 1\nnonsense\n", "c.cfg");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.line() == 2);
        }
        CHECK_THROWS_AS(parse_config(" = 4\n", "c.cfg"), ParseError);
    }

    TEST_CASE("applying settings") {
        LooConfig cfg;
        apply_settings(cfg, parse_config("seed = 9\nhidden = 16,8\nL = 3\neta = 0.5\nmeta_lr = 0.01\nshared_meta = true\n"
                                         "final_bias = 1\ninference_hidden = 4,4\n",
                                         "c"));
        CHECK(cfg.train.seed == 9);
        CHECK(cfg.meta.seed == 9);
        CHECK(cfg.encoder.hidden_dims == std::vector<std::size_t>{16, 8});
        CHECK(cfg.meta.samples == 3);
        CHECK(cfg.meta.eta == 0.5);
        CHECK(cfg.meta.lr == 0.01);
        CHECK(cfg.shared_meta);
        CHECK(cfg.encoder.final_bias);
        CHECK(cfg.meta.inference_hidden == std::vector<std::size_t>{4, 4});
        CHECK_THROWS_AS(apply_setting(cfg, "bogus", "1"), ConfigError);
        CHECK_THROWS_AS(apply_setting(cfg, "epochs", "many"), ConfigError);
        CHECK_THROWS_AS(apply_setting(cfg, "lr", "0.1x"), ConfigError);
    }
}
