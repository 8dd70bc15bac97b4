#include "ocsvdd/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <deque>
#include <map>
#include <iostream>
#include <sstream>

#include "ocsvdd/auc.hpp"
#include "ocsvdd/config_file.hpp"
#include "ocsvdd/fidelity.hpp"
#include "ocsvdd/synth.hpp"

namespace ocsvdd {

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr double kGradTolerance = 1e-4;

// A flag that, when given, overrides the setting `key`.
struct SettingFlag {
    std::string key;
    std::string value;
    CLI::Option* option = nullptr;
};

class Flags {
public:
    void add(CLI::App* app, const std::string& flag, const std::string& key, const std::string& help) {
        auto& f = flags_[app].emplace_back();
        f.key = key;
        f.option = app->add_option(flag, f.value, help);
    }

    // Config file first, then explicit flags in declaration order.
    LooConfig resolve(CLI::App* app, const std::string& config_path) const {
        LooConfig config;
        if (!config_path.empty()) apply_settings(config, load_config(config_path));
        auto it = flags_.find(app);
        if (it != flags_.end()) {
            for (const auto& f : it->second)
                if (f.option->count() > 0) apply_setting(config, f.key, f.value);
        }
        return config;
    }

private:
    // deque: CLI11 keeps pointers to each value.
    std::map<CLI::App*, std::deque<SettingFlag>> flags_;
};

std::string scores_text(std::span<const double> scores, std::span<const int> labels) {
    std::string out = "label,score\n";
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out += labels[i] > 0 ? "1," : "-1,";
        out += format_double(scores[i]);
        out += '\n';
    }
    return out;
}

bool has_both_labels(std::span<const int> labels) {
    bool pos = false, neg = false;
    for (int l : labels) (l > 0 ? pos : neg) = true;
    return pos && neg;
}

std::string fmt(const char* format, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, format, v);
    return buf;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"One-class Deep SVDD and Meta-SVDD toolkit", "ocsvdd"};
    app.require_subcommand(1);
    Flags flags;

    std::string data, out_path, model_path, config_path;
    std::vector<std::string> holdouts;
    bool shared_meta = false;
    std::size_t sampled = 0;
    SynthConfig synth;

    auto common = [&](CLI::App* sub, bool meta, const char* lr_key) {
        sub->add_option("--config", config_path, "key = value settings file; flags override it");
        flags.add(sub, "--seed", "seed", "base random seed");
        flags.add(sub, "--latent", "latent", "latent (hypersphere) dimension");
        flags.add(sub, "--hidden", "hidden", "comma-separated hidden layer widths");
        flags.add(sub, "--lr", lr_key, "learning rate");
        if (std::string(lr_key) == "lr") {
            flags.add(sub, "--epochs", "epochs", "OC-SVDD training epochs");
            flags.add(sub, "--batch", "batch", "OC-SVDD mini-batch size");
        }
        if (meta) {
            flags.add(sub, "--L", "L", "posterior samples per episode");
            flags.add(sub, "--meta-batch", "meta_batch", "tasks per accumulated meta-update");
            flags.add(sub, "--eta", "eta", "weight of the out-of-distribution term");
            flags.add(sub, "--support", "support", "in-distribution support samples per task");
            flags.add(sub, "--meta-steps", "meta_steps", "meta-training iterations");
            if (std::string(lr_key) != "meta_lr") flags.add(sub, "--meta-lr", "meta_lr", "meta-training learning rate");
        }
    };

    auto* synth_cmd = app.add_subcommand("synth", "write a synthetic task directory");
    synth_cmd->add_option("--tasks", synth.n_tasks, "number of tasks")->default_val(synth.n_tasks);
    synth_cmd->add_option("--dim", synth.dim, "feature dimension")->default_val(synth.dim);
    synth_cmd->add_option("--per-class", synth.samples_per_class, "rows per label per task")->default_val(synth.samples_per_class);
    synth_cmd->add_option("--sep", synth.separation, "minimum distance between cluster means")->default_val(synth.separation);
    synth_cmd->add_option("--seed", synth.seed, "random seed")->default_val(synth.seed);
    synth_cmd->add_option("--out", out_path, "output directory")->required();

    auto* train_oc = app.add_subcommand("train-oc", "train OC-SVDD on a task file's in-distribution rows");
    train_oc->add_option("--data", data, "task feature file")->required();
    train_oc->add_option("--out", out_path, "model file to write")->required();
    common(train_oc, false, "lr");

    auto* score_cmd = app.add_subcommand("score", "score a task file with an OC-SVDD model");
    score_cmd->add_option("--model", model_path, "OC-SVDD model file")->required();
    score_cmd->add_option("--data", data, "task feature file")->required();
    score_cmd->add_option("--out", out_path, "scores file to write")->required();

    auto* train_meta = app.add_subcommand("train-meta", "meta-train Meta-SVDD on a task directory");
    train_meta->add_option("--data", data, "task directory")->required();
    train_meta->add_option("--out", out_path, "meta model file to write")->required();
    train_meta->add_option("--holdout", holdouts, "task ids to exclude (repeatable)")->delimiter(',');
    common(train_meta, true, "meta_lr");

    auto* adapt_cmd = app.add_subcommand("adapt-score", "adapt a meta model to a task and score its other rows");
    adapt_cmd->add_option("--model", model_path, "meta model file")->required();
    adapt_cmd->add_option("--data", data, "task feature file")->required();
    adapt_cmd->add_option("--out", out_path, "scores file to write")->required();
    adapt_cmd->add_option("--sampled", sampled, "average over this many posterior draws instead of the mean");
    flags.add(adapt_cmd, "--support", "support", "in-distribution support samples");
    flags.add(adapt_cmd, "--seed", "seed", "support selection seed");

    auto* loo_cmd = app.add_subcommand("eval-loo", "leave-one-out OC-SVDD vs Meta-SVDD evaluation");
    loo_cmd->add_option("--data", data, "task directory")->required();
    loo_cmd->add_option("--out", out_path, "results file to write")->required();
    loo_cmd->add_flag("--shared-meta", shared_meta, "meta-train once on all tasks (not a faithful LOO)");
    common(loo_cmd, true, "lr");

    std::uint64_t grad_seed = 0;
    auto* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of the analytic gradients");
    grad_cmd->add_option("--seed", grad_seed, "random seed")->default_val(0);
    grad_cmd->add_option("--out", out_path, "also write the report to this file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (synth_cmd->parsed()) {
            const auto tasks = write_synthetic(synth, out_path);
            out << "wrote " << tasks.size() << " tasks to " << out_path << "\n";
        } else if (train_oc->parsed()) {
            LooConfig cfg = flags.resolve(train_oc, config_path);
            const TaskDataset task = load_task(data);
            cfg.encoder.input_dim = task.dim();
            const TrainResult r = train_ocsvdd(task.rows_with_label(1), cfg.train, cfg.encoder);
            save_model(to_model_file(r.model), out_path);
            out << "task " << task.task_id << ": initial loss " << fmt("%.6g", r.initial_loss) << ", final epoch loss "
                << fmt("%.6g", r.epoch_losses.back()) << "\n";
        } else if (score_cmd->parsed()) {
            const SvddModel model = svdd_model_from_file(load_model(model_path));
            const TaskDataset task = load_task(data);
            const auto scores = score(task.features, model);
            write_file(out_path, scores_text(scores, task.labels));
            if (has_both_labels(task.labels)) out << "auc " << fmt("%.4f", auc(scores, task.labels)) << "\n";
        } else if (train_meta->parsed()) {
            LooConfig cfg = flags.resolve(train_meta, config_path);
            const auto tasks = load_task_dir(data);
            cfg.encoder.input_dim = tasks.front().dim();
            const MetaTrainResult r = meta_train(tasks, holdouts, cfg.encoder, cfg.meta);
            save_model(to_model_file(r.model), out_path);
            out << "meta-trained " << r.step_losses.size() << " steps, final loss "
                << fmt("%.6g", r.step_losses.empty() ? 0.0 : r.step_losses.back()) << "\n";
        } else if (adapt_cmd->parsed()) {
            LooConfig cfg = flags.resolve(adapt_cmd, "");
            const MetaModel model = meta_model_from_file(load_model(model_path));
            const TaskDataset task = load_task(data);
            MetaAdaptation a = adapt_to_task(task, model, cfg);
            std::vector<int> labels;
            for (std::size_t r : a.query_rows) labels.push_back(task.labels[r]);
            if (sampled > 0) {
                const Matrix support = gather_rows(task.features, a.support_rows);
                const Matrix queries = gather_rows(task.features, a.query_rows);
                a.scores = adapt_and_score(support, queries, model, {sampled, task_seed(cfg.meta.seed, task.task_id)});
                a.auc = auc(a.scores, labels);
            }
            write_file(out_path, scores_text(a.scores, labels));
            out << "auc " << fmt("%.4f", a.auc) << "\n";
        } else if (loo_cmd->parsed()) {
            LooConfig cfg = flags.resolve(loo_cmd, config_path);
            if (shared_meta) cfg.shared_meta = true;
            const AucTable table = eval_loo(data, cfg, out_path);
            out << format_results(table);
            out << "mean," << fmt("%.4f", table.mean_oc()) << "," << fmt("%.4f", table.mean_meta()) << "\n";
        } else if (grad_cmd->parsed()) {
            const FidelityReport rep = gradient_fidelity(grad_seed);
            std::ostringstream text;
            text << "eq1 max relative error " << fmt("%.3e", rep.ocsvdd.max_rel_error) << "\n";
            text << "eq1 (final bias) max relative error " << fmt("%.3e", rep.ocsvdd_bias.max_rel_error) << "\n";
            text << "eq2 max relative error " << fmt("%.3e", rep.meta.max_rel_error) << "\n";
            const bool ok = rep.worst() <= kGradTolerance;
            text << (ok ? "PASS" : "FAIL") << " (tolerance " << fmt("%.0e", kGradTolerance) << ")\n";
            out << text.str();
            if (!out_path.empty()) write_file(out_path, text.str());
            return ok ? 0 : kExitData;
        }
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return 0;
}

}  // namespace ocsvdd
