#include "ocsvdd/loo.hpp"

#include <algorithm>
#include <cstdio>

#include "ocsvdd/auc.hpp"

namespace ocsvdd {

namespace {

template <typename Fn>
auto with_task_context(const std::string& task_id, Fn&& fn) {
    try {
        return fn();
    } catch (const NumericError& e) {
        throw NumericError("task " + task_id + ": " + e.what());
    } catch (const DimensionError& e) {
        throw DimensionError("task " + task_id + ": " + e.what());
    } catch (const ConfigError& e) {
        throw ConfigError("task " + task_id + ": " + e.what());
    } catch (const InputError& e) {
        throw InputError("task " + task_id + ": " + e.what());
    }
}

EncoderConfig encoder_for(const TaskDataset& task, const LooConfig& config) {
    EncoderConfig enc = config.encoder;
    enc.input_dim = task.dim();
    return enc;
}

}  // namespace

double AucTable::mean_oc() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.oc_svdd_auc;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

double AucTable::mean_meta() const {
    double s = 0.0;
    for (const auto& r : rows) s += r.meta_svdd_auc;
    return rows.empty() ? 0.0 : s / static_cast<double>(rows.size());
}

std::string format_results(const AucTable& table) {
    std::string out = "task_id,oc_svdd_auc,meta_svdd_auc\n";
    char buf[64];
    for (const auto& r : table.rows) {
        std::snprintf(buf, sizeof buf, ",%.4f,%.4f\n", r.oc_svdd_auc, r.meta_svdd_auc);
        out += r.task_id;
        out += buf;
    }
    return out;
}

std::uint64_t task_seed(std::uint64_t base, const std::string& task_id) { return base + stable_hash(task_id); }

double evaluate_oc_task(const TaskDataset& task, const LooConfig& config) {
    return with_task_context(task.task_id, [&] {
        TrainConfig train = config.train;
        train.seed = task_seed(config.train.seed, task.task_id);
        const TrainResult trained = train_ocsvdd(task.rows_with_label(1), train, encoder_for(task, config));
        const auto scores = score(task.features, trained.model);
        return auc(scores, task.labels);
    });
}

MetaAdaptation adapt_to_task(const TaskDataset& task, const MetaModel& model, const LooConfig& config) {
    return with_task_context(task.task_id, [&] {
        const auto pos = task.indices_with_label(1);
        if (pos.size() <= config.meta.support_size) {
            throw InputError("only " + std::to_string(pos.size()) + " in-distribution rows for support size " +
                             std::to_string(config.meta.support_size));
        }
        Rng rng(task_seed(config.meta.seed, task.task_id) + 1);
        const auto picked = rng.sample_without_replacement(pos.size(), config.meta.support_size);

        MetaAdaptation out;
        for (std::size_t k : picked) out.support_rows.push_back(pos[k]);
        std::vector<bool> in_support(task.features.rows(), false);
        for (std::size_t r : out.support_rows) in_support[r] = true;
        for (std::size_t r = 0; r < task.features.rows(); ++r)
            if (!in_support[r]) out.query_rows.push_back(r);

        const Matrix support = gather_rows(task.features, out.support_rows);
        const Matrix queries = gather_rows(task.features, out.query_rows);
        out.posterior = infer_posterior(support, model);
        out.scores = adapt_and_score(support, queries, model);
        std::vector<int> labels;
        for (std::size_t r : out.query_rows) labels.push_back(task.labels[r]);
        out.auc = auc(out.scores, labels);
        return out;
    });
}

AucTable eval_loo(std::span<const TaskDataset> tasks, const LooConfig& config) {
    if (tasks.size() < 3) throw InputError("eval_loo: need at least 3 tasks, have " + std::to_string(tasks.size()));
    std::vector<const TaskDataset*> sorted;
    for (const auto& t : tasks) sorted.push_back(&t);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->task_id < b->task_id; });

    EncoderConfig enc = config.encoder;
    enc.input_dim = sorted.front()->dim();

    std::optional<MetaModel> shared;
    if (config.shared_meta) shared = meta_train(tasks, {}, enc, config.meta).model;

    AucTable table;
    for (const TaskDataset* task : sorted) {
        AucRow row;
        row.task_id = task->task_id;
        row.oc_svdd_auc = evaluate_oc_task(*task, config);
        if (shared) {
            row.meta_svdd_auc = adapt_to_task(*task, *shared, config).auc;
        } else {
            MetaConfig meta = config.meta;
            meta.seed = task_seed(config.meta.seed, task->task_id);
            const std::string holdout[] = {task->task_id};
            const MetaModel model = with_task_context(task->task_id, [&] { return meta_train(tasks, holdout, enc, meta).model; });
            row.meta_svdd_auc = adapt_to_task(*task, model, config).auc;
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

AucTable eval_loo(const std::filesystem::path& task_dir, const LooConfig& config,
                  const std::filesystem::path& out_path) {
    const auto tasks = load_task_dir(task_dir);
    AucTable table = eval_loo(tasks, config);
    write_file(out_path, format_results(table));
    return table;
}

}  // namespace ocsvdd
