#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ocsvdd/meta.hpp"
#include "ocsvdd/svdd.hpp"

namespace ocsvdd {

struct AucRow {
    std::string task_id;
    double oc_svdd_auc = 0.0;
    double meta_svdd_auc = 0.0;
};

struct AucTable {
    std::vector<AucRow> rows;

    double mean_oc() const;
    double mean_meta() const;
};

// Header line then `task_id,oc_svdd_auc,meta_svdd_auc`, AUCs to 4 decimals.
std::string format_results(const AucTable& table);

struct LooConfig {
    // input_dim is taken from the data.
    EncoderConfig encoder;
    TrainConfig train;
    MetaConfig meta;
    // Meta-train once on every task instead of once per held-out task.
    // Leaks each evaluated task into meta-training; for smoke runs only.
    bool shared_meta = false;
};

// base + stable_hash(task_id).
std::uint64_t task_seed(std::uint64_t base, const std::string& task_id);

// OC-SVDD trained on the task's +1 rows and scored on all of its rows.
double evaluate_oc_task(const TaskDataset& task, const LooConfig& config);

struct MetaAdaptation {
    std::vector<std::size_t> support_rows;  // indices into the task's rows
    std::vector<std::size_t> query_rows;
    FinalLayerPosterior posterior;
    std::vector<double> scores;             // one per query row
    double auc = 0.0;
};

// Adapts a meta model to `task` with support_size seeded +1 rows and scores
// the remaining rows.
MetaAdaptation adapt_to_task(const TaskDataset& task, const MetaModel& model, const LooConfig& config);

// Full leave-one-out evaluation. Rows come out sorted by task_id. Errors are
// rethrown with the task id prefixed.
AucTable eval_loo(std::span<const TaskDataset> tasks, const LooConfig& config);
AucTable eval_loo(const std::filesystem::path& task_dir, const LooConfig& config,
                  const std::filesystem::path& out_path);

}  // namespace ocsvdd
