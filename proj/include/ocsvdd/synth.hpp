#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ocsvdd/task.hpp"

namespace ocsvdd {

struct SynthConfig {
    std::size_t n_tasks = 8;
    std::size_t dim = 16;
    std::size_t samples_per_class = 200;
    double separation = 6.0;  // minimum distance between cluster means, in cluster std units
    std::uint64_t seed = 0;
    std::size_t placement_attempts = 10000;  // per cluster, before giving up

    void validate() const;
};

// One unit-variance isotropic Gaussian cluster per task. Means are placed by
// seeded rejection sampling in a cube so that every pair is at least
// `separation` apart. Task t holds samples_per_class rows of its own cluster
// (+1) followed by samples_per_class rows from uniformly chosen other
// clusters (-1). Task ids are task_00, task_01, ...
std::vector<TaskDataset> generate_synthetic(const SynthConfig& config);

// generate_synthetic, written as <dir>/<task_id>.csv. Creates dir if needed.
std::vector<TaskDataset> write_synthetic(const SynthConfig& config, const std::filesystem::path& dir);

}  // namespace ocsvdd
