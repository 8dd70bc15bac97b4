#include "ocsvdd/synth.hpp"

#include <cmath>
#include <string>

#include "ocsvdd/rng.hpp"

namespace ocsvdd {

namespace {

std::string task_name(std::size_t t, std::size_t n_tasks) {
    const std::size_t width = std::max<std::size_t>(2, std::to_string(n_tasks - 1).size());
    std::string digits = std::to_string(t);
    return "task_" + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

void SynthConfig::validate() const {
    if (n_tasks < 2) throw ConfigError("synth: need at least 2 tasks, got " + std::to_string(n_tasks));
    if (dim < 1) throw ConfigError("synth: dim must be >= 1");
    if (samples_per_class < 1) throw ConfigError("synth: samples per class must be >= 1");
    if (!(separation > 0.0) || !std::isfinite(separation)) throw ConfigError("synth: separation must be > 0");
    if (placement_attempts < 1) throw ConfigError("synth: placement attempts must be >= 1");
}

std::vector<TaskDataset> generate_synthetic(const SynthConfig& config) {
    config.validate();
    Rng rng(config.seed);

    // Cube wide enough that n points at the requested spacing fit comfortably.
    const double half_width =
        config.separation * std::max(1.0, std::pow(static_cast<double>(config.n_tasks), 1.0 / static_cast<double>(config.dim)));
    std::vector<std::vector<double>> means;
    for (std::size_t t = 0; t < config.n_tasks; ++t) {
        bool placed = false;
        for (std::size_t attempt = 0; attempt < config.placement_attempts && !placed; ++attempt) {
            std::vector<double> m(config.dim);
            for (double& v : m) v = half_width * (2.0 * rng.uniform() - 1.0);
            placed = true;
            for (const auto& other : means) {
                double d2 = 0.0;
                for (std::size_t k = 0; k < config.dim; ++k) d2 += (m[k] - other[k]) * (m[k] - other[k]);
                if (d2 < config.separation * config.separation) {
                    placed = false;
                    break;
                }
            }
            if (placed) means.push_back(std::move(m));
        }
        if (!placed) {
            throw ConfigError("synth: could not place cluster " + std::to_string(t) + " at separation " +
                              std::to_string(config.separation) + " after " + std::to_string(config.placement_attempts) +
                              " attempts; use a larger dim or a smaller separation");
        }
    }

    auto draw = [&](std::size_t cluster, std::span<double> out) {
        for (std::size_t k = 0; k < config.dim; ++k) out[k] = means[cluster][k] + rng.normal();
    };

    std::vector<TaskDataset> tasks;
    const std::size_t n = config.samples_per_class;
    for (std::size_t t = 0; t < config.n_tasks; ++t) {
        TaskDataset task;
        task.task_id = task_name(t, config.n_tasks);
        task.features = Matrix(2 * n, config.dim);
        for (std::size_t i = 0; i < n; ++i) draw(t, task.features.row(i));
        for (std::size_t i = 0; i < n; ++i) {
            std::size_t other = static_cast<std::size_t>(rng.below(config.n_tasks - 1));
            if (other >= t) ++other;
            draw(other, task.features.row(n + i));
        }
        task.labels.assign(n, 1);
        task.labels.resize(2 * n, -1);
        tasks.push_back(std::move(task));
    }
    return tasks;
}

std::vector<TaskDataset> write_synthetic(const SynthConfig& config, const std::filesystem::path& dir) {
    auto tasks = generate_synthetic(config);
    std::filesystem::create_directories(dir);
    for (const auto& t : tasks) save_task(t, dir / (t.task_id + ".csv"));
    return tasks;
}

}  // namespace ocsvdd
