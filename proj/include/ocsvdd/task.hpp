#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "ocsvdd/matrix.hpp"

namespace ocsvdd {

// Labeled feature vectors for one task. Label +1 is in-distribution, -1 is
// out-of-distribution.
struct TaskDataset {
    std::string task_id;
    Matrix features;
    std::vector<int> labels;

    std::size_t dim() const noexcept { return features.cols(); }
    std::vector<std::size_t> indices_with_label(int label) const;
    Matrix rows_with_label(int label) const;
    // Throws InputError unless labels are +-1, sized to match, and at least one is +1.
    void validate() const;
};

// Parses `label,f1,...,fd` lines. `source` names the input in errors. Blank
// lines are skipped; anything else malformed raises ParseError with its line.
TaskDataset parse_task(std::string_view text, std::string task_id, const std::string& source);
// task_id is the file stem.
TaskDataset load_task(const std::filesystem::path& path);
// Every *.csv file in `dir`, sorted by task_id. Throws InputError when empty
// or when dimensions disagree.
std::vector<TaskDataset> load_task_dir(const std::filesystem::path& dir);

// Round-trip exact text encoding, one row per line.
std::string format_task(const TaskDataset& task);
void save_task(const TaskDataset& task, const std::filesystem::path& path);

// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);

}  // namespace ocsvdd
