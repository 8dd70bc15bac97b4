#include "ocsvdd/task.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "ocsvdd/model_io.hpp"

namespace ocsvdd {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool parse_double(std::string_view field, double& out) {
    field = trim(field);
    if (field.empty()) return false;
    if (field.front() == '+') field.remove_prefix(1);
    const char* end = field.data() + field.size();
    const auto [ptr, ec] = std::from_chars(field.data(), end, out);
    return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

std::vector<std::size_t> TaskDataset::indices_with_label(int label) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < labels.size(); ++i)
        if (labels[i] == label) out.push_back(i);
    return out;
}

Matrix TaskDataset::rows_with_label(int label) const {
    const auto idx = indices_with_label(label);
    return gather_rows(features, idx);
}

void TaskDataset::validate() const {
    if (labels.size() != features.rows()) {
        throw InputError("task " + task_id + ": " + std::to_string(labels.size()) + " labels for " +
                         std::to_string(features.rows()) + " rows");
    }
    bool any_positive = false;
    for (int l : labels) {
        if (l != 1 && l != -1) throw InputError("task " + task_id + ": label " + std::to_string(l) + " is not +1/-1");
        any_positive |= l == 1;
    }
    if (!any_positive) throw InputError("task " + task_id + ": no in-distribution (+1) rows");
}

TaskDataset parse_task(std::string_view text, std::string task_id, const std::string& source) {
    TaskDataset task;
    task.task_id = std::move(task_id);
    std::vector<double> values;
    std::size_t dim = 0;
    std::size_t line_no = 0;
    std::size_t rows = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = trim(text.substr(0, nl));
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (line.empty()) continue;

        std::vector<std::string_view> fields;
        for (std::size_t start = 0;;) {
            const std::size_t comma = line.find(',', start);
            fields.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start));
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() < 2) throw ParseError(source, line_no, "expected label followed by at least one feature");

        double label = 0.0;
        if (!parse_double(fields[0], label)) {
            throw ParseError(source, line_no, "label '" + std::string(trim(fields[0])) + "' is not a number");
        }
        if (label != 1.0 && label != -1.0) {
            throw ParseError(source, line_no, "label '" + std::string(trim(fields[0])) + "' is not 1 or -1");
        }
        const std::size_t width = fields.size() - 1;
        if (rows == 0) {
            dim = width;
        } else if (width != dim) {
            throw ParseError(source, line_no,
                             "row has " + std::to_string(width) + " features, expected " + std::to_string(dim));
        }
        for (std::size_t k = 1; k < fields.size(); ++k) {
            double v = 0.0;
            if (!parse_double(fields[k], v)) {
                throw ParseError(source, line_no, "feature " + std::to_string(k) + " ('" +
                                                      std::string(trim(fields[k])) + "') is not a finite number");
            }
            values.push_back(v);
        }
        task.labels.push_back(static_cast<int>(label));
        ++rows;
    }
    if (rows == 0) throw ParseError(source, line_no == 0 ? 1 : line_no, "no data rows");
    task.features = Matrix(rows, dim, std::move(values));
    if (task.indices_with_label(1).empty()) {
        throw ParseError(source, line_no, "no in-distribution (label 1) rows");
    }
    return task;
}

TaskDataset load_task(const std::filesystem::path& path) {
    return parse_task(read_file(path), path.stem().string(), path.string());
}

std::vector<TaskDataset> load_task_dir(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw InputError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file() && entry.path().extension() == ".csv") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const auto& a, const auto& b) { return a.stem().string() < b.stem().string(); });
    if (files.empty()) throw InputError("no .csv task files in " + dir.string());
    std::vector<TaskDataset> tasks;
    for (const auto& f : files) {
        tasks.push_back(load_task(f));
        if (tasks.back().dim() != tasks.front().dim()) {
            throw InputError("task " + tasks.back().task_id + " has " + std::to_string(tasks.back().dim()) +
                             " features, task " + tasks.front().task_id + " has " +
                             std::to_string(tasks.front().dim()));
        }
    }
    return tasks;
}

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

std::string format_task(const TaskDataset& task) {
    std::string out;
    for (std::size_t i = 0; i < task.features.rows(); ++i) {
        out += task.labels[i] > 0 ? "1" : "-1";
        for (double v : task.features.row(i)) {
            out += ',';
            out += format_double(v);
        }
        out += '\n';
    }
    return out;
}

void save_task(const TaskDataset& task, const std::filesystem::path& path) {
    write_file(path, format_task(task));
}

}  // namespace ocsvdd
