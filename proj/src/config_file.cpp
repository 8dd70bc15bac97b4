#include "ocsvdd/config_file.hpp"

#include <cctype>
#include <charconv>
#include <cmath>

#include "ocsvdd/model_io.hpp"

namespace ocsvdd {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("setting '" + key + "': '" + value + "' is not " + expected);
}

std::size_t to_count(const std::string& key, const std::string& value) {
    std::size_t out = 0;
    const auto v = trim(value);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, value, "a non-negative integer");
    return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const auto v = trim(value);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) bad_value(key, value, "a 64-bit unsigned integer");
    return out;
}

double to_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const auto v = trim(value);
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
        bad_value(key, value, "a finite number");
    }
    return out;
}

bool to_bool(const std::string& key, const std::string& value) {
    const auto v = trim(value);
    if (v == "1" || v == "true" || v == "on" || v == "yes") return true;
    if (v == "0" || v == "false" || v == "off" || v == "no") return false;
    bad_value(key, value, "a boolean");
}

std::vector<std::size_t> to_counts(const std::string& key, const std::string& value) {
    std::vector<std::size_t> out;
    if (trim(value).empty()) return out;
    std::string_view rest = value;
    while (true) {
        const std::size_t comma = rest.find(',');
        out.push_back(to_count(key, std::string(rest.substr(0, comma))));
        if (comma == std::string_view::npos) break;
        rest = rest.substr(comma + 1);
    }
    return out;
}

}  // namespace

std::vector<Setting> parse_config(std::string_view text, const std::string& source) {
    std::vector<Setting> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        const std::size_t nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        if (const std::size_t hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError(source, line_no, "expected 'key = value'");
        const auto key = trim(line.substr(0, eq));
        if (key.empty()) throw ParseError(source, line_no, "missing key before '='");
        out.emplace_back(std::string(key), std::string(trim(line.substr(eq + 1))));
    }
    return out;
}

std::vector<Setting> load_config(const std::filesystem::path& path) {
    return parse_config(read_file(path), path.string());
}

void apply_setting(LooConfig& c, const std::string& key, const std::string& value) {
    if (key == "seed") {
        c.train.seed = c.meta.seed = to_u64(key, value);
    } else if (key == "latent") {
        c.encoder.latent_dim = to_count(key, value);
    } else if (key == "hidden") {
        c.encoder.hidden_dims = to_counts(key, value);
    } else if (key == "final_bias") {
        c.encoder.final_bias = to_bool(key, value);
    } else if (key == "epochs") {
        c.train.epochs = to_count(key, value);
    } else if (key == "lr") {
        c.train.lr = to_double(key, value);
    } else if (key == "batch") {
        c.train.batch_size = to_count(key, value);
    } else if (key == "center_floor") {
        c.train.center_floor = to_double(key, value);
    } else if (key == "L") {
        c.meta.samples = to_count(key, value);
    } else if (key == "meta_batch") {
        c.meta.meta_batch = to_count(key, value);
    } else if (key == "eta") {
        c.meta.eta = to_double(key, value);
    } else if (key == "support") {
        c.meta.support_size = to_count(key, value);
    } else if (key == "query_in") {
        c.meta.query_in = to_count(key, value);
    } else if (key == "query_out") {
        c.meta.query_out = to_count(key, value);
    } else if (key == "meta_lr") {
        c.meta.lr = to_double(key, value);
    } else if (key == "meta_steps") {
        c.meta.meta_steps = to_count(key, value);
    } else if (key == "inference_hidden") {
        c.meta.inference_hidden = to_counts(key, value);
    } else if (key == "shared_meta") {
        c.shared_meta = to_bool(key, value);
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

void apply_settings(LooConfig& config, const std::vector<Setting>& settings) {
    for (const auto& [k, v] : settings) apply_setting(config, k, v);
}

}  // namespace ocsvdd
