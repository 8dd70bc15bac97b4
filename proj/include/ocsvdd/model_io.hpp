#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ocsvdd/encoder.hpp"

namespace ocsvdd {

// Binary model container, little-endian:
//   "OCMS" | u32 version=1 | u32 flags | u32 input_dim | u32 n_hidden |
//   u32 hidden[n_hidden] | u32 latent_dim |
//   f64 trunk weight/bias pairs, final weight, final bias (flag bit1) |
//   f64 center[latent_dim] (flag bit0) |
//   inference net (flag bit2): u32 n_layers, then per layer
//   u32 out | u32 in | f64 weight[out*in] | f64 bias[out]
struct ModelFile {
    static constexpr std::uint32_t kVersion = 1;
    static constexpr std::uint32_t kFlagCenter = 1u << 0;
    static constexpr std::uint32_t kFlagFinalBias = 1u << 1;
    static constexpr std::uint32_t kFlagMeta = 1u << 2;

    EncoderConfig config;
    EncoderParams params;
    std::optional<Matrix> center;                      // 1 x latent_dim
    std::optional<std::vector<DenseLayer>> inference;  // meta models only

    friend bool operator==(const ModelFile&, const ModelFile&) = default;
};

std::string serialize_model(const ModelFile& model);
// Throws FormatError with the failing byte offset on bad magic, version,
// truncation, inconsistent dimensions or trailing bytes.
ModelFile deserialize_model(std::string_view bytes);

void save_model(const ModelFile& model, const std::filesystem::path& path);
ModelFile load_model(const std::filesystem::path& path);

// Whole-file helpers shared with the text formats.
std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace ocsvdd
