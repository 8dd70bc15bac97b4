#include "ocsvdd/model_io.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace ocsvdd {

namespace {

// Upper bound on any single dimension read from a file; guards allocations
// against corrupt headers.
constexpr std::uint32_t kMaxDim = 1u << 20;

class Writer {
public:
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
    }
    void f64(double v) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
    }
    void matrix(const Matrix& m) {
        for (double v : m.data()) f64(v);
    }
    void bytes(std::string_view s) { out_.append(s); }
    std::string take() { return std::move(out_); }

private:
    std::string out_;
};

class Reader {
public:
    explicit Reader(std::string_view in) : in_(in) {}

    std::uint32_t u32() {
        need(4, "u32");
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        pos_ += 4;
        return v;
    }
    double f64() {
        need(8, "f64");
        std::uint64_t bits = 0;
        for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(in_[pos_ + i])) << (8 * i);
        const double v = std::bit_cast<double>(bits);
        if (!std::isfinite(v)) throw FormatError("non-finite value", pos_);
        pos_ += 8;
        return v;
    }
    std::uint32_t dim(const char* what, bool allow_zero = false) {
        const std::size_t at = pos_;
        const std::uint32_t v = u32();
        if ((v == 0 && !allow_zero) || v > kMaxDim) {
            throw FormatError(std::string("invalid ") + what + " " + std::to_string(v), at);
        }
        return v;
    }
    Matrix matrix(std::size_t rows, std::size_t cols) {
        need(rows * cols * 8, "matrix data");
        Matrix m(rows, cols);
        for (double& v : m.data()) v = f64();
        return m;
    }
    std::string_view bytes(std::size_t n) {
        need(n, "bytes");
        auto s = in_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const noexcept { return pos_; }
    bool at_end() const noexcept { return pos_ == in_.size(); }

private:
    void need(std::size_t n, const char* what) const {
        if (in_.size() - pos_ < n) {
            throw FormatError(std::string("truncated file while reading ") + what, pos_);
        }
    }
    std::string_view in_;
    std::size_t pos_ = 0;
};

DenseLayer read_layer(Reader& r, std::size_t in, std::size_t out) {
    DenseLayer l;
    l.weight = r.matrix(out, in);
    l.bias = r.matrix(1, out);
    return l;
}

}  // namespace

std::string serialize_model(const ModelFile& model) {
    model.config.validate();
    check_shapes(model.config, model.params);
    const auto& cfg = model.config;
    std::uint32_t flags = 0;
    if (model.center) flags |= ModelFile::kFlagCenter;
    if (cfg.final_bias) flags |= ModelFile::kFlagFinalBias;
    if (model.inference) flags |= ModelFile::kFlagMeta;

    Writer w;
    w.bytes("OCMS");
    w.u32(ModelFile::kVersion);
    w.u32(flags);
    w.u32(static_cast<std::uint32_t>(cfg.input_dim));
    w.u32(static_cast<std::uint32_t>(cfg.hidden_dims.size()));
    for (std::size_t h : cfg.hidden_dims) w.u32(static_cast<std::uint32_t>(h));
    w.u32(static_cast<std::uint32_t>(cfg.latent_dim));
    for (const Matrix* t : model.params.tensors()) w.matrix(*t);
    if (model.center) {
        if (model.center->rows() != 1 || model.center->cols() != cfg.latent_dim) {
            throw DimensionError("serialize_model: center must be 1 x latent_dim");
        }
        w.matrix(*model.center);
    }
    if (model.inference) {
        w.u32(static_cast<std::uint32_t>(model.inference->size()));
        for (const auto& l : *model.inference) {
            w.u32(static_cast<std::uint32_t>(l.out_dim()));
            w.u32(static_cast<std::uint32_t>(l.in_dim()));
            w.matrix(l.weight);
            w.matrix(l.bias);
        }
    }
    return w.take();
}

ModelFile deserialize_model(std::string_view bytes) {
    Reader r(bytes);
    if (bytes.size() < 4) throw FormatError("truncated file while reading magic", 0);
    if (r.bytes(4) != "OCMS") throw FormatError("bad magic, expected \"OCMS\"", 0);
    const std::size_t version_at = r.pos();
    const std::uint32_t version = r.u32();
    if (version != ModelFile::kVersion) {
        throw FormatError("unsupported format version " + std::to_string(version), version_at);
    }
    const std::size_t flags_at = r.pos();
    const std::uint32_t flags = r.u32();
    if (flags & ~(ModelFile::kFlagCenter | ModelFile::kFlagFinalBias | ModelFile::kFlagMeta)) {
        throw FormatError("unknown flag bits " + std::to_string(flags), flags_at);
    }

    ModelFile m;
    m.config.input_dim = r.dim("input_dim");
    const std::uint32_t n_hidden = r.dim("hidden layer count", true);
    if (n_hidden > 64) throw FormatError("hidden layer count " + std::to_string(n_hidden) + " too large", r.pos() - 4);
    m.config.hidden_dims.clear();
    for (std::uint32_t k = 0; k < n_hidden; ++k) m.config.hidden_dims.push_back(r.dim("hidden dim"));
    m.config.latent_dim = r.dim("latent_dim");
    m.config.final_bias = (flags & ModelFile::kFlagFinalBias) != 0;

    std::size_t fan_in = m.config.input_dim;
    for (std::size_t width : m.config.hidden_dims) {
        m.params.trunk.push_back(read_layer(r, fan_in, width));
        fan_in = width;
    }
    m.params.final_weight = r.matrix(m.config.latent_dim, fan_in);
    if (m.config.final_bias) m.params.final_bias = r.matrix(1, m.config.latent_dim);
    if (flags & ModelFile::kFlagCenter) m.center = r.matrix(1, m.config.latent_dim);

    if (flags & ModelFile::kFlagMeta) {
        const std::uint32_t n_layers = r.dim("inference layer count");
        if (n_layers > 64) throw FormatError("inference layer count too large", r.pos() - 4);
        std::vector<DenseLayer> layers;
        std::size_t prev_out = 0;
        for (std::uint32_t k = 0; k < n_layers; ++k) {
            const std::size_t at = r.pos();
            const std::uint32_t out = r.dim("inference layer width");
            const std::uint32_t in = r.dim("inference layer input");
            if (k > 0 && in != prev_out) throw FormatError("inference layer input does not chain", at);
            layers.push_back(read_layer(r, in, out));
            prev_out = out;
        }
        m.inference = std::move(layers);
    }
    if (!r.at_end()) throw FormatError("trailing bytes after model", r.pos());
    return m;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write " + path.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw InputError("write failed for " + path.string());
}

void save_model(const ModelFile& model, const std::filesystem::path& path) {
    write_file(path, serialize_model(model));
}

ModelFile load_model(const std::filesystem::path& path) {
    const std::string bytes = read_file(path);
    try {
        return deserialize_model(bytes);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.detail(), e.offset());
    }
}

}  // namespace ocsvdd
