#pragma once

#include <bit>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "dograph/model.hpp"

namespace dograph {

// All binary formats are little-endian; this codebase targets LE hosts.
static_assert(std::endian::native == std::endian::little,
              "binary file formats assume a little-endian host");

namespace io {

inline void write_u64(std::ostream& os, std::uint64_t v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

inline std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), sizeof(v));
    if (!is) throw std::runtime_error("unexpected end of file reading u64");
    return v;
}

inline void write_f64s(std::ostream& os, const double* p, std::size_t n) {
    os.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_f64s(std::istream& is, double* p, std::size_t n) {
    is.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is) throw std::runtime_error("unexpected end of file reading f64 block");
}

// Shortest round-trip decimal for doubles; used for deterministic CSV output.
inline std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Prefer the shortest representation that round-trips.
    for (int prec = 1; prec < 17; ++prec) {
        char shorter[32];
        std::snprintf(shorter, sizeof(shorter), "%.*g", prec, v);
        double back = 0.0;
        std::sscanf(shorter, "%lf", &back);
        if (back == v) return shorter;
    }
    return buf;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open file: " + path.string());
    return std::string(std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>());
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write file: " + path.string());
    os << text;
}

}  // namespace io

// ---- model checkpoint format ----
//
// Header: seven u64 little-endian integers
//   |V|, seq_len, embed_dim, qk_dim, v_dim, hidden_dim, format_version
// followed by f64 little-endian entries, row-major, in block order
//   embedding, W_V, W_Q, W_K, W_O, W.
// attn_temperature is a config value and is not part of the checkpoint.

constexpr std::uint64_t kModelFormatVersion = 1;

inline void save_model(const std::filesystem::path& path, const ModelConfig& cfg,
                       const ModelState& state) {
    state.validate(cfg);
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path.string());
    io::write_u64(os, cfg.vocab_size);
    io::write_u64(os, cfg.seq_len);
    io::write_u64(os, cfg.embed_dim);
    io::write_u64(os, cfg.qk_dim);
    io::write_u64(os, cfg.v_dim);
    io::write_u64(os, cfg.hidden_dim);
    io::write_u64(os, kModelFormatVersion);
    for (const Matrix* m : {&state.embedding, &state.w_v, &state.w_q, &state.w_k, &state.w_o,
                            &state.w})
        io::write_f64s(os, m->data().data(), m->size());
    if (!os) throw std::runtime_error("short write on checkpoint: " + path.string());
}

inline std::pair<ModelConfig, ModelState> load_model(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path.string());
    ModelConfig cfg;
    cfg.vocab_size = io::read_u64(is);
    cfg.seq_len = io::read_u64(is);
    cfg.embed_dim = io::read_u64(is);
    cfg.qk_dim = io::read_u64(is);
    cfg.v_dim = io::read_u64(is);
    cfg.hidden_dim = io::read_u64(is);
    const std::uint64_t version = io::read_u64(is);
    if (version != kModelFormatVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    cfg.validate();

    ModelState st;
    st.embedding = Matrix(cfg.vocab_size, cfg.embed_dim);
    st.w_v = Matrix(cfg.embed_dim, cfg.v_dim);
    st.w_q = Matrix(cfg.embed_dim, cfg.qk_dim);
    st.w_k = Matrix(cfg.embed_dim, cfg.qk_dim);
    st.w_o = Matrix(cfg.v_dim, cfg.hidden_dim);
    st.w = Matrix(cfg.hidden_dim, cfg.vocab_size);
    for (Matrix* m : {&st.embedding, &st.w_v, &st.w_q, &st.w_k, &st.w_o, &st.w})
        io::read_f64s(is, m->data().data(), m->size());
    st.validate(cfg);
    return {cfg, st};
}

// ---- gradient dump format ----
//
// Header: u64 count, u64 dim, 8 bytes block tag (NUL-padded ASCII),
// then count contiguous f64 vectors of length dim.

inline void write_gradient_dump(const std::filesystem::path& path,
                                const std::vector<std::vector<double>>& vectors,
                                const std::string& tag) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write gradient dump: " + path.string());
    const std::uint64_t count = vectors.size();
    const std::uint64_t dim = count ? vectors.front().size() : 0;
    io::write_u64(os, count);
    io::write_u64(os, dim);
    char tagbuf[8] = {};
    std::memcpy(tagbuf, tag.data(), std::min<std::size_t>(tag.size(), 8));
    os.write(tagbuf, 8);
    for (const auto& v : vectors) {
        if (v.size() != dim)
            throw std::invalid_argument("write_gradient_dump: inconsistent vector length");
        io::write_f64s(os, v.data(), v.size());
    }
}

struct GradientDump {
    std::vector<std::vector<double>> vectors;
    std::string tag;
};

inline GradientDump read_gradient_dump(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open gradient dump: " + path.string());
    GradientDump d;
    const std::uint64_t count = io::read_u64(is);
    const std::uint64_t dim = io::read_u64(is);
    char tagbuf[8] = {};
    is.read(tagbuf, 8);
    if (!is) throw std::runtime_error("unexpected end of file in gradient dump header");
    d.tag.assign(tagbuf, strnlen(tagbuf, 8));
    d.vectors.assign(count, std::vector<double>(dim));
    for (auto& v : d.vectors) io::read_f64s(is, v.data(), v.size());
    return d;
}

}  // namespace dograph
