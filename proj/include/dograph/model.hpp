#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dograph/matrix.hpp"
#include "dograph/rng.hpp"

namespace dograph {

struct ModelConfig {
    std::size_t vocab_size = 32;
    std::size_t seq_len = 16;
    std::size_t embed_dim = 16;
    std::size_t qk_dim = 8;
    std::size_t v_dim = 16;
    std::size_t hidden_dim = 16;
    double attn_temperature = 1.0;

    void validate() const {
        if (vocab_size < 1 || seq_len < 1 || embed_dim < 1 || qk_dim < 1 || v_dim < 1 ||
            hidden_dim < 1)
            throw std::invalid_argument("ModelConfig: all dimensions must be >= 1");
        if (!(attn_temperature > 0.0))
            throw std::invalid_argument("ModelConfig: attn_temperature must be positive");
    }
};

// Trainable blocks plus the frozen token-embedding table. Shapes:
// embedding |V|xd, w_v d x d_v, w_q d x d_k, w_k d x d_k, w_o d_v x d_h,
// w d_h x |V|.
struct ModelState {
    Matrix embedding;
    Matrix w_v, w_q, w_k, w_o, w;

    void validate(const ModelConfig& cfg) const {
        auto check = [](const Matrix& m, std::size_t r, std::size_t c, const char* name) {
            if (m.rows() != r || m.cols() != c)
                throw std::invalid_argument(std::string("ModelState: bad shape for ") + name +
                                            ": " + m.shape_string() + ", expected " +
                                            std::to_string(r) + "x" + std::to_string(c));
            require_finite(m, name);
        };
        check(embedding, cfg.vocab_size, cfg.embed_dim, "embedding");
        check(w_v, cfg.embed_dim, cfg.v_dim, "w_v");
        check(w_q, cfg.embed_dim, cfg.qk_dim, "w_q");
        check(w_k, cfg.embed_dim, cfg.qk_dim, "w_k");
        check(w_o, cfg.v_dim, cfg.hidden_dim, "w_o");
        check(w, cfg.hidden_dim, cfg.vocab_size, "w");
    }
};

struct Sample {
    std::vector<int> tokens;
    std::vector<int> targets;
    int human_domain = 0;

    void validate(const ModelConfig& cfg) const {
        if (tokens.size() != cfg.seq_len || targets.size() != cfg.seq_len)
            throw std::invalid_argument("Sample: sequence length mismatch");
        for (int t : tokens)
            if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size)
                throw std::invalid_argument("Sample: token id out of range");
        for (int t : targets)
            if (t < 0 || static_cast<std::size_t>(t) >= cfg.vocab_size)
                throw std::invalid_argument("Sample: target id out of range");
    }
};

struct ForwardTrace {
    Matrix x, q, k, v, s, o, h, z, pi;
    double loss = 0.0;
};

// Parameter-block selector for gradients and kernels; Flat selects the
// concatenation of all five blocks in the fixed order V, Q, K, O, W.
enum class GradBlock { V, Q, K, O, W, Flat };

inline const char* block_name(GradBlock b) {
    switch (b) {
        case GradBlock::V: return "V";
        case GradBlock::Q: return "Q";
        case GradBlock::K: return "K";
        case GradBlock::O: return "O";
        case GradBlock::W: return "W";
        case GradBlock::Flat: return "flat";
    }
    return "?";
}

inline GradBlock block_from_name(const std::string& name) {
    if (name == "V") return GradBlock::V;
    if (name == "Q") return GradBlock::Q;
    if (name == "K") return GradBlock::K;
    if (name == "O") return GradBlock::O;
    if (name == "W") return GradBlock::W;
    if (name == "flat") return GradBlock::Flat;
    throw std::invalid_argument("unknown gradient block: " + name);
}

constexpr std::array<GradBlock, 5> kParamBlocks = {GradBlock::V, GradBlock::Q, GradBlock::K,
                                                   GradBlock::O, GradBlock::W};
constexpr std::array<GradBlock, 6> kAllBlocks = {GradBlock::V, GradBlock::Q, GradBlock::K,
                                                 GradBlock::O, GradBlock::W, GradBlock::Flat};

// Byte/element layout of the flat gradient vector (block order V, Q, K, O, W,
// each row-major).
struct BlockLayout {
    std::array<std::size_t, 5> offset{};
    std::array<std::size_t, 5> count{};
    std::size_t total = 0;

    explicit BlockLayout(const ModelConfig& cfg) {
        const std::array<std::size_t, 5> sizes = {
            cfg.embed_dim * cfg.v_dim, cfg.embed_dim * cfg.qk_dim, cfg.embed_dim * cfg.qk_dim,
            cfg.v_dim * cfg.hidden_dim, cfg.hidden_dim * cfg.vocab_size};
        std::size_t off = 0;
        for (std::size_t i = 0; i < 5; ++i) {
            offset[i] = off;
            count[i] = sizes[i];
            off += sizes[i];
        }
        total = off;
    }
};

struct GradientRecord {
    Matrix g_v, g_q, g_k, g_o, g_w;
    std::vector<double> flat;  // concatenation in order V, Q, K, O, W
    int human_domain = 0;

    std::span<const double> view(GradBlock b) const {
        switch (b) {
            case GradBlock::V: return {flat.data() + off_[0], cnt_[0]};
            case GradBlock::Q: return {flat.data() + off_[1], cnt_[1]};
            case GradBlock::K: return {flat.data() + off_[2], cnt_[2]};
            case GradBlock::O: return {flat.data() + off_[3], cnt_[3]};
            case GradBlock::W: return {flat.data() + off_[4], cnt_[4]};
            case GradBlock::Flat: return {flat.data(), flat.size()};
        }
        throw std::invalid_argument("GradientRecord::view: invalid block");
    }

    void assemble_flat() {
        const Matrix* blocks[5] = {&g_v, &g_q, &g_k, &g_o, &g_w};
        std::size_t off = 0;
        std::size_t total = 0;
        for (const Matrix* m : blocks) total += m->size();
        flat.resize(total);
        for (std::size_t i = 0; i < 5; ++i) {
            off_[i] = off;
            cnt_[i] = blocks[i]->size();
            std::copy(blocks[i]->data().begin(), blocks[i]->data().end(), flat.begin() + off);
            off += cnt_[i];
        }
    }

private:
    std::array<std::size_t, 5> off_{};
    std::array<std::size_t, 5> cnt_{};
};

namespace detail {

// T = C / (tau * n * sqrt(d_k)) with C = I - (1/n) 1 1^T.
inline Matrix linearization_matrix(const ModelConfig& cfg) {
    const std::size_t n = cfg.seq_len;
    const double f =
        1.0 / (cfg.attn_temperature * static_cast<double>(n) * std::sqrt(static_cast<double>(cfg.qk_dim)));
    Matrix t(n, n, -f / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) t(i, i) += f;
    return t;
}

}  // namespace detail

// Forward pass of the linearized-attention model:
//   X = embedding rows, Q = X Wq, K = X Wk, V = X Wv, S = Q K^T / sqrt(d_k),
//   O = A V + T (Q K^T) V with A = (1/n) 1 1^T and T = C / (tau n sqrt(d_k)),
//   H = O Wo, Z = H W, Pi = row_softmax(Z),
//   loss = mean over positions of -log Pi[t, targets[t]].
inline ForwardTrace forward(const ModelConfig& cfg, const ModelState& state,
                            const Sample& sample) {
    sample.validate(cfg);
    const std::size_t n = cfg.seq_len;

    ForwardTrace tr;
    tr.x = Matrix(n, cfg.embed_dim);
    for (std::size_t t = 0; t < n; ++t) {
        const auto src = state.embedding.row(static_cast<std::size_t>(sample.tokens[t]));
        std::copy(src.begin(), src.end(), tr.x.row(t).begin());
    }
    require_finite(tr.x, "X");

    tr.q = matmul(tr.x, state.w_q);
    require_finite(tr.q, "Q");
    tr.k = matmul(tr.x, state.w_k);
    require_finite(tr.k, "K");
    tr.v = matmul(tr.x, state.w_v);
    require_finite(tr.v, "V");

    Matrix qkt = matmul(tr.q, transpose(tr.k));
    tr.s = scale(qkt, 1.0 / std::sqrt(static_cast<double>(cfg.qk_dim)));
    require_finite(tr.s, "S");

    // O = A V + T (Q K^T) V. A V broadcasts the column means of V.
    Matrix av(n, cfg.v_dim);
    for (std::size_t j = 0; j < cfg.v_dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += tr.v(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) av(i, j) = mean;
    }
    tr.o = add(av, matmul(detail::linearization_matrix(cfg), matmul(qkt, tr.v)));
    require_finite(tr.o, "O");

    tr.h = matmul(tr.o, state.w_o);
    require_finite(tr.h, "H");
    tr.z = matmul(tr.h, state.w);
    require_finite(tr.z, "Z");
    tr.pi = row_softmax(tr.z);

    double loss = 0.0;
    for (std::size_t t = 0; t < n; ++t)
        loss -= std::log(tr.pi(t, static_cast<std::size_t>(sample.targets[t])));
    tr.loss = loss / static_cast<double>(n);
    if (!std::isfinite(tr.loss)) throw std::runtime_error("non-finite entries in tensor loss");
    return tr;
}

namespace detail {

// Gradients of every block given an upstream mismatch G_Z = dL/dZ. Split out
// so tests can inject a synthetic mismatch and check linearity.
inline GradientRecord gradients_from_mismatch(const ModelConfig& cfg, const ModelState& state,
                                              const ForwardTrace& tr, const Matrix& g_z) {
    const std::size_t n = cfg.seq_len;
    GradientRecord rec;

    const Matrix g_h = matmul(g_z, transpose(state.w));
    const Matrix g_o = matmul(g_h, transpose(state.w_o));
    const Matrix t_mat = linearization_matrix(cfg);
    const Matrix tt_go = matmul(transpose(t_mat), g_o);

    // dL/dV = A^T G_O + K Q^T T^T G_O  (A is symmetric)
    Matrix a_go(n, cfg.v_dim);
    for (std::size_t j = 0; j < cfg.v_dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < n; ++i) mean += g_o(i, j);
        mean /= static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) a_go(i, j) = mean;
    }
    const Matrix d_v = add(a_go, matmul(tr.k, matmul(transpose(tr.q), tt_go)));

    // dL/dQ = (T^T G_O) V^T K
    const Matrix d_q = matmul(tt_go, matmul(transpose(tr.v), tr.k));

    // dL/dK = V G_O^T T Q
    const Matrix d_k = matmul(tr.v, matmul(transpose(g_o), matmul(t_mat, tr.q)));

    const Matrix xt = transpose(tr.x);
    rec.g_v = matmul(xt, d_v);
    rec.g_q = matmul(xt, d_q);
    rec.g_k = matmul(xt, d_k);
    rec.g_o = matmul(transpose(tr.o), g_h);
    rec.g_w = matmul(transpose(tr.h), g_z);
    rec.assemble_flat();
    return rec;
}

// G_Z = (Pi - Y) / n for the positionwise-mean cross-entropy loss, Y one-hot.
inline Matrix mean_loss_mismatch(const ModelConfig& cfg, const ForwardTrace& tr,
                                 const Sample& sample) {
    const std::size_t n = cfg.seq_len;
    Matrix g_z = scale(tr.pi, 1.0 / static_cast<double>(n));
    for (std::size_t t = 0; t < n; ++t)
        g_z(t, static_cast<std::size_t>(sample.targets[t])) -= 1.0 / static_cast<double>(n);
    return g_z;
}

}  // namespace detail

// Closed-form per-sample gradients of all five blocks; exact for this model.
inline GradientRecord per_sample_gradients(const ModelConfig& cfg, const ModelState& state,
                                           const ForwardTrace& trace, const Sample& sample) {
    sample.validate(cfg);
    if (trace.pi.rows() != cfg.seq_len || trace.pi.cols() != cfg.vocab_size)
        throw std::invalid_argument("per_sample_gradients: trace/config shape mismatch");
    GradientRecord rec = detail::gradients_from_mismatch(
        cfg, state, trace, detail::mean_loss_mismatch(cfg, trace, sample));
    rec.human_domain = sample.human_domain;
    return rec;
}

// Mismatch tensor R = G_Z W^T Wo^T; coincides with the upstream gradient G_O
// used inside per_sample_gradients.
inline Matrix mismatch_tensor(const ForwardTrace& trace, const ModelState& state,
                              const ModelConfig& cfg, const Sample& sample) {
    const Matrix g_z = detail::mean_loss_mismatch(cfg, trace, sample);
    return matmul(matmul(g_z, transpose(state.w)), transpose(state.w_o));
}

// All blocks i.i.d. normal with std = scale / sqrt(fan_in), where fan_in is
// the input dimension of the linear map (the embedding dimension for the
// embedding table). The embedding is frozen after this call.
inline ModelState init_state(const ModelConfig& cfg, SeededRng& rng, double scale) {
    cfg.validate();
    if (!(scale > 0.0)) throw std::invalid_argument("init_state: scale must be positive");
    ModelState st;
    st.embedding = gaussian_matrix(rng, cfg.vocab_size, cfg.embed_dim,
                                   scale * scale / static_cast<double>(cfg.embed_dim));
    st.w_v = gaussian_matrix(rng, cfg.embed_dim, cfg.v_dim,
                             scale * scale / static_cast<double>(cfg.embed_dim));
    st.w_q = gaussian_matrix(rng, cfg.embed_dim, cfg.qk_dim,
                             scale * scale / static_cast<double>(cfg.embed_dim));
    st.w_k = gaussian_matrix(rng, cfg.embed_dim, cfg.qk_dim,
                             scale * scale / static_cast<double>(cfg.embed_dim));
    st.w_o = gaussian_matrix(rng, cfg.v_dim, cfg.hidden_dim,
                             scale * scale / static_cast<double>(cfg.v_dim));
    st.w = gaussian_matrix(rng, cfg.hidden_dim, cfg.vocab_size,
                           scale * scale / static_cast<double>(cfg.hidden_dim));
    return st;
}

}  // namespace dograph
