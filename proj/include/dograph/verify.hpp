#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dograph/domains.hpp"
#include "dograph/geometry.hpp"
#include "dograph/model.hpp"
#include "dograph/rng.hpp"

namespace dograph {

// Self-check harnesses behind the `verify` subcommand. Each returns raw
// numbers; callers decide presentation. All are deterministic in the seed.

struct TheoremSuiteReport {
    struct Entry {
        GradBlock block;
        double max_rel_discrepancy = 0.0;
    };
    std::vector<Entry> entries;
    std::size_t pairs = 0;

    bool pass(double tol = 1e-9) const {
        for (const auto& e : entries)
            if (!(e.max_rel_discrepancy <= tol)) return false;
        return true;
    }
};

namespace detail {

inline ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.vocab_size = 11;
    cfg.seq_len = 6;
    cfg.embed_dim = 5;
    cfg.qk_dim = 3;
    cfg.v_dim = 4;
    cfg.hidden_dim = 4;
    return cfg;
}

// A pair of structurally different random Markov domains over the model vocab.
inline std::pair<DomainSpec, DomainSpec> random_domain_pair(std::size_t vocab,
                                                            std::uint64_t seed) {
    const std::size_t half = vocab / 2;
    DomainRecipe a{"a", "banded", seed, 0, half - 1, 0, 0, 0.9, 0.5};
    DomainRecipe b{"b", "banded", seed + 1, half, vocab - 1, 0, 0, 0.9, 0.5};
    return {build_domain(a, vocab, 0), build_domain(b, vocab, 1)};
}

inline std::vector<GradientRecord> batch_gradients(const ModelConfig& cfg,
                                                   const ModelState& state,
                                                   const DomainSpec& domain, std::size_t batch,
                                                   SeededRng& rng) {
    std::vector<GradientRecord> out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i) {
        const Sample s = sample_sequence(domain, cfg.seq_len, rng);
        const ForwardTrace tr = forward(cfg, state, s);
        out.push_back(per_sample_gradients(cfg, state, tr, s));
    }
    return out;
}

}  // namespace detail

// Mean-gradient-difference vs MMD^2 identity over random batch pairs.
inline TheoremSuiteReport run_theorem_suite(std::uint64_t seed, std::size_t pairs = 20,
                                            std::size_t batch = 16,
                                            const std::vector<GradBlock>& blocks =
                                                {kAllBlocks.begin(), kAllBlocks.end()}) {
    TheoremSuiteReport rep;
    rep.pairs = pairs;
    for (GradBlock b : blocks) rep.entries.push_back({b, 0.0});

    SeededRng root(seed);
    const ModelConfig cfg = detail::tiny_model_config();
    for (std::size_t p = 0; p < pairs; ++p) {
        SeededRng pair_rng = root.child(p);
        SeededRng init_rng = pair_rng.child(0);
        const ModelState state = init_state(cfg, init_rng, 1.0);
        const auto [dom1, dom2] =
            detail::random_domain_pair(cfg.vocab_size, pair_rng.child(1).seed());
        SeededRng s1 = pair_rng.child(2);
        SeededRng s2 = pair_rng.child(3);
        const auto g1 = detail::batch_gradients(cfg, state, dom1, batch, s1);
        const auto g2 = detail::batch_gradients(cfg, state, dom2, batch, s2);
        for (auto& entry : rep.entries) {
            const TheoremReport tr = verify_theorem(g1, g2, entry.block);
            entry.max_rel_discrepancy = std::max(entry.max_rel_discrepancy, tr.rel_discrepancy);
        }
    }
    return rep;
}

struct FdSuiteReport {
    struct Entry {
        GradBlock block;
        double max_rel_error = 0.0;
    };
    std::vector<Entry> entries;  // V, Q, K, O, W
    double max_mismatch_error = 0.0;  // |R - G_O| identity
    std::size_t instances = 0;

    bool pass(double fd_tol = 1e-5, double mismatch_tol = 1e-12) const {
        for (const auto& e : entries)
            if (!(e.max_rel_error <= fd_tol)) return false;
        return max_mismatch_error <= mismatch_tol;
    }
};

// Central finite differences of the loss against the closed-form gradients on
// random tiny instances; errors are relative to the block's max |entry|.
inline FdSuiteReport run_fd_suite(std::uint64_t seed, std::size_t instances = 20,
                                  double step = 1e-5) {
    FdSuiteReport rep;
    rep.instances = instances;
    for (GradBlock b : kParamBlocks) rep.entries.push_back({b, 0.0});

    ModelConfig cfg;
    cfg.vocab_size = 4;
    cfg.seq_len = 3;
    cfg.embed_dim = 2;
    cfg.qk_dim = 2;
    cfg.v_dim = 2;
    cfg.hidden_dim = 2;

    SeededRng root(seed);
    for (std::size_t inst = 0; inst < instances; ++inst) {
        SeededRng rng = root.child(inst);
        SeededRng init_rng = rng.child(0);
        ModelState state = init_state(cfg, init_rng, 1.0);
        Sample s;
        s.tokens.resize(cfg.seq_len);
        s.targets.resize(cfg.seq_len);
        for (auto& t : s.tokens) t = static_cast<int>(rng.next_below(cfg.vocab_size));
        for (auto& t : s.targets) t = static_cast<int>(rng.next_below(cfg.vocab_size));

        const ForwardTrace tr = forward(cfg, state, s);
        const GradientRecord analytic = per_sample_gradients(cfg, state, tr, s);

        Matrix* blocks[5] = {&state.w_v, &state.w_q, &state.w_k, &state.w_o, &state.w};
        const Matrix* grads[5] = {&analytic.g_v, &analytic.g_q, &analytic.g_k, &analytic.g_o,
                                  &analytic.g_w};
        for (std::size_t b = 0; b < 5; ++b) {
            Matrix& wb = *blocks[b];
            double block_scale = 0.0;
            double max_abs_err = 0.0;
            for (std::size_t i = 0; i < wb.size(); ++i) {
                const double orig = wb.data()[i];
                wb.data()[i] = orig + step;
                const double lp = forward(cfg, state, s).loss;
                wb.data()[i] = orig - step;
                const double lm = forward(cfg, state, s).loss;
                wb.data()[i] = orig;
                const double fd = (lp - lm) / (2.0 * step);
                block_scale = std::max(block_scale, std::abs(fd));
                max_abs_err = std::max(max_abs_err, std::abs(fd - grads[b]->data()[i]));
            }
            const double rel = max_abs_err / std::max(block_scale, 1e-10);
            rep.entries[b].max_rel_error = std::max(rep.entries[b].max_rel_error, rel);
        }

        const Matrix r = mismatch_tensor(tr, state, cfg, s);
        const Matrix g_z = detail::mean_loss_mismatch(cfg, tr, s);
        const Matrix g_o = matmul(matmul(g_z, transpose(state.w)), transpose(state.w_o));
        rep.max_mismatch_error = std::max(rep.max_mismatch_error, max_abs(sub(r, g_o)));
    }
    return rep;
}

struct JlSuiteReport {
    struct SeedEntry {
        std::uint64_t seed;
        double preserved_fraction = 0.0;
    };
    std::vector<SeedEntry> seeds;
    std::size_t dim = 0, target_dim = 0, vectors = 0;
    double epsilon = 0.3;

    bool pass(double required_fraction = 0.99) const {
        for (const auto& s : seeds)
            if (!(s.preserved_fraction >= required_fraction)) return false;
        return !seeds.empty();
    }
};

// Pairwise squared-distance preservation of the Gaussian projection on random
// vectors, checked against exhaustive distances in the original space.
inline JlSuiteReport run_jl_suite(std::uint64_t seed, std::size_t dim = 10000,
                                  std::size_t target_dim = 1000, std::size_t vectors = 100,
                                  double epsilon = 0.3, std::size_t num_seeds = 5) {
    JlSuiteReport rep;
    rep.dim = dim;
    rep.target_dim = target_dim;
    rep.vectors = vectors;
    rep.epsilon = epsilon;

    SeededRng root(seed);
    for (std::size_t si = 0; si < num_seeds; ++si) {
        SeededRng trial = root.child(si);
        std::vector<std::vector<double>> g(vectors, std::vector<double>(dim));
        SeededRng grng = trial.child(0);
        for (auto& v : g)
            for (double& x : v) x = grng.next_gaussian();

        ProjectionConfig pc;
        pc.input_dim = dim;
        pc.target_dim = target_dim;
        pc.seed = trial.child(1).seed();
        pc.epsilon = epsilon;
        const Projector proj = Projector::create(pc);

        std::vector<std::vector<double>> p(vectors);
        for (std::size_t i = 0; i < vectors; ++i) p[i] = proj.project(g[i]);

        std::size_t preserved = 0, total = 0;
        for (std::size_t i = 0; i < vectors; ++i)
            for (std::size_t j = i + 1; j < vectors; ++j) {
                const double orig = squared_distance(g[i], g[j]);
                const double got = squared_distance(p[i], p[j]);
                if (got >= (1.0 - epsilon) * orig && got <= (1.0 + epsilon) * orig) ++preserved;
                ++total;
            }
        rep.seeds.push_back(
            {pc.seed, static_cast<double>(preserved) / static_cast<double>(total)});
    }
    return rep;
}

}  // namespace dograph
