#include <catch2/catch_amalgamated.hpp>

#include <filesystem>

#include "dograph/io.hpp"
#include "dograph/model.hpp"
#include "dograph/rng.hpp"
#include "dograph/verify.hpp"
#include "oracles.hpp"

using namespace dograph;

namespace {

ModelConfig small_cfg() {
    ModelConfig cfg;
    cfg.vocab_size = 5;
    cfg.seq_len = 4;
    cfg.embed_dim = 3;
    cfg.qk_dim = 3;
    cfg.v_dim = 3;
    cfg.hidden_dim = 3;
    return cfg;
}

Sample make_sample(const ModelConfig& cfg, SeededRng& rng) {
    Sample s;
    s.tokens.resize(cfg.seq_len);
    s.targets.resize(cfg.seq_len);
    for (auto& t : s.tokens) t = static_cast<int>(rng.next_below(cfg.vocab_size));
    for (auto& t : s.targets) t = static_cast<int>(rng.next_below(cfg.vocab_size));
    return s;
}

std::vector<std::vector<double>> to_rows(const Matrix& m) {
    std::vector<std::vector<double>> rows(m.rows(), std::vector<double>(m.cols()));
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j) rows[i][j] = m(i, j);
    return rows;
}

}  // namespace

TEST_CASE("forward with n = 1 reduces attention to the value row") {
    ModelConfig cfg = small_cfg();
    cfg.seq_len = 1;
    SeededRng rng(1);
    const ModelState st = init_state(cfg, rng, 1.0);
    Sample s;
    s.tokens = {2};
    s.targets = {3};
    const ForwardTrace tr = forward(cfg, st, s);
    // C = [0] for a single position, so O = A V = V.
    for (std::size_t j = 0; j < cfg.v_dim; ++j) REQUIRE(tr.o(0, j) == tr.v(0, j));
}

TEST_CASE("forward with zero queries is exact mean pooling") {
    ModelConfig cfg = small_cfg();
    SeededRng rng(2);
    ModelState st = init_state(cfg, rng, 1.0);
    st.w_q = Matrix(cfg.embed_dim, cfg.qk_dim, 0.0);
    Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    REQUIRE(max_abs(tr.s) == 0.0);
    for (std::size_t j = 0; j < cfg.v_dim; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < cfg.seq_len; ++i) mean += tr.v(i, j);
        mean /= static_cast<double>(cfg.seq_len);
        for (std::size_t i = 0; i < cfg.seq_len; ++i)
            REQUIRE(tr.o(i, j) == Catch::Approx(mean).margin(1e-15));
    }
}

TEST_CASE("forward loss matches an independent straight-line oracle") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(1234);
    const ModelState st = init_state(cfg, rng, 1.0);
    for (int rep = 0; rep < 5; ++rep) {
        const Sample s = make_sample(cfg, rng);
        const ForwardTrace tr = forward(cfg, st, s);
        const double want = oracle::straight_line_loss(
            to_rows(st.embedding), to_rows(st.w_q), to_rows(st.w_k), to_rows(st.w_v),
            to_rows(st.w_o), to_rows(st.w), s.tokens, s.targets, cfg.attn_temperature);
        REQUIRE(tr.loss == Catch::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("forward is deterministic") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(9);
    const ModelState st = init_state(cfg, rng, 1.0);
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace a = forward(cfg, st, s);
    const ForwardTrace b = forward(cfg, st, s);
    REQUIRE(a.loss == b.loss);
    for (std::size_t i = 0; i < a.pi.size(); ++i) REQUIRE(a.pi.data()[i] == b.pi.data()[i]);
}

TEST_CASE("uniform predictor loss equals ln |V|") {
    ModelConfig cfg = small_cfg();
    cfg.vocab_size = 32;
    SeededRng rng(3);
    ModelState st = init_state(cfg, rng, 1.0);
    st.w = Matrix(cfg.hidden_dim, cfg.vocab_size, 0.0);  // Z = 0 rows
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    REQUIRE(tr.loss == std::log(32.0));
}

TEST_CASE("zero mismatch gives exactly zero gradients") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(4);
    const ModelState st = init_state(cfg, rng, 1.0);
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    const Matrix zero(cfg.seq_len, cfg.vocab_size, 0.0);
    const GradientRecord rec = detail::gradients_from_mismatch(cfg, st, tr, zero);
    for (double v : rec.flat) REQUIRE(v == 0.0);
}

TEST_CASE("per-sample gradients match central finite differences") {
    const FdSuiteReport rep = run_fd_suite(77, 20);
    for (const auto& e : rep.entries) {
        INFO("block " << block_name(e.block));
        REQUIRE(e.max_rel_error <= 1e-5);
    }
    REQUIRE(rep.max_mismatch_error <= 1e-12);
}

TEST_CASE("g_W equals H^T (Pi - Y) / n on a hand-built two-position instance") {
    ModelConfig cfg = small_cfg();
    cfg.seq_len = 2;
    SeededRng rng(5);
    const ModelState st = init_state(cfg, rng, 1.0);
    Sample s;
    s.tokens = {1, 4};
    s.targets = {2, 0};
    const ForwardTrace tr = forward(cfg, st, s);
    const GradientRecord rec = per_sample_gradients(cfg, st, tr, s);

    // Hand-coded oracle: g_W[h][v] = sum_t H[t][h] * (Pi - Y)[t][v] / n.
    for (std::size_t h = 0; h < cfg.hidden_dim; ++h)
        for (std::size_t v = 0; v < cfg.vocab_size; ++v) {
            double want = 0.0;
            for (std::size_t t = 0; t < cfg.seq_len; ++t) {
                double mis = tr.pi(t, v);
                if (static_cast<std::size_t>(s.targets[t]) == v) mis -= 1.0;
                want += tr.h(t, h) * mis / static_cast<double>(cfg.seq_len);
            }
            REQUIRE(rec.g_w(h, v) == Catch::Approx(want).margin(1e-14));
        }
}

TEST_CASE("mismatch tensor equals the upstream gradient G_O") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(6);
    const ModelState st = init_state(cfg, rng, 1.0);
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    const Matrix r = mismatch_tensor(tr, st, cfg, s);
    const Matrix g_z = detail::mean_loss_mismatch(cfg, tr, s);
    const Matrix g_o = matmul(matmul(g_z, transpose(st.w)), transpose(st.w_o));
    REQUIRE(max_abs(sub(r, g_o)) <= 1e-12);
}

TEST_CASE("mismatch tensor with identity output maps is the raw mismatch") {
    ModelConfig cfg = small_cfg();
    cfg.v_dim = cfg.hidden_dim = cfg.vocab_size;  // square maps
    SeededRng rng(7);
    ModelState st = init_state(cfg, rng, 1.0);
    st.w_o = Matrix::identity(cfg.v_dim);
    st.w = Matrix::identity(cfg.hidden_dim);
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    const Matrix r = mismatch_tensor(tr, st, cfg, s);
    const Matrix g_z = detail::mean_loss_mismatch(cfg, tr, s);
    REQUIRE(max_abs(sub(r, g_z)) == 0.0);
}

TEST_CASE("gradients are linear in the injected mismatch") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(8);
    const ModelState st = init_state(cfg, rng, 1.0);
    const Sample s = make_sample(cfg, rng);
    const ForwardTrace tr = forward(cfg, st, s);
    const Matrix r1 = gaussian_matrix(rng, cfg.seq_len, cfg.vocab_size, 1.0);
    const Matrix r2 = gaussian_matrix(rng, cfg.seq_len, cfg.vocab_size, 1.0);
    const GradientRecord g1 = detail::gradients_from_mismatch(cfg, st, tr, r1);
    const GradientRecord g2 = detail::gradients_from_mismatch(cfg, st, tr, r2);
    const GradientRecord gsum = detail::gradients_from_mismatch(cfg, st, tr, add(r1, r2));
    for (std::size_t i = 0; i < gsum.flat.size(); ++i)
        REQUIRE(gsum.flat[i] == Catch::Approx(g1.flat[i] + g2.flat[i]).margin(1e-12));
}

TEST_CASE("init_state is deterministic and rejects bad scale") {
    const ModelConfig cfg = small_cfg();
    SeededRng a(10), b(10);
    const ModelState sa = init_state(cfg, a, 1.0);
    const ModelState sb = init_state(cfg, b, 1.0);
    for (std::size_t i = 0; i < sa.w.size(); ++i) REQUIRE(sa.w.data()[i] == sb.w.data()[i]);
    SeededRng c(10);
    REQUIRE_THROWS_AS(init_state(cfg, c, 0.0), std::invalid_argument);
}

TEST_CASE("init_state entry std is within 5% of target on a 256x256 block") {
    ModelConfig cfg;
    cfg.vocab_size = 256;
    cfg.seq_len = 2;
    cfg.embed_dim = 256;
    cfg.qk_dim = 256;
    cfg.v_dim = 256;
    cfg.hidden_dim = 256;
    SeededRng rng(11);
    const ModelState st = init_state(cfg, rng, 1.3);
    const double target = 1.3 / std::sqrt(256.0);
    double mean = 0.0;
    for (double v : st.w_v.data()) mean += v;
    mean /= static_cast<double>(st.w_v.size());
    double var = 0.0;
    for (double v : st.w_v.data()) var += (v - mean) * (v - mean);
    var /= static_cast<double>(st.w_v.size());
    REQUIRE(std::sqrt(var) == Catch::Approx(target).epsilon(0.05));
}

TEST_CASE("model checkpoint round-trips bit-exactly") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(12);
    const ModelState st = init_state(cfg, rng, 1.0);
    const auto path = std::filesystem::temp_directory_path() / "dograph_test_model.bin";
    save_model(path, cfg, st);
    const auto [cfg2, st2] = load_model(path);
    REQUIRE(cfg2.vocab_size == cfg.vocab_size);
    REQUIRE(cfg2.seq_len == cfg.seq_len);
    const Matrix* a[6] = {&st.embedding, &st.w_v, &st.w_q, &st.w_k, &st.w_o, &st.w};
    const Matrix* b[6] = {&st2.embedding, &st2.w_v, &st2.w_q, &st2.w_k, &st2.w_o, &st2.w};
    for (int m = 0; m < 6; ++m)
        for (std::size_t i = 0; i < a[m]->size(); ++i)
            REQUIRE(a[m]->data()[i] == b[m]->data()[i]);
    std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects unknown format versions") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(14);
    const ModelState st = init_state(cfg, rng, 1.0);
    const auto path = std::filesystem::temp_directory_path() / "dograph_test_badver.bin";
    save_model(path, cfg, st);
    // corrupt the version field (7th u64 in the header)
    {
        std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
        f.seekp(6 * 8);
        const std::uint64_t bad = 999;
        f.write(reinterpret_cast<const char*>(&bad), 8);
    }
    REQUIRE_THROWS_WITH(load_model(path), Catch::Matchers::ContainsSubstring("version"));
    std::filesystem::remove(path);
}

TEST_CASE("forward rejects invalid samples") {
    const ModelConfig cfg = small_cfg();
    SeededRng rng(13);
    const ModelState st = init_state(cfg, rng, 1.0);
    Sample s;
    s.tokens = {0, 1, 2};  // wrong length
    s.targets = {0, 1, 2};
    REQUIRE_THROWS_AS(forward(cfg, st, s), std::invalid_argument);
    Sample bad;
    bad.tokens = {0, 1, 2, 9};  // out of vocab
    bad.targets = {0, 1, 2, 3};
    REQUIRE_THROWS_AS(forward(cfg, st, bad), std::invalid_argument);
}
