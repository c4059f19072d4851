#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>

#include "dograph/config.hpp"
#include "dograph/scheduler.hpp"
#include "oracles.hpp"

using namespace dograph;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny_model(std::size_t vocab) {
    ModelConfig cfg;
    cfg.vocab_size = vocab;
    cfg.seq_len = 4;
    cfg.embed_dim = 3;
    cfg.qk_dim = 2;
    cfg.v_dim = 3;
    cfg.hidden_dim = 3;
    return cfg;
}

MixtureSpec tiny_mixture() {
    ScenarioFile sf;
    sf.name = "tiny-2";
    sf.vocab_size = 6;
    sf.domains = {
        {"lo", "banded", 11, 0, 2, 0, 0, 0.9, 0.5},
        {"hi", "banded", 12, 3, 5, 0, 0, 0.9, 0.5},
    };
    sf.proportions = {0.5, 0.5};
    return build_mixture(sf);
}

fs::path fresh_dir(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

// Parameters of the five trainable blocks as plain nested vectors.
struct OracleParams {
    std::vector<std::vector<double>> emb, w_q, w_k, w_v, w_o, w;
};

OracleParams snapshot_params(const ModelState& st) {
    auto rows = [](const Matrix& m) {
        std::vector<std::vector<double>> out(m.rows(), std::vector<double>(m.cols()));
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
        return out;
    };
    return {rows(st.embedding), rows(st.w_q), rows(st.w_k), rows(st.w_v), rows(st.w_o),
            rows(st.w)};
}

double oracle_loss(const OracleParams& p, const Sample& s, double tau) {
    return oracle::straight_line_loss(p.emb, p.w_q, p.w_k, p.w_v, p.w_o, p.w, s.tokens,
                                      s.targets, tau);
}

// Finite-difference flat gradient in block order V, Q, K, O, W.
std::vector<double> oracle_fd_gradient(OracleParams& p, const Sample& s, double tau,
                                       double h = 1e-5) {
    std::vector<std::vector<std::vector<double>>*> blocks = {&p.w_v, &p.w_q, &p.w_k, &p.w_o,
                                                             &p.w};
    std::vector<double> flat;
    for (auto* blk : blocks) {
        for (auto& row : *blk)
            for (double& x : row) {
                const double orig = x;
                x = orig + h;
                const double lp = oracle_loss(p, s, tau);
                x = orig - h;
                const double lm = oracle_loss(p, s, tau);
                x = orig;
                flat.push_back((lp - lm) / (2.0 * h));
            }
    }
    return flat;
}

void oracle_apply_update(OracleParams& p, std::vector<double> u, double lr, double clip,
                         double wd) {
    double nrm = 0.0;
    for (double x : u) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > clip)
        for (double& x : u) x *= clip / nrm;
    std::vector<std::vector<std::vector<double>>*> blocks = {&p.w_v, &p.w_q, &p.w_k, &p.w_o,
                                                             &p.w};
    std::size_t idx = 0;
    for (auto* blk : blocks)
        for (auto& row : *blk)
            for (double& x : row) x = (1.0 - lr * wd) * x - lr * u[idx++];
}

double max_param_diff(const ModelState& st, const OracleParams& p) {
    double diff = 0.0;
    auto cmp = [&](const Matrix& m, const std::vector<std::vector<double>>& rows) {
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j)
                diff = std::max(diff, std::abs(m(i, j) - rows[i][j]));
    };
    cmp(st.w_v, p.w_v);
    cmp(st.w_q, p.w_q);
    cmp(st.w_k, p.w_k);
    cmp(st.w_o, p.w_o);
    cmp(st.w, p.w);
    return diff;
}

double max_state_diff(const ModelState& a, const ModelState& b) {
    double diff = 0.0;
    const Matrix* ma[5] = {&a.w_v, &a.w_q, &a.w_k, &a.w_o, &a.w};
    const Matrix* mb[5] = {&b.w_v, &b.w_q, &b.w_k, &b.w_o, &b.w};
    for (int i = 0; i < 5; ++i)
        for (std::size_t j = 0; j < ma[i]->size(); ++j)
            diff = std::max(diff, std::abs(ma[i]->data()[j] - mb[i]->data()[j]));
    return diff;
}

}  // namespace

TEST_CASE("dograph step with one cluster equals the vanilla mean-gradient step") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.batch = 8;
    cfg.clusters = 1;
    cfg.proj_dim = 6;
    cfg.lr = 0.05;

    const SeededRng master(41);
    SeededRng init_a = master.child(0);
    SeededRng init_b = master.child(0);
    ModelState dograph_state = init_state(model_cfg, init_a, 1.0);
    ModelState uniform_state = init_state(model_cfg, init_b, 1.0);

    for (std::size_t t = 1; t <= 20; ++t) {
        SeededRng batch_rng = master.child(1).child(t);
        const std::vector<Sample> batch =
            sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);
        dograph_step(model_cfg, dograph_state, batch, cfg, master.child(2).child(t), cfg.lr);
        uniform_step(model_cfg, uniform_state, batch, cfg, cfg.lr);
        REQUIRE(max_state_diff(dograph_state, uniform_state) <= 1e-10);
    }
}

TEST_CASE("two dograph steps match an independent finite-difference oracle") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.batch = 4;
    cfg.clusters = 1;
    cfg.proj_dim = 8;
    cfg.lr = 0.05;
    cfg.grad_clip = 1.0;
    cfg.weight_decay = 0.01;

    const SeededRng master(97);
    SeededRng init_rng = master.child(0);
    ModelState state = init_state(model_cfg, init_rng, 1.0);
    OracleParams oracle_params = snapshot_params(state);

    for (std::size_t t = 1; t <= 2; ++t) {
        SeededRng batch_rng = master.child(1).child(t);
        const std::vector<Sample> batch =
            sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);

        dograph_step(model_cfg, state, batch, cfg, master.child(2).child(t), cfg.lr);

        std::vector<double> mean_grad;
        for (const Sample& s : batch) {
            const std::vector<double> g =
                oracle_fd_gradient(oracle_params, s, model_cfg.attn_temperature);
            if (mean_grad.empty()) mean_grad.assign(g.size(), 0.0);
            for (std::size_t i = 0; i < g.size(); ++i) mean_grad[i] += g[i];
        }
        for (double& x : mean_grad) x /= static_cast<double>(batch.size());
        oracle_apply_update(oracle_params, mean_grad, cfg.lr, cfg.grad_clip, cfg.weight_decay);

        REQUIRE(max_param_diff(state, oracle_params) <= 1e-10);
    }
}

TEST_CASE("uniform cluster weights with equal sizes reproduce the batch mean") {
    SeededRng rng(5);
    const std::size_t dim = 30, m = 3, per = 4;
    std::vector<std::vector<double>> full_means(m, std::vector<double>(dim, 0.0));
    std::vector<double> batch_mean(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < per; ++i) {
            std::vector<double> g(dim);
            for (double& x : g) x = rng.next_gaussian();
            for (std::size_t dmm = 0; dmm < dim; ++dmm) {
                full_means[j][dmm] += g[dmm] / static_cast<double>(per);
                batch_mean[dmm] += g[dmm] / static_cast<double>(m * per);
            }
        }
    }
    for (std::size_t dmm = 0; dmm < dim; ++dmm) {
        double weighted = 0.0;
        for (std::size_t j = 0; j < m; ++j) weighted += full_means[j][dmm] / static_cast<double>(m);
        REQUIRE(weighted == Catch::Approx(batch_mean[dmm]).margin(1e-10));
    }
}

TEST_CASE("dograph update lies in the convex hull of the cluster means") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.batch = 12;
    cfg.clusters = 3;
    cfg.proj_dim = 8;
    cfg.lr = 0.05;

    const SeededRng master(43);
    SeededRng init_rng = master.child(0);
    ModelState state = init_state(model_cfg, init_rng, 1.0);
    const ModelState before = state;
    SeededRng batch_rng = master.child(1).child(1);
    const std::vector<Sample> batch = sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);
    const StepInfo info = dograph_step(model_cfg, state, batch, cfg, master.child(2).child(1),
                                       cfg.lr);
    REQUIRE(info.partition.has_value());

    // The pre-clip update is sum_j w_j full_means[j]; solve the simplex
    // least-squares membership problem and check the residual.
    const auto& means = info.partition->full_means;
    const std::size_t dim = means.front().size();
    std::vector<double> u(dim, 0.0);
    for (std::size_t j = 0; j < means.size(); ++j)
        for (std::size_t i = 0; i < dim; ++i) u[i] += info.weights[j] * means[j][i];

    // projected gradient descent on || F a - u ||^2 over the simplex
    const std::size_t m = means.size();
    Matrix gram(m, m);
    std::vector<double> cross(m, 0.0);
    for (std::size_t i = 0; i < m; ++i) {
        cross[i] = dot(means[i], u);
        for (std::size_t j = 0; j < m; ++j) gram(i, j) = dot(means[i], means[j]);
    }
    std::vector<double> alpha(m, 1.0 / static_cast<double>(m));
    double lip = 0.0;
    for (std::size_t i = 0; i < m; ++i) lip += gram(i, i);
    const double step = 1.0 / (2.0 * std::max(lip, 1e-12));
    for (int it = 0; it < 20000; ++it) {
        std::vector<double> g(m, 0.0);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) g[i] += 2.0 * gram(i, j) * alpha[j];
            g[i] -= 2.0 * cross[i];
        }
        std::vector<double> next(m);
        for (std::size_t i = 0; i < m; ++i) next[i] = alpha[i] - step * g[i];
        alpha = project_to_simplex(next).w;
    }
    std::vector<double> reconstructed(dim, 0.0);
    for (std::size_t j = 0; j < m; ++j)
        for (std::size_t i = 0; i < dim; ++i) reconstructed[i] += alpha[j] * means[j][i];
    REQUIRE(std::sqrt(squared_distance(reconstructed, u)) <= 1e-8);

    // and the parameter movement is exactly the decayed step along clip(u)
    std::vector<double> u_clipped = u;
    double nrm = std::sqrt(dot(u_clipped, u_clipped));
    if (nrm > cfg.grad_clip)
        for (double& x : u_clipped) x *= cfg.grad_clip / nrm;
    const BlockLayout layout(model_cfg);
    const Matrix* mb[5] = {&before.w_v, &before.w_q, &before.w_k, &before.w_o, &before.w};
    const Matrix* ma[5] = {&state.w_v, &state.w_q, &state.w_k, &state.w_o, &state.w};
    for (std::size_t b = 0; b < 5; ++b)
        for (std::size_t i = 0; i < ma[b]->size(); ++i) {
            const double want = (1.0 - cfg.lr * cfg.weight_decay) * mb[b]->data()[i] -
                                cfg.lr * u_clipped[layout.offset[b] + i];
            REQUIRE(ma[b]->data()[i] == Catch::Approx(want).margin(1e-12));
        }
}

TEST_CASE("gradient clipping bounds the applied update norm") {
    const ModelConfig model_cfg = tiny_model(6);
    SeededRng rng(44);
    ModelState state = init_state(model_cfg, rng, 1.0);
    const ModelState before = state;
    const BlockLayout layout(model_cfg);
    std::vector<double> update(layout.total);
    for (double& x : update) x = 10.0 * rng.next_gaussian();

    const double lr = 0.1, clip = 0.5, wd = 0.0;
    apply_update(model_cfg, state, update, lr, clip, wd);
    double moved = 0.0;
    const Matrix* mb[5] = {&before.w_v, &before.w_q, &before.w_k, &before.w_o, &before.w};
    const Matrix* ma[5] = {&state.w_v, &state.w_q, &state.w_k, &state.w_o, &state.w};
    for (int b = 0; b < 5; ++b)
        for (std::size_t i = 0; i < ma[b]->size(); ++i) {
            const double d = ma[b]->data()[i] - mb[b]->data()[i];
            moved += d * d;
        }
    REQUIRE(std::sqrt(moved) <= clip * lr + 1e-12);
}

TEST_CASE("uniform policy ignores human domain tags") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.batch = 6;
    cfg.clusters = 2;
    cfg.lr = 0.05;

    SeededRng master(45);
    SeededRng init_a = master.child(0), init_b = master.child(0);
    ModelState a = init_state(model_cfg, init_a, 1.0);
    ModelState b = init_state(model_cfg, init_b, 1.0);
    SeededRng batch_rng = master.child(1).child(1);
    std::vector<Sample> batch = sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);
    std::vector<Sample> relabeled = batch;
    for (Sample& s : relabeled) s.human_domain = 1 - s.human_domain;

    uniform_step(model_cfg, a, batch, cfg, cfg.lr);
    uniform_step(model_cfg, b, relabeled, cfg, cfg.lr);
    REQUIRE(max_state_diff(a, b) == 0.0);
}

TEST_CASE("loss-based proportions track observed losses and stay normalized") {
    LossBasedState lb(3);
    // untouched estimates are equal, so proportions start uniform
    for (double p : lb.proportions()) REQUIRE(p == Catch::Approx(1.0 / 3.0).margin(1e-15));

    std::vector<Sample> batch(4);
    batch[0].human_domain = 0;
    batch[1].human_domain = 0;
    batch[2].human_domain = 2;
    batch[3].human_domain = 2;
    lb.observe(batch, {2.0, 4.0, 1.0, 1.0});
    const std::vector<double> p = lb.proportions();
    double sum = 0.0;
    for (double x : p) sum += x;
    REQUIRE(sum == Catch::Approx(1.0).margin(1e-12));
    REQUIRE(p[0] == Catch::Approx(3.0 / 5.0).margin(1e-12));  // losses 3, 1, 1
    REQUIRE(p[1] == Catch::Approx(1.0 / 5.0).margin(1e-12));
    REQUIRE(p[2] == Catch::Approx(1.0 / 5.0).margin(1e-12));
}

TEST_CASE("zero last layer gives perplexity exactly |V| on every domain") {
    const MixtureSpec mix = tiny_mixture();
    ModelConfig model_cfg = tiny_model(mix.vocab_size());
    SeededRng rng(46);
    ModelState st = init_state(model_cfg, rng, 1.0);
    st.w = Matrix(model_cfg.hidden_dim, model_cfg.vocab_size, 0.0);
    const std::vector<double> ppl =
        evaluate_perplexity(model_cfg, st, mix, 8, SeededRng(47));
    for (double p : ppl) REQUIRE(p == Catch::Approx(6.0).margin(1e-10));
}

TEST_CASE("perplexity is at least one") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    SeededRng rng(48);
    const ModelState st = init_state(model_cfg, rng, 1.0);
    for (double p : evaluate_perplexity(model_cfg, st, mix, 16, SeededRng(49)))
        REQUIRE(p >= 1.0);
}

TEST_CASE("training on a deterministic chain drives perplexity toward one") {
    // single deterministic domain; the model can memorize the bigram map
    ScenarioFile sf;
    sf.name = "det";
    sf.vocab_size = 8;
    sf.domains = {{"cycle", "banded", 50, 0, 7, 0, 0, 0.5, 0.5}};
    sf.proportions = {1.0};
    MixtureSpec mix = build_mixture(sf);
    // overwrite with an exact cyclic-shift chain
    for (std::size_t i = 0; i < 8; ++i) {
        for (std::size_t j = 0; j < 8; ++j) mix.domains[0].transition(i, j) = 0.0;
        mix.domains[0].transition(i, (i + 1) % 8) = 1.0;
    }
    mix.domains[0].initial.assign(8, 1.0 / 8.0);
    mix.validate();

    ModelConfig model_cfg;
    model_cfg.vocab_size = 8;
    model_cfg.seq_len = 8;
    model_cfg.embed_dim = 16;
    model_cfg.qk_dim = 8;
    model_cfg.v_dim = 16;
    model_cfg.hidden_dim = 16;

    TrainConfig cfg;
    cfg.batch = 16;
    cfg.lr = 0.8;
    cfg.grad_clip = 5.0;
    cfg.weight_decay = 0.0;
    cfg.policy = Policy::uniform;

    SeededRng master(51);
    SeededRng init_rng = master.child(0);
    ModelState state = init_state(model_cfg, init_rng, 1.0);
    const double ppl0 = evaluate_perplexity(model_cfg, state, mix, 8, master.child(4))[0];
    for (std::size_t t = 1; t <= 600; ++t) {
        SeededRng brng = master.child(1).child(t);
        const std::vector<Sample> batch =
            sample_batch(mix, cfg.batch, model_cfg.seq_len, brng);
        uniform_step(model_cfg, state, batch, cfg, cfg.lr);
    }
    const double ppl = evaluate_perplexity(model_cfg, state, mix, 8, master.child(4))[0];
    REQUIRE(ppl < ppl0);
    REQUIRE(ppl < 1.5);
}

TEST_CASE("learning rate schedules") {
    TrainConfig cfg;
    cfg.lr = 1.0;
    cfg.steps = 1000;
    REQUIRE(learning_rate_at(cfg, 1) == 1.0);
    REQUIRE(learning_rate_at(cfg, 999) == 1.0);
    cfg.schedule = LrSchedule::warmup_cosine;
    cfg.warmup_steps = 500;
    cfg.lr_end = 0.1;
    REQUIRE(learning_rate_at(cfg, 250) == Catch::Approx(0.5));
    REQUIRE(learning_rate_at(cfg, 500) == Catch::Approx(1.0));
    REQUIRE(learning_rate_at(cfg, 1000) == Catch::Approx(0.1).margin(1e-12));
    REQUIRE(learning_rate_at(cfg, 750) == Catch::Approx(0.55).margin(1e-12));
}

TEST_CASE("run_experiment smoke run writes one record per step and all artifacts") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.steps = 5;
    cfg.batch = 8;
    cfg.clusters = 2;
    cfg.proj_dim = 8;
    cfg.eval_every = 2;
    cfg.eval_samples_per_domain = 4;
    cfg.lr = 0.05;
    cfg.seed = 52;

    const fs::path dir = fresh_dir("dograph_test_smoke");
    const RunResult res = run_experiment(model_cfg, cfg, mix, dir);
    REQUIRE(!res.aborted);
    REQUIRE(res.records.size() == 5);
    REQUIRE(fs::exists(dir / "metrics.jsonl"));
    REQUIRE(fs::exists(dir / "weights.jsonl"));
    REQUIRE(fs::exists(dir / "summary.csv"));
    REQUIRE(fs::exists(dir / "checkpoints" / "final.bin"));
    REQUIRE(fs::exists(dir / "snapshots" / "epoch_0000.bin"));
    REQUIRE(fs::exists(dir / "partitions" / "epoch_0002.csv"));

    std::ifstream is(dir / "metrics.jsonl");
    std::size_t lines = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++lines;
    REQUIRE(lines == 5);

    // evaluated steps: 2, 4, 5 (final)
    REQUIRE(res.records[1].evaluated);
    REQUIRE(res.records[3].evaluated);
    REQUIRE(res.records[4].evaluated);
    REQUIRE(!res.records[0].evaluated);
    for (const auto& rec : res.records)
        if (rec.evaluated)
            for (double p : rec.per_domain_ppl) REQUIRE(p >= 1.0);
    fs::remove_all(dir);
}

TEST_CASE("identical configs reproduce metrics byte for byte") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.steps = 6;
    cfg.batch = 8;
    cfg.clusters = 2;
    cfg.proj_dim = 8;
    cfg.eval_every = 3;
    cfg.eval_samples_per_domain = 4;
    cfg.lr = 0.05;
    cfg.seed = 53;

    const fs::path d1 = fresh_dir("dograph_test_det1");
    const fs::path d2 = fresh_dir("dograph_test_det2");
    run_experiment(model_cfg, cfg, mix, d1);
    run_experiment(model_cfg, cfg, mix, d2);
    for (const char* f : {"metrics.jsonl", "weights.jsonl", "summary.csv"})
        REQUIRE(io::read_text_file(d1 / f) == io::read_text_file(d2 / f));
    fs::remove_all(d1);
    fs::remove_all(d2);
}

TEST_CASE("diverging runs abort and keep the last good checkpoint") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.steps = 50;
    cfg.batch = 4;
    cfg.clusters = 1;
    cfg.proj_dim = 4;
    cfg.lr = 1e12;  // guaranteed blow-up
    cfg.grad_clip = 1.0;
    cfg.seed = 54;
    cfg.save_snapshots = false;

    const fs::path dir = fresh_dir("dograph_test_abort");
    const RunResult res = run_experiment(model_cfg, cfg, mix, dir);
    REQUIRE(res.aborted);
    REQUIRE(!res.abort_reason.empty());
    REQUIRE(fs::exists(dir / "checkpoints" / "last_good.bin"));
    const auto [cfg2, st2] = load_model(dir / "checkpoints" / "last_good.bin");
    st2.validate(cfg2);  // finite
    fs::remove_all(dir);
}

TEST_CASE("figure-1 export reproduces snapshot geometry") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.steps = 4;
    cfg.batch = 8;
    cfg.clusters = 2;
    cfg.proj_dim = 8;
    cfg.eval_every = 2;
    cfg.eval_samples_per_domain = 4;
    cfg.lr = 0.05;
    cfg.seed = 55;

    const fs::path dir = fresh_dir("dograph_test_fig1");
    run_experiment(model_cfg, cfg, mix, dir);
    const auto files = export_figure1_data(dir);
    REQUIRE(files.size() >= 2);
    for (const auto& f : files) {
        std::ifstream is(f);
        std::string line;
        std::getline(is, line);
        REQUIRE(line == "sample,human_domain,pc1,pc2");
        std::size_t rows = 0;
        double mean1 = 0.0, mean2 = 0.0;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            ++rows;
            const auto c1 = line.find(',');
            const auto c2 = line.find(',', c1 + 1);
            const auto c3 = line.find(',', c2 + 1);
            mean1 += std::stod(line.substr(c2 + 1, c3 - c2 - 1));
            mean2 += std::stod(line.substr(c3 + 1));
        }
        REQUIRE(rows == 8);  // diagnostic batch size (batch clamped per domain)
        REQUIRE(std::abs(mean1 / rows) <= 1e-9);
        REQUIRE(std::abs(mean2 / rows) <= 1e-9);
    }
    fs::remove_all(dir);
}

TEST_CASE("figure-1 export requires at least two snapshots") {
    const fs::path dir = fresh_dir("dograph_test_fig1_missing");
    REQUIRE_THROWS_WITH(export_figure1_data(dir),
                        Catch::Matchers::ContainsSubstring("snapshots"));
    fs::remove_all(dir);
}

TEST_CASE("dograph rejects batches smaller than the cluster count") {
    const MixtureSpec mix = tiny_mixture();
    const ModelConfig model_cfg = tiny_model(mix.vocab_size());
    TrainConfig cfg;
    cfg.clusters = 4;
    SeededRng rng(56);
    SeededRng init_rng = rng.child(0);
    ModelState state = init_state(model_cfg, init_rng, 1.0);
    SeededRng brng = rng.child(1);
    const std::vector<Sample> batch = sample_batch(mix, 3, model_cfg.seq_len, brng);
    REQUIRE_THROWS_AS(dograph_step(model_cfg, state, batch, cfg, rng.child(2), 0.1),
                      std::invalid_argument);
}
