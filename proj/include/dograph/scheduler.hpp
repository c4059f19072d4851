#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "dograph/domains.hpp"
#include "dograph/geometry.hpp"
#include "dograph/io.hpp"
#include "dograph/model.hpp"
#include "dograph/partition.hpp"
#include "dograph/weights.hpp"

namespace dograph {

enum class Policy { dograph, uniform, loss_based };

inline const char* policy_name(Policy p) {
    switch (p) {
        case Policy::dograph: return "dograph";
        case Policy::uniform: return "uniform";
        case Policy::loss_based: return "loss_based";
    }
    return "?";
}

inline Policy policy_from_name(const std::string& name) {
    if (name == "dograph") return Policy::dograph;
    if (name == "uniform") return Policy::uniform;
    if (name == "loss_based") return Policy::loss_based;
    throw std::invalid_argument("unknown policy: " + name);
}

enum class LrSchedule { constant, warmup_cosine };

inline const char* lr_schedule_name(LrSchedule s) {
    return s == LrSchedule::constant ? "constant" : "warmup_cosine";
}

inline LrSchedule lr_schedule_from_name(const std::string& name) {
    if (name == "constant") return LrSchedule::constant;
    if (name == "warmup_cosine") return LrSchedule::warmup_cosine;
    throw std::invalid_argument("unknown lr schedule: " + name);
}

struct TrainConfig {
    std::size_t steps = 2000;   // one optimizer step over one mini-batch
    std::size_t batch = 64;
    double lr = 0.1;
    LrSchedule schedule = LrSchedule::constant;
    std::size_t warmup_steps = 500;
    double lr_end = 1e-4;
    double grad_clip = 1.0;
    double weight_decay = 0.01;
    std::size_t proj_dim = 512;
    std::size_t clusters = 11;
    ObjectiveConfig objective;
    Policy policy = Policy::dograph;
    std::uint64_t seed = 1;
    std::size_t eval_every = 100;
    std::size_t eval_samples_per_domain = 32;
    double init_scale = 1.0;
    GradBlock cluster_block = GradBlock::Flat;  // gradient view used for clustering
    bool freeze_projector = false;       // keep one projection matrix for the whole run
    bool weights_on_full_means = false;  // optimize over full-dimension cluster means
    bool size_weighted_update = false;   // reweight w_j by cluster size before updating
    bool save_snapshots = true;

    void validate() const {
        if (steps < 1) throw std::invalid_argument("TrainConfig: steps must be >= 1");
        if (batch < 1) throw std::invalid_argument("TrainConfig: batch must be >= 1");
        if (!(lr > 0.0)) throw std::invalid_argument("TrainConfig: lr must be positive");
        if (!(grad_clip > 0.0)) throw std::invalid_argument("TrainConfig: grad_clip must be positive");
        if (weight_decay < 0.0) throw std::invalid_argument("TrainConfig: weight_decay must be >= 0");
        if (clusters < 1) throw std::invalid_argument("TrainConfig: clusters must be >= 1");
        if (clusters > batch)
            throw std::invalid_argument("TrainConfig: clusters must not exceed batch size");
        if (eval_every < 1) throw std::invalid_argument("TrainConfig: eval_every must be >= 1");
        if (eval_samples_per_domain < 1)
            throw std::invalid_argument("TrainConfig: eval_samples_per_domain must be >= 1");
        if (!(init_scale > 0.0)) throw std::invalid_argument("TrainConfig: init_scale must be positive");
        objective.validate();
    }
};

inline double learning_rate_at(const TrainConfig& cfg, std::size_t step) {
    if (cfg.schedule == LrSchedule::constant) return cfg.lr;
    const double t = static_cast<double>(step);
    const double warm = static_cast<double>(std::max<std::size_t>(cfg.warmup_steps, 1));
    if (t <= warm) return cfg.lr * t / warm;
    const double total = static_cast<double>(std::max(cfg.steps, cfg.warmup_steps + 1));
    const double frac = (t - warm) / (total - warm);
    return cfg.lr_end + (cfg.lr - cfg.lr_end) * 0.5 * (1.0 + std::cos(frac * 3.14159265358979323846));
}

struct EpochRecord {
    std::size_t epoch = 0;
    std::string policy;
    std::string objective;
    std::vector<double> weights;  // cluster weights (dograph) or sampling proportions
    std::string solver_status;
    double objective_value = 0.0;
    double train_loss = 0.0;
    bool evaluated = false;
    std::vector<double> per_domain_ppl;
    double worst_ppl = 0.0;
    double mean_ppl = 0.0;
    double silhouette = 0.0;
    bool has_silhouette = false;
    double wall_time_s = 0.0;  // logged to timing.log, never to metrics.jsonl

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["epoch"] = epoch;
        j["policy"] = policy;
        j["objective"] = objective;
        j["objective_value"] = objective_value;
        j["solver_status"] = solver_status;
        j["train_loss"] = train_loss;
        j["weights"] = weights;
        if (evaluated) {
            j["ppl"] = per_domain_ppl;
            j["worst_ppl"] = worst_ppl;
            j["mean_ppl"] = mean_ppl;
            if (has_silhouette) j["silhouette"] = silhouette;
        }
        return j;
    }
};

// ---- shared step machinery ----

struct GradientBatch {
    std::vector<GradientRecord> records;
    std::vector<double> losses;
    double mean_loss = 0.0;
};

inline GradientBatch extract_gradients(const ModelConfig& cfg, const ModelState& state,
                                       const std::vector<Sample>& batch) {
    GradientBatch out;
    out.records.reserve(batch.size());
    out.losses.reserve(batch.size());
    double loss = 0.0;
    for (const Sample& s : batch) {
        const ForwardTrace tr = forward(cfg, state, s);
        loss += tr.loss;
        out.losses.push_back(tr.loss);
        out.records.push_back(per_sample_gradients(cfg, state, tr, s));
    }
    out.mean_loss = loss / static_cast<double>(batch.size());
    return out;
}

inline std::vector<double> mean_flat_gradient(const std::vector<GradientRecord>& records) {
    const std::size_t dim = records.front().view(GradBlock::Flat).size();
    std::vector<double> mean(dim, 0.0);
    for (const auto& rec : records) {
        const auto v = rec.view(GradBlock::Flat);
        for (std::size_t i = 0; i < dim; ++i) mean[i] += v[i];
    }
    for (double& x : mean) x /= static_cast<double>(records.size());
    return mean;
}

// theta <- (1 - lr * weight_decay) * theta - lr * clip(update). The gradient
// part of the applied step is bounded in norm by lr * grad_clip; the frozen
// embedding is untouched.
inline void apply_update(const ModelConfig& cfg, ModelState& state, std::vector<double> update,
                         double lr, double grad_clip, double weight_decay) {
    const BlockLayout layout(cfg);
    if (update.size() != layout.total)
        throw std::invalid_argument("apply_update: update length mismatch");
    double nrm = 0.0;
    for (double x : update) nrm += x * x;
    nrm = std::sqrt(nrm);
    if (nrm > grad_clip) {
        const double s = grad_clip / nrm;
        for (double& x : update) x *= s;
    }
    Matrix* blocks[5] = {&state.w_v, &state.w_q, &state.w_k, &state.w_o, &state.w};
    const double decay = 1.0 - lr * weight_decay;
    for (std::size_t b = 0; b < 5; ++b) {
        double* dst = blocks[b]->data().data();
        const double* src = update.data() + layout.offset[b];
        for (std::size_t i = 0; i < layout.count[b]; ++i) dst[i] = decay * dst[i] - lr * src[i];
        require_finite(*blocks[b], "updated parameter block");
    }
}

struct StepInfo {
    double train_loss = 0.0;
    std::vector<double> weights;
    std::string solver_status = "n/a";
    double objective_value = 0.0;
    // dograph only; exposed for diagnostics and the partition export
    std::optional<DomainPartition> partition;
    std::vector<std::vector<double>> projected;
    std::vector<int> batch_labels;
};

// One DoGraph step: extract per-sample gradients, sample a fresh projector
// (unless frozen_proj_seed pins it), cluster in projected space, optimize the
// cluster weights, and update the parameters with the weighted sum of the
// full-dimension cluster mean gradients.
inline StepInfo dograph_step(const ModelConfig& model_cfg, ModelState& state,
                             const std::vector<Sample>& batch, const TrainConfig& cfg,
                             SeededRng step_rng, double lr,
                             std::optional<std::uint64_t> frozen_proj_seed = std::nullopt) {
    if (batch.size() < cfg.clusters)
        throw std::invalid_argument("dograph_step: batch smaller than cluster count");

    StepInfo info;
    GradientBatch grads = extract_gradients(model_cfg, state, batch);
    info.train_loss = grads.mean_loss;

    const BlockLayout layout(model_cfg);
    ProjectionConfig pc;
    pc.input_dim = grads.records.front().view(cfg.cluster_block).size();
    pc.target_dim = cfg.proj_dim;
    pc.seed = frozen_proj_seed ? *frozen_proj_seed : step_rng.child(1).seed();
    const Projector projector = Projector::create(pc);

    SeededRng km_rng = step_rng.child(2);
    DomainPartition part = build_partition(grads.records, projector, cfg.clusters, km_rng, 100,
                                           1e-10, false, cfg.cluster_block);

    const SolverResult sol = optimize_weights(part, cfg.objective, cfg.weights_on_full_means);
    info.weights = sol.weights.w;
    info.solver_status = solver_status_name(sol.status);
    info.objective_value = sol.objective;

    std::vector<double> effective = sol.weights.w;
    if (cfg.size_weighted_update) {
        double total = 0.0;
        for (std::size_t j = 0; j < effective.size(); ++j) {
            effective[j] *= static_cast<double>(part.sizes[j]);
            total += effective[j];
        }
        if (total > 0.0)
            for (double& x : effective) x /= total;
    }

    std::vector<double> update(layout.total, 0.0);
    for (std::size_t j = 0; j < part.cluster_count(); ++j) {
        if (part.sizes[j] == 0) continue;
        const double wj = effective[j];
        for (std::size_t i = 0; i < layout.total; ++i) update[i] += wj * part.full_means[j][i];
    }
    apply_update(model_cfg, state, std::move(update), lr, cfg.grad_clip, cfg.weight_decay);

    info.projected.reserve(grads.records.size());
    for (const auto& rec : grads.records) {
        info.projected.push_back(projector.project(rec.view(cfg.cluster_block)));
        info.batch_labels.push_back(rec.human_domain);
    }
    info.partition = std::move(part);
    return info;
}

// Plain mean-gradient SGD step shared by the uniform and loss-based policies.
inline StepInfo uniform_step(const ModelConfig& model_cfg, ModelState& state,
                             const std::vector<Sample>& batch, const TrainConfig& cfg,
                             double lr) {
    StepInfo info;
    GradientBatch grads = extract_gradients(model_cfg, state, batch);
    info.train_loss = grads.mean_loss;
    apply_update(model_cfg, state, mean_flat_gradient(grads.records), lr, cfg.grad_clip,
                 cfg.weight_decay);
    return info;
}

// Loss-based baseline: the next batch is drawn with per-domain proportions
// proportional to the current mean domain loss.
struct LossBasedState {
    std::vector<double> domain_loss;  // running estimate, refreshed when observed

    explicit LossBasedState(std::size_t domains) : domain_loss(domains, 1.0) {}

    std::vector<double> proportions() const {
        double total = 0.0;
        for (double l : domain_loss) total += l;
        std::vector<double> p = domain_loss;
        for (double& x : p) x /= total;
        return p;
    }

    void observe(const std::vector<Sample>& batch, const std::vector<double>& losses) {
        std::vector<double> sum(domain_loss.size(), 0.0);
        std::vector<std::size_t> count(domain_loss.size(), 0);
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto d = static_cast<std::size_t>(batch[i].human_domain);
            sum[d] += losses[i];
            ++count[d];
        }
        for (std::size_t d = 0; d < domain_loss.size(); ++d)
            if (count[d] > 0) domain_loss[d] = sum[d] / static_cast<double>(count[d]);
    }
};

inline StepInfo loss_based_step(const ModelConfig& model_cfg, ModelState& state,
                                const MixtureSpec& mix, LossBasedState& lb,
                                const TrainConfig& cfg, SeededRng batch_rng, double lr) {
    MixtureSpec reweighted = mix;
    reweighted.proportions = lb.proportions();
    const std::vector<Sample> batch =
        sample_batch(reweighted, cfg.batch, model_cfg.seq_len, batch_rng);

    StepInfo info;
    GradientBatch grads = extract_gradients(model_cfg, state, batch);
    info.train_loss = grads.mean_loss;
    info.weights = reweighted.proportions;
    apply_update(model_cfg, state, mean_flat_gradient(grads.records), lr, cfg.grad_clip,
                 cfg.weight_decay);
    lb.observe(batch, grads.losses);
    return info;
}

// Per-domain validation perplexity exp(mean cross-entropy) on held-out
// sequences drawn from an evaluation stream disjoint from training.
inline std::vector<double> evaluate_perplexity(const ModelConfig& model_cfg,
                                               const ModelState& state, const MixtureSpec& mix,
                                               std::size_t samples_per_domain, SeededRng eval_rng) {
    if (samples_per_domain < 1)
        throw std::invalid_argument("evaluate_perplexity: samples_per_domain must be >= 1");
    std::vector<double> ppl;
    ppl.reserve(mix.domains.size());
    for (std::size_t d = 0; d < mix.domains.size(); ++d) {
        SeededRng rng = eval_rng.child(d);
        double loss = 0.0;
        for (std::size_t s = 0; s < samples_per_domain; ++s) {
            const Sample sample = sample_sequence(mix.domains[d], model_cfg.seq_len, rng);
            loss += forward(model_cfg, state, sample).loss;
        }
        ppl.push_back(std::exp(loss / static_cast<double>(samples_per_domain)));
    }
    return ppl;
}

// ---- experiment orchestration ----

struct RunResult {
    std::vector<EpochRecord> records;
    bool aborted = false;
    std::string abort_reason;
    ModelState final_state;
};

namespace detail {

// Derived stream ids off the master seed; keep stable so runs replay.
enum RngStream : std::uint64_t {
    kInitStream = 0,
    kBatchStream = 1,
    kStepStream = 2,
    kEvalStream = 4,
    kDiagBatchStream = 5,
    kDiagProjStream = 6,
};

inline std::string epoch_file_tag(std::size_t epoch) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04zu", epoch);
    return buf;
}

// Equal-count per-domain diagnostic batch used for snapshots and the
// silhouette metric, fixed for the whole run.
inline std::vector<Sample> diagnostic_batch(const MixtureSpec& mix, std::size_t batch,
                                            std::size_t seq_len, SeededRng rng) {
    const std::size_t per = std::max<std::size_t>(1, batch / mix.domains.size());
    std::vector<Sample> out;
    for (std::size_t d = 0; d < mix.domains.size(); ++d) {
        SeededRng drng = rng.child(d);
        for (std::size_t i = 0; i < per; ++i)
            out.push_back(sample_sequence(mix.domains[d], seq_len, drng));
    }
    return out;
}

}  // namespace detail

inline RunResult run_experiment(const ModelConfig& model_cfg, const TrainConfig& cfg,
                                const MixtureSpec& mix, const std::filesystem::path& out_dir) {
    model_cfg.validate();
    cfg.validate();
    mix.validate();
    if (model_cfg.vocab_size != mix.vocab_size())
        throw std::invalid_argument("run_experiment: model vocab differs from scenario vocab");
    const BlockLayout layout(model_cfg);
    const std::size_t cluster_dim =
        cfg.cluster_block == GradBlock::Flat
            ? layout.total
            : layout.count[static_cast<std::size_t>(cfg.cluster_block)];
    if (cfg.policy == Policy::dograph && cfg.proj_dim > cluster_dim)
        throw std::invalid_argument("run_experiment: proj_dim " + std::to_string(cfg.proj_dim) +
                                    " exceeds the clustered gradient dimension " +
                                    std::to_string(cluster_dim));

    namespace fs = std::filesystem;
    fs::create_directories(out_dir);
    fs::create_directories(out_dir / "checkpoints");
    if (cfg.save_snapshots) fs::create_directories(out_dir / "snapshots");
    if (cfg.policy == Policy::dograph) fs::create_directories(out_dir / "partitions");

    std::ofstream metrics(out_dir / "metrics.jsonl", std::ios::binary);
    std::ofstream weights_log(out_dir / "weights.jsonl", std::ios::binary);
    std::ofstream timing(out_dir / "timing.log", std::ios::binary);
    if (!metrics || !weights_log || !timing)
        throw std::runtime_error("run_experiment: cannot open output files in " +
                                 out_dir.string());

    const SeededRng master(cfg.seed);
    SeededRng init_rng = master.child(detail::kInitStream);
    RunResult result;
    result.final_state = init_state(model_cfg, init_rng, cfg.init_scale);
    ModelState& state = result.final_state;

    const std::vector<Sample> diag_batch = cfg.save_snapshots
        ? detail::diagnostic_batch(mix, cfg.batch, model_cfg.seq_len,
                                   master.child(detail::kDiagBatchStream))
        : std::vector<Sample>{};

    ProjectionConfig diag_pc;
    diag_pc.input_dim = layout.total;
    diag_pc.target_dim = std::min(cfg.proj_dim, layout.total);
    diag_pc.seed = master.child(detail::kDiagProjStream).seed();
    const std::optional<Projector> diag_projector =
        cfg.save_snapshots ? std::optional<Projector>(Projector::create(diag_pc)) : std::nullopt;

    auto snapshot = [&](std::size_t epoch) -> double {
        if (!cfg.save_snapshots) return std::numeric_limits<double>::quiet_NaN();
        const GradientBatch grads = extract_gradients(model_cfg, state, diag_batch);
        std::vector<std::vector<double>> projected;
        std::vector<int> labels;
        projected.reserve(grads.records.size());
        for (const auto& rec : grads.records) {
            projected.push_back(diag_projector->project(rec.view(GradBlock::Flat)));
            labels.push_back(rec.human_domain);
        }
        const std::string tag = detail::epoch_file_tag(epoch);
        write_gradient_dump(out_dir / "snapshots" / ("epoch_" + tag + ".bin"), projected, "flat");
        std::ofstream lbl(out_dir / "snapshots" / ("epoch_" + tag + ".labels.csv"),
                          std::ios::binary);
        lbl << "sample_index,human_domain\n";
        for (std::size_t i = 0; i < labels.size(); ++i) lbl << i << "," << labels[i] << "\n";
        if (mix.domains.size() < 2) return std::numeric_limits<double>::quiet_NaN();
        return label_separation(projected, labels);
    };
    snapshot(0);

    const std::uint64_t frozen_proj_seed =
        master.child(detail::kStepStream).child(0).child(1).seed();
    LossBasedState lb(mix.domains.size());

    for (std::size_t t = 1; t <= cfg.steps; ++t) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr = learning_rate_at(cfg, t);
        SeededRng batch_rng = master.child(detail::kBatchStream).child(t);
        SeededRng step_rng = master.child(detail::kStepStream).child(t);

        EpochRecord rec;
        rec.epoch = t;
        rec.policy = policy_name(cfg.policy);

        StepInfo info;
        try {
            switch (cfg.policy) {
                case Policy::dograph: {
                    const std::vector<Sample> batch =
                        sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);
                    info = dograph_step(model_cfg, state, batch, cfg, step_rng, lr,
                                        cfg.freeze_projector
                                            ? std::optional<std::uint64_t>(frozen_proj_seed)
                                            : std::nullopt);
                    rec.objective = objective_name(cfg.objective.kind);
                    break;
                }
                case Policy::uniform: {
                    const std::vector<Sample> batch =
                        sample_batch(mix, cfg.batch, model_cfg.seq_len, batch_rng);
                    info = uniform_step(model_cfg, state, batch, cfg, lr);
                    info.weights = mix.proportions;
                    rec.objective = "uniform";
                    break;
                }
                case Policy::loss_based: {
                    info = loss_based_step(model_cfg, state, mix, lb, cfg, batch_rng, lr);
                    rec.objective = "loss_based";
                    break;
                }
            }
        } catch (const std::exception& e) {
            result.aborted = true;
            result.abort_reason = e.what();
        }
        if (!result.aborted && !std::isfinite(info.train_loss)) {
            result.aborted = true;
            result.abort_reason = "non-finite training loss at step " + std::to_string(t);
        }
        if (result.aborted) {
            save_model(out_dir / "checkpoints" / "last_good.bin", model_cfg, state);
            break;
        }

        rec.train_loss = info.train_loss;
        rec.weights = info.weights;
        rec.solver_status = info.solver_status;
        rec.objective_value = info.objective_value;

        const bool eval_now = (t % cfg.eval_every == 0) || t == cfg.steps;
        if (eval_now) {
            rec.evaluated = true;
            rec.per_domain_ppl = evaluate_perplexity(model_cfg, state, mix,
                                                     cfg.eval_samples_per_domain,
                                                     master.child(detail::kEvalStream));
            rec.worst_ppl = *std::max_element(rec.per_domain_ppl.begin(),
                                              rec.per_domain_ppl.end());
            double mean = 0.0;
            for (double p : rec.per_domain_ppl) mean += p;
            rec.mean_ppl = mean / static_cast<double>(rec.per_domain_ppl.size());
            const double sil = snapshot(t);
            if (std::isfinite(sil)) {
                rec.silhouette = sil;
                rec.has_silhouette = true;
            }
            if (cfg.policy == Policy::dograph && info.partition) {
                write_partition_csv(out_dir / "partitions" /
                                        ("epoch_" + detail::epoch_file_tag(t) + ".csv"),
                                    *info.partition, info.projected, info.batch_labels);
            }
        }

        rec.wall_time_s =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        metrics << rec.to_json().dump() << "\n";
        nlohmann::json wj;
        wj["epoch"] = rec.epoch;
        wj["kind"] = rec.objective;
        wj["objective_value"] = rec.objective_value;
        wj["solver_status"] = rec.solver_status;
        wj["w"] = rec.weights;
        weights_log << wj.dump() << "\n";
        timing << t << " " << rec.wall_time_s << "\n";
        result.records.push_back(std::move(rec));
    }

    if (!result.aborted) save_model(out_dir / "checkpoints" / "final.bin", model_cfg, state);

    // summary.csv: one row per evaluated step.
    std::ofstream summary(out_dir / "summary.csv", std::ios::binary);
    const std::size_t nd = mix.domains.size();
    summary << "epoch,train_loss,mean_ppl,worst_ppl,silhouette";
    for (std::size_t d = 0; d < nd; ++d) summary << ",ppl_domain_" << d;
    summary << "\n";
    for (const auto& rec : result.records) {
        if (!rec.evaluated) continue;
        summary << rec.epoch << "," << io::fmt_double(rec.train_loss) << ","
                << io::fmt_double(rec.mean_ppl) << "," << io::fmt_double(rec.worst_ppl) << ","
                << (rec.has_silhouette ? io::fmt_double(rec.silhouette) : "") ;
        for (double p : rec.per_domain_ppl) summary << "," << io::fmt_double(p);
        summary << "\n";
    }
    return result;
}

// Per-epoch PCA export of the stored projected-gradient snapshots.
inline std::vector<std::filesystem::path> export_figure1_data(
    const std::filesystem::path& run_dir) {
    namespace fs = std::filesystem;
    const fs::path snap_dir = run_dir / "snapshots";
    std::vector<fs::path> dumps;
    if (fs::exists(snap_dir))
        for (const auto& entry : fs::directory_iterator(snap_dir))
            if (entry.path().extension() == ".bin") dumps.push_back(entry.path());
    std::sort(dumps.begin(), dumps.end());
    if (dumps.size() < 2)
        throw std::runtime_error("export_figure1_data: need snapshots from at least 2 epochs in " +
                                 snap_dir.string());

    fs::create_directories(run_dir / "figure1");
    std::vector<fs::path> written;
    for (const auto& dump_path : dumps) {
        const GradientDump dump = read_gradient_dump(dump_path);
        fs::path labels_path = dump_path;
        labels_path.replace_extension();  // strip .bin
        labels_path += ".labels.csv";
        std::vector<int> labels(dump.vectors.size(), 0);
        {
            std::ifstream is(labels_path);
            if (!is)
                throw std::runtime_error("export_figure1_data: missing labels file " +
                                         labels_path.string());
            std::string line;
            std::getline(is, line);  // header
            std::size_t i = 0;
            while (std::getline(is, line) && i < labels.size()) {
                const auto comma = line.find(',');
                labels[i++] = std::stoi(line.substr(comma + 1));
            }
        }

        Matrix pts(dump.vectors.size(), dump.vectors.front().size());
        for (std::size_t i = 0; i < dump.vectors.size(); ++i)
            std::copy(dump.vectors[i].begin(), dump.vectors[i].end(), pts.row(i).begin());
        const Matrix pc = pca_2d(pts);

        fs::path out = run_dir / "figure1" / dump_path.filename();
        out.replace_extension(".csv");
        std::ofstream os(out, std::ios::binary);
        os << "sample,human_domain,pc1,pc2\n";
        for (std::size_t i = 0; i < dump.vectors.size(); ++i)
            os << i << "," << labels[i] << "," << io::fmt_double(pc(i, 0)) << ","
               << io::fmt_double(pc(i, 1)) << "\n";
        written.push_back(out);
    }
    return written;
}

}  // namespace dograph
