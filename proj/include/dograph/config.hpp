#pragma once

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "dograph/domains.hpp"
#include "dograph/model.hpp"
#include "dograph/scheduler.hpp"

namespace dograph {

// Merged run configuration: scenario recipe + model dims + training knobs.
// Serialized as key-value text (the config.snapshot written into every run
// directory); a snapshot replays the run exactly.
struct CliConfig {
    ScenarioFile scenario;
    ModelConfig model;
    TrainConfig train;

    MixtureSpec mixture() const {
        MixtureSpec mix = build_mixture(scenario);
        if (mix.vocab_size() != model.vocab_size)
            throw std::invalid_argument("config: model.vocab_size is derived from the scenario");
        return mix;
    }

    void validate() const {
        model.validate();
        train.validate();
        if (scenario.domains.empty())
            throw std::invalid_argument("config: scenario has no domains");
    }
};

constexpr int kConfigSchemaVersion = 1;

namespace detail {

inline std::uint64_t parse_u64_field(const std::string& key, const std::string& v) {
    try {
        return std::stoull(v);
    } catch (...) {
        throw std::invalid_argument("config field '" + key + "': expected integer, got '" + v + "'");
    }
}

inline double parse_double_field(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double d = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("");
        return d;
    } catch (...) {
        throw std::invalid_argument("config field '" + key + "': expected number, got '" + v + "'");
    }
}

inline bool parse_bool_field(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw std::invalid_argument("config field '" + key + "': expected true/false, got '" + v + "'");
}

}  // namespace detail

inline std::string config_to_text(const CliConfig& cfg) {
    std::ostringstream os;
    os << "schema_version = " << kConfigSchemaVersion << "\n";

    // Scenario block, embedded so the snapshot is self-contained.
    {
        std::istringstream sc(scenario_to_text(cfg.scenario));
        std::string line;
        while (std::getline(sc, line)) {
            if (line.rfind("schema_version", 0) == 0) continue;
            os << "scenario." << line << "\n";
        }
    }

    os << "model.seq_len = " << cfg.model.seq_len << "\n";
    os << "model.embed_dim = " << cfg.model.embed_dim << "\n";
    os << "model.qk_dim = " << cfg.model.qk_dim << "\n";
    os << "model.v_dim = " << cfg.model.v_dim << "\n";
    os << "model.hidden_dim = " << cfg.model.hidden_dim << "\n";
    os << "model.attn_temperature = " << io::fmt_double(cfg.model.attn_temperature) << "\n";

    const TrainConfig& t = cfg.train;
    os << "train.steps = " << t.steps << "\n";
    os << "train.batch = " << t.batch << "\n";
    os << "train.lr = " << io::fmt_double(t.lr) << "\n";
    os << "train.schedule = " << lr_schedule_name(t.schedule) << "\n";
    os << "train.warmup_steps = " << t.warmup_steps << "\n";
    os << "train.lr_end = " << io::fmt_double(t.lr_end) << "\n";
    os << "train.grad_clip = " << io::fmt_double(t.grad_clip) << "\n";
    os << "train.weight_decay = " << io::fmt_double(t.weight_decay) << "\n";
    os << "train.proj_dim = " << t.proj_dim << "\n";
    os << "train.clusters = " << t.clusters << "\n";
    os << "train.policy = " << policy_name(t.policy) << "\n";
    os << "train.seed = " << t.seed << "\n";
    os << "train.eval_every = " << t.eval_every << "\n";
    os << "train.eval_samples_per_domain = " << t.eval_samples_per_domain << "\n";
    os << "train.init_scale = " << io::fmt_double(t.init_scale) << "\n";
    os << "train.cluster_block = " << block_name(t.cluster_block) << "\n";
    os << "train.freeze_projector = " << (t.freeze_projector ? "true" : "false") << "\n";
    os << "train.weights_on_full_means = " << (t.weights_on_full_means ? "true" : "false") << "\n";
    os << "train.size_weighted_update = " << (t.size_weighted_update ? "true" : "false") << "\n";
    os << "train.save_snapshots = " << (t.save_snapshots ? "true" : "false") << "\n";

    const ObjectiveConfig& o = t.objective;
    os << "objective.kind = " << objective_name(o.kind) << "\n";
    os << "objective.lambda = " << io::fmt_double(o.lambda) << "\n";
    os << "objective.tau = " << io::fmt_double(o.tau) << "\n";
    os << "objective.beta = " << io::fmt_double(o.beta) << "\n";
    os << "objective.max_iters = " << o.max_iters << "\n";
    os << "objective.tol = " << io::fmt_double(o.tol) << "\n";
    os << "objective.cosine_floor = " << io::fmt_double(o.cosine_floor) << "\n";
    os << "objective.literal_variance = " << (o.literal_variance ? "true" : "false") << "\n";
    os << "objective.restarts = " << o.restarts << "\n";
    return os.str();
}

// Parse over defaults: absent keys keep their default value, unknown keys are
// rejected with a field-level message.
inline CliConfig config_from_text(const std::string& text) {
    auto kv = detail::parse_keyvals(text, "config");
    CliConfig cfg;

    auto take = [&](const std::string& key) -> std::string {
        auto it = kv.find(key);
        if (it == kv.end()) return {};
        std::string v = it->second;
        kv.erase(it);
        return v;
    };

    {
        const std::string sv = take("schema_version");
        if (!sv.empty() && std::stoi(sv) != kConfigSchemaVersion)
            throw std::invalid_argument("config: unsupported schema_version " + sv);
    }

    // Collect the scenario block and parse it with the scenario reader.
    {
        std::ostringstream sc;
        sc << "schema_version = 1\n";
        bool any = false;
        for (auto it = kv.begin(); it != kv.end();) {
            if (it->first.rfind("scenario.", 0) == 0) {
                sc << it->first.substr(9) << " = " << it->second << "\n";
                it = kv.erase(it);
                any = true;
            } else {
                ++it;
            }
        }
        if (any) cfg.scenario = scenario_from_text(sc.str());
    }
    cfg.model.vocab_size = cfg.scenario.vocab_size;

    using detail::parse_bool_field;
    using detail::parse_double_field;
    using detail::parse_u64_field;

    for (const auto& [key, v] : kv) {
        if (key == "model.seq_len") cfg.model.seq_len = parse_u64_field(key, v);
        else if (key == "model.embed_dim") cfg.model.embed_dim = parse_u64_field(key, v);
        else if (key == "model.qk_dim") cfg.model.qk_dim = parse_u64_field(key, v);
        else if (key == "model.v_dim") cfg.model.v_dim = parse_u64_field(key, v);
        else if (key == "model.hidden_dim") cfg.model.hidden_dim = parse_u64_field(key, v);
        else if (key == "model.attn_temperature") cfg.model.attn_temperature = parse_double_field(key, v);
        else if (key == "train.steps") cfg.train.steps = parse_u64_field(key, v);
        else if (key == "train.batch") cfg.train.batch = parse_u64_field(key, v);
        else if (key == "train.lr") cfg.train.lr = parse_double_field(key, v);
        else if (key == "train.schedule") cfg.train.schedule = lr_schedule_from_name(v);
        else if (key == "train.warmup_steps") cfg.train.warmup_steps = parse_u64_field(key, v);
        else if (key == "train.lr_end") cfg.train.lr_end = parse_double_field(key, v);
        else if (key == "train.grad_clip") cfg.train.grad_clip = parse_double_field(key, v);
        else if (key == "train.weight_decay") cfg.train.weight_decay = parse_double_field(key, v);
        else if (key == "train.proj_dim") cfg.train.proj_dim = parse_u64_field(key, v);
        else if (key == "train.clusters") cfg.train.clusters = parse_u64_field(key, v);
        else if (key == "train.policy") cfg.train.policy = policy_from_name(v);
        else if (key == "train.seed") cfg.train.seed = parse_u64_field(key, v);
        else if (key == "train.eval_every") cfg.train.eval_every = parse_u64_field(key, v);
        else if (key == "train.eval_samples_per_domain")
            cfg.train.eval_samples_per_domain = parse_u64_field(key, v);
        else if (key == "train.init_scale") cfg.train.init_scale = parse_double_field(key, v);
        else if (key == "train.cluster_block") cfg.train.cluster_block = block_from_name(v);
        else if (key == "train.freeze_projector") cfg.train.freeze_projector = parse_bool_field(key, v);
        else if (key == "train.weights_on_full_means")
            cfg.train.weights_on_full_means = parse_bool_field(key, v);
        else if (key == "train.size_weighted_update")
            cfg.train.size_weighted_update = parse_bool_field(key, v);
        else if (key == "train.save_snapshots") cfg.train.save_snapshots = parse_bool_field(key, v);
        else if (key == "objective.kind") cfg.train.objective.kind = objective_from_name(v);
        else if (key == "objective.lambda") cfg.train.objective.lambda = parse_double_field(key, v);
        else if (key == "objective.tau") cfg.train.objective.tau = parse_double_field(key, v);
        else if (key == "objective.beta") cfg.train.objective.beta = parse_double_field(key, v);
        else if (key == "objective.max_iters") cfg.train.objective.max_iters = parse_u64_field(key, v);
        else if (key == "objective.tol") cfg.train.objective.tol = parse_double_field(key, v);
        else if (key == "objective.cosine_floor")
            cfg.train.objective.cosine_floor = parse_double_field(key, v);
        else if (key == "objective.literal_variance")
            cfg.train.objective.literal_variance = parse_bool_field(key, v);
        else if (key == "objective.restarts") cfg.train.objective.restarts = parse_u64_field(key, v);
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

inline CliConfig load_config(const std::filesystem::path& path) {
    return config_from_text(io::read_text_file(path));
}

inline void save_config(const std::filesystem::path& path, const CliConfig& cfg) {
    io::write_text_file(path, config_to_text(cfg));
}

}  // namespace dograph
