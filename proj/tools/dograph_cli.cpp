// Command-line front end: train / verify / sweep-m / export.
//
// Exit codes: 0 success, 1 check or run failure, 2 usage or config error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dograph/dograph.hpp"

namespace fs = std::filesystem;
using namespace dograph;

namespace {

struct TrainArgs {
    std::string config_file;
    std::string scenario;
    std::string policy;
    std::string objective;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> steps, batch, clusters, proj_dim, eval_every;
    std::optional<double> lr;
    std::optional<std::string> schedule;
    bool no_snapshots = false;
    bool freeze_projector = false;
    bool force = false;
};

CliConfig resolve_config(const TrainArgs& a, bool validate = true) {
    CliConfig cfg;
    cfg.scenario = builtin_scenario_file("skewed-3");
    if (!a.config_file.empty()) cfg = load_config(a.config_file);
    if (!a.scenario.empty()) {
        bool builtin = false;
        for (const auto& sf : builtin_scenario_files())
            if (sf.name == a.scenario) {
                cfg.scenario = sf;
                builtin = true;
                break;
            }
        if (!builtin) {
            if (!fs::exists(a.scenario))
                throw std::invalid_argument("scenario '" + a.scenario +
                                            "' is neither a builtin name nor a file");
            cfg.scenario = load_scenario_file(a.scenario);
        }
    }
    cfg.model.vocab_size = cfg.scenario.vocab_size;
    if (!a.policy.empty()) cfg.train.policy = policy_from_name(a.policy);
    if (!a.objective.empty()) cfg.train.objective.kind = objective_from_name(a.objective);
    if (a.seed) cfg.train.seed = *a.seed;
    if (a.steps) cfg.train.steps = *a.steps;
    if (a.batch) cfg.train.batch = *a.batch;
    if (a.clusters) cfg.train.clusters = *a.clusters;
    if (a.proj_dim) cfg.train.proj_dim = *a.proj_dim;
    if (a.eval_every) cfg.train.eval_every = *a.eval_every;
    if (a.lr) cfg.train.lr = *a.lr;
    if (a.schedule) cfg.train.schedule = lr_schedule_from_name(*a.schedule);
    if (a.no_snapshots) cfg.train.save_snapshots = false;
    if (a.freeze_projector) cfg.train.freeze_projector = true;
    if (validate) cfg.validate();
    return cfg;
}

fs::path resolve_out_dir(const TrainArgs& a, const CliConfig& cfg) {
    if (!a.out_dir.empty()) return a.out_dir;
    const char* root_env = std::getenv("DOGRAPH_OUTPUT_ROOT");
    const fs::path root = root_env ? fs::path(root_env) : fs::path("runs");
    return root / (cfg.scenario.name + "_" + policy_name(cfg.train.policy) + "_seed" +
                   std::to_string(cfg.train.seed));
}

int run_train(const TrainArgs& args) {
    const CliConfig cfg = resolve_config(args);
    const fs::path out = resolve_out_dir(args, cfg);
    if (fs::exists(out / "metrics.jsonl") && !args.force)
        throw std::invalid_argument("run directory " + out.string() +
                                    " already holds a run (use --force to overwrite)");
    fs::create_directories(out);
    save_config(out / "config.snapshot", cfg);

    const RunResult res = run_experiment(cfg.model, cfg.train, cfg.mixture(), out);
    if (res.aborted) {
        std::cerr << "run aborted: " << res.abort_reason
                  << " (last good checkpoint saved)" << std::endl;
        return 1;
    }
    const EpochRecord& last = res.records.back();
    std::cout << "run complete: " << out.string() << "\n"
              << "  steps " << last.epoch << ", final train loss "
              << io::fmt_double(last.train_loss);
    if (last.evaluated)
        std::cout << ", worst-domain ppl " << io::fmt_double(last.worst_ppl) << ", mean ppl "
                  << io::fmt_double(last.mean_ppl);
    std::cout << std::endl;
    return 0;
}

struct VerifyArgs {
    std::uint64_t seed = 7;
    std::vector<std::string> blocks;
    bool json = false;
    std::size_t pairs = 20;
    std::size_t batch = 16;
    std::size_t fd_instances = 20;
    std::size_t jl_dim = 10000;
    std::size_t jl_target = 1000;
    std::size_t jl_vectors = 100;
    std::size_t jl_seeds = 5;
    double jl_epsilon = 0.3;
};

int run_verify(const VerifyArgs& a) {
    std::vector<GradBlock> blocks;
    if (a.blocks.empty()) {
        blocks.assign(kAllBlocks.begin(), kAllBlocks.end());
    } else {
        for (const auto& name : a.blocks) blocks.push_back(block_from_name(name));
    }

    const TheoremSuiteReport theorem = run_theorem_suite(a.seed, a.pairs, a.batch, blocks);
    const FdSuiteReport fd = run_fd_suite(a.seed + 1, a.fd_instances);
    const JlSuiteReport jl = run_jl_suite(a.seed + 2, a.jl_dim, a.jl_target, a.jl_vectors,
                                          a.jl_epsilon, a.jl_seeds);

    const bool theorem_ok = theorem.pass(1e-9);
    const bool fd_ok = fd.pass(1e-5, 1e-12);
    const bool jl_ok = jl.pass(0.99);

    if (a.json) {
        nlohmann::json j;
        j["seed"] = a.seed;
        for (const auto& e : theorem.entries) {
            nlohmann::json t;
            t["block"] = block_name(e.block);
            t["max_rel_discrepancy"] = e.max_rel_discrepancy;
            j["theorem"].push_back(t);
        }
        for (const auto& e : fd.entries) {
            nlohmann::json t;
            t["block"] = block_name(e.block);
            t["max_rel_error"] = e.max_rel_error;
            j["finite_difference"].push_back(t);
        }
        j["mismatch_max_error"] = fd.max_mismatch_error;
        for (const auto& s : jl.seeds) {
            nlohmann::json t;
            t["seed"] = s.seed;
            t["preserved_fraction"] = s.preserved_fraction;
            j["jl"].push_back(t);
        }
        j["pass"] = theorem_ok && fd_ok && jl_ok;
        std::cout << j.dump(2) << std::endl;
    } else {
        auto line = [](bool ok, const std::string& what, const std::string& detail) {
            std::cout << (ok ? "[PASS] " : "[FAIL] ") << what << "  " << detail << "\n";
        };
        for (const auto& e : theorem.entries)
            line(e.max_rel_discrepancy <= 1e-9,
                 std::string("kernel identity, block ") + block_name(e.block),
                 "max rel discrepancy " + io::fmt_double(e.max_rel_discrepancy));
        for (const auto& e : fd.entries)
            line(e.max_rel_error <= 1e-5,
                 std::string("finite differences, block ") + block_name(e.block),
                 "max rel error " + io::fmt_double(e.max_rel_error));
        line(fd.max_mismatch_error <= 1e-12, "mismatch tensor identity",
             "max abs error " + io::fmt_double(fd.max_mismatch_error));
        for (const auto& s : jl.seeds)
            line(s.preserved_fraction >= 0.99,
                 "distance preservation, seed " + std::to_string(s.seed),
                 "preserved fraction " + io::fmt_double(s.preserved_fraction));
        std::cout << (theorem_ok && fd_ok && jl_ok ? "all checks passed" : "CHECKS FAILED")
                  << std::endl;
    }
    return (theorem_ok && fd_ok && jl_ok) ? 0 : 1;
}

int run_sweep(const TrainArgs& base, const std::vector<std::size_t>& m_list) {
    if (m_list.empty()) throw std::invalid_argument("sweep-m: empty m list");
    CliConfig cfg = resolve_config(base, /*validate=*/false);
    const fs::path out = base.out_dir.empty() ? resolve_out_dir(base, cfg) : fs::path(base.out_dir);
    fs::create_directories(out);

    std::ofstream summary(out / "sweep_summary.csv", std::ios::binary);
    summary << "m,worst_ppl,mean_ppl,final_train_loss\n";
    for (std::size_t m : m_list) {
        CliConfig run_cfg = cfg;
        run_cfg.train.clusters = m;
        run_cfg.train.policy = Policy::dograph;
        run_cfg.validate();
        char tag[32];
        std::snprintf(tag, sizeof(tag), "m_%03zu", m);
        const fs::path run_dir = out / tag;
        fs::create_directories(run_dir);
        save_config(run_dir / "config.snapshot", run_cfg);
        const RunResult res = run_experiment(run_cfg.model, run_cfg.train, run_cfg.mixture(),
                                             run_dir);
        if (res.aborted) {
            std::cerr << "sweep run m=" << m << " aborted: " << res.abort_reason << std::endl;
            return 1;
        }
        const EpochRecord& last = res.records.back();
        summary << m << "," << io::fmt_double(last.worst_ppl) << ","
                << io::fmt_double(last.mean_ppl) << "," << io::fmt_double(last.train_loss)
                << "\n";
        std::cout << "m=" << m << "  worst ppl " << io::fmt_double(last.worst_ppl)
                  << "  mean ppl " << io::fmt_double(last.mean_ppl) << std::endl;
    }
    std::cout << "sweep summary: " << (out / "sweep_summary.csv").string() << std::endl;
    return 0;
}

int run_export(const std::string& run_dir_s, const std::string& what) {
    const fs::path run_dir(run_dir_s);
    if (!fs::exists(run_dir)) throw std::runtime_error("run directory not found: " + run_dir_s);
    if (what == "figure1") {
        const auto files = export_figure1_data(run_dir);
        for (const auto& f : files) std::cout << f.string() << "\n";
        return 0;
    }
    if (what == "weights") {
        std::ifstream is(run_dir / "weights.jsonl");
        if (!is) throw std::runtime_error("missing weights.jsonl in " + run_dir_s);
        std::ofstream os(run_dir / "weights_trajectory.csv", std::ios::binary);
        std::string line;
        bool header = false;
        while (std::getline(is, line)) {
            if (line.empty()) continue;
            const nlohmann::json j = nlohmann::json::parse(line);
            const auto& w = j.at("w");
            if (!header) {
                os << "epoch,kind,objective_value,solver_status";
                for (std::size_t i = 0; i < w.size(); ++i) os << ",w" << i;
                os << "\n";
                header = true;
            }
            os << j.at("epoch").get<std::size_t>() << "," << j.at("kind").get<std::string>()
               << "," << io::fmt_double(j.at("objective_value").get<double>()) << ","
               << j.at("solver_status").get<std::string>();
            for (const auto& x : w) os << "," << io::fmt_double(x.get<double>());
            os << "\n";
        }
        if (!header) throw std::runtime_error("weights.jsonl is empty in " + run_dir_s);
        std::cout << (run_dir / "weights_trajectory.csv").string() << std::endl;
        return 0;
    }
    throw std::invalid_argument("unknown export kind '" + what + "' (figure1|weights)");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dograph: gradient-space data mixing experiments on synthetic corpora"};
    app.require_subcommand(1);

    TrainArgs train_args;
    CLI::App* train = app.add_subcommand("train", "run one training experiment");
    train->add_option("--config", train_args.config_file, "config file (key = value)");
    train->add_option("--scenario", train_args.scenario, "builtin scenario name or scenario file");
    train->add_option("--policy", train_args.policy, "dograph|uniform|loss_based");
    train->add_option("--objective", train_args.objective,
                      "variance|robust_softmax|alignment|uncertainty");
    train->add_option("--out", train_args.out_dir, "run directory");
    auto add_common = [](CLI::App* cmd, TrainArgs& a) {
        cmd->add_option("--seed", a.seed, "master seed");
        cmd->add_option("--steps", a.steps, "training steps");
        cmd->add_option("--batch", a.batch, "mini-batch size");
        cmd->add_option("-m,--clusters", a.clusters, "cluster count m");
        cmd->add_option("-k,--proj-dim", a.proj_dim, "projection dimension k");
        cmd->add_option("--eval-every", a.eval_every, "evaluation cadence in steps");
        cmd->add_option("--lr", a.lr, "learning rate");
        cmd->add_option("--schedule", a.schedule, "constant|warmup_cosine");
        cmd->add_flag("--no-snapshots", a.no_snapshots, "skip gradient snapshots");
        cmd->add_flag("--freeze-projector", a.freeze_projector,
                      "reuse one projection matrix for the whole run");
        cmd->add_flag("--force", a.force, "overwrite an existing run directory");
    };
    add_common(train, train_args);

    VerifyArgs verify_args;
    CLI::App* verify = app.add_subcommand("verify", "run the self-check suites");
    verify->add_option("--seed", verify_args.seed, "seed for all suites");
    verify->add_option("--blocks", verify_args.blocks,
                       "restrict kernel identity to blocks (V Q K O W flat)");
    verify->add_flag("--json", verify_args.json, "machine-readable report");
    verify->add_option("--pairs", verify_args.pairs, "batch pairs for the kernel identity");
    verify->add_option("--batch", verify_args.batch, "batch size per side");
    verify->add_option("--fd-instances", verify_args.fd_instances,
                       "finite-difference instances");
    verify->add_option("--jl-dim", verify_args.jl_dim, "projection input dimension");
    verify->add_option("--jl-target", verify_args.jl_target, "projection target dimension");
    verify->add_option("--jl-vectors", verify_args.jl_vectors, "vectors per trial");
    verify->add_option("--jl-seeds", verify_args.jl_seeds, "number of projection seeds");
    verify->add_option("--jl-epsilon", verify_args.jl_epsilon, "distortion bound");

    TrainArgs sweep_args;
    std::vector<std::size_t> m_list;
    CLI::App* sweep = app.add_subcommand("sweep-m", "train once per cluster count m");
    sweep->add_option("--config", sweep_args.config_file, "config file (key = value)");
    sweep->add_option("--scenario", sweep_args.scenario, "builtin scenario name or scenario file");
    sweep->add_option("--objective", sweep_args.objective,
                      "variance|robust_softmax|alignment|uncertainty");
    sweep->add_option("--out", sweep_args.out_dir, "sweep output directory");
    sweep->add_option("--m-list", m_list, "cluster counts to sweep")->required();
    add_common(sweep, sweep_args);

    std::string export_run_dir, export_what;
    CLI::App* exp = app.add_subcommand("export", "export data products from a run directory");
    exp->add_option("--run-dir", export_run_dir, "run directory")->required();
    exp->add_option("what", export_what, "figure1|weights")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help and friends
        std::cerr << e.what() << "\n\n" << app.help() << std::endl;
        return 2;
    }

    try {
        if (*train) return run_train(train_args);
        if (*verify) return run_verify(verify_args);
        if (*sweep) return run_sweep(sweep_args, m_list);
        if (*exp) return run_export(export_run_dir, export_what);
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << std::endl;
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return 1;
    }
    return 2;
}
