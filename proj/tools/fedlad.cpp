#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <unordered_set>

#include <CLI11.hpp>

#include "fedlad/config.hpp"
#include "fedlad/engine.hpp"
#include "fedlad/log_pipeline.hpp"
#include "fedlad/synth.hpp"
#include "fedlad/telemetry.hpp"

namespace {

namespace fs = std::filesystem;
using namespace fedlad;

struct PrepareArgs {
    std::string input;
    std::string output;
    std::string mode = "line";
    std::string labels;
    int window = 10;
    int step = 10;
};

int cmd_prepare(const PrepareArgs& a) {
    PrepareOptions opt;
    opt.window_size = a.window;
    opt.step = a.step;
    if (a.mode == "session") {
        opt.mode = LabelMode::kSession;
    } else if (a.mode == "line") {
        opt.mode = LabelMode::kLine;
    } else {
        throw ConfigError("mode must be session or line");
    }

    std::unordered_set<std::string> anomaly_keys;
    if (opt.mode == LabelMode::kSession) {
        if (a.labels.empty()) throw ConfigError("session label mode requires --labels <csv>");
        anomaly_keys = load_label_csv(a.labels);
    }

    const PreparedDataset prepared = prepare_log_file(
        a.input, opt, opt.mode == LabelMode::kSession ? &anomaly_keys : nullptr);
    write_dataset_jsonl(a.output, prepared.dataset, prepared.dictionary);

    const DatasetStats stats = compute_stats(prepared.dataset);
    std::cout << "dataset: " << a.output << "\n";
    std::cout << "sequences: " << stats.num_sequences << "\n";
    std::cout << "vocab: " << stats.vocab_size << "\n";
    std::cout << "anomaly rate: " << format_fixed(stats.anomaly_rate, 6) << "\n";
    std::cout << "mean entropy: " << format_fixed(stats.mean_sequence_entropy, 6) << "\n";
    return 0;
}

int cmd_suggest(const std::string& dataset_path, const std::string& model_name) {
    const ModelKind kind = model_kind_from_name(model_name);
    const Dataset dataset = load_dataset_jsonl(dataset_path);
    const SuggestedConfig s = auto_configure(compute_stats(dataset), kind);
    std::cout << "dataset:\n";
    std::cout << "  path: \"" << dataset_path << "\"\n";
    std::cout << "model:\n";
    std::cout << "  kind: " << model_kind_name(kind) << "\n";
    std::cout << "partition:\n";
    std::cout << "  k: " << s.k << "\n";
    std::cout << "training:\n";
    std::cout << "  lr: " << format_shortest(s.lr) << "\n";
    std::cout << "  batch_size: " << s.batch_size << "\n";
    std::cout << "  max_rounds: " << s.max_rounds << "\n";
    return 0;
}

struct RunArgs {
    std::string config_path;
    std::string resume_id;
    long long seed = -1;
    bool seed_set = false;
    int max_rounds = -1;
    bool max_rounds_set = false;
    bool print_effective = false;
};

int cmd_run(const RunArgs& a) {
    if (!a.resume_id.empty()) {
        std::string root = "runs";
        if (const char* env = std::getenv("FEDLAD_RUNS_DIR"); env && *env) {
            root = env;
        } else if (!a.config_path.empty()) {
            root = load_config(a.config_path).output_dir;
        }
        const RunState st = resume_experiment(root, a.resume_id);
        std::ifstream report(run_paths(root, a.resume_id).report_txt);
        std::cout << report.rdbuf();
        (void)st;
        return 0;
    }

    if (a.config_path.empty()) throw ConfigError("run requires --config <yaml>");
    ExperimentConfig cfg = load_config(a.config_path);
    if (a.seed_set) {
        cfg.seed = static_cast<std::uint64_t>(a.seed);
        cfg.explicit_keys.insert("seed");
    }
    if (a.max_rounds_set) {
        if (a.max_rounds < 0) throw ConfigError("training.max_rounds must be ≥ 0");
        cfg.training.max_rounds = a.max_rounds;
        cfg.explicit_keys.insert("training.max_rounds");
    }
    if ((a.seed_set || a.max_rounds_set) && !cfg.explicit_keys.count("run_id")) {
        ExperimentConfig for_digest = cfg;
        for_digest.run_id.clear();
        cfg.run_id = "run-" + fnv1a_hex(emit_config(for_digest));
    }

    if (a.print_effective) {
        ExperimentConfig resolved = cfg;
        if (resolved.auto_configure_enabled) {
            const Dataset dataset = load_dataset_jsonl(resolved.dataset.path);
            apply_suggestions(resolved, auto_configure(compute_stats(dataset), resolved.model.kind));
        }
        std::cout << emit_config(resolved);
        return 0;
    }

    const RunState st = run_experiment(cfg);
    std::ifstream report(run_paths(runs_root(st.config), st.config.run_id).report_txt);
    std::cout << report.rdbuf();
    return 0;
}

int cmd_report(const std::string& run_dir) {
    const std::string config_path = run_dir + "/effective_config.yaml";
    const std::string metrics_path = run_dir + "/metrics.csv";
    const std::string events_path = run_dir + "/events.jsonl";
    for (const std::string& p : {config_path, metrics_path, events_path}) {
        if (!fs::exists(p)) throw ConfigError("run directory is missing " + p);
    }
    const ExperimentConfig cfg = load_config(config_path);
    const std::vector<RoundMetrics> history = load_metrics_csv(metrics_path);
    const std::vector<EventRecord> events = load_events(events_path);

    std::string regime = "iid";
    if (cfg.partition.regime == PartitionRegime::kDirichlet) {
        regime = "dirichlet(alpha=" + format_shortest(cfg.partition.alpha) + ")";
    }
    const RunReport report =
        build_report(cfg.run_id, config_digest(cfg), cfg.dataset.path, regime,
                     model_kind_name(cfg.model.kind), cfg.partition.k, history, events);
    const std::string text = render_report(report);
    std::ofstream out(run_dir + "/report.txt", std::ios::trunc);
    out << text;
    out.close();
    render_plots(run_dir, history);
    std::cout << text;
    return 0;
}

struct SynthArgs {
    std::string profile = "separable";
    int size = 10000;
    unsigned long long seed = 7;
    std::string output;
};

int cmd_synth(const SynthArgs& a) {
    SynthOptions opt;
    opt.profile = synth_profile_from_name(a.profile);
    opt.size = a.size;
    opt.seed = a.seed;
    write_corpus(a.output, opt);
    std::cout << "corpus: " << a.output << "\n";
    std::cout << "profile: " << a.profile << "\n";
    std::cout << "sessions: " << a.size << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"federated log anomaly detection testbed"};
    app.require_subcommand(1);

    PrepareArgs prep;
    CLI::App* prepare = app.add_subcommand("prepare", "parse a raw log into a windowed dataset");
    prepare->add_option("--input", prep.input, "raw log file")->required();
    prepare->add_option("--output", prep.output, "dataset JSONL to write")->required();
    prepare->add_option("--mode", prep.mode, "label mode: session or line");
    prepare->add_option("--labels", prep.labels, "session label CSV (key,label)");
    prepare->add_option("--window", prep.window, "window size");
    prepare->add_option("--step", prep.step, "window step");

    std::string suggest_dataset, suggest_model = "logistic_counts";
    CLI::App* suggest = app.add_subcommand("suggest", "suggest hyperparameters from a dataset");
    suggest->add_option("--dataset", suggest_dataset, "prepared dataset JSONL")->required();
    suggest->add_option("--model", suggest_model, "model kind the run will use");

    RunArgs run;
    CLI::App* run_cmd = app.add_subcommand("run", "execute a federated experiment");
    run_cmd->add_option("--config", run.config_path, "experiment config YAML");
    auto* seed_opt = run_cmd->add_option("--seed", run.seed, "override config seed");
    auto* rounds_opt = run_cmd->add_option("--max-rounds", run.max_rounds, "override max rounds");
    run_cmd->add_option("--resume", run.resume_id, "resume an existing run id");
    run_cmd->add_flag("--print-effective-config", run.print_effective,
                      "print the resolved config and exit");

    std::string report_dir;
    CLI::App* report = app.add_subcommand("report", "regenerate and print a run report");
    report->add_option("run_dir", report_dir, "run directory")->required();

    SynthArgs synth;
    CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic log corpus");
    synth_cmd->add_option("--profile", synth.profile, "separable, noisy, or drift");
    synth_cmd->add_option("--size", synth.size, "session count");
    synth_cmd->add_option("--seed", synth.seed, "generator seed");
    synth_cmd->add_option("--output", synth.output, "corpus file to write")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (prepare->parsed()) return cmd_prepare(prep);
        if (suggest->parsed()) return cmd_suggest(suggest_dataset, suggest_model);
        if (run_cmd->parsed()) {
            run.seed_set = seed_opt->count() > 0;
            run.max_rounds_set = rounds_opt->count() > 0;
            return cmd_run(run);
        }
        if (report->parsed()) return cmd_report(report_dir);
        if (synth_cmd->parsed()) return cmd_synth(synth);
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
