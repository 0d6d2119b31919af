#ifndef FEDLAD_ENGINE_HPP
#define FEDLAD_ENGINE_HPP

#include <string>
#include <vector>

#include "fedlad/checkpoint.hpp"
#include "fedlad/config.hpp"
#include "fedlad/executor.hpp"
#include "fedlad/log_pipeline.hpp"
#include "fedlad/model.hpp"
#include "fedlad/partitioner.hpp"
#include "fedlad/strategy.hpp"
#include "fedlad/telemetry.hpp"

namespace fedlad {

struct ClientRuntime {
    int client_id = 0;
    Dataset shard;
    ParamVector local_params;
    Rng rng;  // persistent stream, seeded hash64(global_seed, client_id)
};

struct RoundResult {
    int round = 1;
    ParamVector global_params;
    RoundMetrics metrics;
    Decision decision;
    long long bytes_up = 0;
    long long bytes_down = 0;
};

struct RunState {
    ExperimentConfig config;
    ModelSpec model_spec;
    ParamVector global_params;
    StrategyState strategy_state;
    ExecutorState executor_state;
    AdaptationPolicy policy;
    PartitionPlan plan;
    std::vector<ClientRuntime> clients;
    Dataset val_set;
    std::vector<RoundResult> history;
    bool stopped = false;
    std::string stop_reason;
    int next_round = 1;
};

struct RunPaths {
    std::string root;
    std::string config_yaml;
    std::string metrics_csv;
    std::string metrics_json;
    std::string events_jsonl;
    std::string report_txt;
    std::string state_json;
    std::string partition_json;
    std::string timings_csv;
    std::string ckpt_dir;
};

// Run-directory root: $FEDLAD_RUNS_DIR when set, else config.output_dir.
std::string runs_root(const ExperimentConfig& config);
RunPaths run_paths(const std::string& root, const std::string& run_id);

// max(1, round(fraction·k)) distinct ids, ascending, seeded on (seed, round).
std::vector<int> sample_clients(int k, double fraction, int round, std::uint64_t seed);

// `epochs` passes of seeded mini-batch SGD from the client's stream, with the
// active strategy's local modifications applied.
ClientUpdate local_train(ClientRuntime& client, const LocalTrainingDirective& directive,
                         const ModelSpec& spec, const ParamVector& global,
                         const StrategyState& strategy);

RunState init_run(const ExperimentConfig& config, Dataset dataset);
RunState init_run(const ExperimentConfig& config);

// One full round ②→⑥: sample, train, fold, evaluate, log, consult, broadcast.
RoundResult run_round(RunState& state, MetricsSink& sink, EventLog& events);

// Rounds until max_rounds or an early stop; run directory fully populated.
RunState run_experiment(const ExperimentConfig& config);

// Continues a run from its directory (state.json + latest checkpoint); the
// completed trajectory is bit-identical to an uninterrupted run.
RunState resume_experiment(const std::string& root, const std::string& run_id);

}  // namespace fedlad

#endif  // FEDLAD_ENGINE_HPP
