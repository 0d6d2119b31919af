#include "fedlad/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace fedlad {

namespace {

namespace fs = std::filesystem;

constexpr long long kWireHeaderBytes = 24;
// Simulated-clock calibration: deterministic work units per reported millisecond.
constexpr long long kOpsPerMs = 200000;

std::string serialize_rng(const Rng& rng) {
    std::ostringstream out;
    out << rng;
    return out.str();
}

void deserialize_rng(Rng& rng, const std::string& text) {
    std::istringstream in(text);
    in >> rng;
    if (!in) throw std::runtime_error("corrupt generator state in run state file");
}

Phase phase_from_name(const std::string& name) {
    for (Phase p : {Phase::kWarmup, Phase::kSteady, Phase::kStagnant, Phase::kSwitched,
                    Phase::kStopped}) {
        if (phase_name(p) == name) return p;
    }
    throw std::runtime_error("unknown phase in run state file: " + name);
}

std::string regime_label(const PartitionConfig& p) {
    if (p.regime == PartitionRegime::kIid) return "iid";
    return "dirichlet(alpha=" + format_shortest(p.alpha) + ")";
}

void save_state_json(const std::string& path, const RunState& st) {
    nlohmann::ordered_json j;
    j["run_id"] = st.config.run_id;
    j["completed_round"] = st.next_round - 1;
    j["stopped"] = st.stopped;
    j["stop_reason"] = st.stop_reason;
    nlohmann::ordered_json strat;
    strat["kind"] = strategy_name(st.strategy_state.kind);
    strat["round_index"] = st.strategy_state.round_index;
    strat["server_c"] = st.strategy_state.server_c;
    strat["client_c"] = st.strategy_state.client_c;
    strat["m"] = st.strategy_state.m;
    strat["v"] = st.strategy_state.v;
    j["strategy"] = std::move(strat);
    nlohmann::ordered_json ex;
    ex["phase"] = phase_name(st.executor_state.phase);
    ex["best_f1"] = st.executor_state.best_f1;
    ex["best_round"] = st.executor_state.best_round;
    ex["rounds_since_improve"] = st.executor_state.rounds_since_improve;
    ex["switches_used"] = st.executor_state.switches_used;
    ex["last_round"] = st.executor_state.last_round;
    j["executor"] = std::move(ex);
    nlohmann::ordered_json clients = nlohmann::ordered_json::array();
    for (const ClientRuntime& c : st.clients) {
        nlohmann::ordered_json cj;
        cj["id"] = c.client_id;
        cj["rng"] = serialize_rng(c.rng);
        clients.push_back(std::move(cj));
    }
    j["clients"] = std::move(clients);

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open run state file for writing: " + tmp);
        out << j.dump(1) << '\n';
    }
    fs::rename(tmp, path);
}

void load_state_json(const std::string& path, RunState& st) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open run state file: " + path);
    nlohmann::json j;
    in >> j;
    st.stopped = j.at("stopped").get<bool>();
    st.stop_reason = j.at("stop_reason").get<std::string>();
    st.next_round = j.at("completed_round").get<int>() + 1;

    const auto& strat = j.at("strategy");
    const StrategyKind kind = strategy_from_name(strat.at("kind").get<std::string>());
    if (kind != st.strategy_state.kind) {
        hot_swap(st.strategy_state, kind);
    }
    st.strategy_state.round_index = strat.at("round_index").get<int>();
    st.strategy_state.server_c = strat.at("server_c").get<ParamVector>();
    st.strategy_state.client_c = strat.at("client_c").get<std::vector<ParamVector>>();
    st.strategy_state.m = strat.at("m").get<ParamVector>();
    st.strategy_state.v = strat.at("v").get<ParamVector>();

    const auto& ex = j.at("executor");
    st.executor_state.phase = phase_from_name(ex.at("phase").get<std::string>());
    st.executor_state.best_f1 = ex.at("best_f1").get<double>();
    st.executor_state.best_round = ex.at("best_round").get<int>();
    st.executor_state.rounds_since_improve = ex.at("rounds_since_improve").get<int>();
    st.executor_state.switches_used = ex.at("switches_used").get<int>();
    st.executor_state.last_round = ex.at("last_round").get<int>();

    const auto& clients = j.at("clients");
    if (clients.size() != st.clients.size()) {
        throw std::runtime_error("client count mismatch in run state file");
    }
    for (std::size_t i = 0; i < st.clients.size(); ++i) {
        deserialize_rng(st.clients[i].rng, clients[i].at("rng").get<std::string>());
    }
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << text;
}

void finalize_run(const RunState& st, const RunPaths& paths,
                  const std::vector<RoundMetrics>& history) {
    write_metrics_json(paths.metrics_json, history);
    render_plots(paths.root, history);
    const std::vector<EventRecord> events =
        fs::exists(paths.events_jsonl) ? load_events(paths.events_jsonl)
                                       : std::vector<EventRecord>{};
    const RunReport report =
        build_report(st.config.run_id, config_digest(st.config), st.config.dataset.path,
                     regime_label(st.config.partition), model_kind_name(st.config.model.kind),
                     st.config.partition.k, history, events);
    write_text(paths.report_txt, render_report(report));
}

}  // namespace

std::string runs_root(const ExperimentConfig& config) {
    if (const char* env = std::getenv("FEDLAD_RUNS_DIR")) {
        if (*env) return env;
    }
    return config.output_dir;
}

RunPaths run_paths(const std::string& root, const std::string& run_id) {
    RunPaths p;
    p.root = root + "/" + run_id;
    p.config_yaml = p.root + "/effective_config.yaml";
    p.metrics_csv = p.root + "/metrics.csv";
    p.metrics_json = p.root + "/metrics.json";
    p.events_jsonl = p.root + "/events.jsonl";
    p.report_txt = p.root + "/report.txt";
    p.state_json = p.root + "/state.json";
    p.partition_json = p.root + "/partition.json";
    p.timings_csv = p.root + "/timings.csv";
    p.ckpt_dir = p.root + "/ckpt";
    return p;
}

std::vector<int> sample_clients(int k, double fraction, int round, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw std::invalid_argument("participation fraction must be in (0,1]");
    }
    long long m = std::llround(fraction * static_cast<double>(k));
    m = std::max<long long>(1, std::min<long long>(m, k));
    std::vector<int> ids(static_cast<std::size_t>(k));
    std::iota(ids.begin(), ids.end(), 0);
    if (m == k) return ids;
    Rng rng(hash64(hash64(seed, kSeedSampler), static_cast<std::uint64_t>(round)));
    std::shuffle(ids.begin(), ids.end(), rng);
    ids.resize(static_cast<std::size_t>(m));
    std::sort(ids.begin(), ids.end());
    return ids;
}

ClientUpdate local_train(ClientRuntime& client, const LocalTrainingDirective& directive,
                         const ModelSpec& spec, const ParamVector& global,
                         const StrategyState& strategy) {
    if (directive.epochs < 1) throw std::invalid_argument("directive epochs must be >= 1");
    if (directive.lr < 0.0) throw std::invalid_argument("directive lr must be >= 0");
    if (directive.batch_size < 1) throw std::invalid_argument("directive batch_size must be >= 1");
    const std::size_t n = client.shard.sequences.size();
    if (n == 0) throw std::runtime_error("client shard is empty");

    ParamVector params = global;
    const std::size_t batch = static_cast<std::size_t>(directive.batch_size);
    const int steps_per_epoch = static_cast<int>((n + batch - 1) / batch);
    const int total_steps = directive.epochs * steps_per_epoch;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Batch b;
    for (int epoch = 0; epoch < directive.epochs; ++epoch) {
        std::shuffle(order.begin(), order.end(), client.rng);
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t stop = std::min(n, start + batch);
            b.inputs.clear();
            b.labels.clear();
            for (std::size_t i = start; i < stop; ++i) {
                const LogSequence& seq = client.shard.sequences[order[i]];
                b.inputs.push_back(&seq);
                b.labels.push_back(seq.label);
            }
            LossGrad lg = loss_and_grad(spec, params, b);
            if (directive.kind == StrategyKind::kFedProx) {
                add_prox_grad(lg.grad, params, global, directive.prox_mu);
            }
            if (directive.kind == StrategyKind::kScaffold) {
                params = scaffold_local_step(
                    params, lg.grad, directive.lr, strategy.server_c,
                    strategy.client_c[static_cast<std::size_t>(client.client_id)]);
            } else {
                for (std::size_t i = 0; i < params.size(); ++i) {
                    params[i] -= directive.lr * lg.grad[i];
                }
            }
        }
    }

    if (directive.kind == StrategyKind::kScaffold) {
        return scaffold_client_finalize(
            client.client_id, static_cast<long long>(n), params, global, strategy.server_c,
            strategy.client_c[static_cast<std::size_t>(client.client_id)], directive.lr,
            total_steps);
    }
    ClientUpdate u;
    u.client_id = client.client_id;
    u.params = std::move(params);
    u.num_samples = static_cast<long long>(n);
    return u;
}

RunState init_run(const ExperimentConfig& config, Dataset dataset) {
    RunState st;
    st.config = config;

    auto [train, val] = train_val_split(dataset, config.dataset.val_fraction,
                                        hash64(config.seed, kSeedValSplit));

    const std::uint64_t part_seed = hash64(config.seed, kSeedPartition);
    st.plan = config.partition.regime == PartitionRegime::kIid
                  ? split_iid(train, config.partition.k, part_seed)
                  : split_noniid(train, config.partition.k, config.partition.alpha, part_seed);
    std::vector<Dataset> shards = materialize(st.plan, train);

    st.model_spec.kind = config.model.kind;
    st.model_spec.vocab_size = dataset.vocab_size;
    st.model_spec.hidden_dim = config.model.hidden_dim;
    st.model_spec.window_size = config.dataset.window_size;
    st.global_params = init_params(st.model_spec, hash64(config.seed, kSeedModelInit));

    st.strategy_state = init_strategy_state(config.strategy.kind, config.strategy.hyper(),
                                            st.global_params.size(), config.partition.k);
    st.policy = config.adaptation.policy();
    st.val_set = std::move(val);

    st.clients.resize(static_cast<std::size_t>(config.partition.k));
    for (int id = 0; id < config.partition.k; ++id) {
        ClientRuntime& c = st.clients[static_cast<std::size_t>(id)];
        c.client_id = id;
        c.shard = std::move(shards[static_cast<std::size_t>(id)]);
        c.local_params = st.global_params;
        c.rng.seed(hash64(config.seed, static_cast<std::uint64_t>(id)));
    }
    return st;
}

RunState init_run(const ExperimentConfig& config) {
    return init_run(config, load_dataset_jsonl(config.dataset.path));
}

RoundResult run_round(RunState& state, MetricsSink& sink, EventLog& events) {
    if (state.stopped) throw std::logic_error("run_round called after stop");
    const int round = state.next_round;
    try {
        const std::vector<int> participants =
            sample_clients(state.config.partition.k, state.config.training.participation_fraction,
                           round, state.config.seed);
        if (participants.empty()) throw std::runtime_error("no participants sampled");

        const long long dim = static_cast<long long>(state.global_params.size());
        const long long model_bytes = kWireHeaderBytes + 8 * dim;
        const std::string active = strategy_name(state.strategy_state.kind);

        state.strategy_state.round_open = true;
        std::vector<ClientUpdate> updates;
        updates.reserve(participants.size());
        long long bytes_up = 0;
        long long max_client_ops = 0;
        for (int id : participants) {
            ClientRuntime& client = state.clients[static_cast<std::size_t>(id)];
            client.local_params = state.global_params;
            const LocalTrainingDirective directive =
                make_directive(state.strategy_state, id, state.config.training.epochs,
                               state.config.training.lr, state.config.training.batch_size);
            ClientUpdate u =
                local_train(client, directive, state.model_spec, state.global_params,
                            state.strategy_state);
            client.local_params = u.params;
            bytes_up += model_bytes + (u.control_delta ? 8 * dim : 0);
            max_client_ops = std::max(
                max_client_ops, static_cast<long long>(client.shard.sequences.size()) *
                                    state.config.training.epochs * dim);
            updates.push_back(std::move(u));
        }
        const long long bytes_down = static_cast<long long>(participants.size()) * model_bytes;

        ParamVector next = fold_round(state.strategy_state, state.global_params, std::move(updates));
        state.strategy_state.round_open = false;

        const EvalMetrics eval = evaluate(state.model_spec, next, state.val_set);
        const long long eval_ops =
            static_cast<long long>(state.val_set.sequences.size()) * dim;

        RoundResult result;
        result.round = round;
        result.bytes_up = bytes_up;
        result.bytes_down = bytes_down;
        result.metrics.round = round;
        result.metrics.val_loss = eval.loss;
        result.metrics.precision = eval.precision;
        result.metrics.recall = eval.recall;
        result.metrics.f1 = eval.f1;
        result.metrics.accuracy = eval.accuracy;
        result.metrics.bytes_up = bytes_up;
        result.metrics.bytes_down = bytes_down;
        result.metrics.wall_ms = 1 + (max_client_ops + eval_ops) / kOpsPerMs;
        result.metrics.strategy = active;
        sink.record_round(result.metrics);

        const Observation obs = observe(state.executor_state, state.policy, round, eval.f1);
        state.executor_state = obs.state;
        events.append(obs.event);
        result.decision = obs.decision;
        if (obs.decision.kind == Decision::Kind::kSwitch) {
            hot_swap(state.strategy_state, obs.decision.switch_to);
        } else if (obs.decision.kind == Decision::Kind::kEarlyStop) {
            state.stopped = true;
            state.stop_reason = obs.decision.reason;
        }

        for (int id : participants) {
            state.clients[static_cast<std::size_t>(id)].local_params = next;
        }
        state.global_params = std::move(next);
        result.global_params = state.global_params;
        state.next_round = round + 1;
        state.history.push_back(result);
        return state.history.back();
    } catch (const ConfigError& e) {
        throw ConfigError("round " + std::to_string(round) + ": " + e.what());
    } catch (const std::logic_error& e) {
        throw std::logic_error("round " + std::to_string(round) + ": " + e.what());
    } catch (const std::exception& e) {
        throw std::runtime_error("round " + std::to_string(round) + ": " + e.what());
    }
}

RunState run_experiment(const ExperimentConfig& config) {
    ExperimentConfig cfg = config;
    Dataset dataset = load_dataset_jsonl(cfg.dataset.path);
    if (cfg.auto_configure_enabled) {
        apply_suggestions(cfg, auto_configure(compute_stats(dataset), cfg.model.kind));
    }

    RunState st = init_run(cfg, std::move(dataset));
    const RunPaths paths = run_paths(runs_root(cfg), cfg.run_id);
    fs::create_directories(paths.ckpt_dir);
    write_text(paths.config_yaml, emit_config(cfg));
    write_text(paths.partition_json, st.plan.to_json() + "\n");

    MetricsSink sink;
    sink.open(paths.metrics_csv);
    EventLog events;
    events.open(paths.events_jsonl);
    std::ofstream timings(paths.timings_csv, std::ios::trunc);
    timings << "round,real_ms\n";

    for (int round = 1; round <= cfg.training.max_rounds && !st.stopped; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        run_round(st, sink, events);
        const auto t1 = std::chrono::steady_clock::now();
        timings << round << ','
                << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << '\n';
        timings.flush();
        save_checkpoint(paths.ckpt_dir + "/round_" + std::to_string(round) + ".bin",
                        st.model_spec, st.global_params);
        save_state_json(paths.state_json, st);
    }
    if (!st.stopped) st.stop_reason = "max_rounds";
    finalize_run(st, paths, sink.history());
    return st;
}

RunState resume_experiment(const std::string& root, const std::string& run_id) {
    const RunPaths paths = run_paths(root, run_id);
    if (!fs::exists(paths.config_yaml)) {
        throw ConfigError("run directory has no effective_config.yaml: " + paths.root);
    }
    if (!fs::exists(paths.state_json)) {
        throw ConfigError("run directory has no state.json: " + paths.root);
    }
    const ExperimentConfig cfg = load_config(paths.config_yaml);

    RunState st = init_run(cfg);
    load_state_json(paths.state_json, st);
    const int completed = st.next_round - 1;
    if (completed > 0) {
        const Checkpoint ckpt =
            load_checkpoint(paths.ckpt_dir + "/round_" + std::to_string(completed) + ".bin");
        if (ckpt.params.size() != st.global_params.size()) {
            throw std::runtime_error("checkpoint does not match the configured model");
        }
        st.global_params = ckpt.params;
        for (ClientRuntime& c : st.clients) c.local_params = st.global_params;
    }

    MetricsSink sink;
    sink.resume(paths.metrics_csv);
    if (static_cast<int>(sink.history().size()) != completed) {
        throw std::runtime_error("metrics history does not match run state");
    }
    for (const RoundMetrics& m : sink.history()) {
        RoundResult r;
        r.round = m.round;
        r.metrics = m;
        r.bytes_up = m.bytes_up;
        r.bytes_down = m.bytes_down;
        st.history.push_back(std::move(r));
    }
    EventLog events;
    events.resume(paths.events_jsonl);
    std::ofstream timings(paths.timings_csv, std::ios::app);

    for (int round = st.next_round; round <= cfg.training.max_rounds && !st.stopped; ++round) {
        const auto t0 = std::chrono::steady_clock::now();
        run_round(st, sink, events);
        const auto t1 = std::chrono::steady_clock::now();
        timings << round << ','
                << std::chrono::duration_cast<std::chrono::milliseconds>(t1 - t0).count() << '\n';
        timings.flush();
        save_checkpoint(paths.ckpt_dir + "/round_" + std::to_string(round) + ".bin",
                        st.model_spec, st.global_params);
        save_state_json(paths.state_json, st);
    }
    if (!st.stopped) st.stop_reason = "max_rounds";
    finalize_run(st, paths, sink.history());
    return st;
}

}  // namespace fedlad
