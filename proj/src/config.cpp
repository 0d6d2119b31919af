#include "fedlad/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace fedlad {

namespace {

const std::set<std::string> kTopKeys = {"run_id",   "seed",     "dataset",    "partition",
                                        "model",    "training", "strategy",   "adaptation",
                                        "output_dir", "auto_configure"};
const std::set<std::string> kDatasetKeys = {"path", "label_mode", "window_size", "step",
                                            "val_fraction"};
const std::set<std::string> kPartitionKeys = {"k", "regime", "alpha"};
const std::set<std::string> kModelKeys = {"kind", "hidden_dim"};
const std::set<std::string> kTrainingKeys = {"epochs", "lr", "batch_size", "max_rounds",
                                             "participation_fraction"};
const std::set<std::string> kStrategyKeys = {"kind", "mu",  "eta",      "beta1",
                                             "beta2", "tau", "global_lr"};
const std::set<std::string> kAdaptationKeys = {"enable_switch", "enable_early_stop", "patience",
                                               "f1_drop_delta", "min_improve", "switch_chain"};

void reject_unknown_keys(const YAML::Node& node, const std::string& prefix,
                         const std::set<std::string>& allowed) {
    for (const auto& kv : node) {
        const std::string key = kv.first.as<std::string>();
        if (!allowed.count(key)) {
            throw ConfigError("unknown key: " + (prefix.empty() ? key : prefix + "." + key));
        }
    }
}

YAML::Node expect_map(const YAML::Node& node, const std::string& path) {
    if (!node.IsMap()) throw ConfigError(path + " must be a mapping");
    return node;
}

template <typename T>
T scalar_as(const YAML::Node& node, const std::string& path) {
    if (!node.IsScalar()) throw ConfigError(path + " has an invalid value");
    try {
        return node.as<T>();
    } catch (const YAML::Exception&) {
        throw ConfigError(path + " has an invalid value");
    }
}

// Fetches node[key] if present, recording the dotted path as explicitly set.
YAML::Node take(const YAML::Node& node, const std::string& key, const std::string& path,
                std::set<std::string>& explicit_keys) {
    YAML::Node child = node[key];
    if (child) explicit_keys.insert(path);
    return child;
}

std::string yaml_quote(const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '\\' || c == '"') {
            out += '\\';
            out += c;
        } else {
            out += c;
        }
    }
    out += '"';
    return out;
}

std::string chain_to_yaml(const std::vector<StrategyKind>& chain) {
    std::string out = "[";
    for (std::size_t i = 0; i < chain.size(); ++i) {
        if (i) out += ", ";
        out += strategy_name(chain[i]);
    }
    out += "]";
    return out;
}

}  // namespace

StrategyHyper StrategyConfig::hyper() const {
    StrategyHyper h;
    h.mu = mu.value_or(0.0);
    h.eta = eta;
    h.beta1 = beta1;
    h.beta2 = beta2;
    h.tau = tau;
    h.global_lr = global_lr;
    return h;
}

AdaptationPolicy AdaptationConfig::policy() const {
    AdaptationPolicy p;
    p.patience = patience;
    p.f1_drop_delta = f1_drop_delta;
    p.min_improve = min_improve;
    p.switch_chain = switch_chain;
    p.enable_early_stop = enable_early_stop;
    p.enable_switch = enable_switch;
    return p;
}

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b) {
    return a.run_id == b.run_id && a.seed == b.seed && a.dataset.path == b.dataset.path &&
           a.dataset.label_mode == b.dataset.label_mode &&
           a.dataset.window_size == b.dataset.window_size && a.dataset.step == b.dataset.step &&
           a.dataset.val_fraction == b.dataset.val_fraction && a.partition.k == b.partition.k &&
           a.partition.regime == b.partition.regime && a.partition.alpha == b.partition.alpha &&
           a.model.kind == b.model.kind && a.model.hidden_dim == b.model.hidden_dim &&
           a.training.epochs == b.training.epochs && a.training.lr == b.training.lr &&
           a.training.batch_size == b.training.batch_size &&
           a.training.max_rounds == b.training.max_rounds &&
           a.training.participation_fraction == b.training.participation_fraction &&
           a.strategy.kind == b.strategy.kind &&
           a.strategy.mu.value_or(0.0) == b.strategy.mu.value_or(0.0) &&
           a.strategy.eta == b.strategy.eta && a.strategy.beta1 == b.strategy.beta1 &&
           a.strategy.beta2 == b.strategy.beta2 && a.strategy.tau == b.strategy.tau &&
           a.strategy.global_lr == b.strategy.global_lr &&
           a.adaptation.enable_switch == b.adaptation.enable_switch &&
           a.adaptation.enable_early_stop == b.adaptation.enable_early_stop &&
           a.adaptation.patience == b.adaptation.patience &&
           a.adaptation.f1_drop_delta == b.adaptation.f1_drop_delta &&
           a.adaptation.min_improve == b.adaptation.min_improve &&
           a.adaptation.switch_chain == b.adaptation.switch_chain &&
           a.output_dir == b.output_dir && a.auto_configure_enabled == b.auto_configure_enabled;
}

bool operator!=(const ExperimentConfig& a, const ExperimentConfig& b) { return !(a == b); }

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw ConfigError(std::string("malformed YAML: ") + e.what());
    }
    if (!root.IsMap()) throw ConfigError("config root must be a mapping");
    reject_unknown_keys(root, "", kTopKeys);

    ExperimentConfig cfg;
    auto& ex = cfg.explicit_keys;

    if (YAML::Node n = take(root, "run_id", "run_id", ex)) {
        cfg.run_id = scalar_as<std::string>(n, "run_id");
    }
    if (YAML::Node n = take(root, "seed", "seed", ex)) {
        cfg.seed = scalar_as<unsigned long long>(n, "seed");
    }

    if (YAML::Node d = root["dataset"]) {
        expect_map(d, "dataset");
        reject_unknown_keys(d, "dataset", kDatasetKeys);
        if (YAML::Node n = take(d, "path", "dataset.path", ex)) {
            cfg.dataset.path = scalar_as<std::string>(n, "dataset.path");
        }
        if (YAML::Node n = take(d, "label_mode", "dataset.label_mode", ex)) {
            const std::string mode = scalar_as<std::string>(n, "dataset.label_mode");
            if (mode == "session") cfg.dataset.label_mode = LabelMode::kSession;
            else if (mode == "line") cfg.dataset.label_mode = LabelMode::kLine;
            else throw ConfigError("dataset.label_mode must be session or line");
        }
        if (YAML::Node n = take(d, "window_size", "dataset.window_size", ex)) {
            cfg.dataset.window_size = scalar_as<int>(n, "dataset.window_size");
            if (cfg.dataset.window_size < 1) throw ConfigError("dataset.window_size must be ≥ 1");
        }
        if (YAML::Node n = take(d, "step", "dataset.step", ex)) {
            cfg.dataset.step = scalar_as<int>(n, "dataset.step");
            if (cfg.dataset.step < 1) throw ConfigError("dataset.step must be ≥ 1");
        }
        if (YAML::Node n = take(d, "val_fraction", "dataset.val_fraction", ex)) {
            cfg.dataset.val_fraction = scalar_as<double>(n, "dataset.val_fraction");
            if (!(cfg.dataset.val_fraction > 0.0 && cfg.dataset.val_fraction < 1.0)) {
                throw ConfigError("dataset.val_fraction must be in (0,1)");
            }
        }
    }
    if (cfg.dataset.path.empty()) throw ConfigError("dataset.path is required");

    if (YAML::Node p = root["partition"]) {
        expect_map(p, "partition");
        reject_unknown_keys(p, "partition", kPartitionKeys);
        if (YAML::Node n = take(p, "k", "partition.k", ex)) {
            cfg.partition.k = scalar_as<int>(n, "partition.k");
            if (cfg.partition.k < 1) throw ConfigError("partition.k must be ≥ 1");
        }
        if (YAML::Node n = take(p, "regime", "partition.regime", ex)) {
            const std::string regime = scalar_as<std::string>(n, "partition.regime");
            try {
                cfg.partition.regime = regime_from_name(regime);
            } catch (const ConfigError&) {
                throw ConfigError("partition.regime must be iid or dirichlet");
            }
        }
        if (YAML::Node n = take(p, "alpha", "partition.alpha", ex)) {
            cfg.partition.alpha = scalar_as<double>(n, "partition.alpha");
            if (!(cfg.partition.alpha > 0.0)) throw ConfigError("partition.alpha must be > 0");
        }
    }

    if (YAML::Node m = root["model"]) {
        expect_map(m, "model");
        reject_unknown_keys(m, "model", kModelKeys);
        if (YAML::Node n = take(m, "kind", "model.kind", ex)) {
            const std::string kind = scalar_as<std::string>(n, "model.kind");
            try {
                cfg.model.kind = model_kind_from_name(kind);
            } catch (const ConfigError&) {
                throw ConfigError("model.kind must be logistic_counts or seq_mlp");
            }
        }
        if (YAML::Node n = take(m, "hidden_dim", "model.hidden_dim", ex)) {
            cfg.model.hidden_dim = scalar_as<int>(n, "model.hidden_dim");
            if (cfg.model.hidden_dim < 1) throw ConfigError("model.hidden_dim must be ≥ 1");
        }
    }
    if (!cfg.explicit_keys.count("model.kind")) throw ConfigError("model.kind is required");

    if (YAML::Node t = root["training"]) {
        expect_map(t, "training");
        reject_unknown_keys(t, "training", kTrainingKeys);
        if (YAML::Node n = take(t, "epochs", "training.epochs", ex)) {
            cfg.training.epochs = scalar_as<int>(n, "training.epochs");
            if (cfg.training.epochs < 1) throw ConfigError("training.epochs must be ≥ 1");
        }
        if (YAML::Node n = take(t, "lr", "training.lr", ex)) {
            cfg.training.lr = scalar_as<double>(n, "training.lr");
            if (!(cfg.training.lr > 0.0)) throw ConfigError("training.lr must be > 0");
        }
        if (YAML::Node n = take(t, "batch_size", "training.batch_size", ex)) {
            cfg.training.batch_size = scalar_as<int>(n, "training.batch_size");
            if (cfg.training.batch_size < 1) throw ConfigError("training.batch_size must be ≥ 1");
        }
        if (YAML::Node n = take(t, "max_rounds", "training.max_rounds", ex)) {
            cfg.training.max_rounds = scalar_as<int>(n, "training.max_rounds");
            if (cfg.training.max_rounds < 0) throw ConfigError("training.max_rounds must be ≥ 0");
        }
        if (YAML::Node n = take(t, "participation_fraction", "training.participation_fraction", ex)) {
            cfg.training.participation_fraction =
                scalar_as<double>(n, "training.participation_fraction");
            if (!(cfg.training.participation_fraction > 0.0 &&
                  cfg.training.participation_fraction <= 1.0)) {
                throw ConfigError("training.participation_fraction must be in (0,1]");
            }
        }
    }

    if (YAML::Node s = root["strategy"]) {
        expect_map(s, "strategy");
        reject_unknown_keys(s, "strategy", kStrategyKeys);
        if (YAML::Node n = take(s, "kind", "strategy.kind", ex)) {
            const std::string kind = scalar_as<std::string>(n, "strategy.kind");
            try {
                cfg.strategy.kind = strategy_from_name(kind);
            } catch (const ConfigError&) {
                throw ConfigError("strategy.kind must be one of fedavg, fedprox, scaffold, fedadam");
            }
        }
        if (YAML::Node n = take(s, "mu", "strategy.mu", ex)) {
            cfg.strategy.mu = scalar_as<double>(n, "strategy.mu");
            if (*cfg.strategy.mu < 0.0) throw ConfigError("strategy.mu must be ≥ 0");
        }
        if (YAML::Node n = take(s, "eta", "strategy.eta", ex)) {
            cfg.strategy.eta = scalar_as<double>(n, "strategy.eta");
            if (!(cfg.strategy.eta > 0.0)) throw ConfigError("strategy.eta must be > 0");
        }
        if (YAML::Node n = take(s, "beta1", "strategy.beta1", ex)) {
            cfg.strategy.beta1 = scalar_as<double>(n, "strategy.beta1");
            if (!(cfg.strategy.beta1 >= 0.0 && cfg.strategy.beta1 < 1.0)) {
                throw ConfigError("strategy.beta1 must be in [0,1)");
            }
        }
        if (YAML::Node n = take(s, "beta2", "strategy.beta2", ex)) {
            cfg.strategy.beta2 = scalar_as<double>(n, "strategy.beta2");
            if (!(cfg.strategy.beta2 >= 0.0 && cfg.strategy.beta2 < 1.0)) {
                throw ConfigError("strategy.beta2 must be in [0,1)");
            }
        }
        if (YAML::Node n = take(s, "tau", "strategy.tau", ex)) {
            cfg.strategy.tau = scalar_as<double>(n, "strategy.tau");
            if (!(cfg.strategy.tau > 0.0)) throw ConfigError("strategy.tau must be > 0");
        }
        if (YAML::Node n = take(s, "global_lr", "strategy.global_lr", ex)) {
            cfg.strategy.global_lr = scalar_as<double>(n, "strategy.global_lr");
            if (!(cfg.strategy.global_lr > 0.0)) throw ConfigError("strategy.global_lr must be > 0");
        }
    }
    if (cfg.strategy.kind == StrategyKind::kFedProx && !cfg.strategy.mu.has_value()) {
        throw ConfigError("strategy.mu required for fedprox");
    }

    if (YAML::Node a = root["adaptation"]) {
        expect_map(a, "adaptation");
        reject_unknown_keys(a, "adaptation", kAdaptationKeys);
        if (YAML::Node n = take(a, "enable_switch", "adaptation.enable_switch", ex)) {
            cfg.adaptation.enable_switch = scalar_as<bool>(n, "adaptation.enable_switch");
        }
        if (YAML::Node n = take(a, "enable_early_stop", "adaptation.enable_early_stop", ex)) {
            cfg.adaptation.enable_early_stop = scalar_as<bool>(n, "adaptation.enable_early_stop");
        }
        if (YAML::Node n = take(a, "patience", "adaptation.patience", ex)) {
            cfg.adaptation.patience = scalar_as<int>(n, "adaptation.patience");
            if (cfg.adaptation.patience < 1) throw ConfigError("adaptation.patience must be ≥ 1");
        }
        if (YAML::Node n = take(a, "f1_drop_delta", "adaptation.f1_drop_delta", ex)) {
            cfg.adaptation.f1_drop_delta = scalar_as<double>(n, "adaptation.f1_drop_delta");
            if (!(cfg.adaptation.f1_drop_delta > 0.0 && cfg.adaptation.f1_drop_delta < 1.0)) {
                throw ConfigError("adaptation.f1_drop_delta must be in (0,1)");
            }
        }
        if (YAML::Node n = take(a, "min_improve", "adaptation.min_improve", ex)) {
            cfg.adaptation.min_improve = scalar_as<double>(n, "adaptation.min_improve");
            if (cfg.adaptation.min_improve < 0.0) {
                throw ConfigError("adaptation.min_improve must be ≥ 0");
            }
        }
        if (YAML::Node n = take(a, "switch_chain", "adaptation.switch_chain", ex)) {
            if (!n.IsSequence()) throw ConfigError("adaptation.switch_chain must be a list");
            for (const auto& item : n) {
                const std::string name = scalar_as<std::string>(item, "adaptation.switch_chain");
                try {
                    cfg.adaptation.switch_chain.push_back(strategy_from_name(name));
                } catch (const ConfigError&) {
                    throw ConfigError("adaptation.switch_chain contains an unknown strategy: " +
                                      name);
                }
            }
        }
    }
    if (cfg.adaptation.enable_switch) {
        if (cfg.adaptation.switch_chain.empty()) {
            throw ConfigError("adaptation.switch_chain required when enable_switch is true");
        }
        if (cfg.adaptation.switch_chain.front() != cfg.strategy.kind) {
            throw ConfigError("adaptation.switch_chain must start with strategy.kind");
        }
    }

    if (YAML::Node n = take(root, "output_dir", "output_dir", ex)) {
        cfg.output_dir = scalar_as<std::string>(n, "output_dir");
        if (cfg.output_dir.empty()) throw ConfigError("output_dir must be nonempty");
    }
    if (YAML::Node n = take(root, "auto_configure", "auto_configure", ex)) {
        cfg.auto_configure_enabled = scalar_as<bool>(n, "auto_configure");
    }

    if (cfg.run_id.empty()) {
        ExperimentConfig for_digest = cfg;
        for_digest.run_id.clear();
        cfg.run_id = "run-" + fnv1a_hex(emit_config(for_digest));
    }
    return cfg;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string emit_config(const ExperimentConfig& c) {
    std::ostringstream out;
    out << "run_id: " << yaml_quote(c.run_id) << "\n";
    out << "seed: " << c.seed << "\n";
    out << "dataset:\n";
    out << "  path: " << yaml_quote(c.dataset.path) << "\n";
    out << "  label_mode: " << (c.dataset.label_mode == LabelMode::kSession ? "session" : "line")
        << "\n";
    out << "  window_size: " << c.dataset.window_size << "\n";
    out << "  step: " << c.dataset.step << "\n";
    out << "  val_fraction: " << format_shortest(c.dataset.val_fraction) << "\n";
    out << "partition:\n";
    out << "  k: " << c.partition.k << "\n";
    out << "  regime: " << regime_name(c.partition.regime) << "\n";
    out << "  alpha: " << format_shortest(c.partition.alpha) << "\n";
    out << "model:\n";
    out << "  kind: " << model_kind_name(c.model.kind) << "\n";
    out << "  hidden_dim: " << c.model.hidden_dim << "\n";
    out << "training:\n";
    out << "  epochs: " << c.training.epochs << "\n";
    out << "  lr: " << format_shortest(c.training.lr) << "\n";
    out << "  batch_size: " << c.training.batch_size << "\n";
    out << "  max_rounds: " << c.training.max_rounds << "\n";
    out << "  participation_fraction: " << format_shortest(c.training.participation_fraction)
        << "\n";
    out << "strategy:\n";
    out << "  kind: " << strategy_name(c.strategy.kind) << "\n";
    out << "  mu: " << format_shortest(c.strategy.mu.value_or(0.0)) << "\n";
    out << "  eta: " << format_shortest(c.strategy.eta) << "\n";
    out << "  beta1: " << format_shortest(c.strategy.beta1) << "\n";
    out << "  beta2: " << format_shortest(c.strategy.beta2) << "\n";
    out << "  tau: " << format_shortest(c.strategy.tau) << "\n";
    out << "  global_lr: " << format_shortest(c.strategy.global_lr) << "\n";
    out << "adaptation:\n";
    out << "  enable_switch: " << (c.adaptation.enable_switch ? "true" : "false") << "\n";
    out << "  enable_early_stop: " << (c.adaptation.enable_early_stop ? "true" : "false") << "\n";
    out << "  patience: " << c.adaptation.patience << "\n";
    out << "  f1_drop_delta: " << format_shortest(c.adaptation.f1_drop_delta) << "\n";
    out << "  min_improve: " << format_shortest(c.adaptation.min_improve) << "\n";
    out << "  switch_chain: " << chain_to_yaml(c.adaptation.switch_chain) << "\n";
    out << "output_dir: " << yaml_quote(c.output_dir) << "\n";
    out << "auto_configure: " << (c.auto_configure_enabled ? "true" : "false") << "\n";
    return out.str();
}

std::string config_digest(const ExperimentConfig& config) {
    return fnv1a_hex(emit_config(config));
}

SuggestedConfig auto_configure(const DatasetStats& stats, ModelKind kind) {
    if (stats.num_sequences < 2000) throw ConfigError("dataset too small to federate");
    SuggestedConfig s;
    const long long k = std::clamp<long long>(stats.num_sequences / 10000, 2, 100);
    s.k = static_cast<int>(k);
    const double raw = static_cast<double>(stats.num_sequences) / (static_cast<double>(k) * 50.0);
    const double clamped = std::clamp(raw, 8.0, 256.0);
    const int exponent = static_cast<int>(std::lround(std::log2(clamped)));
    s.batch_size = std::clamp(1 << exponent, 8, 256);
    s.lr = kind == ModelKind::kLogisticCounts ? 0.1 : 0.01;
    s.max_rounds = 30;
    return s;
}

void apply_suggestions(ExperimentConfig& config, const SuggestedConfig& s) {
    if (!config.explicit_keys.count("partition.k")) config.partition.k = s.k;
    if (!config.explicit_keys.count("training.batch_size")) config.training.batch_size = s.batch_size;
    if (!config.explicit_keys.count("training.lr")) config.training.lr = s.lr;
    if (!config.explicit_keys.count("training.max_rounds")) config.training.max_rounds = s.max_rounds;
}

}  // namespace fedlad
