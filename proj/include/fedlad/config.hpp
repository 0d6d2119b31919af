#ifndef FEDLAD_CONFIG_HPP
#define FEDLAD_CONFIG_HPP

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fedlad/common.hpp"
#include "fedlad/executor.hpp"
#include "fedlad/log_pipeline.hpp"
#include "fedlad/model.hpp"
#include "fedlad/partitioner.hpp"
#include "fedlad/strategy.hpp"

namespace fedlad {

struct DatasetConfig {
    std::string path;
    LabelMode label_mode = LabelMode::kSession;
    int window_size = 10;
    int step = 10;
    double val_fraction = 0.1;
};

struct PartitionConfig {
    int k = 10;
    PartitionRegime regime = PartitionRegime::kIid;
    double alpha = 0.5;
};

struct ModelConfig {
    ModelKind kind = ModelKind::kLogisticCounts;
    int hidden_dim = 16;
};

struct TrainingConfig {
    int epochs = 1;
    double lr = 0.1;
    int batch_size = 32;
    int max_rounds = 30;
    double participation_fraction = 1.0;
};

struct StrategyConfig {
    StrategyKind kind = StrategyKind::kFedAvg;
    std::optional<double> mu;  // required for fedprox
    double eta = 0.1;
    double beta1 = 0.9;
    double beta2 = 0.99;
    double tau = 1e-3;
    double global_lr = 1.0;

    StrategyHyper hyper() const;
};

struct AdaptationConfig {
    bool enable_switch = false;
    bool enable_early_stop = false;
    int patience = 5;
    double f1_drop_delta = 0.05;
    double min_improve = 1e-4;
    std::vector<StrategyKind> switch_chain;

    AdaptationPolicy policy() const;
};

struct ExperimentConfig {
    std::string run_id;  // defaults to a digest of the rest of the config
    std::uint64_t seed = 42;
    DatasetConfig dataset;
    PartitionConfig partition;
    ModelConfig model;
    TrainingConfig training;
    StrategyConfig strategy;
    AdaptationConfig adaptation;
    std::string output_dir = "runs";
    bool auto_configure_enabled = false;

    // dotted paths of keys the user set explicitly; suggestions never touch these
    std::set<std::string> explicit_keys;
};

bool operator==(const ExperimentConfig& a, const ExperimentConfig& b);
bool operator!=(const ExperimentConfig& a, const ExperimentConfig& b);

// Strict parse: unknown keys rejected, the first violation names its key path.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& yaml_text);

// Fully resolved config as canonical YAML (fixed key order, shortest floats).
std::string emit_config(const ExperimentConfig& config);

// FNV-1a digest of the canonical form, for the report header.
std::string config_digest(const ExperimentConfig& config);

struct SuggestedConfig {
    int k = 2;
    int batch_size = 32;
    double lr = 0.1;
    int max_rounds = 30;
};

// Deterministic heuristics from dataset shape; errors with
// "dataset too small to federate" below 2000 sequences.
SuggestedConfig auto_configure(const DatasetStats& stats, ModelKind kind);

// Applies a suggestion to every key the user did not set explicitly.
void apply_suggestions(ExperimentConfig& config, const SuggestedConfig& s);

}  // namespace fedlad

#endif  // FEDLAD_CONFIG_HPP
