#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "fedlad/config.hpp"

using namespace fedlad;

namespace {

const char* kMinimal = R"(dataset:
  path: data/example.jsonl
model:
  kind: logistic_counts
)";

std::string error_of(const std::string& yaml) {
    try {
        parse_config(yaml);
        return "";
    } catch (const ConfigError& e) {
        return e.what();
    }
}

}  // namespace

TEST_CASE("minimal config fills every default") {
    const ExperimentConfig c = parse_config(kMinimal);
    CHECK(c.dataset.path == "data/example.jsonl");
    CHECK(c.dataset.label_mode == LabelMode::kSession);
    CHECK(c.dataset.window_size == 10);
    CHECK(c.dataset.step == 10);
    CHECK(c.dataset.val_fraction == 0.1);
    CHECK(c.partition.k == 10);
    CHECK(c.partition.regime == PartitionRegime::kIid);
    CHECK(c.partition.alpha == 0.5);
    CHECK(c.model.kind == ModelKind::kLogisticCounts);
    CHECK(c.model.hidden_dim == 16);
    CHECK(c.training.epochs == 1);
    CHECK(c.training.lr == 0.1);
    CHECK(c.training.batch_size == 32);
    CHECK(c.training.max_rounds == 30);
    CHECK(c.training.participation_fraction == 1.0);
    CHECK(c.strategy.kind == StrategyKind::kFedAvg);
    CHECK_FALSE(c.strategy.mu.has_value());
    CHECK(c.adaptation.enable_switch == false);
    CHECK(c.adaptation.enable_early_stop == false);
    CHECK(c.adaptation.patience == 5);
    CHECK(c.adaptation.f1_drop_delta == 0.05);
    CHECK(c.seed == 42);
    CHECK(c.output_dir == "runs");
    CHECK(c.auto_configure_enabled == false);
    CHECK(c.run_id.rfind("run-", 0) == 0);
}

TEST_CASE("validation errors name the offending key") {
    CHECK(error_of("model:\n  kind: logistic_counts\n") == "dataset.path is required");
    CHECK(error_of("dataset:\n  path: x\n") == "model.kind is required");
    CHECK(error_of(std::string(kMinimal) + "partition:\n  k: 0\n") == "partition.k must be ≥ 1");
    CHECK(error_of(std::string(kMinimal) + "strategy:\n  kind: fedprox\n") ==
          "strategy.mu required for fedprox");
    CHECK(error_of(std::string(kMinimal) + "dataset2: {}\n") == "unknown key: dataset2");
    CHECK(error_of(std::string(kMinimal) + "training:\n  epochz: 3\n") ==
          "unknown key: training.epochz");
    CHECK(error_of("dataset:\n  path: x\n  label_mode: block\nmodel:\n  kind: logistic_counts\n") ==
          "dataset.label_mode must be session or line");
    CHECK(error_of(std::string(kMinimal) + "partition:\n  regime: zipf\n") ==
          "partition.regime must be iid or dirichlet");
    CHECK(error_of("dataset:\n  path: x\nmodel:\n  kind: lstm\n") ==
          "model.kind must be logistic_counts or seq_mlp");
    CHECK(error_of(std::string(kMinimal) + "strategy:\n  kind: fedsgd\n") ==
          "strategy.kind must be one of fedavg, fedprox, scaffold, fedadam");
    CHECK(error_of(std::string(kMinimal) + "adaptation:\n  enable_switch: true\n") ==
          "adaptation.switch_chain required when enable_switch is true");
}

TEST_CASE("range violations are caught per key") {
    CHECK(error_of(std::string(kMinimal) + "training:\n  epochs: 0\n").find("training.epochs") == 0);
    CHECK(error_of(std::string(kMinimal) + "training:\n  lr: 0\n").find("training.lr") == 0);
    CHECK(error_of(std::string(kMinimal) + "training:\n  batch_size: 0\n").find("training.batch_size") == 0);
    CHECK(error_of(std::string(kMinimal) + "training:\n  max_rounds: -1\n").find("training.max_rounds") == 0);
    CHECK(error_of(std::string(kMinimal) + "training:\n  participation_fraction: 0\n")
              .find("training.participation_fraction") == 0);
    CHECK(error_of(std::string(kMinimal) + "training:\n  participation_fraction: 1.5\n")
              .find("training.participation_fraction") == 0);
    CHECK(error_of(std::string(kMinimal) + "partition:\n  alpha: 0\n").find("partition.alpha") == 0);
    CHECK(error_of("dataset:\n  path: x\n  window_size: 0\nmodel:\n  kind: logistic_counts\n")
              .find("dataset.window_size") == 0);
    CHECK(error_of("dataset:\n  path: x\n  val_fraction: 1\nmodel:\n  kind: logistic_counts\n")
              .find("dataset.val_fraction") == 0);
    CHECK(error_of(std::string(kMinimal) + "adaptation:\n  patience: 0\n").find("adaptation.patience") == 0);
    CHECK(error_of(std::string(kMinimal) + "adaptation:\n  f1_drop_delta: 1\n")
              .find("adaptation.f1_drop_delta") == 0);
    CHECK(error_of("dataset:\n  path: x\nmodel:\n  kind: seq_mlp\n  hidden_dim: 0\n")
              .find("model.hidden_dim") == 0);
}

TEST_CASE("non-scalar or unparseable values name the key") {
    const std::string err = error_of(std::string(kMinimal) + "training:\n  epochs: banana\n");
    CHECK(err.find("training.epochs") == 0);
    CHECK(err.find("invalid value") != std::string::npos);
}

TEST_CASE("malformed yaml is reported as such") {
    const std::string err = error_of("dataset: [unclosed\n");
    CHECK(err.find("malformed YAML") == 0);
}

TEST_CASE("switch chain must start with the active strategy") {
    const std::string yaml = std::string(kMinimal) +
                             "strategy:\n  kind: fedavg\n"
                             "adaptation:\n  enable_switch: true\n  switch_chain: [scaffold, fedadam]\n";
    CHECK(error_of(yaml) == "adaptation.switch_chain must start with strategy.kind");

    const std::string ok = std::string(kMinimal) +
                           "strategy:\n  kind: fedavg\n"
                           "adaptation:\n  enable_switch: true\n  switch_chain: [fedavg, scaffold]\n";
    const ExperimentConfig c = parse_config(ok);
    REQUIRE(c.adaptation.switch_chain.size() == 2);
    CHECK(c.adaptation.switch_chain[0] == StrategyKind::kFedAvg);
    CHECK(c.adaptation.switch_chain[1] == StrategyKind::kScaffold);
}

TEST_CASE("emitted config parses back to an equal config") {
    const std::string yaml = std::string(kMinimal) +
                             "seed: 7\n"
                             "partition:\n  k: 4\n  regime: dirichlet\n  alpha: 0.3\n"
                             "training:\n  epochs: 2\n  lr: 0.5\n  batch_size: 16\n"
                             "strategy:\n  kind: fedprox\n  mu: 0.01\n"
                             "adaptation:\n  enable_early_stop: true\n  patience: 3\n";
    const ExperimentConfig a = parse_config(yaml);
    const std::string emitted = emit_config(a);
    const ExperimentConfig b = parse_config(emitted);
    CHECK(a == b);
    CHECK(emit_config(b) == emitted);  // canonical form is a fixed point
}

TEST_CASE("run ids derive from content and ignore the explicit marker set") {
    const ExperimentConfig a = parse_config(kMinimal);
    const ExperimentConfig b = parse_config(kMinimal);
    CHECK(a.run_id == b.run_id);

    const ExperimentConfig c = parse_config(std::string(kMinimal) + "seed: 43\n");
    CHECK(c.run_id != a.run_id);

    const ExperimentConfig d = parse_config(std::string(kMinimal) + "run_id: my-experiment\n");
    CHECK(d.run_id == "my-experiment");
}

TEST_CASE("config digest is stable and ignores run naming") {
    const ExperimentConfig a = parse_config(kMinimal);
    ExperimentConfig b = a;
    CHECK(config_digest(a) == config_digest(b));
    b.training.lr = 0.9;
    CHECK(config_digest(a) != config_digest(b));
}

TEST_CASE("auto configure follows the documented heuristics") {
    DatasetStats stats;
    stats.vocab_size = 16;
    stats.anomaly_rate = 0.05;

    stats.num_sequences = 500000;
    SuggestedConfig s = auto_configure(stats, ModelKind::kLogisticCounts);
    CHECK(s.k == 50);
    CHECK(s.lr == 0.1);
    CHECK(s.max_rounds == 30);

    stats.num_sequences = 5000;
    s = auto_configure(stats, ModelKind::kLogisticCounts);
    CHECK(s.k == 2);  // clamp floor
    CHECK(s.batch_size == 64);  // 5000/(2*50)=50 -> nearest power of two

    stats.num_sequences = 2000000;
    s = auto_configure(stats, ModelKind::kSeqMlp);
    CHECK(s.k == 100);  // clamp ceiling
    CHECK(s.lr == 0.01);

    // batch clamp bounds and power-of-two rounding
    stats.num_sequences = 2000;
    s = auto_configure(stats, ModelKind::kLogisticCounts);
    CHECK(s.batch_size == 16);  // 2000/(2*50)=20 -> 16

    stats.num_sequences = 1000000;
    s = auto_configure(stats, ModelKind::kLogisticCounts);
    CHECK(s.k == 100);
    CHECK(s.batch_size == 256);  // 1000000/(100*50)=200 -> 256

    // determinism
    const SuggestedConfig s1 = auto_configure(stats, ModelKind::kLogisticCounts);
    const SuggestedConfig s2 = auto_configure(stats, ModelKind::kLogisticCounts);
    CHECK(s1.k == s2.k);
    CHECK(s1.batch_size == s2.batch_size);
    CHECK(s1.lr == s2.lr);
    CHECK(s1.max_rounds == s2.max_rounds);
}

TEST_CASE("auto configure refuses datasets below the federation floor") {
    DatasetStats stats;
    stats.num_sequences = 1999;
    CHECK_THROWS_WITH_AS(auto_configure(stats, ModelKind::kLogisticCounts),
                         "dataset too small to federate", ConfigError);
}

TEST_CASE("suggestions never override user-set keys") {
    const std::string yaml = std::string(kMinimal) + "partition:\n  k: 7\n";
    ExperimentConfig c = parse_config(yaml);
    SuggestedConfig s;
    s.k = 50;
    s.batch_size = 128;
    s.lr = 0.01;
    s.max_rounds = 60;
    apply_suggestions(c, s);
    CHECK(c.partition.k == 7);           // user key wins
    CHECK(c.training.batch_size == 128); // default key adopts the suggestion
    CHECK(c.training.lr == 0.01);
    CHECK(c.training.max_rounds == 60);

    // explicitly set training values survive too
    ExperimentConfig d = parse_config(std::string(kMinimal) + "training:\n  lr: 0.7\n");
    apply_suggestions(d, s);
    CHECK(d.training.lr == 0.7);
    CHECK(d.partition.k == 50);
}

TEST_CASE("load_config reads from disk and reports missing files") {
    const auto dir = std::filesystem::temp_directory_path() / "fedlad_config_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "config.yaml";
    {
        std::ofstream out(path);
        out << kMinimal;
    }
    const ExperimentConfig c = load_config(path.string());
    CHECK(c.dataset.path == "data/example.jsonl");
    CHECK_THROWS_AS(load_config((dir / "absent.yaml").string()), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("strategy hyper block carries through to the strategy state") {
    const std::string yaml = std::string(kMinimal) +
                             "strategy:\n  kind: fedadam\n  eta: 0.2\n  beta1: 0.5\n  beta2: 0.9\n  tau: 0.01\n";
    const ExperimentConfig c = parse_config(yaml);
    const StrategyHyper h = c.strategy.hyper();
    CHECK(h.eta == 0.2);
    CHECK(h.beta1 == 0.5);
    CHECK(h.beta2 == 0.9);
    CHECK(h.tau == 0.01);
}

TEST_CASE("adaptation block translates into an executor policy") {
    const std::string yaml = std::string(kMinimal) +
                             "adaptation:\n  enable_switch: true\n  enable_early_stop: true\n"
                             "  patience: 4\n  f1_drop_delta: 0.1\n  switch_chain: [fedavg, fedadam]\n";
    const ExperimentConfig c = parse_config(yaml);
    const AdaptationPolicy p = c.adaptation.policy();
    CHECK(p.patience == 4);
    CHECK(p.f1_drop_delta == 0.1);
    CHECK(p.enable_switch);
    CHECK(p.enable_early_stop);
    REQUIRE(p.switch_chain.size() == 2);
    CHECK(p.switch_chain[1] == StrategyKind::kFedAdam);
}
