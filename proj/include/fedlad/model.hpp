#ifndef FEDLAD_MODEL_HPP
#define FEDLAD_MODEL_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "fedlad/common.hpp"
#include "fedlad/log_pipeline.hpp"

namespace fedlad {

enum class ModelKind { kLogisticCounts, kSeqMlp };

std::string model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(const std::string& name);

// Parameter layouts:
//   kLogisticCounts: [w (vocab_size), b]                     -> vocab_size + 1
//   kSeqMlp:         [W1 (w*vocab x h), b1 (h), W2 (h x 2), b2 (2)]
//                    one-hot window -> tanh hidden -> 2 logits
struct ModelSpec {
    ModelKind kind = ModelKind::kLogisticCounts;
    int vocab_size = 2;
    int hidden_dim = 16;  // kSeqMlp only
    int window_size = 10;

    std::size_t param_count() const;
};

struct Batch {
    std::vector<const LogSequence*> inputs;
    std::vector<int> labels;
};

Batch batch_from(const Dataset& dataset);

// Weights ~ Uniform(-0.05, 0.05) from the seeded generator; biases exactly 0.
ParamVector init_params(const ModelSpec& spec, std::uint64_t seed);

struct LossGrad {
    double loss = 0.0;
    ParamVector grad;
};

// Mean binary cross-entropy over the batch and its exact analytic gradient.
// Throws "numeric overflow" if the loss turns non-finite.
LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch);

// Probability of the anomaly class, in (0,1). Threshold for classification is 0.5.
double predict(const ModelSpec& spec, const ParamVector& params, const LogSequence& seq);

struct EvalMetrics {
    double loss = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double accuracy = 0.0;
};

// Anomaly-class precision/recall/F1 at threshold 0.5; F1 = 0 when P + R = 0.
EvalMetrics evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset);

}  // namespace fedlad

#endif  // FEDLAD_MODEL_HPP
