#include "fedlad/model.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace fedlad {

namespace {

double sigmoid(double z) {
    if (z >= 0.0) {
        return 1.0 / (1.0 + std::exp(-z));
    }
    const double e = std::exp(z);
    return e / (1.0 + e);
}

// max(z,0) - y*z + log1p(exp(-|z|)) -- never evaluates exp of a large positive arg.
double stable_bce(double z, int y) {
    return std::max(z, 0.0) - static_cast<double>(y) * z + std::log1p(std::exp(-std::abs(z)));
}

void check_finite(double loss) {
    if (!std::isfinite(loss)) throw std::runtime_error("numeric overflow");
}

struct MlpLayout {
    std::size_t w1 = 0;  // offsets into the flat parameter vector
    std::size_t b1 = 0;
    std::size_t w2 = 0;
    std::size_t b2 = 0;
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
};

MlpLayout mlp_layout(const ModelSpec& spec) {
    MlpLayout l;
    l.input_dim = static_cast<std::size_t>(spec.window_size) * static_cast<std::size_t>(spec.vocab_size);
    l.hidden = static_cast<std::size_t>(spec.hidden_dim);
    l.w1 = 0;
    l.b1 = l.w1 + l.input_dim * l.hidden;
    l.w2 = l.b1 + l.hidden;
    l.b2 = l.w2 + l.hidden * 2;
    return l;
}

// Active one-hot rows of the input: position t with event id e lights row t*vocab+e.
void active_rows(const ModelSpec& spec, const LogSequence& seq, std::vector<std::size_t>& rows) {
    rows.clear();
    const std::size_t w = static_cast<std::size_t>(spec.window_size);
    for (std::size_t t = 0; t < w; ++t) {
        int id = t < seq.events.size() ? seq.events[t] : kPadId;
        if (id < 0 || id >= spec.vocab_size) {
            throw std::invalid_argument("sequence event id " + std::to_string(id) +
                                        " out of range for vocab_size " +
                                        std::to_string(spec.vocab_size));
        }
        rows.push_back(t * static_cast<std::size_t>(spec.vocab_size) + static_cast<std::size_t>(id));
    }
}

struct MlpForward {
    std::vector<double> hidden;  // tanh activations
    double logits[2] = {0.0, 0.0};
    double log_probs[2] = {0.0, 0.0};
};

MlpForward mlp_forward(const ModelSpec& spec, const ParamVector& params,
                       const std::vector<std::size_t>& rows) {
    const MlpLayout l = mlp_layout(spec);
    MlpForward f;
    f.hidden.assign(l.hidden, 0.0);
    for (std::size_t j = 0; j < l.hidden; ++j) {
        double a = params[l.b1 + j];
        for (std::size_t r : rows) a += params[l.w1 + r * l.hidden + j];
        f.hidden[j] = std::tanh(a);
    }
    for (int c = 0; c < 2; ++c) {
        double z = params[l.b2 + static_cast<std::size_t>(c)];
        for (std::size_t j = 0; j < l.hidden; ++j) {
            z += f.hidden[j] * params[l.w2 + j * 2 + static_cast<std::size_t>(c)];
        }
        f.logits[c] = z;
    }
    const double m = std::max(f.logits[0], f.logits[1]);
    const double lse = m + std::log(std::exp(f.logits[0] - m) + std::exp(f.logits[1] - m));
    f.log_probs[0] = f.logits[0] - lse;
    f.log_probs[1] = f.logits[1] - lse;
    return f;
}

}  // namespace

std::string model_kind_name(ModelKind kind) {
    switch (kind) {
        case ModelKind::kLogisticCounts: return "logistic_counts";
        case ModelKind::kSeqMlp: return "seq_mlp";
    }
    throw std::logic_error("unknown model kind");
}

ModelKind model_kind_from_name(const std::string& name) {
    if (name == "logistic_counts") return ModelKind::kLogisticCounts;
    if (name == "seq_mlp") return ModelKind::kSeqMlp;
    throw ConfigError("unknown model kind: " + name);
}

std::size_t ModelSpec::param_count() const {
    if (vocab_size < 1) throw ConfigError("model vocab_size must be >= 1");
    switch (kind) {
        case ModelKind::kLogisticCounts:
            return static_cast<std::size_t>(vocab_size) + 1;
        case ModelKind::kSeqMlp: {
            if (hidden_dim < 1) throw ConfigError("model hidden_dim must be >= 1");
            if (window_size < 1) throw ConfigError("model window_size must be >= 1");
            const std::size_t d =
                static_cast<std::size_t>(window_size) * static_cast<std::size_t>(vocab_size);
            const std::size_t h = static_cast<std::size_t>(hidden_dim);
            return d * h + h + h * 2 + 2;
        }
    }
    throw std::logic_error("unknown model kind");
}

Batch batch_from(const Dataset& dataset) {
    Batch b;
    b.inputs.reserve(dataset.sequences.size());
    b.labels.reserve(dataset.sequences.size());
    for (const LogSequence& seq : dataset.sequences) {
        b.inputs.push_back(&seq);
        b.labels.push_back(seq.label);
    }
    return b;
}

ParamVector init_params(const ModelSpec& spec, std::uint64_t seed) {
    ParamVector params(spec.param_count(), 0.0);
    Rng rng(seed);
    std::uniform_real_distribution<double> uni(-0.05, 0.05);
    switch (spec.kind) {
        case ModelKind::kLogisticCounts: {
            for (int i = 0; i < spec.vocab_size; ++i) params[static_cast<std::size_t>(i)] = uni(rng);
            // trailing bias stays 0
            break;
        }
        case ModelKind::kSeqMlp: {
            const MlpLayout l = mlp_layout(spec);
            for (std::size_t i = 0; i < l.input_dim * l.hidden; ++i) params[l.w1 + i] = uni(rng);
            for (std::size_t i = 0; i < l.hidden * 2; ++i) params[l.w2 + i] = uni(rng);
            // b1, b2 stay 0
            break;
        }
    }
    return params;
}

LossGrad loss_and_grad(const ModelSpec& spec, const ParamVector& params, const Batch& batch) {
    if (params.size() != spec.param_count()) {
        throw std::invalid_argument("parameter vector size does not match model spec");
    }
    if (batch.inputs.empty()) throw std::invalid_argument("empty batch");
    if (batch.inputs.size() != batch.labels.size()) {
        throw std::invalid_argument("batch inputs/labels size mismatch");
    }

    LossGrad out;
    out.grad.assign(params.size(), 0.0);
    const double inv_b = 1.0 / static_cast<double>(batch.inputs.size());

    switch (spec.kind) {
        case ModelKind::kLogisticCounts: {
            const std::size_t v = static_cast<std::size_t>(spec.vocab_size);
            for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
                const std::vector<double> x = featurize_counts(*batch.inputs[i], spec.vocab_size);
                double z = params[v];
                for (std::size_t d = 0; d < v; ++d) z += params[d] * x[d];
                const int y = batch.labels[i];
                out.loss += stable_bce(z, y) * inv_b;
                const double gz = (sigmoid(z) - static_cast<double>(y)) * inv_b;
                for (std::size_t d = 0; d < v; ++d) {
                    if (x[d] != 0.0) out.grad[d] += gz * x[d];
                }
                out.grad[v] += gz;
            }
            break;
        }
        case ModelKind::kSeqMlp: {
            const MlpLayout l = mlp_layout(spec);
            std::vector<std::size_t> rows;
            for (std::size_t i = 0; i < batch.inputs.size(); ++i) {
                active_rows(spec, *batch.inputs[i], rows);
                const MlpForward f = mlp_forward(spec, params, rows);
                const int y = batch.labels[i];
                out.loss += -f.log_probs[y] * inv_b;

                double glogit[2];
                for (int c = 0; c < 2; ++c) {
                    glogit[c] = (std::exp(f.log_probs[c]) - (c == y ? 1.0 : 0.0)) * inv_b;
                }
                for (std::size_t j = 0; j < l.hidden; ++j) {
                    double gh = 0.0;
                    for (int c = 0; c < 2; ++c) {
                        const std::size_t wi = l.w2 + j * 2 + static_cast<std::size_t>(c);
                        out.grad[wi] += f.hidden[j] * glogit[c];
                        gh += params[wi] * glogit[c];
                    }
                    const double ga = (1.0 - f.hidden[j] * f.hidden[j]) * gh;
                    out.grad[l.b1 + j] += ga;
                    for (std::size_t r : rows) out.grad[l.w1 + r * l.hidden + j] += ga;
                }
                out.grad[l.b2] += glogit[0];
                out.grad[l.b2 + 1] += glogit[1];
            }
            break;
        }
    }
    check_finite(out.loss);
    return out;
}

double predict(const ModelSpec& spec, const ParamVector& params, const LogSequence& seq) {
    if (params.size() != spec.param_count()) {
        throw std::invalid_argument("parameter vector size does not match model spec");
    }
    switch (spec.kind) {
        case ModelKind::kLogisticCounts: {
            const std::size_t v = static_cast<std::size_t>(spec.vocab_size);
            const std::vector<double> x = featurize_counts(seq, spec.vocab_size);
            double z = params[v];
            for (std::size_t d = 0; d < v; ++d) z += params[d] * x[d];
            return sigmoid(z);
        }
        case ModelKind::kSeqMlp: {
            std::vector<std::size_t> rows;
            active_rows(spec, seq, rows);
            const MlpForward f = mlp_forward(spec, params, rows);
            return std::exp(f.log_probs[1]);
        }
    }
    throw std::logic_error("unknown model kind");
}

EvalMetrics evaluate(const ModelSpec& spec, const ParamVector& params, const Dataset& dataset) {
    if (dataset.sequences.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
    EvalMetrics m;
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    const double inv_n = 1.0 / static_cast<double>(dataset.sequences.size());
    for (const LogSequence& seq : dataset.sequences) {
        const double p = predict(spec, params, seq);
        // per-example cross-entropy on the anomaly probability
        const double eps = 1e-12;
        const double pc = std::min(std::max(p, eps), 1.0 - eps);
        m.loss += -(seq.label == 1 ? std::log(pc) : std::log(1.0 - pc)) * inv_n;
        const int pred = p > 0.5 ? 1 : 0;
        if (pred == 1 && seq.label == 1) ++tp;
        else if (pred == 1 && seq.label == 0) ++fp;
        else if (pred == 0 && seq.label == 1) ++fn;
        else ++tn;
    }
    check_finite(m.loss);
    m.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp) : 0.0;
    m.recall = (tp + fn) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fn) : 0.0;
    m.f1 = (m.precision + m.recall) > 0.0
               ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
               : 0.0;
    m.accuracy = static_cast<double>(tp + tn) * inv_n;
    return m;
}

}  // namespace fedlad
