#include "fedlad/strategy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fedlad {

namespace {

void check_updates(const ParamVector& global, const std::vector<ClientUpdate>& updates,
                   bool expect_delta) {
    if (updates.empty()) throw std::runtime_error("no clients reported");
    for (const ClientUpdate& u : updates) {
        if (u.params.size() != global.size()) {
            throw std::invalid_argument("client update length does not match global model");
        }
        if (u.num_samples < 1) throw std::invalid_argument("client update num_samples must be >= 1");
        if (expect_delta) {
            if (!u.control_delta || u.control_delta->size() != global.size()) {
                throw std::invalid_argument("client update is missing its control delta");
            }
        }
    }
}

}  // namespace

std::string strategy_name(StrategyKind kind) {
    switch (kind) {
        case StrategyKind::kFedAvg: return "fedavg";
        case StrategyKind::kFedProx: return "fedprox";
        case StrategyKind::kScaffold: return "scaffold";
        case StrategyKind::kFedAdam: return "fedadam";
    }
    throw std::logic_error("unknown strategy kind");
}

StrategyKind strategy_from_name(const std::string& name) {
    if (name == "fedavg") return StrategyKind::kFedAvg;
    if (name == "fedprox") return StrategyKind::kFedProx;
    if (name == "scaffold") return StrategyKind::kScaffold;
    if (name == "fedadam") return StrategyKind::kFedAdam;
    throw ConfigError("unknown strategy: " + name);
}

StrategyState init_strategy_state(StrategyKind kind, const StrategyHyper& hyper,
                                  std::size_t param_dim, int num_clients) {
    if (param_dim == 0) throw std::invalid_argument("param_dim must be positive");
    if (num_clients < 1) throw std::invalid_argument("num_clients must be >= 1");
    StrategyState s;
    s.kind = kind;
    s.hyper = hyper;
    s.param_dim = param_dim;
    s.num_clients = num_clients;
    if (kind == StrategyKind::kScaffold) {
        s.server_c.assign(param_dim, 0.0);
        s.client_c.assign(static_cast<std::size_t>(num_clients), ParamVector(param_dim, 0.0));
    } else if (kind == StrategyKind::kFedAdam) {
        s.m.assign(param_dim, 0.0);
        s.v.assign(param_dim, 0.0);
    }
    return s;
}

ParamVector aggregate_fedavg(const ParamVector& global, const std::vector<ClientUpdate>& updates) {
    check_updates(global, updates, false);
    double total = 0.0;
    for (const ClientUpdate& u : updates) total += static_cast<double>(u.num_samples);
    ParamVector out(global.size(), 0.0);
    for (const ClientUpdate& u : updates) {
        const double w = static_cast<double>(u.num_samples) / total;
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += w * u.params[i];
    }
    return out;
}

double local_objective_fedprox(double base_loss, const ParamVector& params,
                               const ParamVector& global_params, double mu) {
    if (mu < 0.0) throw std::invalid_argument("mu must be >= 0");
    if (params.size() != global_params.size()) {
        throw std::invalid_argument("params/global length mismatch");
    }
    double sq = 0.0;
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double d = params[i] - global_params[i];
        sq += d * d;
    }
    return base_loss + 0.5 * mu * sq;
}

void add_prox_grad(ParamVector& grad, const ParamVector& params,
                   const ParamVector& global_params, double mu) {
    if (mu == 0.0) return;
    if (grad.size() != params.size() || params.size() != global_params.size()) {
        throw std::invalid_argument("gradient/params/global length mismatch");
    }
    for (std::size_t i = 0; i < grad.size(); ++i) {
        grad[i] += mu * (params[i] - global_params[i]);
    }
}

ParamVector scaffold_local_step(const ParamVector& params, const ParamVector& grad, double lr,
                                const ParamVector& server_c, const ParamVector& client_c) {
    if (grad.size() != params.size() || server_c.size() != params.size() ||
        client_c.size() != params.size()) {
        throw std::invalid_argument("control-variate step length mismatch");
    }
    ParamVector out(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        out[i] = params[i] - lr * (grad[i] - client_c[i] + server_c[i]);
    }
    return out;
}

ClientUpdate scaffold_client_finalize(int client_id, long long num_samples, const ParamVector& y_i,
                                      const ParamVector& x, const ParamVector& server_c,
                                      const ParamVector& client_c, double lr, int local_steps) {
    if (local_steps < 1) throw std::invalid_argument("local step count must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    if (y_i.size() != x.size() || server_c.size() != x.size() || client_c.size() != x.size()) {
        throw std::invalid_argument("control-variate finalize length mismatch");
    }
    ClientUpdate u;
    u.client_id = client_id;
    u.params = y_i;
    u.num_samples = num_samples;
    const double scale = 1.0 / (static_cast<double>(local_steps) * lr);
    ParamVector delta(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double c_plus = client_c[i] - server_c[i] + (x[i] - y_i[i]) * scale;
        delta[i] = c_plus - client_c[i];
    }
    u.control_delta = std::move(delta);
    return u;
}

ScaffoldServerResult scaffold_server_update(const ParamVector& x,
                                            const std::vector<ClientUpdate>& updates,
                                            double global_lr, int total_clients,
                                            const ParamVector& server_c) {
    check_updates(x, updates, true);
    if (total_clients < 1) throw std::invalid_argument("total_clients must be >= 1");
    if (server_c.size() != x.size()) throw std::invalid_argument("server control length mismatch");
    const double s = static_cast<double>(updates.size());
    ScaffoldServerResult out;
    out.params = x;
    out.server_c = server_c;
    for (const ClientUpdate& u : updates) {
        for (std::size_t i = 0; i < x.size(); ++i) {
            out.params[i] += (global_lr / s) * (u.params[i] - x[i]);
            out.server_c[i] += (*u.control_delta)[i] / static_cast<double>(total_clients);
        }
    }
    return out;
}

FedAdamResult fedadam_server_step(const ParamVector& x, const std::vector<ClientUpdate>& updates,
                                  const ParamVector& m, const ParamVector& v,
                                  const StrategyHyper& hyper) {
    check_updates(x, updates, false);
    if (m.size() != x.size() || v.size() != x.size()) {
        throw std::invalid_argument("moment vector length mismatch");
    }
    if (hyper.beta1 < 0.0 || hyper.beta1 >= 1.0 || hyper.beta2 < 0.0 || hyper.beta2 >= 1.0) {
        throw std::invalid_argument("beta1/beta2 must lie in [0,1)");
    }
    if (hyper.eta <= 0.0 || hyper.tau <= 0.0) {
        throw std::invalid_argument("eta and tau must be positive");
    }
    const ParamVector mean = aggregate_fedavg(x, updates);
    FedAdamResult out;
    out.params.resize(x.size());
    out.m.resize(x.size());
    out.v.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double delta = mean[i] - x[i];
        out.m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * delta;
        out.v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * delta * delta;
        out.params[i] = x[i] + hyper.eta * out.m[i] / (std::sqrt(out.v[i]) + hyper.tau);
    }
    return out;
}

LocalTrainingDirective make_directive(const StrategyState& state, int client_id, int epochs,
                                      double lr, int batch_size) {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (lr <= 0.0) throw std::invalid_argument("lr must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    LocalTrainingDirective d;
    d.kind = state.kind;
    d.epochs = epochs;
    d.lr = lr;
    d.batch_size = batch_size;
    if (state.kind == StrategyKind::kFedProx) {
        if (state.hyper.mu < 0.0) throw std::invalid_argument("mu must be >= 0");
        d.prox_mu = state.hyper.mu;
    } else if (state.kind == StrategyKind::kScaffold) {
        if (client_id < 0 || client_id >= state.num_clients) {
            throw std::invalid_argument("client id out of range for directive");
        }
        const ParamVector& c_i = state.client_c[static_cast<std::size_t>(client_id)];
        ParamVector corr(state.param_dim);
        for (std::size_t i = 0; i < state.param_dim; ++i) corr[i] = state.server_c[i] - c_i[i];
        d.correction = std::move(corr);
    }
    return d;
}

ParamVector fold_round(StrategyState& state, const ParamVector& global,
                       std::vector<ClientUpdate> updates) {
    if (global.size() != state.param_dim) {
        throw std::invalid_argument("global model length does not match strategy state");
    }
    std::sort(updates.begin(), updates.end(),
              [](const ClientUpdate& a, const ClientUpdate& b) { return a.client_id < b.client_id; });
    ParamVector next;
    switch (state.kind) {
        case StrategyKind::kFedAvg:
        case StrategyKind::kFedProx:
            next = aggregate_fedavg(global, updates);
            break;
        case StrategyKind::kScaffold: {
            ScaffoldServerResult r = scaffold_server_update(global, updates, state.hyper.global_lr,
                                                            state.num_clients, state.server_c);
            next = std::move(r.params);
            state.server_c = std::move(r.server_c);
            for (const ClientUpdate& u : updates) {
                if (u.client_id < 0 || u.client_id >= state.num_clients) {
                    throw std::invalid_argument("client id out of range in update");
                }
                ParamVector& c_i = state.client_c[static_cast<std::size_t>(u.client_id)];
                for (std::size_t i = 0; i < c_i.size(); ++i) c_i[i] += (*u.control_delta)[i];
            }
            break;
        }
        case StrategyKind::kFedAdam: {
            FedAdamResult r = fedadam_server_step(global, updates, state.m, state.v, state.hyper);
            next = std::move(r.params);
            state.m = std::move(r.m);
            state.v = std::move(r.v);
            break;
        }
    }
    state.round_index += 1;
    return next;
}

void hot_swap(StrategyState& state, StrategyKind new_kind) {
    if (state.round_open) throw std::runtime_error("swap only at round boundary");
    StrategyState fresh =
        init_strategy_state(new_kind, state.hyper, state.param_dim, state.num_clients);
    fresh.round_index = state.round_index;
    state = std::move(fresh);
}

}  // namespace fedlad
