#ifndef FEDLAD_STRATEGY_HPP
#define FEDLAD_STRATEGY_HPP

#include <optional>
#include <string>
#include <vector>

#include "fedlad/common.hpp"

namespace fedlad {

enum class StrategyKind { kFedAvg, kFedProx, kScaffold, kFedAdam };

std::string strategy_name(StrategyKind kind);
StrategyKind strategy_from_name(const std::string& name);

struct StrategyHyper {
    double mu = 0.0;         // proximal coefficient
    double eta = 0.1;        // adaptive server step size
    double beta1 = 0.9;      // first-moment decay
    double beta2 = 0.99;     // second-moment decay
    double tau = 1e-3;       // adaptivity floor
    double global_lr = 1.0;  // control-variate server step
};

struct ClientUpdate {
    int client_id = 0;
    ParamVector params;  // post-training local model
    long long num_samples = 1;
    std::optional<ParamVector> control_delta;  // scaffold only
};

struct LocalTrainingDirective {
    StrategyKind kind = StrategyKind::kFedAvg;
    int epochs = 1;
    double lr = 0.1;
    int batch_size = 32;
    double prox_mu = 0.0;                      // > 0 only under fedprox
    std::optional<ParamVector> correction;     // scaffold only: server_c - client_c
};

// Exactly the fields of the active kind are populated; the rest stay empty.
struct StrategyState {
    StrategyKind kind = StrategyKind::kFedAvg;
    StrategyHyper hyper;
    std::size_t param_dim = 0;
    int num_clients = 0;
    ParamVector server_c;                  // scaffold
    std::vector<ParamVector> client_c;     // scaffold, indexed by client id
    ParamVector m;                         // fedadam first moment
    ParamVector v;                         // fedadam second moment
    int round_index = 0;
    bool round_open = false;
};

StrategyState init_strategy_state(StrategyKind kind, const StrategyHyper& hyper,
                                  std::size_t param_dim, int num_clients);

// Weighted mean Σ_k (n_k/N)·params_k. Throws "no clients reported" on an empty list.
ParamVector aggregate_fedavg(const ParamVector& global, const std::vector<ClientUpdate>& updates);

// base_loss + (μ/2)·‖params − global‖²; add_prox_grad applies the matching μ·(p − g) term.
double local_objective_fedprox(double base_loss, const ParamVector& params,
                               const ParamVector& global_params, double mu);
void add_prox_grad(ParamVector& grad, const ParamVector& params,
                   const ParamVector& global_params, double mu);

// params − lr·(grad − client_c + server_c)
ParamVector scaffold_local_step(const ParamVector& params, const ParamVector& grad, double lr,
                                const ParamVector& server_c, const ParamVector& client_c);

// Control update (Option II): c_i+ = c_i − c + (x − y_i)/(K·lr); carries delta = c_i+ − c_i.
ClientUpdate scaffold_client_finalize(int client_id, long long num_samples, const ParamVector& y_i,
                                      const ParamVector& x, const ParamVector& server_c,
                                      const ParamVector& client_c, double lr, int local_steps);

struct ScaffoldServerResult {
    ParamVector params;    // x′ = x + (global_lr/S)·Σ(y_i − x)
    ParamVector server_c;  // c′ = c + (1/M)·Σ control_delta_i
};
ScaffoldServerResult scaffold_server_update(const ParamVector& x,
                                            const std::vector<ClientUpdate>& updates,
                                            double global_lr, int total_clients,
                                            const ParamVector& server_c);

struct FedAdamResult {
    ParamVector params;
    ParamVector m;
    ParamVector v;
};
// Δ = weighted_mean(y) − x; m′ = β1·m + (1−β1)·Δ; v′ = β2·v + (1−β2)·Δ²;
// x′ = x + η·m′/(√v′ + τ). No bias correction.
FedAdamResult fedadam_server_step(const ParamVector& x, const std::vector<ClientUpdate>& updates,
                                  const ParamVector& m, const ParamVector& v,
                                  const StrategyHyper& hyper);

LocalTrainingDirective make_directive(const StrategyState& state, int client_id, int epochs,
                                      double lr, int batch_size);

// Folds one round of updates (sorted ascending by client_id first) through the
// active strategy and advances any strategy-owned state. Returns the new global.
ParamVector fold_round(StrategyState& state, const ParamVector& global,
                       std::vector<ClientUpdate> updates);

// Swap kinds between rounds: fresh zero-initialized strategy state, hypers and
// round_index kept. Throws "swap only at round boundary" while a round is open.
void hot_swap(StrategyState& state, StrategyKind new_kind);

}  // namespace fedlad

#endif  // FEDLAD_STRATEGY_HPP
