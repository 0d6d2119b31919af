#include "fedlad/executor.hpp"

#include <stdexcept>

namespace fedlad {

namespace {

bool switches_remain(const ExecutorState& state, const AdaptationPolicy& policy) {
    if (!policy.enable_switch) return false;
    if (policy.switch_chain.empty()) return false;
    return state.switches_used + 1 < static_cast<int>(policy.switch_chain.size());
}

StrategyKind next_in_chain(const ExecutorState& state, const AdaptationPolicy& policy) {
    return policy.switch_chain[static_cast<std::size_t>(state.switches_used) + 1];
}

}  // namespace

std::string phase_name(Phase phase) {
    switch (phase) {
        case Phase::kWarmup: return "warmup";
        case Phase::kSteady: return "steady";
        case Phase::kStagnant: return "stagnant";
        case Phase::kSwitched: return "switched";
        case Phase::kStopped: return "stopped";
    }
    throw std::logic_error("unknown phase");
}

std::string trigger_name(Trigger trigger) {
    switch (trigger) {
        case Trigger::kNone: return "none";
        case Trigger::kStagnation: return "stagnation";
        case Trigger::kF1Drop: return "f1_drop";
    }
    throw std::logic_error("unknown trigger");
}

std::string decision_string(const Decision& d) {
    switch (d.kind) {
        case Decision::Kind::kContinue: return "continue";
        case Decision::Kind::kSwitch: return "switch:" + strategy_name(d.switch_to);
        case Decision::Kind::kEarlyStop: return "early_stop:" + d.reason;
    }
    throw std::logic_error("unknown decision kind");
}

ExecutorState reset_after_switch(ExecutorState state) {
    state.rounds_since_improve = 0;
    state.switches_used += 1;
    state.phase = Phase::kSwitched;
    return state;
}

Observation observe(const ExecutorState& state, const AdaptationPolicy& policy, int round,
                    double f1) {
    if (state.phase == Phase::kStopped) {
        throw std::logic_error("observe called after stop");
    }
    if (policy.patience < 1) throw std::invalid_argument("patience must be >= 1");
    if (policy.enable_switch && policy.switch_chain.empty()) {
        throw std::invalid_argument("switch chain must be nonempty when switching is enabled");
    }
    if (round != state.last_round + 1) {
        throw std::invalid_argument("rounds must be observed consecutively");
    }

    Observation out;
    out.state = state;
    out.state.last_round = round;
    out.event.round = round;
    out.event.from_phase = state.phase;
    out.event.f1 = f1;

    if (f1 < state.best_f1 - policy.f1_drop_delta && switches_remain(state, policy)) {
        out.decision.kind = Decision::Kind::kSwitch;
        out.decision.switch_to = next_in_chain(state, policy);
        out.event.trigger = Trigger::kF1Drop;
        out.state = reset_after_switch(out.state);
    } else if (f1 > state.best_f1 + policy.min_improve) {
        out.state.best_f1 = f1;
        out.state.best_round = round;
        out.state.rounds_since_improve = 0;
        out.state.phase = Phase::kSteady;
    } else {
        out.state.rounds_since_improve += 1;
        if (out.state.rounds_since_improve >= policy.patience) {
            out.event.trigger = Trigger::kStagnation;
            if (switches_remain(state, policy)) {
                out.decision.kind = Decision::Kind::kSwitch;
                out.decision.switch_to = next_in_chain(state, policy);
                out.state = reset_after_switch(out.state);
            } else if (policy.enable_early_stop) {
                out.decision.kind = Decision::Kind::kEarlyStop;
                out.decision.reason = "stagnation";
                out.state.phase = Phase::kStopped;
            } else {
                out.state.phase = Phase::kStagnant;
            }
        } else {
            out.state.phase = Phase::kStagnant;
        }
    }

    out.event.to_phase = out.state.phase;
    out.event.decision = out.decision;
    out.event.best_f1 = out.state.best_f1;
    return out;
}

}  // namespace fedlad
