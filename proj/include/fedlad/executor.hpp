#ifndef FEDLAD_EXECUTOR_HPP
#define FEDLAD_EXECUTOR_HPP

#include <string>
#include <vector>

#include "fedlad/strategy.hpp"

namespace fedlad {

struct AdaptationPolicy {
    int patience = 5;               // stagnation rounds before acting
    double f1_drop_delta = 0.05;    // regression threshold on F1
    double min_improve = 1e-4;      // improvement deadband
    std::vector<StrategyKind> switch_chain;  // first entry is the starting strategy
    bool enable_early_stop = false;
    bool enable_switch = false;
};

enum class Phase { kWarmup, kSteady, kStagnant, kSwitched, kStopped };
enum class Trigger { kNone, kStagnation, kF1Drop };

std::string phase_name(Phase phase);
std::string trigger_name(Trigger trigger);

struct ExecutorState {
    Phase phase = Phase::kWarmup;
    double best_f1 = -1.0;
    int best_round = 0;
    int rounds_since_improve = 0;
    int switches_used = 0;
    int last_round = 0;
};

struct Decision {
    enum class Kind { kContinue, kSwitch, kEarlyStop };
    Kind kind = Kind::kContinue;
    StrategyKind switch_to = StrategyKind::kFedAvg;  // kSwitch only
    std::string reason;                              // kEarlyStop only
};

std::string decision_string(const Decision& d);

struct AdaptationEvent {
    int round = 0;
    Phase from_phase = Phase::kWarmup;
    Phase to_phase = Phase::kWarmup;
    Decision decision;
    Trigger trigger = Trigger::kNone;
    double f1 = 0.0;
    double best_f1 = 0.0;
};

struct Observation {
    ExecutorState state;
    Decision decision;
    AdaptationEvent event;
};

// One FSM step per round, rules in priority order:
//   1. f1 regressed past best − δ and a switch remains  -> SWITCH (F1_DROP)
//   2. f1 beats best + deadband                          -> best update, CONTINUE
//   3. stagnation counter hits patience                  -> SWITCH (STAGNATION),
//      else EARLY_STOP("stagnation"), else keep counting
// Pure in (state, policy, round, f1); throws if called after a stop.
Observation observe(const ExecutorState& state, const AdaptationPolicy& policy, int round,
                    double f1);

// Applied automatically by observe when it issues a SWITCH; exposed for reuse.
ExecutorState reset_after_switch(ExecutorState state);

}  // namespace fedlad

#endif  // FEDLAD_EXECUTOR_HPP
