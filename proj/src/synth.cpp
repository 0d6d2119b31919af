#include "fedlad/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>
#include <vector>

namespace fedlad {

namespace {

constexpr int kSessionLines = 10;
constexpr int kBurstStart = 3;
constexpr int kBurstEnd = 7;  // exclusive

// '#' slots are filled with random integers so masking has work to do
const char* const kNormalMessages[] = {
    "instruction cache parity error corrected, count #",
    "generating core.# for program #",
    "ciod: message code # is not #",
    "data TLB error interrupt at 0xfeed#",
    "total of # ddr errors detected and corrected",
    "ce sym #, at 0x0b85eee0, mask 0x05",
    "ddr errors detected and corrected on rank #, symbol #",
    "program interrupt: fp unavailable unit #",
    "memory manager released # pages",
    "ciod: received control stream message for job #",
    "lustre mount completed for /bgl/home# in # ms",
    "network retransmit budget # restored",
};
constexpr int kNormalCount = 12;

const char* const kBurstMessages[] = {
    "kernel panic at address 0xdeadbeef, code #",
    "machine check interrupt storm, level #",
    "rts tree fail on /bgl/ion/node#",
};
constexpr int kBurstCount = 3;

struct Chain {
    std::vector<int> states;                  // indices into kNormalMessages
    std::vector<std::vector<double>> cumrow;  // cumulative transition rows
};

Chain build_chain(const std::vector<int>& states, Rng& rng) {
    Chain chain;
    chain.states = states;
    std::uniform_real_distribution<double> uni(0.1, 1.0);
    chain.cumrow.resize(states.size());
    for (std::size_t i = 0; i < states.size(); ++i) {
        std::vector<double>& row = chain.cumrow[i];
        row.resize(states.size());
        double total = 0.0;
        for (double& w : row) {
            w = uni(rng);
            total += w;
        }
        double cum = 0.0;
        for (double& w : row) {
            cum += w / total;
            w = cum;
        }
        row.back() = 1.0;
    }
    return chain;
}

int chain_step(const Chain& chain, int state_pos, Rng& rng) {
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    const double u = uni(rng);
    const std::vector<double>& row = chain.cumrow[static_cast<std::size_t>(state_pos)];
    for (std::size_t j = 0; j < row.size(); ++j) {
        if (u <= row[j]) return static_cast<int>(j);
    }
    return static_cast<int>(row.size()) - 1;
}

std::string fill_slots(const std::string& tpl, Rng& rng) {
    std::string out;
    out.reserve(tpl.size() + 8);
    std::uniform_int_distribution<int> num(1, 99999);
    for (char c : tpl) {
        if (c == '#') {
            out += std::to_string(num(rng));
        } else {
            out += c;
        }
    }
    return out;
}

std::vector<bool> pick_sessions(int size, int count, Rng& rng) {
    std::vector<int> ids(static_cast<std::size_t>(size));
    std::iota(ids.begin(), ids.end(), 0);
    std::shuffle(ids.begin(), ids.end(), rng);
    std::vector<bool> picked(static_cast<std::size_t>(size), false);
    for (int i = 0; i < count; ++i) picked[static_cast<std::size_t>(ids[static_cast<std::size_t>(i)])] = true;
    return picked;
}

}  // namespace

std::string synth_profile_name(SynthProfile profile) {
    switch (profile) {
        case SynthProfile::kSeparable: return "separable";
        case SynthProfile::kNoisy: return "noisy";
        case SynthProfile::kDrift: return "drift";
    }
    throw std::logic_error("unknown synth profile");
}

SynthProfile synth_profile_from_name(const std::string& name) {
    if (name == "separable") return SynthProfile::kSeparable;
    if (name == "noisy") return SynthProfile::kNoisy;
    if (name == "drift") return SynthProfile::kDrift;
    throw ConfigError("unknown synth profile: " + name);
}

std::string generate_corpus(const SynthOptions& options) {
    if (options.size < 100) throw ConfigError("synth size must be ≥ 100");
    Rng rng(options.seed);

    std::vector<int> front_states, back_states, all_states;
    for (int i = 0; i < 8; ++i) front_states.push_back(i);
    for (int i = 4; i < 12; ++i) back_states.push_back(i);
    for (int i = 0; i < kNormalCount; ++i) all_states.push_back(i);

    Chain chain_a, chain_b;
    if (options.profile == SynthProfile::kDrift) {
        chain_a = build_chain(front_states, rng);
        chain_b = build_chain(back_states, rng);
    } else {
        chain_a = build_chain(all_states, rng);
        chain_b = chain_a;
    }

    const int anomalous_count = static_cast<int>(std::llround(0.05 * options.size));
    const std::vector<bool> anomalous = pick_sessions(options.size, anomalous_count, rng);
    std::vector<bool> flipped(static_cast<std::size_t>(options.size), false);
    if (options.profile == SynthProfile::kNoisy) {
        const int noise_count = static_cast<int>(std::llround(0.02 * options.size));
        flipped = pick_sessions(options.size, noise_count, rng);
    }

    std::string out;
    out.reserve(static_cast<std::size_t>(options.size) * kSessionLines * 60);
    std::uniform_int_distribution<int> burst_pick(0, kBurstCount - 1);
    long long lineno = 0;

    for (int s = 0; s < options.size; ++s) {
        const bool second_half = s >= options.size / 2;
        const Chain& chain = second_half ? chain_b : chain_a;
        std::uniform_int_distribution<int> start_pick(0, static_cast<int>(chain.states.size()) - 1);
        int pos = start_pick(rng);
        const bool anomaly_content = anomalous[static_cast<std::size_t>(s)];
        // a flipped session keeps its content but reports the opposite mark
        const bool marked_anomalous = anomaly_content != flipped[static_cast<std::size_t>(s)];

        for (int i = 0; i < kSessionLines; ++i) {
            ++lineno;
            const bool burst_line = anomaly_content && i >= kBurstStart && i < kBurstEnd;
            std::string message;
            if (burst_line) {
                message = fill_slots(kBurstMessages[burst_pick(rng)], rng);
            } else {
                pos = chain_step(chain, pos, rng);
                message =
                    fill_slots(kNormalMessages[chain.states[static_cast<std::size_t>(pos)]], rng);
            }
            const bool mark_line = marked_anomalous && (anomaly_content
                                                            ? (i >= kBurstStart && i < kBurstEnd)
                                                            : true);
            out += mark_line ? "FAIL" : "-";
            out += ' ';
            out += std::to_string(lineno);
            out += " node-";
            out += std::to_string(s % 64);
            out += ' ';
            out += message;
            out += '\n';
        }
    }
    return out;
}

void write_corpus(const std::string& path, const SynthOptions& options) {
    std::ofstream out(path, std::ios::trunc | std::ios::binary);
    if (!out) throw std::runtime_error("cannot open corpus file for writing: " + path);
    out << generate_corpus(options);
}

}  // namespace fedlad
