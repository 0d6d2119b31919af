#ifndef FEDLAD_SYNTH_HPP
#define FEDLAD_SYNTH_HPP

#include <cstdint>
#include <string>

#include "fedlad/common.hpp"

namespace fedlad {

// separable: anomalous sessions inject a burst of rare templates
// noisy:     separable plus ~2% of sessions with flipped anomaly marks
// drift:     first and second corpus halves walk different template chains
enum class SynthProfile { kSeparable, kNoisy, kDrift };

std::string synth_profile_name(SynthProfile profile);
SynthProfile synth_profile_from_name(const std::string& name);

struct SynthOptions {
    SynthProfile profile = SynthProfile::kSeparable;
    int size = 10000;  // sessions; each session emits exactly 10 lines
    std::uint64_t seed = 7;
};

// Raw log text: "<mark> <lineno> <node> <message>" per line, mark "-" for
// normal lines. ~5% of sessions are anomalous. Deterministic in the options.
std::string generate_corpus(const SynthOptions& options);

void write_corpus(const std::string& path, const SynthOptions& options);

}  // namespace fedlad

#endif  // FEDLAD_SYNTH_HPP
