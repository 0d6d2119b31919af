#ifndef FEDLAD_CHECKPOINT_HPP
#define FEDLAD_CHECKPOINT_HPP

#include <string>

#include "fedlad/common.hpp"
#include "fedlad/model.hpp"

namespace fedlad {

// Binary layout (little-endian, 32-byte header):
//   "FLAD" | u32 version=1 | u32 kind | u32 vocab | u32 hidden | u32 window | u64 count
// followed by count IEEE-754 doubles. A human-readable JSON twin is written
// next to the binary with the extension swapped to ".json".
struct Checkpoint {
    ModelSpec spec;
    ParamVector params;
};

void save_checkpoint(const std::string& path, const ModelSpec& spec, const ParamVector& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace fedlad

#endif  // FEDLAD_CHECKPOINT_HPP
