#pragma once

#include <optional>
#include <string>

#include "gridrl/policy.hpp"

namespace gridrl {

// Checkpoint file, magic "SVRL": u32 format version, u32 tensor count, then
// per tensor: u32 name length, UTF-8 name, u32 rank, u32 dims, row-major
// float32 data. All integers and floats little-endian. Optimizer state lives
// under the "opt/" name prefix. Writes are atomic (temp file + rename).
inline constexpr char kCheckpointMagic[4] = {'S', 'V', 'R', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const std::string& path, const PolicyParams& params,
                     const AdamState* opt_state = nullptr);

struct Checkpoint {
  PolicyParams params;
  std::optional<AdamState> opt_state;
};

Checkpoint load_checkpoint(const std::string& path);

}  // namespace gridrl
