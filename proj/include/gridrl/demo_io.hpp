#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace gridrl {

// Demonstration file, magic "SVRD": u32 version, u32 record count, then per
// record: u64 scenario seed, u32 task id, u32 token count, u16 tokens,
// u8 success. All little-endian.
inline constexpr char kDemoMagic[4] = {'S', 'V', 'R', 'D'};
inline constexpr std::uint32_t kDemoVersion = 1;

struct DemoRecord {
  std::uint64_t scenario_seed = 0;
  int task_id = 0;
  std::vector<int> tokens;
  bool success = true;
};

void save_demos(const std::string& path, const std::vector<DemoRecord>& demos);
std::vector<DemoRecord> load_demos(const std::string& path);

}  // namespace gridrl
