#pragma once

// Binary time-tag files and their JSON run sidecar.
//
// Layout (little-endian): magic "PTAG", version u16, channel_id u8, count u64,
// then `count` unsigned 64-bit picosecond timestamps.

#include <cstdint>
#include <string>
#include <vector>

#include "fwm/source.hpp"

namespace fwm {

inline constexpr std::uint16_t kTagFileVersion = 1;

void write_tag_file(const std::string& path, const TagStream& stream);
TagStream read_tag_file(const std::string& path);

// Run metadata stored next to the tag files so an analysis can be reproduced
// without the original command line.
struct RunSidecar {
  std::uint64_t seed = 0;
  std::string config_hash;           // hash of the generating configuration
  std::uint64_t n_pulses = 0;
  std::int64_t duration_ps = 0;
  std::int64_t pulse_period_ps = 0;
  double power_mw = 0.0;
  std::vector<std::string> tag_files;  // one per channel, in channel order
};

void write_sidecar(const std::string& path, const RunSidecar& sidecar);
RunSidecar read_sidecar(const std::string& path);

}  // namespace fwm
