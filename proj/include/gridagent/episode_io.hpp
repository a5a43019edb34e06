#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "gridagent/env.hpp"

namespace gridagent {

class ShardError : public Error {
 public:
  using Error::Error;
};

struct Step {
  Observation obs;
  ActionId action = action::noop;  // taken after observing `obs`
  bool operator==(const Step&) const = default;
};

struct Episode {
  std::string goal_id;
  std::string instruction;
  std::uint64_t seed = 0;
  bool success = false;
  std::vector<Step> steps;

  int length() const { return static_cast<int>(steps.size()); }
  bool operator==(const Episode&) const = default;
};

inline constexpr char kShardMagic[8] = {'G', 'A', 'S', 'H', 'A', 'R', 'D', '\0'};
inline constexpr std::uint32_t kShardVersion = 1;

// Layout (all integers little-endian):
//   magic[8] | u32 version | u32 episode count
//   per episode: u32 byte length | record
//   u32 crc32 of everything before it
std::vector<std::uint8_t> encode_shard(const std::vector<Episode>& episodes);
std::vector<Episode> decode_shard(const std::vector<std::uint8_t>& bytes);

// Writes through a temporary file and renames, so readers never see a partial shard.
void write_shard(const std::filesystem::path& path, const std::vector<Episode>& episodes);

// Verifies header and checksum on open, then yields episodes one at a time.
class ShardReader {
 public:
  explicit ShardReader(const std::filesystem::path& path);
  bool next(Episode& out);
  std::uint32_t count() const { return count_; }

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t offset_ = 0;
  std::uint32_t count_ = 0;
  std::uint32_t read_ = 0;
};

std::vector<Episode> read_shard(const std::filesystem::path& path);

}  // namespace gridagent
