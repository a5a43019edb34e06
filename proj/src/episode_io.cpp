#include "gridagent/episode_io.hpp"

#include <cstring>
#include <iterator>

#include <zlib.h>

namespace gridagent {

namespace {

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out.insert(out.end(), s.begin(), s.end());
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  Reader(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {}
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw ShardError("record truncated");
  }
  std::uint64_t uint(int bytes) {
    need(static_cast<std::size_t>(bytes));
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(data_[pos_ + static_cast<std::size_t>(i)]) << (8 * i);
    pos_ += static_cast<std::size_t>(bytes);
    return v;
  }
  std::uint8_t u8() { return static_cast<std::uint8_t>(uint(1)); }
  std::uint16_t u16() { return static_cast<std::uint16_t>(uint(2)); }
  std::uint32_t u32() { return static_cast<std::uint32_t>(uint(4)); }
  std::uint64_t u64() { return uint(8); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
    pos_ += n;
    return s;
  }
  void bytes(std::uint8_t* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_ + pos_, n);
    pos_ += n;
  }
  std::size_t pos() const { return pos_; }

 private:
  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

std::uint32_t checksum(const std::uint8_t* data, std::size_t n) {
  return static_cast<std::uint32_t>(crc32(crc32(0L, Z_NULL, 0), data, static_cast<uInt>(n)));
}

std::vector<std::uint8_t> encode_episode(const Episode& ep) {
  Writer w;
  w.str(ep.goal_id);
  w.str(ep.instruction);
  w.u64(ep.seed);
  w.u8(ep.success ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(ep.steps.size()));
  const int radius = ep.steps.empty() ? 0 : ep.steps.front().obs.radius;
  w.u8(static_cast<std::uint8_t>(radius));
  const std::size_t cells = static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1));
  for (const auto& s : ep.steps) {
    if (s.obs.radius != radius || s.obs.window.size() != cells) throw ShardError("inconsistent observation window");
    if (s.action < 0 || s.action > 0xFFFF) throw ShardError("action id does not fit the record format");
    w.out.insert(w.out.end(), s.obs.window.begin(), s.obs.window.end());
    w.u8(s.obs.facing);
    w.u8(s.obs.held_tool);
    w.out.insert(w.out.end(), s.obs.inventory.begin(), s.obs.inventory.end());
    w.u16(static_cast<std::uint16_t>(s.action));
  }
  return std::move(w.out);
}

Episode decode_episode(Reader& r) {
  Episode ep;
  ep.goal_id = r.str();
  ep.instruction = r.str();
  ep.seed = r.u64();
  ep.success = r.u8() != 0;
  const auto n = r.u32();
  const int radius = r.u8();
  const std::size_t cells = static_cast<std::size_t>((2 * radius + 1) * (2 * radius + 1));
  ep.steps.resize(n);
  for (auto& s : ep.steps) {
    s.obs.radius = radius;
    s.obs.window.resize(cells);
    r.bytes(s.obs.window.data(), cells);
    s.obs.facing = r.u8();
    s.obs.held_tool = r.u8();
    r.bytes(s.obs.inventory.data(), s.obs.inventory.size());
    s.action = r.u16();
  }
  return ep;
}

// Validates magic, version and checksum; returns the episode count.
std::uint32_t check_shard(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 20) throw ShardError("shard truncated: " + std::to_string(bytes.size()) + " bytes");
  if (std::memcmp(bytes.data(), kShardMagic, sizeof(kShardMagic)) != 0) throw ShardError("bad shard magic");
  const std::size_t body = bytes.size() - 4;
  Reader tail(bytes.data() + body, 4);
  if (tail.u32() != checksum(bytes.data(), body)) throw ShardError("shard checksum mismatch (corrupt or truncated)");
  Reader head(bytes.data() + 8, 8);
  const auto version = head.u32();
  if (version != kShardVersion) {
    throw ShardError("shard version " + std::to_string(version) + " unsupported (expected " +
                     std::to_string(kShardVersion) + ")");
  }
  return head.u32();
}

}  // namespace

std::vector<std::uint8_t> encode_shard(const std::vector<Episode>& episodes) {
  Writer w;
  w.out.insert(w.out.end(), std::begin(kShardMagic), std::end(kShardMagic));
  w.u32(kShardVersion);
  w.u32(static_cast<std::uint32_t>(episodes.size()));
  for (const auto& ep : episodes) {
    auto rec = encode_episode(ep);
    w.u32(static_cast<std::uint32_t>(rec.size()));
    w.out.insert(w.out.end(), rec.begin(), rec.end());
  }
  w.u32(checksum(w.out.data(), w.out.size()));
  return std::move(w.out);
}

std::vector<Episode> decode_shard(const std::vector<std::uint8_t>& bytes) {
  const auto count = check_shard(bytes);
  Reader r(bytes.data() + 16, bytes.size() - 20);
  std::vector<Episode> out;
  out.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.u32();
    const auto start = r.pos();
    out.push_back(decode_episode(r));
    if (r.pos() - start != len) throw ShardError("record length mismatch at episode " + std::to_string(i));
  }
  return out;
}

void write_shard(const std::filesystem::path& path, const std::vector<Episode>& episodes) {
  const auto bytes = encode_shard(episodes);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ShardError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ShardError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

ShardReader::ShardReader(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ShardError("cannot open shard " + path.string());
  bytes_.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  count_ = check_shard(bytes_);
  offset_ = 16;
}

bool ShardReader::next(Episode& out) {
  if (read_ >= count_) return false;
  Reader r(bytes_.data() + offset_, bytes_.size() - 4 - offset_);
  const auto len = r.u32();
  out = decode_episode(r);
  if (r.pos() != len + 4) throw ShardError("record length mismatch at episode " + std::to_string(read_));
  offset_ += r.pos();
  ++read_;
  return true;
}

std::vector<Episode> read_shard(const std::filesystem::path& path) {
  ShardReader reader(path);
  std::vector<Episode> out;
  Episode ep;
  while (reader.next(ep)) out.push_back(std::move(ep));
  return out;
}

}  // namespace gridagent
