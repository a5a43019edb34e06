#include "gridagent/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace gridagent {

namespace {

constexpr char kArchiveMagic[8] = {'G', 'A', 'C', 'K', 'P', 'T', '0', '1'};

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw CheckpointError("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

}  // namespace

Param& ParamStore::add(const std::string& name, Mat init, bool trainable) {
  if (params_.count(name)) throw Error("duplicate parameter " + name);
  Param& p = params_[name];
  p.name = name;
  p.grad = Mat::Zero(init.rows(), init.cols());
  p.value = std::move(init);
  p.trainable = trainable;
  return p;
}

Param& ParamStore::get(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

const Param& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error("unknown parameter " + name);
  return it->second;
}

void ParamStore::zero_grad() {
  for (auto& [_, p] : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

void ParamStore::set_trainable(const std::string& prefix, bool trainable) {
  for (auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) == 0) p.trainable = trainable;
  }
}

std::vector<Param*> ParamStore::trainable() {
  std::vector<Param*> out;
  for (auto& [_, p] : params_) {
    if (p.trainable) out.push_back(&p);
  }
  return out;
}

std::size_t ParamStore::size() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

double ParamStore::grad_norm() const {
  double s = 0.0;
  for (const auto& [_, p] : params_) {
    if (p.trainable && p.grad.size()) s += p.grad.squaredNorm();
  }
  return std::sqrt(s);
}

std::uint64_t ParamStore::hash(const std::string& prefix) const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (const auto& [name, p] : params_) {
    if (name.rfind(prefix, 0) != 0) continue;
    mix(name.data(), name.size());
    mix(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  return h;
}

bool ParamStore::all_finite() const {
  for (const auto& [_, p] : params_) {
    if (!p.value.allFinite()) return false;
  }
  return true;
}

double normal01(Rng& rng) {
  // Box-Muller; avoids implementation-defined std::normal_distribution output.
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

Mat normal_mat(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng) {
  Mat m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = stddev * normal01(rng);
  return m;
}

void save_archive(const std::filesystem::path& path, const Archive& archive) {
  nlohmann::json header;
  header["format_version"] = 1;
  header["meta"] = archive.meta;
  auto list = nlohmann::json::array();
  for (const auto& [name, m] : archive.tensors) list.push_back({{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}});
  header["tensors"] = list;
  const std::string text = header.dump();

  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write " + tmp.string());
    out.write(kArchiveMagic, sizeof(kArchiveMagic));
    put_u64(out, text.size());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    for (const auto& [_, m] : archive.tensors) {
      for (Eigen::Index i = 0; i < m.size(); ++i) {
        std::uint64_t bits;
        std::memcpy(&bits, m.data() + i, sizeof(bits));
        put_u64(out, bits);
      }
    }
    if (!out) throw CheckpointError("write failed: " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Archive load_archive(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0) throw CheckpointError("bad checkpoint magic in " + path.string());
  const auto len = get_u64(in);
  if (len > (1ULL << 30)) throw CheckpointError("implausible checkpoint header size");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw CheckpointError("checkpoint truncated");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  if (header.value("format_version", 0) != 1) throw CheckpointError("unsupported checkpoint version");
  Archive a;
  a.meta = header.at("meta");
  for (const auto& t : header.at("tensors")) {
    Mat m(t.at("rows").get<Eigen::Index>(), t.at("cols").get<Eigen::Index>());
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      const std::uint64_t bits = get_u64(in);
      std::memcpy(m.data() + i, &bits, sizeof(bits));
    }
    a.tensors.emplace(t.at("name").get<std::string>(), std::move(m));
  }
  in.peek();
  if (!in.eof()) throw CheckpointError("trailing bytes in checkpoint " + path.string());
  return a;
}

}  // namespace gridagent
