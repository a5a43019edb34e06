#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

#include "gridagent/autodiff.hpp"
#include "gridagent/items.hpp"
#include "gridagent/random.hpp"

namespace gridagent {

class CheckpointError : public Error {
 public:
  using Error::Error;
};

// Named parameter tensors. std::map keeps addresses stable and iteration
// order canonical, which the archive format and hashing rely on.
class ParamStore {
 public:
  Param& add(const std::string& name, Mat init, bool trainable = true);
  Param& get(const std::string& name);
  const Param& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) != 0; }

  std::map<std::string, Param>& all() { return params_; }
  const std::map<std::string, Param>& all() const { return params_; }

  void zero_grad();
  void set_trainable(const std::string& prefix, bool trainable);
  std::vector<Param*> trainable();
  std::size_t size() const;  // scalar count
  double grad_norm() const;
  // FNV-1a over names and raw value bytes of every tensor under `prefix`.
  std::uint64_t hash(const std::string& prefix = "") const;
  bool all_finite() const;

 private:
  std::map<std::string, Param> params_;
};

// Deterministic initializers on top of the portable RNG helpers.
double normal01(Rng& rng);
Mat normal_mat(Eigen::Index rows, Eigen::Index cols, double stddev, Rng& rng);

// Archive: "GACKPT01" | u64 header length | JSON header | little-endian doubles.
// The header lists tensors in payload order with their shapes, plus `meta`.
struct Archive {
  nlohmann::json meta;
  std::map<std::string, Mat> tensors;
};

void save_archive(const std::filesystem::path& path, const Archive& archive);
Archive load_archive(const std::filesystem::path& path);

}  // namespace gridagent
