#pragma once

#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gridagent/items.hpp"

namespace gridagent {

// Flat "section.key = value" store read from INI-style text. Keys keep their
// section prefix so every consumer addresses them the same way.
class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig load(const std::filesystem::path& path);
  static KeyValueConfig parse(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  // Applies "section.key=value" strings, as given on a command line.
  void apply_overrides(const std::vector<std::string>& overrides);
  void merge(const KeyValueConfig& other);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Throws ConfigError naming every key not present in `known`.
  void reject_unknown(const std::set<std::string>& known) const;
  // Keys under "prefix." (prefix stripped is not applied).
  std::vector<std::string> keys_with_prefix(const std::string& prefix) const;

  // Canonical text form: sections sorted, keys sorted.
  std::string dump() const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

// "log:3, plank:2" -> inventory counts.
Inventory parse_inventory(const std::string& text);
std::string inventory_to_config(const Inventory& inv);

}  // namespace gridagent
