#include "gridagent/config.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <sstream>

namespace gridagent {

namespace pt = boost::property_tree;

namespace {

KeyValueConfig from_ptree(const pt::ptree& tree) {
  KeyValueConfig cfg;
  for (const auto& [section, body] : tree) {
    if (body.empty()) {
      cfg.set(section, body.data());
      continue;
    }
    for (const auto& [key, value] : body) {
      if (!value.empty()) throw ConfigError("nested key not supported: " + section + "." + key);
      cfg.set(section + "." + key, boost::trim_copy(value.data()));
    }
  }
  return cfg;
}

}  // namespace

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

KeyValueConfig KeyValueConfig::parse(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_ptree(tree);
}

const std::string& KeyValueConfig::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key: " + key);
  return it->second;
}

void KeyValueConfig::apply_overrides(const std::vector<std::string>& overrides) {
  for (const auto& item : overrides) {
    auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("override must be key=value: " + item);
    set(boost::trim_copy(item.substr(0, eq)), boost::trim_copy(item.substr(eq + 1)));
  }
}

void KeyValueConfig::merge(const KeyValueConfig& other) {
  for (const auto& [k, v] : other.values_) values_[k] = v;
}

std::string KeyValueConfig::get_string(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    long long v = std::stoll(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected integer for " + key + ": '" + it->second + "'");
  }
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("expected number for " + key + ": '" + it->second + "'");
  }
}

bool KeyValueConfig::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::string v = boost::to_lower_copy(it->second);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("expected boolean for " + key + ": '" + it->second + "'");
}

void KeyValueConfig::reject_unknown(const std::set<std::string>& known) const {
  std::vector<std::string> unknown;
  for (const auto& [k, v] : values_) {
    if (!known.count(k)) unknown.push_back(k);
  }
  if (!unknown.empty()) throw ConfigError("unknown config keys: " + boost::join(unknown, ", "));
}

std::vector<std::string> KeyValueConfig::keys_with_prefix(const std::string& prefix) const {
  std::vector<std::string> out;
  for (const auto& [k, v] : values_) {
    if (k.rfind(prefix + ".", 0) == 0) out.push_back(k);
  }
  return out;
}

std::string KeyValueConfig::dump() const {
  std::map<std::string, std::vector<std::pair<std::string, std::string>>> sections;
  std::vector<std::pair<std::string, std::string>> top;
  for (const auto& [k, v] : values_) {
    auto dot = k.find('.');
    if (dot == std::string::npos) {
      top.emplace_back(k, v);
    } else {
      sections[k.substr(0, dot)].emplace_back(k.substr(dot + 1), v);
    }
  }
  std::ostringstream out;
  for (const auto& [k, v] : top) out << k << " = " << v << '\n';
  for (const auto& [name, entries] : sections) {
    out << '[' << name << "]\n";
    for (const auto& [k, v] : entries) out << k << " = " << v << '\n';
  }
  return out.str();
}

Inventory parse_inventory(const std::string& text) {
  Inventory inv{};
  std::vector<std::string> parts;
  boost::split(parts, text, boost::is_any_of(","));
  for (auto part : parts) {
    boost::trim(part);
    if (part.empty()) continue;
    auto colon = part.find(':');
    std::string name = boost::trim_copy(part.substr(0, colon));
    int count = 1;
    if (colon != std::string::npos) {
      try {
        count = std::stoi(part.substr(colon + 1));
      } catch (const std::exception&) {
        throw ConfigError("bad inventory count in '" + part + "'");
      }
    }
    auto item = parse_item(name);
    if (!item) throw ConfigError("unknown item '" + name + "'");
    if (count < 0) throw ConfigError("negative inventory count for " + name);
    at(inv, *item) += count;
  }
  return inv;
}

std::string inventory_to_config(const Inventory& inv) {
  std::vector<std::string> parts;
  for (int i = 0; i < kItemCount; ++i) {
    if (inv[static_cast<std::size_t>(i)] > 0) {
      parts.push_back(std::string(item_name(static_cast<Item>(i))) + ":" +
                      std::to_string(inv[static_cast<std::size_t>(i)]));
    }
  }
  return boost::join(parts, ", ");
}

}  // namespace gridagent
