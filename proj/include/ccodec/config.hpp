#pragma once

#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "ccodec/common.hpp"

namespace ccodec {

// Flat key=value config file; '#' starts a comment.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    Config c;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
      ++lineno;
      auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      auto trim = [](std::string s) {
        auto b = s.find_first_not_of(" \t\r");
        auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      std::string t = trim(line);
      if (t.empty()) continue;
      auto eq = t.find('=');
      if (eq == std::string::npos)
        throw ConfigError(path + ":" + std::to_string(lineno) + ": expected key=value");
      std::string key = trim(t.substr(0, eq));
      std::string val = trim(t.substr(eq + 1));
      if (key.empty())
        throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key");
      c.values_[key] = val;
    }
    return c;
  }

  void set(const std::string& key, const std::string& val) { values_[key] = val; }
  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& def) const {
    auto it = values_.find(key);
    return it == values_.end() ? def : it->second;
  }
  int integer(const std::string& key, int def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
      return std::stoi(it->second);
    } catch (...) {
      throw ConfigError("config key " + key + ": not an integer: " + it->second);
    }
  }
  double real(const std::string& key, double def) const {
    auto it = values_.find(key);
    if (it == values_.end()) return def;
    try {
      return std::stod(it->second);
    } catch (...) {
      throw ConfigError("config key " + key + ": not a number: " + it->second);
    }
  }

  // Rejects keys outside the known set, listing every offender.
  void validate_keys(const std::set<std::string>& known) const {
    std::string bad;
    for (const auto& [k, v] : values_)
      if (!known.count(k)) bad += (bad.empty() ? "" : ", ") + k;
    if (!bad.empty()) throw ConfigError("unknown config keys: " + bad);
  }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace ccodec
