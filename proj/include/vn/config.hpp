#pragma once

// Run configuration: a flat text format of dotted keys, one "key = value"
// per line, '#' comments. Environment variables prefixed VN_ override file
// values (VN_TRAINER__RHO_S=2e-3 sets trainer.rho_s). Typed getters name the
// offending key on every failure, and keys nobody reads are flagged so typos
// cannot pass silently.

#include "vn/common.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <string>

extern "C" char** environ;

namespace vn {

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

class Config {
 public:
  Config() = default;

  static Config parse_text(const std::string& text, const std::string& origin = "<inline>") {
    Config cfg;
    std::size_t line_no = 0, at = 0;
    while (at <= text.size()) {
      const auto nl = text.find('\n', at);
      std::string line = text.substr(at, nl == std::string::npos ? nl : nl - at);
      at = nl == std::string::npos ? text.size() + 1 : nl + 1;
      ++line_no;

      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      line = detail::trim(line);
      if (line.empty()) continue;

      const auto eq = line.find('=');
      require(eq != std::string::npos, "config: ", origin, ":", line_no,
              ": expected \"key = value\", got \"", line, "\"");
      const std::string key = detail::trim(line.substr(0, eq));
      const std::string value = detail::trim(line.substr(eq + 1));
      require(!key.empty(), "config: ", origin, ":", line_no, ": empty key");
      require(!value.empty(), "config: ", origin, ":", line_no, ": key \"", key,
              "\" has an empty value");
      cfg.kv_[key] = value;
    }
    return cfg;
  }

  static Config parse_file(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), "config: cannot open ", path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_text(text, path);
  }

  // VN_A__B=v becomes key "a.b" (double underscore separates path segments,
  // keys are lowercased). Single underscores inside a segment are kept.
  void apply_env(const std::string& prefix = "VN_") {
    for (char** e = environ; e && *e; ++e) {
      const std::string entry(*e);
      if (entry.rfind(prefix, 0) != 0) continue;
      const auto eq = entry.find('=');
      if (eq == std::string::npos || eq <= prefix.size()) continue;
      std::string key = entry.substr(prefix.size(), eq - prefix.size());
      std::string dotted;
      for (std::size_t i = 0; i < key.size(); ++i) {
        if (key[i] == '_' && i + 1 < key.size() && key[i + 1] == '_') {
          dotted += '.';
          ++i;
        } else {
          dotted += static_cast<char>(std::tolower(static_cast<unsigned char>(key[i])));
        }
      }
      kv_[dotted] = entry.substr(eq + 1);
    }
  }

  void set(const std::string& key, const std::string& value) { kv_[key] = value; }

  bool has(const std::string& key) const { return kv_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    seen_.insert(key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    seen_.insert(key);
    const char* s = it->second.c_str();
    char* end = nullptr;
    const double v = std::strtod(s, &end);
    require(end != s && *end == '\0', "config: key \"", key, "\" has non-numeric value \"",
            it->second, "\"");
    require(std::isfinite(v), "config: key \"", key, "\" must be finite, got \"", it->second,
            "\"");
    return v;
  }

  long long get_int(const std::string& key, long long fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    seen_.insert(key);
    const char* s = it->second.c_str();
    char* end = nullptr;
    const long long v = std::strtoll(s, &end, 10);
    require(end != s && *end == '\0', "config: key \"", key, "\" has non-integer value \"",
            it->second, "\"");
    return v;
  }

  bool get_bool(const std::string& key, bool fallback) const {
    const auto it = kv_.find(key);
    if (it == kv_.end()) return fallback;
    seen_.insert(key);
    const std::string& v = it->second;
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail("config: key \"", key, "\" must be true/false/1/0, got \"", v, "\"");
  }

  // Call after assembling a run config; any key never read is a typo.
  void reject_unread() const {
    for (const auto& [key, value] : kv_)
      require(seen_.count(key) > 0, "config: unknown key \"", key, "\" (value \"", value,
              "\")");
  }

  const std::map<std::string, std::string>& entries() const { return kv_; }

 private:
  std::map<std::string, std::string> kv_;
  mutable std::set<std::string> seen_;
};

}  // namespace vn
