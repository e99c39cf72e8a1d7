// Minimal TOML-subset configuration parser: [sections], key = value lines,
// scalars (number / bool / "string") and single-line (possibly nested)
// arrays. Keys are exposed flat as "section.key".

#pragma once

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "recon/error.hpp"

namespace recon {

struct ConfigValue {
  enum class Kind { kNumber, kBool, kString, kArray };
  Kind kind = Kind::kNumber;
  double number = 0.0;
  bool boolean = false;
  std::string text;
  std::vector<ConfigValue> items;

  double as_number(const std::string& key) const {
    if (kind != Kind::kNumber) throw ConfigError(key + ": expected a number");
    return number;
  }
  bool as_bool(const std::string& key) const {
    if (kind != Kind::kBool) throw ConfigError(key + ": expected true/false");
    return boolean;
  }
  const std::string& as_string(const std::string& key) const {
    if (kind != Kind::kString) throw ConfigError(key + ": expected a string");
    return text;
  }
  const std::vector<ConfigValue>& as_array(const std::string& key) const {
    if (kind != Kind::kArray) throw ConfigError(key + ": expected an array");
    return items;
  }
};

class ConfigTree {
 public:
  static ConfigTree parse_string(const std::string& content, const std::string& origin) {
    ConfigTree tree;
    std::istringstream in(content);
    std::string line, section;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const std::string trimmed = strip(strip_comment(line));
      if (trimmed.empty()) continue;
      if (trimmed.front() == '[') {
        if (trimmed.back() != ']') {
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated section");
        }
        section = strip(trimmed.substr(1, trimmed.size() - 2));
        if (section.empty()) {
          throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty section name");
        }
        continue;
      }
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
      }
      const std::string key = strip(trimmed.substr(0, eq));
      const std::string rhs = strip(trimmed.substr(eq + 1));
      if (key.empty() || rhs.empty()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key or value");
      }
      std::size_t pos = 0;
      ConfigValue v = parse_value(rhs, pos, origin, line_no);
      if (pos != rhs.size()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": trailing characters");
      }
      const std::string full = section.empty() ? key : section + "." + key;
      tree.values_[full] = std::move(v);
    }
    return tree;
  }

  static ConfigTree parse_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_string(buf.str(), path.string());
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.as_number(key);
  }
  int get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double d = it->second.as_number(key);
    return int(d < 0 ? d - 0.5 : d + 0.5);
  }
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const double d = it->second.as_number(key);
    if (d < 0) throw ConfigError(key + ": expected a non-negative integer");
    return std::uint64_t(d + 0.5);
  }
  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.as_bool(key);
  }
  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second.as_string(key);
  }
  const ConfigValue& get(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }

  std::vector<std::string> keys() const {
    std::vector<std::string> out;
    for (const auto& [k, _] : values_) out.push_back(k);
    return out;
  }

 private:
  static std::string strip_comment(const std::string& s) {
    bool in_string = false;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '"') in_string = !in_string;
      if (s[i] == '#' && !in_string) return s.substr(0, i);
    }
    return s;
  }

  static std::string strip(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
  }

  static void skip_ws(const std::string& s, std::size_t& pos) {
    while (pos < s.size() && std::isspace(static_cast<unsigned char>(s[pos]))) ++pos;
  }

  static ConfigValue parse_value(const std::string& s, std::size_t& pos,
                                 const std::string& origin, int line_no) {
    skip_ws(s, pos);
    if (pos >= s.size()) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": missing value");
    }
    ConfigValue v;
    const char c = s[pos];
    if (c == '[') {
      ++pos;
      v.kind = ConfigValue::Kind::kArray;
      skip_ws(s, pos);
      while (pos < s.size() && s[pos] != ']') {
        v.items.push_back(parse_value(s, pos, origin, line_no));
        skip_ws(s, pos);
        if (pos < s.size() && s[pos] == ',') {
          ++pos;
          skip_ws(s, pos);
        }
      }
      if (pos >= s.size()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated array");
      }
      ++pos;  // ']'
    } else if (c == '"') {
      v.kind = ConfigValue::Kind::kString;
      ++pos;
      while (pos < s.size() && s[pos] != '"') {
        if (s[pos] == '\\' && pos + 1 < s.size()) ++pos;
        v.text.push_back(s[pos]);
        ++pos;
      }
      if (pos >= s.size()) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": unterminated string");
      }
      ++pos;  // closing quote
    } else if (s.compare(pos, 4, "true") == 0) {
      v.kind = ConfigValue::Kind::kBool;
      v.boolean = true;
      pos += 4;
    } else if (s.compare(pos, 5, "false") == 0) {
      v.kind = ConfigValue::Kind::kBool;
      v.boolean = false;
      pos += 5;
    } else {
      std::size_t end = pos;
      while (end < s.size() && s[end] != ',' && s[end] != ']' &&
             !std::isspace(static_cast<unsigned char>(s[end]))) {
        ++end;
      }
      const std::string tok = s.substr(pos, end - pos);
      try {
        std::size_t used = 0;
        v.number = std::stod(tok, &used);
        if (used != tok.size()) throw std::invalid_argument(tok);
      } catch (const std::exception&) {
        throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad value '" + tok + "'");
      }
      pos = end;
    }
    skip_ws(s, pos);
    return v;
  }

  std::map<std::string, ConfigValue> values_;
};

}  // namespace recon
