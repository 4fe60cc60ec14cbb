#ifndef JSAFE_CONFIG_HPP
#define JSAFE_CONFIG_HPP

#include <charconv>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace jsafe {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Flat `key = value` text. Lines starting with '#' are comments; later
/// assignments override earlier ones.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(const std::string& text) {
    KeyValueConfig cfg;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
      std::string key = line.substr(0, eq);
      std::string value = line.substr(eq + 1);
      trim(key);
      trim(value);
      if (key.empty()) throw ConfigError("config line " + std::to_string(line_no) + ": empty key");
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig load(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str());
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    try {
      std::size_t used = 0;
      const double v = std::stod(it->second, &used);
      if (used != it->second.size()) throw std::invalid_argument("trailing");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: " + it->second);
    }
  }

  std::int64_t get_int(const std::string& key, std::int64_t fallback) const {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    std::int64_t v = 0;
    const auto* first = it->second.data();
    const auto* last = first + it->second.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
      throw ConfigError("config key '" + key + "' is not an integer: " + it->second);
    return v;
  }

 private:
  static void trim(std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    const auto e = s.find_last_not_of(" \t\r\n");
    s = b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  }

  std::map<std::string, std::string> values_;
};

}  // namespace jsafe

#endif  // JSAFE_CONFIG_HPP
