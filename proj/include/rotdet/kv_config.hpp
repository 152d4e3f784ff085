#pragma once

// Minimal "key = value" text configuration. Blank lines and lines starting with '#'
// are ignored; keys are unique; values keep their inner whitespace.

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rotdet {

class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::filesystem::path& path);

  bool contains(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& get(const std::string& key) const;

  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  long long get_int(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  /// Splits a value on commas and whitespace and parses every token as a number.
  std::vector<double> get_doubles(const std::string& key) const;

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace rotdet
