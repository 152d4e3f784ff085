#include "rotdet/kv_config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "rotdet/errors.hpp"

namespace rotdet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_number(std::string_view token, const std::string& key) {
  double value = 0.0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': '" + std::string(token) + "' is not a number");
  }
  return value;
}

}  // namespace

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig cfg;
  std::size_t offset = 0;
  int line_no = 0;
  while (offset <= text.size()) {
    const auto nl = text.find('\n', offset);
    const auto line_end = nl == std::string_view::npos ? text.size() : nl;
    const std::string_view line = trim(text.substr(offset, line_end - offset));
    ++line_no;
    if (!line.empty() && line.front() != '#') {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ParseError("line " + std::to_string(line_no) + ": expected 'key = value'", offset);
      }
      std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key", offset);
      if (cfg.values_.count(key)) {
        throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'", offset);
      }
      cfg.values_.emplace(std::move(key), std::string(trim(line.substr(eq + 1))));
    }
    if (nl == std::string_view::npos) break;
    offset = nl + 1;
  }
  return cfg;
}

KeyValueConfig KeyValueConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse(buf.str());
}

const std::string& KeyValueConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw ConfigError("missing config key '" + key + "'");
  return it->second;
}

double KeyValueConfig::get_double(const std::string& key) const { return parse_number(trim(get(key)), key); }

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

long long KeyValueConfig::get_int(const std::string& key) const {
  const double v = get_double(key);
  const auto i = static_cast<long long>(v);
  if (static_cast<double>(i) != v) throw ConfigError("config key '" + key + "' must be an integer");
  return i;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  return contains(key) ? get_int(key) : fallback;
}

std::vector<double> KeyValueConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  const std::string& raw = get(key);
  std::size_t i = 0;
  while (i < raw.size()) {
    while (i < raw.size() && (raw[i] == ',' || raw[i] == ' ' || raw[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < raw.size() && raw[j] != ',' && raw[j] != ' ' && raw[j] != '\t') ++j;
    if (j > i) out.push_back(parse_number(std::string_view(raw).substr(i, j - i), key));
    i = j;
  }
  return out;
}

}  // namespace rotdet
