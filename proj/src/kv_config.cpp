#include "uwash/kv_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace uwash {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
T parse_number(std::string_view text, const std::string& key) {
  text = trim(text);
  T value{};
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("key '" + key + "': cannot parse '" + std::string(text) + "' as a number");
  }
  return value;
}

template <class T>
std::vector<T> parse_list(const std::string& text, const std::string& key) {
  std::vector<T> out;
  std::string_view rest = text;
  while (true) {
    const auto comma = rest.find(',');
    out.push_back(parse_number<T>(rest.substr(0, comma), key));
    if (comma == std::string_view::npos) break;
    rest.remove_prefix(comma + 1);
  }
  return out;
}

}  // namespace

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

KeyValueConfig KeyValueConfig::parse(std::string_view text) {
  KeyValueConfig config;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = trim(text.substr(0, nl));
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    std::string key(trim(line.substr(0, eq)));
    if (key.empty()) throw ConfigError("line " + std::to_string(line_no) + ": empty key");
    if (config.has(key)) throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    config.entries_.emplace_back(std::move(key), std::string(trim(line.substr(eq + 1))));
  }
  return config;
}

KeyValueConfig KeyValueConfig::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string KeyValueConfig::serialize() const {
  std::string out;
  for (const auto& [key, value] : entries_) out += key + " = " + value + "\n";
  return out;
}

void KeyValueConfig::set(const std::string& key, std::string value) {
  auto it = std::find_if(entries_.begin(), entries_.end(), [&](const auto& e) { return e.first == key; });
  if (it != entries_.end()) {
    it->second = std::move(value);
  } else {
    entries_.emplace_back(key, std::move(value));
  }
}

void KeyValueConfig::set(const std::string& key, long long value) { set(key, std::to_string(value)); }

void KeyValueConfig::set(const std::string& key, double value) { set(key, format_double(value)); }

void KeyValueConfig::set(const std::string& key, const std::vector<int>& values) {
  std::string text;
  for (std::size_t i = 0; i < values.size(); ++i) text += (i ? "," : "") + std::to_string(values[i]);
  set(key, std::move(text));
}

void KeyValueConfig::set(const std::string& key, const std::vector<double>& values) {
  std::string text;
  for (std::size_t i = 0; i < values.size(); ++i) text += (i ? "," : "") + format_double(values[i]);
  set(key, std::move(text));
}

bool KeyValueConfig::has(const std::string& key) const { return get(key).has_value(); }

std::optional<std::string> KeyValueConfig::get(const std::string& key) const {
  for (const auto& [k, v] : entries_) {
    if (k == key) return v;
  }
  return std::nullopt;
}

long long KeyValueConfig::get_int(const std::string& key, long long fallback) const {
  auto v = get(key);
  return v ? parse_number<long long>(*v, key) : fallback;
}

double KeyValueConfig::get_double(const std::string& key, double fallback) const {
  auto v = get(key);
  return v ? parse_number<double>(*v, key) : fallback;
}

std::vector<int> KeyValueConfig::get_int_list(const std::string& key, std::vector<int> fallback) const {
  auto v = get(key);
  return v ? parse_list<int>(*v, key) : fallback;
}

std::vector<double> KeyValueConfig::get_double_list(const std::string& key,
                                                    std::vector<double> fallback) const {
  auto v = get(key);
  return v ? parse_list<double>(*v, key) : fallback;
}

void KeyValueConfig::require_known(std::initializer_list<std::string_view> known) const {
  for (const auto& [key, value] : entries_) {
    if (std::find(known.begin(), known.end(), key) == known.end()) {
      throw ConfigError("unknown key '" + key + "'");
    }
  }
}

}  // namespace uwash
