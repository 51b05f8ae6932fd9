#pragma once

#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "uwash/error.hpp"

namespace uwash {

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

// Ordered `key = value` text blocks. Lines starting with '#' are comments;
// list values are comma separated. Used for architecture configs embedded in
// checkpoints and for generator specs.
class KeyValueConfig {
 public:
  static KeyValueConfig parse(std::string_view text);
  static KeyValueConfig load(const std::string& path);

  std::string serialize() const;

  void set(const std::string& key, std::string value);
  void set(const std::string& key, long long value);
  void set(const std::string& key, double value);
  void set(const std::string& key, const std::vector<int>& values);
  void set(const std::string& key, const std::vector<double>& values);

  bool has(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;

  long long get_int(const std::string& key, long long fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::vector<int> get_int_list(const std::string& key, std::vector<int> fallback) const;
  std::vector<double> get_double_list(const std::string& key, std::vector<double> fallback) const;

  // Throws ConfigError naming the first key not in `known`.
  void require_known(std::initializer_list<std::string_view> known) const;

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

// Shortest decimal text that reads back to the same double.
std::string format_double(double value);

}  // namespace uwash
