#pragma once
// Flat "key = value" config files. '#' starts a comment, blank lines are
// skipped, duplicate keys are an error. Every key must be consumed by a typed
// getter; leftovers are reported as unknown keys (typo protection).
#include <map>
#include <set>
#include <string>
#include <vector>

namespace msf {

class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text, const std::string& origin = "<string>");

  bool has(const std::string& key) const;
  void set(const std::string& key, const std::string& value);

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // comma-separated doubles
  std::vector<double> get_doubles(const std::string& key, std::vector<double> fallback) const;

  // throws ConfigError listing every key never touched by a getter
  void check_all_consumed() const;

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::string raw(const std::string& key) const;
  std::map<std::string, std::string> entries_;
  std::string origin_ = "<empty>";
  mutable std::set<std::string> consumed_;
};

}  // namespace msf
