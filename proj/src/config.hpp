#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace elicit {

/// Flat key/value run configuration. Keys use the long flag names
/// (e.g. "j-count", "n-boot").
class RunConfig {
 public:
  std::string subcommand;

  void set(const std::string& key, const std::string& value);
  bool has(const std::string& key) const;
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  double require_double(const std::string& key) const;
  long long get_int(const std::string& key, long long fallback) const;
  long long require_int(const std::string& key) const;
  std::uint64_t require_seed() const;
  std::vector<std::string> get_list(const std::string& key, const std::string& fallback) const;
  std::vector<double> get_doubles(const std::string& key) const;

  /// FNV-1a 64 over the sorted key=value pairs that affect results.
  std::string hash() const;

 private:
  std::map<std::string, std::string> values_;
};

/// `key = value` lines; '#' starts a comment.
void merge_config_text(RunConfig& config, const std::string& text, const std::string& origin);
void merge_config_file(RunConfig& config, const std::string& path);

}  // namespace elicit
