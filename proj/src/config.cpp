#include "config.hpp"

#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "error.hpp"

namespace elicit {

namespace {

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys{
      "input",  "output", "format",   "plot-output", "data",      "j-count",   "spec",
      "drop",   "ordering", "n-boot", "seed",        "design",    "n",         "reps",
      "sigma",  "copula", "kind",     "mode",        "delta",     "p0",        "p1",
      "p",      "control", "treatment-latent", "share", "q0",     "q1",        "covariates",
      "z-dim",  "x2-fix", "estimators", "direct-question", "affirmative-truth", "method",
      "rank-boot", "stratify", "intercept"};
  return keys;
}

// Keys that only choose where or how results are written.
bool presentation_key(const std::string& k) {
  return k == "output" || k == "format" || k == "plot-output" || k == "data";
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_keys().count(key)) fail(ErrorKind::Config, "unknown configuration key '" + key + "'");
  values_[key] = value;
}

bool RunConfig::has(const std::string& key) const { return values_.count(key) > 0; }

std::string RunConfig::get(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string RunConfig::require(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty())
    fail(ErrorKind::Config, subcommand + " requires '" + key + "'");
  return it->second;
}

double RunConfig::require_double(const std::string& key) const {
  const std::string v = require(key);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorKind::Config, "'" + key + "' must be a number, got '" + v + "'");
  return d;
}

double RunConfig::get_double(const std::string& key, double fallback) const {
  return has(key) ? require_double(key) : fallback;
}

long long RunConfig::require_int(const std::string& key) const {
  const std::string v = require(key);
  char* end = nullptr;
  errno = 0;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0' || errno == ERANGE)
    fail(ErrorKind::Config, "'" + key + "' must be an integer, got '" + v + "'");
  return i;
}

long long RunConfig::get_int(const std::string& key, long long fallback) const {
  return has(key) ? require_int(key) : fallback;
}

std::uint64_t RunConfig::require_seed() const {
  if (!has("seed")) fail(ErrorKind::Config, subcommand + " is stochastic and requires 'seed'");
  const long long s = require_int("seed");
  if (s < 0) fail(ErrorKind::Config, "seed must be nonnegative");
  return static_cast<std::uint64_t>(s);
}

std::vector<std::string> RunConfig::get_list(const std::string& key,
                                             const std::string& fallback) const {
  std::vector<std::string> out;
  std::stringstream ss(get(key, fallback));
  std::string item;
  while (std::getline(ss, item, ','))
    if (!trim(item).empty()) out.push_back(trim(item));
  return out;
}

std::vector<double> RunConfig::get_doubles(const std::string& key) const {
  std::vector<double> out;
  for (const auto& s : get_list(key, "")) {
    char* end = nullptr;
    const double d = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0')
      fail(ErrorKind::Config, "'" + key + "' must be a list of numbers, got '" + s + "'");
    out.push_back(d);
  }
  return out;
}

std::string RunConfig::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  };
  feed(subcommand + "\n");
  for (const auto& [k, v] : values_)
    if (!presentation_key(k)) feed(k + "=" + v + "\n");
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void merge_config_text(RunConfig& config, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  int no = 0;
  while (std::getline(in, line)) {
    ++no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      fail(ErrorKind::Config, origin + ":" + std::to_string(no) + ": expected key = value");
    config.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
}

void merge_config_file(RunConfig& config, const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Config, "cannot read config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  merge_config_text(config, ss.str(), path);
}

}  // namespace elicit
