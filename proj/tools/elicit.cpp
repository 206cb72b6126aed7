#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "elicit/elicit.h"

namespace {

struct Flags {
  std::string config_file;
  std::map<std::string, std::string> values;
  std::vector<std::string> sets;
};

int report_error(elicit_status s) {
  std::fprintf(stderr, "elicit: %s error: %s\n", elicit_status_name(s), elicit_last_error());
  return static_cast<int>(s);
}

int run(const std::string& subcommand, const Flags& flags) {
  elicit_config* cfg = nullptr;
  elicit_status s = elicit_config_new(subcommand.c_str(), &cfg);
  if (s != ELICIT_OK) return report_error(s);
  auto cleanup = [&](int code) {
    elicit_config_free(cfg);
    return code;
  };
  if (!flags.config_file.empty() &&
      (s = elicit_config_load_file(cfg, flags.config_file.c_str())) != ELICIT_OK)
    return cleanup(report_error(s));
  for (const auto& kv : flags.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      std::fprintf(stderr, "elicit: --set expects key=value, got '%s'\n", kv.c_str());
      return cleanup(ELICIT_ERR_CONFIG);
    }
    if ((s = elicit_config_set(cfg, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str())) != ELICIT_OK)
      return cleanup(report_error(s));
  }
  for (const auto& [k, v] : flags.values)
    if ((s = elicit_config_set(cfg, k.c_str(), v.c_str())) != ELICIT_OK)
      return cleanup(report_error(s));

  elicit_report* rep = nullptr;
  if ((s = elicit_run(cfg, &rep)) != ELICIT_OK) return cleanup(report_error(s));

  const auto fmt_it = flags.values.find("format");
  const std::string format = fmt_it == flags.values.end() ? "text" : fmt_it->second;
  const auto out_it = flags.values.find("output");
  if (out_it != flags.values.end()) {
    s = elicit_report_write(rep, format.c_str(), out_it->second.c_str());
  } else {
    char* text = nullptr;
    s = elicit_report_render(rep, format.c_str(), &text);
    if (s == ELICIT_OK) std::fputs(text, stdout);
    elicit_string_free(text);
  }
  elicit_report_free(rep);
  if (s != ELICIT_OK) return cleanup(report_error(s));
  return cleanup(0);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Estimation and validity tests for list experiments and multiple direct responses"};
  app.set_version_flag("--version", std::string(elicit_version()));
  app.require_subcommand(1);

  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "write synthetic list-experiment or multiple-response data"},
      {"estimate-le", "GMM and mean-difference estimates for a list experiment"},
      {"test-le", "J-tests of list-experiment assumptions"},
      {"estimate-mrt", "latent-class estimates from three direct responses"},
      {"montecarlo", "simulation study of the multiple-response estimators"}};
  const std::vector<std::pair<std::string, std::string>> options{
      {"input", "input CSV"},
      {"output", "report path (stdout if omitted)"},
      {"format", "json, text or csv"},
      {"j-count", "number of nonsensitive items J"},
      {"spec", "misreporting specification(s)"},
      {"ordering", "ordering rule, e.g. x1-higher"},
      {"n-boot", "bootstrap replicates"},
      {"seed", "random seed"},
      {"design", "Monte Carlo / simulation design"},
      {"n", "sample size"},
      {"reps", "Monte Carlo replications"},
      {"sigma", "pairwise correlation of answers"},
      {"data", "simulated data output CSV"},
      {"plot-output", "plot-ready CSV of cell intervals"}};

  std::map<std::string, Flags> flags;
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    auto& f = flags[name];
    sub->add_option("--config", f.config_file, "key = value configuration file");
    for (const auto& [opt, ohelp] : options) {
      sub->add_option_function<std::string>(
          "--" + opt, [&f, key = opt](const std::string& v) { f.values[key] = v; }, ohelp);
    }
    sub->add_option("--set", f.sets, "any other configuration key as key=value");
  }

  CLI11_PARSE(app, argc, argv);
  for (const auto& [name, help] : commands)
    if (app.got_subcommand(name)) return run(name, flags[name]);
  return 1;
}
