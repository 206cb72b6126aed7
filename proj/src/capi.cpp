#include "elicit/elicit.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <exception>
#include <new>
#include <string>

#include "commands.hpp"
#include "config.hpp"
#include "error.hpp"
#include "le_core.hpp"
#include "mrt_core.hpp"
#include "report.hpp"

struct elicit_config {
  elicit::RunConfig config;
};

struct elicit_report {
  elicit::Report report;
};

namespace {

thread_local std::string g_last_error;

elicit_status status_of(elicit::ErrorKind k) {
  using elicit::ErrorKind;
  switch (k) {
    case ErrorKind::Domain: return ELICIT_ERR_DOMAIN;
    case ErrorKind::Identification: return ELICIT_ERR_IDENTIFICATION;
    case ErrorKind::Decomposition: return ELICIT_ERR_DECOMPOSITION;
    case ErrorKind::NearDegenerate: return ELICIT_ERR_NEAR_DEGENERATE;
    case ErrorKind::Estimation: return ELICIT_ERR_ESTIMATION;
    case ErrorKind::Inference: return ELICIT_ERR_INFERENCE;
    case ErrorKind::Design: return ELICIT_ERR_DESIGN;
    case ErrorKind::Load: return ELICIT_ERR_LOAD;
    case ErrorKind::Config: return ELICIT_ERR_CONFIG;
    case ErrorKind::Io: return ELICIT_ERR_IO;
  }
  return ELICIT_ERR_INTERNAL;
}

template <class F>
elicit_status guarded(F&& f) {
  try {
    f();
    g_last_error.clear();
    return ELICIT_OK;
  } catch (const elicit::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return ELICIT_ERR_INTERNAL;
}

elicit_status bad_argument(const char* what) {
  g_last_error = what;
  return ELICIT_ERR_ARGUMENT;
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

}  // namespace

extern "C" {

const char* elicit_version(void) { return elicit::kVersion; }

const char* elicit_last_error(void) { return g_last_error.c_str(); }

const char* elicit_status_name(elicit_status s) {
  switch (s) {
    case ELICIT_OK: return "ok";
    case ELICIT_ERR_DOMAIN: return "domain";
    case ELICIT_ERR_IDENTIFICATION: return "identification";
    case ELICIT_ERR_DECOMPOSITION: return "decomposition";
    case ELICIT_ERR_NEAR_DEGENERATE: return "near-degenerate";
    case ELICIT_ERR_ESTIMATION: return "estimation";
    case ELICIT_ERR_INFERENCE: return "inference";
    case ELICIT_ERR_DESIGN: return "design";
    case ELICIT_ERR_LOAD: return "load";
    case ELICIT_ERR_CONFIG: return "config";
    case ELICIT_ERR_IO: return "io";
    case ELICIT_ERR_ARGUMENT: return "argument";
    case ELICIT_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

elicit_status elicit_config_new(const char* subcommand, elicit_config** out) {
  if (!subcommand || !out) return bad_argument("null argument to elicit_config_new");
  *out = nullptr;
  return guarded([&] {
    auto* c = new elicit_config;
    c->config.subcommand = subcommand;
    *out = c;
  });
}

void elicit_config_free(elicit_config* config) { delete config; }

elicit_status elicit_config_set(elicit_config* config, const char* key, const char* value) {
  if (!config || !key || !value) return bad_argument("null argument to elicit_config_set");
  return guarded([&] { config->config.set(key, value); });
}

elicit_status elicit_config_load_file(elicit_config* config, const char* path) {
  if (!config || !path) return bad_argument("null argument to elicit_config_load_file");
  return guarded([&] { elicit::merge_config_file(config->config, path); });
}

elicit_status elicit_run(const elicit_config* config, elicit_report** out) {
  if (!config || !out) return bad_argument("null argument to elicit_run");
  *out = nullptr;
  return guarded([&] {
    auto r = std::make_unique<elicit_report>();
    r->report = elicit::run_subcommand(config->config);
    *out = r.release();
  });
}

void elicit_report_free(elicit_report* report) { delete report; }

elicit_status elicit_report_render(const elicit_report* report, const char* format, char** out) {
  if (!report || !format || !out) return bad_argument("null argument to elicit_report_render");
  *out = nullptr;
  return guarded([&] { *out = dup(elicit::render(report->report, elicit::parse_format(format))); });
}

elicit_status elicit_report_write(const elicit_report* report, const char* format,
                                  const char* path) {
  if (!report || !format || !path) return bad_argument("null argument to elicit_report_write");
  return guarded([&] {
    elicit::write_file_atomic(path, elicit::render(report->report, elicit::parse_format(format)));
  });
}

size_t elicit_report_diagnostic_count(const elicit_report* report) {
  return report ? report->report.diagnostics.size() : 0;
}

void elicit_string_free(char* s) { std::free(s); }

elicit_status elicit_le_forward(double delta, double p0, double p1, const double* control,
                                int j_count, double* out) {
  if (!control || !out || j_count < 1) return bad_argument("bad argument to elicit_le_forward");
  return guarded([&] {
    elicit::LeParams p;
    p.delta = delta;
    p.p0 = p0;
    p.p1 = p1;
    elicit::ControlDistribution c{j_count, {control, control + j_count + 1}};
    const auto t = elicit::le_forward(p, c);
    std::copy(t.probs.begin(), t.probs.end(), out);
  });
}

elicit_status elicit_le_closed_form(const double* control, const double* treatment, int j_count,
                                    double theta[3]) {
  if (!control || !treatment || !theta || j_count < 1)
    return bad_argument("bad argument to elicit_le_closed_form");
  return guarded([&] {
    elicit::ControlDistribution c{j_count, {control, control + j_count + 1}};
    elicit::TreatmentDistribution t{j_count, {treatment, treatment + j_count + 2}};
    const auto r = elicit::solve_le_closed_form(c, t);
    if (!r.identified) elicit::fail(elicit::ErrorKind::Identification, r.reason);
    theta[0] = r.params.delta;
    theta[1] = r.params.p0;
    theta[2] = r.params.p1;
  });
}

elicit_status elicit_mrt_decompose(const double counts[8], int x2_fix, const char* ordering,
                                   const char* method, double* pr_xstar, double pr_x[6]) {
  if (!counts || !ordering || !method || !pr_xstar || !pr_x)
    return bad_argument("null argument to elicit_mrt_decompose");
  return guarded([&] {
    elicit::MrtJoint j;
    for (int i = 0; i < 8; ++i) {
      j.counts[static_cast<std::size_t>(i)] = counts[i];
      j.n_cell += counts[i];
    }
    const auto rule = elicit::parse_ordering(ordering);
    const std::string m = method;
    elicit::MrtEstimate e;
    if (m == "closed-form") e = elicit::decompose_closed_form(j, x2_fix, rule);
    else if (m == "extreme") e = elicit::decompose_extreme(j, x2_fix, rule);
    else elicit::fail(elicit::ErrorKind::Config, "method must be closed-form or extreme");
    *pr_xstar = e.pr_xstar;
    for (int q = 0; q < 3; ++q)
      for (int k = 0; k < 2; ++k) pr_x[2 * q + k] = e.pr_x_given_xstar[q][k];
  });
}

}  // extern "C"
