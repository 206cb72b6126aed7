#ifndef ELICIT_ELICIT_H
#define ELICIT_ELICIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(__GNUC__)
#define ELICIT_API __attribute__((visibility("default")))
#else
#define ELICIT_API
#endif

typedef enum elicit_status {
  ELICIT_OK = 0,
  ELICIT_ERR_DOMAIN = 1,
  ELICIT_ERR_IDENTIFICATION = 2,
  ELICIT_ERR_DECOMPOSITION = 3,
  ELICIT_ERR_NEAR_DEGENERATE = 4,
  ELICIT_ERR_ESTIMATION = 5,
  ELICIT_ERR_INFERENCE = 6,
  ELICIT_ERR_DESIGN = 7,
  ELICIT_ERR_LOAD = 8,
  ELICIT_ERR_CONFIG = 9,
  ELICIT_ERR_IO = 10,
  ELICIT_ERR_ARGUMENT = 20, /* null pointer or bad enum passed to the API */
  ELICIT_ERR_INTERNAL = 99
} elicit_status;

typedef struct elicit_config elicit_config;
typedef struct elicit_report elicit_report;

ELICIT_API const char* elicit_version(void);

/* Message for the last failing call on this thread ("" if none). */
ELICIT_API const char* elicit_last_error(void);
ELICIT_API const char* elicit_status_name(elicit_status status);

ELICIT_API elicit_status elicit_config_new(const char* subcommand, elicit_config** out);
ELICIT_API void elicit_config_free(elicit_config* config);
ELICIT_API elicit_status elicit_config_set(elicit_config* config, const char* key, const char* value);
/* Merges a `key = value` file; later calls and sets override. */
ELICIT_API elicit_status elicit_config_load_file(elicit_config* config, const char* path);

ELICIT_API elicit_status elicit_run(const elicit_config* config, elicit_report** out);
ELICIT_API void elicit_report_free(elicit_report* report);

/* format: "json", "text" or "csv". *out is freed with elicit_string_free. */
ELICIT_API elicit_status elicit_report_render(const elicit_report* report, const char* format,
                                              char** out);
ELICIT_API elicit_status elicit_report_write(const elicit_report* report, const char* format,
                                             const char* path);
ELICIT_API size_t elicit_report_diagnostic_count(const elicit_report* report);
ELICIT_API void elicit_string_free(char* s);

/* Treatment distribution (j_count + 2 entries) implied by the misreporting
   model for an observed control distribution of j_count + 1 entries. */
ELICIT_API elicit_status elicit_le_forward(double delta, double p0, double p1,
                                           const double* control, int j_count, double* out);

/* Closed-form LE identification from population distributions.
   theta receives delta, p0, p1. */
ELICIT_API elicit_status elicit_le_closed_form(const double* control, const double* treatment,
                                               int j_count, double theta[3]);

/* counts[x1*4 + x2*2 + x3]. pr_x[2*j + k] = Pr(X_{j+1} = 1 | X* = k).
   method: "closed-form" or "extreme"; ordering e.g. "x1-higher". */
ELICIT_API elicit_status elicit_mrt_decompose(const double counts[8], int x2_fix,
                                              const char* ordering, const char* method,
                                              double* pr_xstar, double pr_x[6]);

#ifdef __cplusplus
}
#endif

#endif
