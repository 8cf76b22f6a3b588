#ifndef CPDISPATCH_H
#define CPDISPATCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/**
 * Result of every fallible call. The data, solver and config codes match
 * the command-line exit codes.
 */
typedef enum CpdStatus {
  CPD_STATUS_OK = 0,
  CPD_STATUS_DATA_ERROR = 2,
  CPD_STATUS_SOLVER_ERROR = 3,
  CPD_STATUS_CONFIG_ERROR = 4,
  CPD_STATUS_NULL_ARGUMENT = 5,
  CPD_STATUS_BUFFER_TOO_SMALL = 6,
  CPD_STATUS_PANIC = 7,
} CpdStatus;

/**
 * Loaded or synthetic historical data.
 */
typedef struct CpdBundle CpdBundle;

/**
 * Run configuration: battery, tariff, scenario count, seed and solver
 * options.
 */
typedef struct CpdConfig CpdConfig;

/**
 * One optimized (or rule-based) day.
 */
typedef struct CpdDay CpdDay;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * The message of the last failed call on this thread, or NULL. Valid until
 * the next failing call on the same thread.
 */
const char *cpd_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *cpd_version(void);

/**
 * Default configuration: reference battery, synthetic tariff, 1000
 * scenarios.
 */
struct CpdConfig *cpd_config_default(void);

/**
 * Parses a TOML configuration; missing keys take their defaults.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CpdStatus cpd_config_from_toml(const char *toml, struct CpdConfig **out);

/**
 * Sets the scenario count and seed.
 *
 * # Safety
 * `config` must come from this library and not be freed.
 */
enum CpdStatus cpd_config_set_sampling(struct CpdConfig *config,
                                       uintptr_t n_scenarios,
                                       uint64_t seed);

/**
 * # Safety
 * `config` must come from this library or be NULL; it is invalid afterwards.
 */
void cpd_config_free(struct CpdConfig *config);

/**
 * Opens a bundle directory written by `ingest` or `synth`.
 *
 * # Safety
 * `dir` must be a NUL-terminated string and `out` a valid pointer.
 */
enum CpdStatus cpd_bundle_open(const char *dir, struct CpdBundle **out);

/**
 * Generates the default synthetic world with the given seed.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
enum CpdStatus cpd_bundle_synth(uint64_t seed, struct CpdBundle **out);

/**
 * # Safety
 * `bundle` must come from this library or be NULL; it is invalid afterwards.
 */
void cpd_bundle_free(struct CpdBundle *bundle);

/**
 * Runs the full day pipeline for `date` ("YYYY-MM-DD"): PV forecast,
 * scenarios, probabilities and the MILP. Running peaks come from the
 * bundle's history with an idle battery.
 *
 * # Safety
 * Handles must come from this library; `date` must be NUL-terminated and
 * `out` valid.
 */
enum CpdStatus cpd_optimize_day(const struct CpdConfig *config,
                                const struct CpdBundle *bundle,
                                const char *date,
                                struct CpdDay **out);

/**
 * Optimizes one day from caller-supplied inputs: `n_scenarios` × `hours`
 * microgrid load paths (row-major), the PV forecast, the CP day and
 * per-hour probabilities and the NCP-day probability.
 *
 * # Safety
 * Pointers must be valid for the stated lengths; `out` must be valid.
 */
enum CpdStatus cpd_optimize_scenarios(const struct CpdConfig *config,
                                      const double *load_paths,
                                      uintptr_t n_scenarios,
                                      uintptr_t hours,
                                      const double *pv,
                                      double p_cp_day,
                                      const double *p_cp_hour,
                                      double p_ncp_day,
                                      struct CpdDay **out);

/**
 * The rule-based schedule with or without the CP alert window. Its
 * objective is reported as NaN.
 *
 * # Safety
 * `config` must come from this library; `out` must be valid.
 */
enum CpdStatus cpd_benchmark_day(const struct CpdConfig *config, bool alert, struct CpdDay **out);

/**
 * Number of hours in the day.
 *
 * # Safety
 * `day` must come from this library or be NULL (returns 0).
 */
uintptr_t cpd_day_hours(const struct CpdDay *day);

/**
 * Optimal objective in USD, NaN for a rule-based day or a NULL handle.
 *
 * # Safety
 * `day` must come from this library or be NULL.
 */
double cpd_day_objective(const struct CpdDay *day);

/**
 * The CP-day and NCP-day probabilities the day was optimized with.
 *
 * # Safety
 * `day` must come from this library; the out pointers must be valid.
 */
enum CpdStatus cpd_day_probabilities(const struct CpdDay *day, double *p_cp, double *p_ncp);

/**
 * Copies the battery output per hour in MW (positive = discharge).
 *
 * # Safety
 * `day` must come from this library; `out` must hold `len` doubles.
 */
enum CpdStatus cpd_day_battery_mw(const struct CpdDay *day, double *out, uintptr_t len);

/**
 * Copies the end-of-hour state of charge as a fraction of capacity.
 *
 * # Safety
 * `day` must come from this library; `out` must hold `len` doubles.
 */
enum CpdStatus cpd_day_soc(const struct CpdDay *day, double *out, uintptr_t len);

/**
 * # Safety
 * `day` must come from this library or be NULL; it is invalid afterwards.
 */
void cpd_day_free(struct CpdDay *day);

/**
 * Counts, over `n_scenarios` × `hours` paths (row-major), the share whose
 * maximum exceeds `running_max` and the share peaking at each hour.
 * Pass `-INFINITY` when nothing has been observed yet.
 *
 * # Safety
 * `paths` must hold `n_scenarios * hours` doubles, `p_hour` `hours`
 * doubles, and `p_day` must be valid.
 */
enum CpdStatus cpd_peak_probabilities(const double *paths,
                                      uintptr_t n_scenarios,
                                      uintptr_t hours,
                                      double running_max,
                                      double *p_day,
                                      double *p_hour);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPDISPATCH_H */
