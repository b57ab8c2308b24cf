/*
 * damctl C API.
 *
 * Optimal turbine/spillway management of a dam under self-exciting
 * (marked Hawkes) rainfall. All objects are opaque handles owned by the
 * caller and released with the matching *_free function. Every function
 * returning damctl_status sets a thread-local message retrievable with
 * damctl_last_error() when it fails.
 */
#ifndef DAMCTL_H
#define DAMCTL_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(DAMCTL_BUILDING_LIBRARY)
#    define DAMCTL_API __declspec(dllexport)
#  else
#    define DAMCTL_API __declspec(dllimport)
#  endif
#else
#  define DAMCTL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values double as the CLI exit codes. */
typedef enum damctl_status {
    DAMCTL_OK = 0,
    DAMCTL_ERR_VALIDATION = 1,      /* bad configuration, argument or failed check */
    DAMCTL_ERR_NONCONVERGENCE = 2,
    DAMCTL_ERR_IO = 3,
    DAMCTL_ERR_INTERNAL = 4
} damctl_status;

typedef struct damctl_config damctl_config;
typedef struct damctl_solution damctl_solution;
typedef struct damctl_sweep damctl_sweep;

DAMCTL_API const char* damctl_version(void);
DAMCTL_API const char* damctl_last_error(void);

/* ---- configuration ---------------------------------------------------- */

DAMCTL_API damctl_status damctl_config_default(damctl_config** out);
DAMCTL_API damctl_status damctl_config_load(const char* path, damctl_config** out);
DAMCTL_API damctl_status damctl_config_parse(const char* text, damctl_config** out);
DAMCTL_API void damctl_config_free(damctl_config* cfg);

DAMCTL_API size_t damctl_config_warning_count(const damctl_config* cfg);
DAMCTL_API const char* damctl_config_warning(const damctl_config* cfg, size_t i);

/* Numeric access by "section.key", e.g. "hawkes.c" or "grid.nh". Setting
 * re-validates the whole configuration and leaves it unchanged on failure. */
DAMCTL_API damctl_status damctl_config_get(const damctl_config* cfg, const char* key, double* out);
DAMCTL_API damctl_status damctl_config_set(damctl_config* cfg, const char* key, double value);

DAMCTL_API uint64_t damctl_config_hash(const damctl_config* cfg);

/* Canonical text. Writes at most cap bytes including the terminator and
 * stores the full required size (with terminator) in *needed. */
DAMCTL_API damctl_status damctl_config_serialize(const damctl_config* cfg, char* buf, size_t cap, size_t* needed);

/* ---- solve ------------------------------------------------------------ */

/* tol <= 0 or max_iter <= 0 take the configuration's numerics values;
 * threads <= 0 uses DAMCTL_THREADS or the hardware concurrency. */
DAMCTL_API damctl_status damctl_solve(const damctl_config* cfg, double tol, long max_iter, int threads,
                                      damctl_solution** out);
DAMCTL_API void damctl_solution_free(damctl_solution* sol);

/* format: 0 = CSV directory, 1 = single JSON document. */
DAMCTL_API damctl_status damctl_solution_write(const damctl_solution* sol, const char* dir, int format);
DAMCTL_API damctl_status damctl_solution_load(const char* dir, damctl_solution** out);

/* Copy of the configuration the solution was computed with. */
DAMCTL_API damctl_status damctl_solution_config(const damctl_solution* sol, damctl_config** out);

DAMCTL_API long damctl_solution_iterations(const damctl_solution* sol);
DAMCTL_API double damctl_solution_residual(const damctl_solution* sol);
DAMCTL_API double damctl_solution_wall_time(const damctl_solution* sol);
DAMCTL_API void damctl_solution_shape(const damctl_solution* sol, int* nh, int* nl);
DAMCTL_API damctl_status damctl_solution_value(const damctl_solution* sol, int regime, int ih, int il, double* out);
/* Spill threshold of a regime at ell node il; +inf when beta_max is never chosen. */
DAMCTL_API damctl_status damctl_solution_threshold(const damctl_solution* sol, int regime, int il, double* out);

/* Sup-norm of the discrete HJB residual recomputed from the stored fields. */
DAMCTL_API damctl_status damctl_solution_recheck(const damctl_solution* sol, double* residual);

/* JSON policy report (switch regions, bang-bang check, thresholds, shape diagnostics). */
DAMCTL_API damctl_status damctl_solution_report(const damctl_solution* sol, char* buf, size_t cap, size_t* needed);

/* ---- Monte Carlo ------------------------------------------------------ */

typedef struct damctl_mc_stats {
    double estimate;
    double std_error;
    long paths;
    long failed;
    long truncated;
    long empty_hit;
} damctl_mc_stats;

/* Simulates n_paths controlled paths from (h, ell, regime) under the solved
 * policy, or under the floor-spill never-switch baseline when policy is NULL.
 * If dump_path is non-NULL a per-path CSV log is written there. */
DAMCTL_API damctl_status damctl_simulate(const damctl_config* cfg, const damctl_solution* policy, double h,
                                         double ell, int regime, long n_paths, uint64_t seed, int threads,
                                         const char* dump_path, damctl_mc_stats* out);

typedef struct damctl_probe_check {
    double h;
    double ell;
    int regime;
    double solver_value;
    double refined_gap;
    double c_disc;
    damctl_mc_stats own;
    damctl_mc_stats baseline;
    int consistent;
    int dominates;
} damctl_probe_check;

/* Compares solver values with simulation at n probes (snapped to nodes).
 * The discretisation allowance c_disc is twice the gap to a re-solve of cfg
 * on the grid with both steps halved (first-order Richardson estimate).
 * out must hold n entries. Returns DAMCTL_ERR_VALIDATION (after filling
 * out) if any probe fails either check. */
DAMCTL_API damctl_status damctl_validate(const damctl_config* cfg, const damctl_solution* sol, const double* h,
                                         const double* ell, const int* regime, size_t n, long n_paths,
                                         uint64_t seed, int threads, damctl_probe_check* out);

/* ---- sensitivity sweep in c ------------------------------------------- */

DAMCTL_API damctl_status damctl_sweep_run(const damctl_config* cfg, const double* c_values, size_t n_c,
                                          const double* probe_ells, size_t n_probes, double tol, long max_iter,
                                          int threads, damctl_sweep** out);
DAMCTL_API void damctl_sweep_free(damctl_sweep* sweep);
DAMCTL_API damctl_status damctl_sweep_write(const damctl_sweep* sweep, const char* dir);
DAMCTL_API size_t damctl_sweep_failed_count(const damctl_sweep* sweep);
/* Monotonicity verdict lines (one per ell band and regime), newline separated. */
DAMCTL_API damctl_status damctl_sweep_verdicts(const damctl_sweep* sweep, char* buf, size_t cap, size_t* needed);

#ifdef __cplusplus
}
#endif

#endif /* DAMCTL_H */
