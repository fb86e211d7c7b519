#ifndef LATDYN_H
#define LATDYN_H

/* C interface to the latent-dynamics library. Functions return an ld_status;
 * on failure ld_last_error() describes the error for the calling thread.
 * Strings returned through handles stay valid until the next call on the
 * same handle or until it is freed. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(LATDYN_BUILDING_LIBRARY)
#    define LATDYN_API __declspec(dllexport)
#  else
#    define LATDYN_API __declspec(dllimport)
#  endif
#else
#  define LATDYN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ld_status {
  LD_OK = 0,
  LD_ERR_CONFIG = 1,
  LD_ERR_INPUT = 2,
  LD_ERR_SHAPE = 3,
  LD_ERR_NUMERICAL = 4,
  LD_ERR_GEOMETRY = 5,
  LD_ERR_CONTRACT = 6,
  LD_ERR_CORRELATION = 7,
  LD_ERR_IO = 8,
  LD_ERR_INTERNAL = 9
} ld_status;

typedef enum ld_csv_format { LD_CSV_AUTO = 0, LD_CSV_LONG = 1, LD_CSV_WIDE = 2 } ld_csv_format;

typedef struct ld_config ld_config;
typedef struct ld_trajectory ld_trajectory;
typedef struct ld_model ld_model;

typedef void (*ld_log_fn)(const char* line, void* user);

LATDYN_API const char* ld_version(void);
LATDYN_API const char* ld_last_error(void);
LATDYN_API const char* ld_status_name(ld_status s);
/* Process exit code: 0 success, 1 input or configuration error, 2 numerical failure. */
LATDYN_API int ld_exit_code(ld_status s);

/* --- Run configuration ---------------------------------------------------- */

LATDYN_API ld_config* ld_config_new(void);
LATDYN_API void ld_config_free(ld_config* c);
/* Applies a key = value file on top of the current values. */
LATDYN_API ld_status ld_config_load(ld_config* c, const char* path);
LATDYN_API ld_status ld_config_parse(ld_config* c, const char* text);
/* key is "section.name" or a top-level name ("seed", "out"). */
LATDYN_API ld_status ld_config_set(ld_config* c, const char* key, const char* value);
LATDYN_API ld_status ld_config_get(ld_config* c, const char* key, const char** value);
LATDYN_API ld_status ld_config_validate(const ld_config* c);
LATDYN_API const char* ld_config_text(ld_config* c);
LATDYN_API const char* ld_config_hash(ld_config* c);
LATDYN_API size_t ld_config_key_count(void);
LATDYN_API const char* ld_config_key(size_t index);

/* --- Trajectories ---------------------------------------------------------- */

LATDYN_API ld_status ld_trajectory_load(const char* path, ld_csv_format format, ld_trajectory** out);
LATDYN_API ld_status ld_trajectory_save(const ld_trajectory* t, const char* path);
/* Simulates simulate.n_steps rows with the configured seed. */
LATDYN_API ld_status ld_trajectory_simulate(const ld_config* c, ld_trajectory** out);
LATDYN_API void ld_trajectory_free(ld_trajectory* t);
LATDYN_API size_t ld_trajectory_steps(const ld_trajectory* t);
LATDYN_API size_t ld_trajectory_particles(const ld_trajectory* t);
/* Copies the steps x 2k feature matrix row-major into out (capacity n). */
LATDYN_API ld_status ld_trajectory_features(const ld_trajectory* t, double* out, size_t n);

/* --- Discovered models ----------------------------------------------------- */

LATDYN_API ld_status ld_model_load(const char* path, ld_model** out);
LATDYN_API void ld_model_free(ld_model* m);
LATDYN_API int ld_model_degree(const ld_model* m);
/* Copies degree + 1 coefficients, constant term first. */
LATDYN_API ld_status ld_model_coefficients(const ld_model* m, double* out, size_t n);
LATDYN_API double ld_model_rate(const ld_model* m, double z);
LATDYN_API const char* ld_model_text(ld_model* m);
/* Integrates samples - 1 RK4 steps; out receives up to n values, *written the
 * count produced. Returns LD_ERR_NUMERICAL when the solution diverges. */
LATDYN_API ld_status ld_model_integrate(const ld_model* m, double z0, double dt, size_t samples, double* out,
                                        size_t n, size_t* written);

/* --- File-level workflow steps (one per CLI subcommand) -------------------- */

/* Writes the simulated trajectory CSV. */
LATDYN_API ld_status ld_cmd_simulate(const ld_config* c, const char* out_csv);
/* Canonical trajectories.csv, scaled.csv and scaler.json under out_dir. */
LATDYN_API ld_status ld_cmd_ingest(const ld_config* c, const char* in_csv, const char* out_dir);
/* Trains on the first `rows` rows (0 = horizon.train) of a scaled trajectory
 * CSV; writes vae_<tag>.json, loss_<tag>.csv and latent_<tag>.csv. */
LATDYN_API ld_status ld_cmd_train(const ld_config* c, const char* scaled_csv, const char* out_dir, size_t rows,
                                  const char* tag, ld_log_fn log, void* user);
/* Latent CSV (t, z, mu, logvar, z_filtered) of a data CSV under a saved VAE. */
LATDYN_API ld_status ld_cmd_encode(const ld_config* c, const char* vae_json, const char* data_csv,
                                   const char* out_csv);
/* model.json and model.txt under out_dir from the z column of a latent CSV. */
LATDYN_API ld_status ld_cmd_discover(const ld_config* c, const char* latent_csv, const char* out_dir);
/* Solution CSV with `samples` rows; LD_ERR_NUMERICAL (file still written)
 * when the solution diverges. */
LATDYN_API ld_status ld_cmd_solve(const ld_config* c, const char* model_json, double z0, size_t samples,
                                  const char* out_csv);
/* Initial value for solving: first filtered latent sample (z_filtered column
 * when present, otherwise the z column filtered with the configured window). */
LATDYN_API ld_status ld_latent_z0(const ld_config* c, const char* latent_csv, double* z0);
/* Sign-aligned Pearson and RMSE between the z columns of two CSVs. */
LATDYN_API ld_status ld_cmd_validate(const ld_config* c, const char* solution_csv, const char* latent_csv,
                                     const char* out_json, double* pearson, double* rmse);
/* Residual and rolling z-score per sample; *first_flag is -1 when nothing is
 * flagged. */
LATDYN_API ld_status ld_cmd_anomaly(const ld_config* c, const char* latent_csv, const char* model_json,
                                    const char* out_csv, long* first_flag);
/* Decodes the model solution into trajectories; scaler_json may be NULL. */
LATDYN_API ld_status ld_cmd_repair(const ld_config* c, const char* model_json, const char* vae_json, double z0,
                                   size_t samples, const char* scaler_json, const char* out_csv);
/* Premature-stop comparison on a completed run directory; writes
 * repair_report.json there. */
LATDYN_API ld_status ld_cmd_repair_premature(const ld_config* c, const char* run_dir, double* own_mse,
                                             double* repaired_mse, ld_log_fn log, void* user);
/* density_<frame>.csv per frame and density.json under out_dir;
 * bandwidth <= 0 selects Scott's rule. */
LATDYN_API ld_status ld_cmd_density(const char* traj_csv, const long* frames, size_t n_frames, int grid_size,
                                    double bandwidth, const char* out_dir);
/* Full pipeline into the configured output directory. */
LATDYN_API ld_status ld_cmd_run(const ld_config* c, ld_log_fn log, void* user);

#ifdef __cplusplus
}
#endif

#endif /* LATDYN_H */
