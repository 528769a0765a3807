/* C interface for the laser long-term treatment effect estimator.
 *
 * All functions returning int use the LASER_* error codes below; on any
 * nonzero return, laser_last_error_message() retrieves a human-readable
 * description for the calling thread. Handles are opaque and must be
 * released with the matching *_free function.
 */
#ifndef LASER_H
#define LASER_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Error codes. */
#define LASER_OK 0
#define LASER_ERR_NULL_POINTER 1
#define LASER_ERR_UTF8 2
#define LASER_ERR_DIMENSION 3
#define LASER_ERR_CONFIG 4
#define LASER_ERR_PARSE 5
#define LASER_ERR_CAPABILITY 6
#define LASER_ERR_NUMERIC 7
#define LASER_ERR_DEGENERATE 8
#define LASER_ERR_UNDEFINED_METRIC 9
#define LASER_ERR_IO 10
#define LASER_ERR_BUFFER_TOO_SMALL 11
#define LASER_ERR_PANIC 12

/* Opaque handles. */
typedef struct LaserDataset LaserDataset;
typedef struct LaserModel LaserModel;

/* Copy the current thread's last error message into buf (NUL-terminated,
 * truncated to len bytes). Returns the full message length; pass buf=NULL
 * to query the required size. */
size_t laser_last_error_message(char *buf, size_t len);

/* Datasets: CSV files with columns x0..,t,m0..[,y][,y0,y1][,s0..]. */
int laser_dataset_load(const char *path, LaserDataset **out);
void laser_dataset_free(LaserDataset *d);
size_t laser_dataset_n_units(const LaserDataset *d);
size_t laser_dataset_n_covariates(const LaserDataset *d);
size_t laser_dataset_n_short_term(const LaserDataset *d);

/* Training. config is INI-style text as accepted by the CLI ("" for
 * defaults); only the [train] section is consulted. The observational
 * dataset must carry the long-term outcome column y. */
int laser_train(const LaserDataset *d_obs, const LaserDataset *d_exp,
                const char *config, LaserModel **out);
void laser_model_free(LaserModel *m);
int laser_model_save(const LaserModel *m, const char *path);
int laser_model_load(const char *path, LaserModel **out);

/* Predict the long-term outcome for every unit; buf must hold at least
 * laser_dataset_n_units(d) doubles. */
int laser_model_predict_y(const LaserModel *m, const LaserDataset *d,
                          double *buf, size_t len);

/* One-shot ATE estimation. method is one of "laser", "sind-linear",
 * "sind-mlp", "bd-linear", "bd-mlp". */
int laser_estimate(const char *method, const LaserDataset *d_obs,
                   const LaserDataset *d_exp, const char *config,
                   double *tau_out);

#ifdef __cplusplus
}
#endif

#endif /* LASER_H */
