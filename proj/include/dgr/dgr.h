/* C interface to the domain-gap-reduction depth pipeline.
 *
 * All functions return dgr_status; on failure dgr_last_error() holds a
 * one-line diagnostic for the calling thread. Handles are opaque and must be
 * released with their matching _free function.
 */
#ifndef DGR_DGR_H
#define DGR_DGR_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum dgr_status {
  DGR_OK = 0,
  DGR_ERR_CONFIG = 1, /* bad usage, bad config, malformed files */
  DGR_ERR_RUNTIME = 2 /* numeric or runtime failure */
} dgr_status;

typedef struct dgr_config dgr_config;
typedef struct dgr_checkpoint dgr_checkpoint;

const char* dgr_last_error(void);

/* ---- configuration ---- */
dgr_config* dgr_config_new(void);
void dgr_config_free(dgr_config* cfg);
dgr_status dgr_config_load_file(dgr_config* cfg, const char* path);
dgr_status dgr_config_set(dgr_config* cfg, const char* key, const char* value);
/* Resolved key=value text; truncates to cap-1 bytes. */
dgr_status dgr_config_echo(const dgr_config* cfg, char* buf, size_t cap);

/* ---- pipeline entry points ---- */
dgr_status dgr_render_dataset(const dgr_config* cfg, const char* out_dir);

/* resume_from may be NULL. On success final_ckpt_path (if non-NULL) receives
 * the path of the final checkpoint. */
dgr_status dgr_train(const dgr_config* cfg, const char* data_dir, const char* out_dir,
                     const char* resume_from, char* final_ckpt_path, size_t cap);

/* split: "train", "heldout" or "all". Writes the per-pair CSV plus a summary
 * line; summary (if non-NULL) receives the summary line. */
dgr_status dgr_evaluate(const char* checkpoint_path, const char* data_dir, const char* out_csv,
                        const char* split, char* summary, size_t cap);

/* Ground-truth warp consistency over every pair of a dataset. Fails with
 * DGR_ERR_RUNTIME when the mean photometric residual is >= 0.02 or the mean
 * geometric loss is >= 0.01. */
dgr_status dgr_warp_check(const char* data_dir, char* summary, size_t cap);

/* Finite-difference suite over all differentiable ops and the pipeline
 * losses. report receives one "name max_rel_error" line per check. Fails with
 * DGR_ERR_RUNTIME when any check reaches 1e-4. */
dgr_status dgr_gradcheck(char* report, size_t cap, double* max_rel_error);

dgr_status dgr_diffmap(const char* checkpoint_path, const char* image_png, const char* out_png);

/* ---- checkpoint handle ---- */
dgr_checkpoint* dgr_checkpoint_open(const char* path);
void dgr_checkpoint_free(dgr_checkpoint* ckpt);
int dgr_checkpoint_resolution(const dgr_checkpoint* ckpt);

/* rgb is channel-major [3][h][w] in [0,1]; depth_out receives h*w scene-unit
 * depths. */
dgr_status dgr_predict_depth(const dgr_checkpoint* ckpt, const double* rgb, int h, int w,
                             double* depth_out);

#ifdef __cplusplus
}
#endif

#endif /* DGR_DGR_H */
