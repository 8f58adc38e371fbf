/*
 * scenesampler C API.
 *
 * Every fallible call returns an scs_status; on failure a description is
 * available from scs_last_error() on the same thread until the next failing
 * call. Handles are opaque, owned by the caller and released with the
 * matching *_free function. Strings returned through char** are released
 * with scs_string_free.
 */
#ifndef SCENESAMPLER_H_
#define SCENESAMPLER_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(SCS_BUILDING_LIBRARY)
#    define SCS_API __declspec(dllexport)
#  else
#    define SCS_API __declspec(dllimport)
#  endif
#else
#  define SCS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum scs_status {
  SCS_OK = 0,
  SCS_INVALID_INPUT = 1,
  SCS_FATAL_CONFIG = 2,
  SCS_EMPTY_SCENE = 3,
  SCS_OBJECT_NOT_VISIBLE = 4,
  SCS_IO_ERROR = 5,
  SCS_INTERNAL = 6
} scs_status;

SCS_API const char* scs_version(void);
SCS_API const char* scs_status_name(scs_status status);
SCS_API const char* scs_last_error(void);

/* "trace", "debug", "info", "warn", "error", "off". */
SCS_API scs_status scs_set_log_level(const char* level);
SCS_API void scs_string_free(char* s);

/* ---- scenes ------------------------------------------------------------ */

typedef struct scs_scene scs_scene;

typedef struct scs_synth_params {
  uint64_t seed;
  uint32_t n_frames;
  uint32_t n_objects;
  uint32_t width;
  uint32_t height;
  double room_extent[3];
  double depth_scale;
  double voxel_size;    /* resolution of the ground-truth coverage */
  const char* scene_id; /* NULL: "synth_<seed>" */
} scs_synth_params;

SCS_API void scs_synth_params_default(scs_synth_params* params);

/* Loads root/scene_id/{depth/N.png, pose/N.txt, intrinsic.txt}. */
SCS_API scs_status scs_scene_load(const char* root, const char* scene_id, double depth_scale, scs_scene** out);
SCS_API scs_status scs_scene_synthesize(const scs_synth_params* params, scs_scene** out);
/* Writes the scene under root/<scene id>/ in the loader's layout. */
SCS_API scs_status scs_scene_export(const scs_scene* scene, const char* root);
SCS_API void scs_scene_free(scs_scene* scene);

SCS_API const char* scs_scene_id(const scs_scene* scene);
SCS_API size_t scs_scene_frame_count(const scs_scene* scene);
SCS_API size_t scs_scene_skipped_frames(const scs_scene* scene);
/* Copies up to `capacity` frame indices in ascending order. */
SCS_API scs_status scs_scene_frame_indices(const scs_scene* scene, uint32_t* out, size_t capacity);
/* Ground-truth boxes; only synthetic scenes have any. */
SCS_API size_t scs_scene_object_count(const scs_scene* scene);
SCS_API scs_status scs_scene_object(const scs_scene* scene, size_t k, double center[3], double extent[3]);

/* ---- coverage ---------------------------------------------------------- */

typedef struct scs_coverage scs_coverage;

/* threads == 0 uses every hardware thread. */
SCS_API scs_status scs_coverage_build(const scs_scene* scene, double voxel_size, uint32_t pixel_stride,
                                      uint32_t threads, scs_coverage** out);
SCS_API scs_status scs_coverage_save(const scs_coverage* coverage, const char* path);
SCS_API scs_status scs_coverage_load(const char* path, scs_coverage** out);
SCS_API void scs_coverage_free(scs_coverage* coverage);

SCS_API size_t scs_coverage_frame_count(const scs_coverage* coverage);
SCS_API size_t scs_coverage_universe_size(const scs_coverage* coverage);
SCS_API double scs_coverage_voxel_size(const scs_coverage* coverage);
SCS_API scs_status scs_coverage_ratio(const scs_coverage* coverage, const uint32_t* frame_indices, size_t n,
                                      double* out);

/* ---- frame sampling ---------------------------------------------------- */

typedef enum scs_strategy { SCS_STRATEGY_UNIFORM = 0, SCS_STRATEGY_MAX_COVERAGE = 1 } scs_strategy;

typedef struct scs_sampler_config {
  scs_strategy strategy;
  uint32_t budget;
  double coverage_threshold; /* <= 0 disables the adaptive stop */
  uint32_t threads;
} scs_sampler_config;

SCS_API void scs_sampler_config_default(scs_sampler_config* cfg);

typedef struct scs_sampling scs_sampling;

SCS_API scs_status scs_sample(const scs_coverage* coverage, const scs_sampler_config* cfg, scs_sampling** out);
SCS_API void scs_sampling_free(scs_sampling* sampling);

SCS_API size_t scs_sampling_count(const scs_sampling* sampling);
SCS_API scs_status scs_sampling_selected(const scs_sampling* sampling, uint32_t* out, size_t capacity);
SCS_API double scs_sampling_final_ratio(const scs_sampling* sampling);
SCS_API double scs_sampling_elapsed_ms(const scs_sampling* sampling);
/* Per-scene result document. include_timing == 0 writes elapsed_ms as 0. */
SCS_API scs_status scs_sampling_to_json(const scs_sampling* sampling, const char* scene_id, int include_timing,
                                        char** out_json);

/* ---- position-aware encoding ------------------------------------------- */

typedef enum scs_pool_mode { SCS_POOL_AVG = 0, SCS_POOL_CENTER = 1, SCS_POOL_MINMAX = 2 } scs_pool_mode;
typedef enum scs_pe_kind { SCS_PE_SIN = 0, SCS_PE_MLP = 1, SCS_PE_NONE = 2 } scs_pe_kind;

typedef struct scs_encode_config {
  uint32_t patch_size;
  scs_pool_mode pool;
  scs_pe_kind pe;
  uint32_t dim;
  double grid_resolution;
  uint64_t seed;
} scs_encode_config;

SCS_API void scs_encode_config_default(scs_encode_config* cfg);

/* Encodes one frame. When out_stem is non-NULL writes <out_stem>.bin and
 * <out_stem>.json. shape_out (nullable) receives rows, cols, dim. */
SCS_API scs_status scs_encode_frame(const scs_scene* scene, uint32_t frame_index, const scs_encode_config* cfg,
                                    const char* out_stem, uint32_t shape_out[3]);

/* ---- grounding --------------------------------------------------------- */

/* Evaluates a JSON-lines file of {query_id, predicted, target} records.
 * thresholds may be NULL for the default {0.25, 0.5}. */
SCS_API scs_status scs_ground_eval_file(const char* jsonl_path, const double* thresholds, size_t n_thresholds,
                                        char** out_json);

/* Writes encoding-only grounding records (identity heads) as JSON lines. */
SCS_API scs_status scs_ground_oracle_write(uint64_t seed, uint32_t queries, uint32_t dim, double grid_resolution,
                                           double tau, const char* out_jsonl);

SCS_API double scs_aabb_iou(const double a_center[3], const double a_extent[3], const double b_center[3],
                            const double b_extent[3]);

#ifdef __cplusplus
}
#endif

#endif /* SCENESAMPLER_H_ */
