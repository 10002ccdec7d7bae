#ifndef CXD_H
#define CXD_H

#include <stddef.h>
#include <stdint.h>

// Result of every fallible call. The numeric values match the exit codes
// of the `cxd` command where both exist.
typedef enum CxdStatus {
  CXD_STATUS_OK = 0,
  // A null pointer, invalid UTF-8 or an out-of-range index.
  CXD_STATUS_INVALID_ARGUMENT = 1,
  // Bad prompt, plan, lexicon or parameters.
  CXD_STATUS_INPUT_ERROR = 2,
  // The requested spatial relations admit no layout.
  CXD_STATUS_INFEASIBLE = 3,
  CXD_STATUS_BACKEND_FAILURE = 4,
  // A bug: the library panicked.
  CXD_STATUS_INTERNAL = 5,
} CxdStatus;

typedef struct CxdLatent CxdLatent;

typedef struct CxdLexicon CxdLexicon;

typedef struct CxdPlan CxdPlan;

// Sampler settings; `cxd_modulation_defaults` gives the defaults.
typedef struct CxdModulationParams {
  double lambda_pos;
  double lambda_neg;
  double omega;
  uint32_t steps;
  uint64_t seed;
} CxdModulationParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread; empty after a success.
// The pointer stays valid until the next call on the same thread.
const char *cxd_last_error(void);

// Releases a string returned by this library. Null is ignored.
//
// # Safety
// `s` must come from this library and not be freed twice.
void cxd_string_free(char *s);

// Loads a lexicon file; a null path gives the built-in lexicon.
//
// # Safety
// `path` is null or a NUL-terminated string; `out` is writable.
enum CxdStatus cxd_lexicon_load(const char *path, struct CxdLexicon **out);

// # Safety
// `lexicon` is null or a handle from `cxd_lexicon_load`, freed once.
void cxd_lexicon_free(struct CxdLexicon *lexicon);

// Complexity report of `prompt` as JSON. A null lexicon means the built-in
// one.
//
// # Safety
// Pointers are null or valid as documented above; `out_json` is writable.
enum CxdStatus cxd_analyze(const struct CxdLexicon *lexicon, const char *prompt, char **out_json);

// Plans `prompt` with the built-in planner, or replays the recorded replies
// in `fixtures_dir` when it is not null.
//
// # Safety
// `prompt` is a NUL-terminated string; `lexicon` and `fixtures_dir` are null
// or valid; `out` is writable.
enum CxdStatus cxd_plan_build(const struct CxdLexicon *lexicon,
                              const char *prompt,
                              const char *fixtures_dir,
                              struct CxdPlan **out);

// Parses and validates a plan document.
//
// # Safety
// `json` is a NUL-terminated string; `out` is writable.
enum CxdStatus cxd_plan_from_json(const char *json, struct CxdPlan **out);

// # Safety
// `plan` is a live plan handle; `out_json` is writable.
enum CxdStatus cxd_plan_to_json(const struct CxdPlan *plan, char **out_json);

// Number of foreground regions; 0 for a null handle.
//
// # Safety
// `plan` is null or a live plan handle.
uintptr_t cxd_plan_region_count(const struct CxdPlan *plan);

// Box of region `index` as `[x, y, width, height]` in image fractions.
//
// # Safety
// `plan` is a live plan handle; `out_box` points to four doubles.
enum CxdStatus cxd_plan_region_box(const struct CxdPlan *plan, uintptr_t index, double *out_box);

// Retouch request for an image painted from `plan`, as JSON.
//
// # Safety
// `plan` is a live plan handle; `image_ref` is a NUL-terminated string;
// `out_json` is writable.
enum CxdStatus cxd_plan_retouch_request(const struct CxdPlan *plan,
                                        const char *image_ref,
                                        char **out_json);

// # Safety
// `plan` is null or a handle from this library, freed once.
void cxd_plan_free(struct CxdPlan *plan);

struct CxdModulationParams cxd_modulation_defaults(void);

// Paints `plan` with the built-in deterministic denoiser on a
// `height x width x channels` latent. A null `params` means the defaults.
//
// # Safety
// `plan` is a live plan handle; `params` is null or readable; `out` is
// writable.
enum CxdStatus cxd_paint_mock(const struct CxdPlan *plan,
                              const struct CxdModulationParams *params,
                              uintptr_t height,
                              uintptr_t width,
                              uintptr_t channels,
                              struct CxdLatent **out);

// Reads a latent dump written by `cxd paint` or `cxd_latent_write`.
//
// # Safety
// `path` is a NUL-terminated string; `out` is writable.
enum CxdStatus cxd_latent_read(const char *path, struct CxdLatent **out);

// # Safety
// `latent` is a live latent handle; `path` is a NUL-terminated string.
enum CxdStatus cxd_latent_write(const struct CxdLatent *latent, const char *path);

// Writes the latent's height, width and channel count. Any output pointer
// may be null.
//
// # Safety
// `latent` is a live latent handle; non-null outputs are writable.
enum CxdStatus cxd_latent_dims(const struct CxdLatent *latent,
                               uintptr_t *height,
                               uintptr_t *width,
                               uintptr_t *channels);

// Row-major, channels-last values; `height * width * channels` doubles
// owned by the handle. Null for a null handle.
//
// # Safety
// `latent` is null or a live latent handle.
const double *cxd_latent_data(const struct CxdLatent *latent);

// SHA-256 of the latent dump, as lowercase hex.
//
// # Safety
// `latent` is a live latent handle; `out_hex` is writable.
enum CxdStatus cxd_latent_checksum(const struct CxdLatent *latent, char **out_hex);

// # Safety
// `latent` is null or a handle from this library, freed once.
void cxd_latent_free(struct CxdLatent *latent);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CXD_H */
