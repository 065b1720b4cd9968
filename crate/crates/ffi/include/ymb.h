#ifndef YMB_H
#define YMB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stdint.h>

typedef enum YmbStatus {
  YMB_STATUS_OK = 0,
  YMB_STATUS_NULL_POINTER = 1,
  YMB_STATUS_INVALID_ARGUMENT = 2,
  YMB_STATUS_SOLVER = 3,
  YMB_STATUS_IO = 4,
  YMB_STATUS_PANIC = 5,
} YmbStatus;

/*
 Run configuration.
 */
typedef struct YmbConfig YmbConfig;

/*
 A glued connection at one ε together with what its expansion needs.
 */
typedef struct YmbGlued YmbGlued;

/*
 Terms of `J_ε = 8π² + ε²YM(A̲_ε) + 𝓕_ε + r₁` at one parameter point.
 */
typedef struct YmbExpansion {
  double eps;
  double lambda;
  double j;
  double instanton;
  double small_action;
  double reduced;
  double r1;
  double chern;
} YmbExpansion;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version, a static NUL-terminated string.
 */
const char *ymb_version(void);

/*
 Message of the last failure on this thread, or NULL. Valid until the next
 failing call on the same thread.
 */
const char *ymb_last_error(void);

/*
 Default configuration. Never NULL.
 */
struct YmbConfig *ymb_config_default(void);

/*
 Parses a JSON config (or a run manifest) from a string.

 # Safety
 `json` must be NUL-terminated; `out` must be writable.
 */
enum YmbStatus ymb_config_from_json(const char *json, struct YmbConfig **out);

/*
 # Safety
 `cfg` must come from this library and not be used afterwards.
 */
void ymb_config_free(struct YmbConfig *cfg);

/*
 Sets the output directory used by [`ymb_run`].

 # Safety
 `cfg` must be a live handle; `dir` NUL-terminated.
 */
enum YmbStatus ymb_config_set_out(struct YmbConfig *cfg, const char *dir);

/*
 `ε²𝓨𝓜_ε` and `ε²‖F⁻‖²` of the 1-instanton centered at `p[0..4]` with scale
 `lambda`, over ℝ⁴ on the default bubble rule.

 # Safety
 `p` must point at 4 doubles; outputs must be writable.
 */
enum YmbStatus ymb_instanton_action(const double *p,
                                    double lambda,
                                    double *action,
                                    double *anti_self_dual);

/*
 Glues the bubble of `cfg` (center `p`, rotation `g` or the optimal one,
 `λ² = lambda_ratio·ε`) onto the small solution at `eps`.

 # Safety
 `cfg` must be a live handle; `out` writable.
 */
enum YmbStatus ymb_glued_new(const struct YmbConfig *cfg, double eps, struct YmbGlued **out);

/*
 # Safety
 `glued` must come from this library and not be used afterwards.
 */
void ymb_glued_free(struct YmbGlued *glued);

/*
 Bubble scale `λ` of the glued connection.

 # Safety
 `glued` must be a live handle; `lambda` writable.
 */
enum YmbStatus ymb_glued_lambda(const struct YmbGlued *glued, double *lambda);

/*
 Relative Chern number against the small solution.

 # Safety
 `glued` must be a live handle; `chern` writable.
 */
enum YmbStatus ymb_glued_relative_chern(const struct YmbGlued *glued, double *chern);

/*
 `J_ε` and its expansion terms.

 # Safety
 `glued` must be a live handle; `out` writable.
 */
enum YmbStatus ymb_glued_expansion(const struct YmbGlued *glued, struct YmbExpansion *out);

/*
 Runs a CLI command (`"instanton-check"`, `"landscape"`, `"expansion-study"`,
 `"probe"`, `"small-solution"`) writing artifacts to the config's output
 directory. `pass` receives whether every check passed.

 # Safety
 `cfg` must be a live handle; `command` NUL-terminated; `pass` writable.
 */
enum YmbStatus ymb_run(const struct YmbConfig *cfg, const char *command, bool *pass);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* YMB_H */
