/* C interface to the chanest quantum-channel estimation toolkit. */

#ifndef CHANEST_H
#define CHANEST_H

/* Generated by cbindgen from chanest-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define CHANEST_OK 0

#define CHANEST_ERR_PANIC 1

#define CHANEST_ERR_INVALID 2

#define CHANEST_ERR_NUMERIC 3

#define CHANEST_ERR_DIVERGENT 4

/**
 * Opaque handle: a channel family together with its probe input state.
 */
typedef struct chanest_channel_t chanest_channel_t;

/**
 * Summary statistics of a Monte Carlo estimation run.
 */
typedef struct chanest_estimation_report_t {
  uint64_t n_shots;
  uint64_t n_trials;
  double empirical_variance;
  double crlb;
  double ratio;
  double bias;
} chanest_estimation_report_t;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or an empty string.
 */
const char *chanest_last_error(void);

/**
 * Creates a channel handle from a flat key=value spec, e.g.
 * `"channel=damping\nn_max=2\ninput=basis:2"`.
 */
int chanest_channel_new(const char *spec, struct chanest_channel_t **out);

/**
 * Releases a handle created by `chanest_channel_new`. Null is a no-op.
 */
void chanest_channel_free(struct chanest_channel_t *channel);

/**
 * Hilbert-space dimension of the channel.
 */
size_t chanest_channel_dim(const struct chanest_channel_t *channel);

/**
 * Fisher-information bound of the channel's own Kraus set at `theta`.
 */
int chanest_kraus_bound(const struct chanest_channel_t *channel, double theta, double *out);

/**
 * Fisher-information bound of the canonical decomposition at `theta`
 * (requires a pure input state).
 */
int chanest_canonical_bound(const struct chanest_channel_t *channel, double theta, double *out);

/**
 * Quantum Fisher information through the symmetric logarithmic derivative.
 */
int chanest_sld_fisher(const struct chanest_channel_t *channel, double theta, double *out);

/**
 * Classical Fisher information of a named POVM
 * (z-basis, x-basis, bell-basis, photon-number, position, eigenframe,
 * file:PATH) at `theta`.
 */
int chanest_classical_fisher(const struct chanest_channel_t *channel,
                             const char *povm,
                             double theta,
                             double *out);

/**
 * Runs a deterministic Monte Carlo maximum-likelihood experiment and fills
 * `report`.
 */
int chanest_crlb_experiment(const struct chanest_channel_t *channel,
                            const char *povm,
                            double theta,
                            uint64_t shots,
                            uint64_t trials,
                            uint64_t seed,
                            struct chanest_estimation_report_t *report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHANEST_H */
