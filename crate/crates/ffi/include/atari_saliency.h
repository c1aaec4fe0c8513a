#ifndef ATARI_SALIENCY_H
#define ATARI_SALIENCY_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Side length of network inputs and saliency maps.
#define AS_FRAME_SIDE 80

typedef enum AsHead {
  AS_HEAD_ACTOR = 0,
  AS_HEAD_CRITIC = 1,
} AsHead;

typedef enum AsStatus {
  AS_STATUS_OK = 0,
  // A required pointer was null.
  AS_STATUS_NULL = 1,
  // Out-of-range index, bad parameter or configuration.
  AS_STATUS_INVALID_ARGUMENT = 2,
  // Weights or episode could not be loaded.
  AS_STATUS_LOAD = 3,
  AS_STATUS_IO = 4,
  // Tensor shapes do not fit together.
  AS_STATUS_SHAPE = 5,
  // The library panicked; the handle involved should be freed.
  AS_STATUS_PANIC = 6,
} AsStatus;

typedef struct AsEpisode AsEpisode;

typedef struct AsNetwork AsNetwork;

// A network, an episode and the cached states of running one on the other.
typedef struct AsRollout AsRollout;

// Perturbation settings. `workers == 0` means one per available core.
typedef struct AsSaliencyParams {
  size_t stride;
  float blur_sigma;
  float mask_variance;
  size_t workers;
} AsSaliencyParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null if none. The
// pointer stays valid until the next failing call on the same thread.
const char *as_last_error_message(void);

struct AsSaliencyParams as_saliency_params_default(void);

// Loads a weights directory (or its manifest file).
//
// # Safety
// `path` must be a nul-terminated string and `out` writable.
enum AsStatus as_network_load(const char *path, struct AsNetwork **out);

// Seeded random weights, uniform in `[-scale, scale]`, ELU activations.
//
// # Safety
// `out` must be writable.
enum AsStatus as_network_synth(uint64_t seed,
                               size_t n_actions,
                               float scale,
                               struct AsNetwork **out);

// Number of actions, or 0 for a null handle.
//
// # Safety
// `net` must be null or a live handle.
size_t as_network_n_actions(const struct AsNetwork *net);

// # Safety
// `net` must be null or a handle not yet freed.
void as_network_free(struct AsNetwork *net);

// Loads a preprocessed episode directory.
//
// # Safety
// `path` must be a nul-terminated string and `out` writable.
enum AsStatus as_episode_load(const char *path, struct AsEpisode **out);

// Builds an episode from `n_frames` consecutive 80x80 frames with values
// in `[0, 1]`.
//
// # Safety
// `data` must point to `n_frames * AS_FRAME_SIDE * AS_FRAME_SIDE` floats.
enum AsStatus as_episode_from_frames(const float *data, size_t n_frames, struct AsEpisode **out);

// Number of frames, or 0 for a null handle.
//
// # Safety
// `episode` must be null or a live handle.
size_t as_episode_len(const struct AsEpisode *episode);

// # Safety
// `episode` must be null or a handle not yet freed.
void as_episode_free(struct AsEpisode *episode);

// Runs `net` over `episode` and caches every recurrent state. The rollout
// shares both objects, so they may be freed independently afterwards.
//
// # Safety
// Handles must be live; `out` writable.
enum AsStatus as_rollout_new(const struct AsNetwork *net,
                             const struct AsEpisode *episode,
                             struct AsRollout **out);

// Copies the logits (`logits_len` must equal the action count) and value
// of step `t`. Either output may be null to skip it.
//
// # Safety
// `rollout` must be live; non-null outputs must be writable.
enum AsStatus as_rollout_output(const struct AsRollout *rollout,
                                size_t t,
                                float *logits,
                                size_t logits_len,
                                float *value);

// # Safety
// `rollout` must be null or a handle not yet freed.
void as_rollout_free(struct AsRollout *rollout);

// Perturbation saliency of `head` at step `t`, upsampled to 80x80 into
// `out` (`AS_FRAME_SIDE * AS_FRAME_SIDE` floats). `params` may be null for
// the defaults.
//
// # Safety
// `rollout` must be live, `params` null or readable, `out` writable.
enum AsStatus as_saliency_map(const struct AsRollout *rollout,
                              size_t t,
                              enum AsHead head,
                              const struct AsSaliencyParams *params,
                              float *out);

// Change of the policy output when the memory entering step `t` is scaled
// by `factor`.
//
// # Safety
// `rollout` must be live and `out` writable.
enum AsStatus as_memory_saliency(const struct AsRollout *rollout,
                                 size_t t,
                                 float factor,
                                 bool perturb_hidden,
                                 float *out);

// Central-difference gradient magnitude map of `head` at step `t`.
//
// # Safety
// `rollout` must be live and `out` writable for 6400 floats.
enum AsStatus as_jacobian_map(const struct AsRollout *rollout,
                              size_t t,
                              enum AsHead head,
                              float epsilon,
                              size_t n_workers,
                              float *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ATARI_SALIENCY_H */
