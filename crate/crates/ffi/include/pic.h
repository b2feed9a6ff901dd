#ifndef PIC_H
#define PIC_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Length of a serialized public key.
 */
#define PIC_PUBLIC_KEY_LEN 64

/**
 * Result code of every fallible call. Zero means success.
 */
typedef enum PicStatus {
  PIC_STATUS_OK = 0,
  PIC_STATUS_NULL_POINTER = 1,
  PIC_STATUS_INVALID_INPUT = 2,
  PIC_STATUS_INFEASIBLE = 3,
  PIC_STATUS_DECRYPTION = 4,
  PIC_STATUS_DECODE = 5,
  PIC_STATUS_OUTSIDE_DOMAIN = 6,
  PIC_STATUS_BUFFER_TOO_SMALL = 7,
  PIC_STATUS_PANIC = 8,
  PIC_STATUS_OTHER = 9,
} PicStatus;

typedef enum PicInversionStatus {
  PIC_INVERSION_STATUS_EXACT = 0,
  PIC_INVERSION_STATUS_FLOOR = 1,
  PIC_INVERSION_STATUS_CEILING = 2,
} PicInversionStatus;

typedef enum PicMechanism {
  PIC_MECHANISM_MINKOWSKI = 0,
  PIC_MECHANISM_LAPLACE = 1,
  PIC_MECHANISM_PLANAR_LAPLACE = 2,
  PIC_MECHANISM_SQUARE_WAVE = 3,
  PIC_MECHANISM_STAIRCASE = 4,
} PicMechanism;

typedef enum PicShape {
  PIC_SHAPE_BALL = 0,
  PIC_SHAPE_CUBE = 1,
} PicShape;

/**
 * An ephemeral key pair; the public half is `PIC_PUBLIC_KEY_LEN` bytes.
 */
typedef struct PicKeyPair PicKeyPair;

/**
 * A configured local randomizer.
 */
typedef struct PicRandomizer PicRandomizer;

/**
 * Cryptographic rng used both for sampling noise and for key material.
 */
typedef struct PicRng PicRng;

/**
 * Owned bytes handed to the caller. `data` is null exactly when `len` is 0.
 */
typedef struct PicBuffer {
  uint8_t *data;
  size_t len;
} PicBuffer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer stays
 * valid until the next failing call on the same thread.
 */
const char *pic_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pic_version(void);

/**
 * Releases a buffer returned by this library. Null data is ignored.
 *
 * # Safety
 * `buf` must come from this library and not have been freed already.
 */
void pic_buffer_free(struct PicBuffer buf);

/**
 * Default `delta` for a group of `group_size` members.
 */
double pic_delta_default(uint64_t group_size);

/**
 * Central budget reached by `population` reports at local budget `epsilon`.
 *
 * # Safety
 * `out_central` must be a valid pointer.
 */
enum PicStatus pic_amplify(double epsilon, double delta, uint64_t population, double *out_central);

/**
 * Local budget whose amplified value is `epsilon_central`.
 *
 * # Safety
 * Both output pointers must be valid.
 */
enum PicStatus pic_invert_amplify(double epsilon_central,
                                  double delta,
                                  uint64_t population,
                                  double *out_local,
                                  enum PicInversionStatus *out_status);

/**
 * Creates an rng: seeded deterministically when `deterministic` is non-zero,
 * otherwise from the operating system.
 *
 * # Safety
 * `out_rng` must be a valid pointer.
 */
enum PicStatus pic_rng_new(int32_t deterministic, uint64_t seed, struct PicRng **out_rng);

/**
 * # Safety
 * `rng` must be null or a handle from [`pic_rng_new`] not freed before.
 */
void pic_rng_free(struct PicRng *rng);

/**
 * Builds a randomizer over the ball or cube of radius `scale` in `dim` dimensions.
 *
 * # Safety
 * `out_randomizer` must be a valid pointer.
 */
enum PicStatus pic_randomizer_new(enum PicMechanism mechanism,
                                  enum PicShape shape,
                                  size_t dim,
                                  double scale,
                                  double epsilon,
                                  struct PicRandomizer **out_randomizer);

/**
 * # Safety
 * `randomizer` must be null or a handle from [`pic_randomizer_new`] not freed before.
 */
void pic_randomizer_free(struct PicRandomizer *randomizer);

/**
 * Input dimension of the randomizer, or 0 for a null handle.
 *
 * # Safety
 * `randomizer` must be null or a live handle.
 */
size_t pic_randomizer_dim(const struct PicRandomizer *randomizer);

/**
 * Sanitizes `x` (length `dim`). Writes the raw report and its unbiased
 * estimate, each needing `dim` slots; `out_estimate` may be null.
 *
 * # Safety
 * Handles must be live; arrays must hold `dim` elements.
 */
enum PicStatus pic_randomizer_sample(const struct PicRandomizer *randomizer,
                                     struct PicRng *rng,
                                     const double *x,
                                     size_t dim,
                                     double *out_raw,
                                     double *out_estimate);

/**
 * Unbiased estimate of a raw report using public parameters only.
 *
 * # Safety
 * The handle must be live; arrays must hold `dim` elements.
 */
enum PicStatus pic_randomizer_debias(const struct PicRandomizer *randomizer,
                                     const double *raw,
                                     size_t dim,
                                     double *out_estimate);

/**
 * # Safety
 * Pointers must be valid; `rng` must be live.
 */
enum PicStatus pic_keypair_generate(struct PicRng *rng, struct PicKeyPair **out_keys);

/**
 * # Safety
 * `keys` must be null or a handle from [`pic_keypair_generate`] not freed before.
 */
void pic_keypair_free(struct PicKeyPair *keys);

/**
 * Copies the public key into `out_pk`, which must hold `PIC_PUBLIC_KEY_LEN` bytes.
 *
 * # Safety
 * `keys` must be live and `out_pk` writable for `cap` bytes.
 */
enum PicStatus pic_keypair_public_key(const struct PicKeyPair *keys, uint8_t *out_pk, size_t cap);

/**
 * Encrypts `plaintext` to the holder of public key `pk`.
 *
 * # Safety
 * Arrays must hold the stated lengths; `rng` must be live.
 */
enum PicStatus pic_encrypt(const uint8_t *pk,
                           size_t pk_len,
                           const uint8_t *plaintext,
                           size_t plaintext_len,
                           struct PicRng *rng,
                           struct PicBuffer *out_ciphertext);

/**
 * Opens a ciphertext produced for `keys`.
 *
 * # Safety
 * `keys` must be live; `ciphertext` must hold `ciphertext_len` bytes.
 */
enum PicStatus pic_decrypt(const struct PicKeyPair *keys,
                           const uint8_t *ciphertext,
                           size_t ciphertext_len,
                           struct PicBuffer *out_plaintext);

/**
 * Serializes a `(public key, report)` pair in the wire format.
 *
 * # Safety
 * Arrays must hold the stated lengths.
 */
enum PicStatus pic_encode_report(const uint8_t *pk,
                                 size_t pk_len,
                                 const double *report,
                                 size_t dim,
                                 struct PicBuffer *out_bytes);

/**
 * Parses a wire-format report. The key goes to `out_pk`; coordinates go to
 * `out_report` (capacity `cap`) and their count to `out_dim`, which is set
 * even when the capacity is too small.
 *
 * # Safety
 * `bytes` must hold `len` bytes; output pointers must be valid.
 */
enum PicStatus pic_decode_report(const uint8_t *bytes,
                                 size_t len,
                                 struct PicBuffer *out_pk,
                                 double *out_report,
                                 size_t cap,
                                 size_t *out_dim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PIC_H */
