#ifndef BITFLIP_H
#define BITFLIP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define BITFLIP_DEFENSE_SHUFFLE 1

#define BITFLIP_DEFENSE_MAC 2

#define BITFLIP_VARIANT_STANDARD 0

#define BITFLIP_VARIANT_INVERTED 1

#define BITFLIP_TAG_LEN 4

typedef enum BitflipStatus {
  BITFLIP_STATUS_OK = 0,
  BITFLIP_STATUS_NULL_POINTER = 1,
  BITFLIP_STATUS_INVALID_ARGUMENT = 2,
  BITFLIP_STATUS_BUFFER_TOO_SMALL = 3,
  BITFLIP_STATUS_INTERNAL = 4,
} BitflipStatus;

typedef enum BitflipVerdict {
  BITFLIP_VERDICT_ACCEPTED_MUTATED = 0,
  BITFLIP_VERDICT_ACCEPTED_INTACT = 1,
  BITFLIP_VERDICT_REJECTED_CHECKSUM = 2,
  BITFLIP_VERDICT_REJECTED_MAC = 3,
  BITFLIP_VERDICT_PARSE_ERROR = 4,
} BitflipVerdict;

/**
 * Opaque endpoint configuration.
 */
typedef struct BitflipPipeline BitflipPipeline;

/**
 * Per-packet security context. `direction` is 0 for uplink, 1 for downlink;
 * `bearer` must be below 32.
 */
typedef struct BitflipContext {
  uint8_t key[16];
  uint32_t count;
  uint8_t bearer;
  uint8_t direction;
} BitflipContext;

/**
 * Telemetry message: position, velocity, acceleration.
 */
typedef struct BitflipMessage {
  float position;
  float velocity;
  float acceleration;
} BitflipMessage;

/**
 * What the receiver made of a wire. `received` is only meaningful for the
 * two accepted verdicts. Bit i of `mutated_fields` is set when field i
 * (position, velocity, acceleration) differs bitwise from what was sent.
 */
typedef struct BitflipReception {
  enum BitflipVerdict verdict;
  struct BitflipMessage received;
  uint32_t mutated_fields;
} BitflipReception;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Description of the last failure on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *bitflip_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *bitflip_version(void);

/**
 * `defense` is a mask of `BITFLIP_DEFENSE_*` flags; `checksum_variant` one of the
 * `BITFLIP_VARIANT_*` values. Ports default to 5000 and 6000.
 *
 * # Safety
 * `out` must be valid for writing one pointer.
 */
enum BitflipStatus bitflip_pipeline_new(uint32_t defense,
                                        uint32_t checksum_variant,
                                        struct BitflipPipeline **out);

/**
 * # Safety
 * `pipeline` must come from [`bitflip_pipeline_new`] and not be used
 * afterwards. Null is ignored.
 */
void bitflip_pipeline_free(struct BitflipPipeline *pipeline);

/**
 * # Safety
 * `pipeline` must be a live handle.
 */
enum BitflipStatus bitflip_pipeline_set_ports(struct BitflipPipeline *pipeline,
                                              uint16_t src_port,
                                              uint16_t dst_port);

/**
 * Number of wire bytes a payload of `payload_len` bytes occupies.
 *
 * # Safety
 * `pipeline` must be a live handle and `out` valid for one write.
 */
enum BitflipStatus bitflip_pipeline_wire_len(const struct BitflipPipeline *pipeline,
                                             size_t payload_len,
                                             size_t *out);

/**
 * Encodes, checksums, optionally tags, ciphers and shuffles a message.
 *
 * # Safety
 * Pointers must be valid; `out` must hold `cap` bytes.
 */
enum BitflipStatus bitflip_pipeline_protect(const struct BitflipPipeline *pipeline,
                                            const struct BitflipContext *ctx,
                                            const struct BitflipMessage *msg,
                                            uint8_t *out,
                                            size_t cap,
                                            size_t *out_len);

/**
 * Same as [`bitflip_pipeline_protect`] for an arbitrary payload.
 *
 * # Safety
 * Pointers must be valid for the given lengths.
 */
enum BitflipStatus bitflip_pipeline_protect_payload(const struct BitflipPipeline *pipeline,
                                                    const struct BitflipContext *ctx,
                                                    const uint8_t *payload,
                                                    size_t payload_len,
                                                    uint8_t *out,
                                                    size_t cap,
                                                    size_t *out_len);

/**
 * Receiver side. Malformed wires are reported through the verdict, not the
 * status.
 *
 * # Safety
 * Pointers must be valid; `wire` must hold `wire_len` bytes.
 */
enum BitflipStatus bitflip_pipeline_receive(const struct BitflipPipeline *pipeline,
                                            const struct BitflipContext *ctx,
                                            const uint8_t *wire,
                                            size_t wire_len,
                                            const struct BitflipMessage *sent,
                                            struct BitflipReception *out);

/**
 * Flips the given MSB-first bit positions of `wire` in place. Positions
 * must be distinct and inside the checksum field or the payload.
 *
 * # Safety
 * `wire` must hold `wire_len` bytes and `positions` `n` entries.
 */
enum BitflipStatus bitflip_apply_flips(const struct BitflipPipeline *pipeline,
                                       uint8_t *wire,
                                       size_t wire_len,
                                       const size_t *positions,
                                       size_t n);

/**
 * Draws a random checksum-pair attack of `pairs` pairs. Writes `2 * pairs`
 * positions, checksum bit first in each pair.
 *
 * # Safety
 * `out` must hold `cap` entries.
 */
enum BitflipStatus bitflip_plan_checksum_attack(size_t payload_len,
                                                bool has_mac,
                                                uint64_t seed,
                                                size_t pairs,
                                                size_t *out,
                                                size_t cap,
                                                size_t *out_len);

/**
 * # Safety
 * `data` must hold `len` bytes; `out` must be valid for one write.
 */
enum BitflipStatus bitflip_internet_checksum(const uint8_t *data,
                                             size_t len,
                                             uint32_t checksum_variant,
                                             uint16_t *out);

/**
 * # Safety
 * `out` must hold `len` bytes.
 */
enum BitflipStatus bitflip_derive_keystream(const struct BitflipContext *ctx,
                                            uint8_t *out,
                                            size_t len);

/**
 * # Safety
 * `data` must hold `len` bytes and `tag` four.
 */
enum BitflipStatus bitflip_compute_mac(const struct BitflipContext *ctx,
                                       const uint8_t *data,
                                       size_t len,
                                       uint8_t *tag);

/**
 * Forward Fisher-Yates table for `seed`: bit at position i moves to
 * `out[i]`.
 *
 * # Safety
 * `out` must hold `n` entries.
 */
enum BitflipStatus bitflip_permutation(uint64_t seed, size_t n, size_t *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BITFLIP_H */
