#ifndef ROMLINEAGE_H
#define ROMLINEAGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RlArch {
  RL_ARCH_Z80 = 0,
  RL_ARCH_M6502 = 1,
} RlArch;

typedef enum RlDefsFormat {
  RL_DEFS_FORMAT_ASM = 0,
  RL_DEFS_FORMAT_HEADER = 1,
} RlDefsFormat;

/**
 * `None` outside a `DerivedFrom` verdict.
 */
typedef enum RlFamily {
  RL_FAMILY_NONE = 0,
  RL_FAMILY_MICROSOFT = 1,
  RL_FAMILY_SINCLAIR = 2,
  RL_FAMILY_HU_BASIC = 3,
} RlFamily;

typedef enum RlStatus {
  RL_STATUS_OK = 0,
  RL_STATUS_NULL_ARGUMENT = 1,
  RL_STATUS_INVALID_UTF8 = 2,
  RL_STATUS_IO = 3,
  RL_STATUS_INVALID_INPUT = 4,
  RL_STATUS_INVALID_PARAMETER = 5,
  RL_STATUS_NOTHING_TO_EMIT = 6,
  RL_STATUS_PANIC = 7,
} RlStatus;

typedef enum RlVerdictKind {
  RL_VERDICT_KIND_DERIVED_FROM = 0,
  RL_VERDICT_KIND_ORIGINAL = 1,
  RL_VERDICT_KIND_INCONCLUSIVE = 2,
} RlVerdictKind;

/**
 * Opaque signature database.
 */
typedef struct RlDb RlDb;

/**
 * Opaque ROM image.
 */
typedef struct RlRom RlRom;

typedef struct RlVerdict {
  enum RlVerdictKind kind;
  enum RlFamily family;
  /**
   * 1 for high, 0 for low.
   */
  uint8_t high_confidence;
  uint32_t score_microsoft;
  uint32_t score_sinclair;
  uint32_t score_hubasic;
  uint32_t routines_matched;
} RlVerdict;

/**
 * Exact ratios as numerator/denominator pairs.
 */
typedef struct RlSimilarity {
  uint64_t jaccard_num;
  uint64_t jaccard_den;
  uint64_t containment_a_in_b_num;
  uint64_t containment_a_in_b_den;
  uint64_t containment_b_in_a_num;
  uint64_t containment_b_in_a_den;
  uint64_t shared_grams;
  uint64_t size_a;
  uint64_t size_b;
} RlSimilarity;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *rl_version(void);

/**
 * Message for the last failed call on this thread, or null. Valid until the
 * next library call on the same thread.
 */
const char *rl_last_error_message(void);

/**
 * # Safety
 * `path` is a nul-terminated string; `out` is writable.
 */
enum RlStatus rl_rom_load_file(const char *path,
                               enum RlArch arch,
                               uint16_t base_addr,
                               struct RlRom **out);

/**
 * # Safety
 * `data` points at `len` readable bytes; `out` is writable.
 */
enum RlStatus rl_rom_load_bytes(const uint8_t *data,
                                size_t len,
                                enum RlArch arch,
                                uint16_t base_addr,
                                struct RlRom **out);

/**
 * # Safety
 * `rom` came from `rl_rom_load_*` and is not used afterwards. Null is a no-op.
 */
void rl_rom_free(struct RlRom *rom);

/**
 * # Safety
 * `rom` is a live handle or null (returns 0).
 */
size_t rl_rom_len(const struct RlRom *rom);

/**
 * Writes the 32-byte SHA-256 of the image to `out`.
 *
 * # Safety
 * `rom` is live; `out` has room for 32 bytes.
 */
enum RlStatus rl_rom_content_hash(const struct RlRom *rom, uint8_t *out);

/**
 * # Safety
 * `out` is writable.
 */
enum RlStatus rl_db_builtin(struct RlDb **out);

/**
 * # Safety
 * `path` is a nul-terminated string; `out` is writable.
 */
enum RlStatus rl_db_load_file(const char *path, struct RlDb **out);

/**
 * # Safety
 * `db` came from `rl_db_*` and is not used afterwards. Null is a no-op.
 */
void rl_db_free(struct RlDb *db);

/**
 * # Safety
 * `db` is a live handle or null (returns 0).
 */
size_t rl_db_len(const struct RlDb *db);

/**
 * Scan report (hits and routine map) as JSON, without timing.
 *
 * # Safety
 * Handles are live; `out` is writable. Free the string with `rl_string_free`.
 */
enum RlStatus rl_scan_json(const struct RlRom *rom, const struct RlDb *db, char **out);

/**
 * Classification report as JSON, without timing. Passing 0 for both
 * thresholds selects the defaults.
 *
 * # Safety
 * Handles are live; `out` is writable. Free the string with `rl_string_free`.
 */
enum RlStatus rl_report_json(const struct RlRom *rom,
                             const struct RlDb *db,
                             uint32_t t_derived,
                             uint32_t t_original,
                             char **out);

/**
 * Passing 0 for both thresholds selects the defaults.
 *
 * # Safety
 * Handles are live; `out` is writable.
 */
enum RlStatus rl_classify(const struct RlRom *rom,
                          const struct RlDb *db,
                          uint32_t t_derived,
                          uint32_t t_original,
                          struct RlVerdict *out);

/**
 * Symbol definitions for the routines found in `rom`. `prefix` may be null.
 *
 * # Safety
 * Handles are live; `prefix` is null or nul-terminated; `out` is writable.
 */
enum RlStatus rl_emit_defs(const struct RlRom *rom,
                           const struct RlDb *db,
                           enum RlDefsFormat format,
                           const char *prefix,
                           char **out);

/**
 * k-gram similarity. `winnow` of 0 keeps every gram.
 *
 * # Safety
 * Handles are live; `out` is writable.
 */
enum RlStatus rl_compare(const struct RlRom *a,
                         const struct RlRom *b,
                         size_t k,
                         size_t winnow,
                         bool mask_operands,
                         struct RlSimilarity *out);

/**
 * # Safety
 * `s` came from this library and is not used afterwards. Null is a no-op.
 */
void rl_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROMLINEAGE_H */
