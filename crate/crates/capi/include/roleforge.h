#ifndef ROLEFORGE_H
#define ROLEFORGE_H

/* Generated by cbindgen from roleforge-capi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by fallible calls.
 */
typedef enum RfStatus {
  RF_STATUS_OK = 0,
  /**
   * A pointer argument was null or a string was not valid UTF-8.
   */
  RF_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Input violated a domain invariant.
   */
  RF_STATUS_VALIDATION = 2,
  /**
   * Input could not be parsed.
   */
  RF_STATUS_PARSE = 3,
} RfStatus;

/**
 * Opaque parsed dialogue handle.
 */
typedef struct RfDialogue RfDialogue;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread; do not free.
 */
const char *rf_last_error_message(void);

/**
 * Release a string returned by any `rf_*` call.
 *
 * # Safety
 * `s` must be a pointer previously returned by this library and not yet
 * freed, or null.
 */
void rf_string_free(char *s);

/**
 * Parse a screenplay script into a dialogue. Returns null on failure (see
 * [`rf_last_error_message`]); release with [`rf_dialogue_free`].
 *
 * # Safety
 * `script` and `role_name` must be valid NUL-terminated strings.
 */
struct RfDialogue *rf_script_parse(const char *script, const char *role_name);

/**
 * # Safety
 * `dialogue` must come from [`rf_script_parse`] and not yet be freed.
 */
void rf_dialogue_free(struct RfDialogue *dialogue);

/**
 * Number of turns, or -1 on a null handle.
 *
 * # Safety
 * `dialogue` must be a live handle from [`rf_script_parse`] or null.
 */
int32_t rf_dialogue_turn_count(const struct RfDialogue *dialogue);

/**
 * Number of extractable training pairs, or -1 on a null handle.
 *
 * # Safety
 * `dialogue` must be a live handle from [`rf_script_parse`] or null.
 */
int32_t rf_dialogue_pair_count(const struct RfDialogue *dialogue);

/**
 * Render the dialogue back into script text. Free with [`rf_string_free`].
 *
 * # Safety
 * `dialogue` must be a live handle from [`rf_script_parse`] or null.
 */
char *rf_dialogue_render(const struct RfDialogue *dialogue);

/**
 * Extracted pairs as a JSON array. Free with [`rf_string_free`].
 *
 * # Safety
 * `dialogue` must be a live handle from [`rf_script_parse`] or null.
 */
char *rf_dialogue_pairs_json(const struct RfDialogue *dialogue);

/**
 * Extract the 1-7 score from a judge completion into `out_score`.
 *
 * # Safety
 * `completion` must be a valid NUL-terminated string; `out_score` must be
 * a valid writable pointer.
 */
enum RfStatus rf_verdict_parse(const char *completion, int32_t *out_score);

/**
 * Evidence text preceding the score, or null when parsing fails. Free with
 * [`rf_string_free`].
 *
 * # Safety
 * `completion` must be a valid NUL-terminated string.
 */
char *rf_verdict_evidence(const char *completion);

/**
 * Estimated token count of a text (word count scaled), or -1 on bad input.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string.
 */
int64_t rf_token_estimate(const char *text);

/**
 * Library version as a static string; do not free.
 */
const char *rf_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROLEFORGE_H */
