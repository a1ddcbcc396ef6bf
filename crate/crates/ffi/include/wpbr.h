/* C interface to the wireless-powered backscatter relay network library. */

#pragma once

/* Generated with cbindgen:0.26.0 */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum WpbrStatus {
  WPBR_STATUS_OK = 0,
  WPBR_STATUS_NULL_ARGUMENT = 1,
  WPBR_STATUS_INVALID_ARGUMENT = 2,
  WPBR_STATUS_CONFIG_ERROR = 3,
  WPBR_STATUS_NUMERICAL_ERROR = 4,
  WPBR_STATUS_CONSTRAINT_VIOLATION = 5,
  WPBR_STATUS_IO_ERROR = 6,
  WPBR_STATUS_INTERNAL = 7,
} WpbrStatus;

// Opaque fading block for one system.
typedef struct WpbrChannels WpbrChannels;

// Opaque experiment context: topology, path loss, link budget, solver
// settings.
typedef struct WpbrSystem WpbrSystem;

// Lower-bound solution summary.
typedef struct WpbrLowerBound {
  // Best realized bound value `t log2(1 + gamma_bar)`.
  double value;
  // Hop time of the solution.
  double t_opt;
  // Remaining `r_upper - r_lower` gap at termination.
  double gap;
  // Polyblock iterations spent.
  uint32_t iterations;
  // 1 when the gap closed below the configured tolerance.
  int32_t converged;
  // Throughput the solution action earns on this fading block.
  double realized_reward;
} WpbrLowerBound;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static C string.
const char *wpbr_version(void);

// Human-readable description of a status code (static storage).
const char *wpbr_status_message(enum WpbrStatus status);

// Creates a system with the built-in default configuration.
//
// # Safety
// `out` must be a valid pointer to a pointer slot.
enum WpbrStatus wpbr_system_default(struct WpbrSystem **out);

// Creates a system from a TOML configuration file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` a valid pointer slot.
enum WpbrStatus wpbr_system_from_config(const char *path, struct WpbrSystem **out);

// Releases a system handle (`NULL` is a no-op).
//
// # Safety
// `system` must have come from a `wpbr_system_*` constructor.
void wpbr_system_free(struct WpbrSystem *system);

// Number of HAP antennas (K).
//
// # Safety
// `system` must be a live handle.
uintptr_t wpbr_system_antennas(const struct WpbrSystem *system);

// Number of relays (N).
//
// # Safety
// `system` must be a live handle.
uintptr_t wpbr_system_relays(const struct WpbrSystem *system);

// Draws one fading block for the system (deterministic per seed).
//
// # Safety
// `system` must be a live handle; `out` a valid pointer slot.
enum WpbrStatus wpbr_channels_generate(const struct WpbrSystem *system,
                                       uint64_t seed,
                                       struct WpbrChannels **out);

// Releases a channels handle (`NULL` is a no-op).
//
// # Safety
// `channels` must have come from `wpbr_channels_generate`.
void wpbr_channels_free(struct WpbrChannels *channels);

// Slot throughput `t log2(1 + gamma_1 + gamma_2)` for a fully specified
// action. Active relays transmit at their harvested-energy budget.
//
// # Safety
// `modes`/`phases` must hold N entries, `w0`/`w1` 2K doubles (re/im
// interleaved); all pointers must be valid; `out_reward` is written on
// success.
enum WpbrStatus wpbr_throughput(const struct WpbrSystem *system,
                                const struct WpbrChannels *channels,
                                const uint8_t *modes,
                                const double *phases,
                                double t,
                                const double *w0,
                                const double *w1,
                                double *out_reward);

// Solves the throughput lower bound for a given relay-mode assignment
// (passive phases are co-phased automatically).
//
// # Safety
// `modes` must hold N entries; all pointers must be valid; `out` is
// written on success.
enum WpbrStatus wpbr_lower_bound(const struct WpbrSystem *system,
                                 const struct WpbrChannels *channels,
                                 const uint8_t *modes,
                                 struct WpbrLowerBound *out);

// Evaluates a named reference scheme (`random`, `max_dl`, `max_energy`,
// `dl_only`, `lower_bound`) on the fading block.
//
// # Safety
// `scheme` must be a NUL-terminated string; all pointers must be valid;
// `out_reward` is written on success.
enum WpbrStatus wpbr_baseline(const struct WpbrSystem *system,
                              const struct WpbrChannels *channels,
                              const char *scheme,
                              double *out_reward);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus
