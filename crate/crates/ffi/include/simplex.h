/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef SIMPLEX_H
#define SIMPLEX_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum SimplexBackend {
  SIMPLEX_BACKEND_AUTO = 0,
  SIMPLEX_BACKEND_HARDWARE = 1,
  SIMPLEX_BACKEND_EMULATED = 2,
} SimplexBackend;

typedef enum SimplexStatus {
  SIMPLEX_STATUS_OK = 0,
  SIMPLEX_STATUS_NULL_POINTER = 1,
  SIMPLEX_STATUS_INVALID_SLOT = 2,
  // The file has not been initialized, or has been finished.
  SIMPLEX_STATUS_DISABLED = 3,
  SIMPLEX_STATUS_HARDWARE_UNAVAILABLE = 4,
  // Another hardware file is live on this thread.
  SIMPLEX_STATUS_HARDWARE_BUSY = 5,
  SIMPLEX_STATUS_INVALID_BACKEND = 6,
  SIMPLEX_STATUS_WRONG_THREAD = 7,
  SIMPLEX_STATUS_INTERNAL = 8,
  SIMPLEX_STATUS_PANIC = 9,
} SimplexStatus;

// Opaque register-file handle.
typedef struct SimplexFile SimplexFile;

typedef struct SimplexProbeReport {
  bool cpu_has_mpx;
  bool xstate_bndregs;
  bool xstate_bndcsr;
  bool os_context_saves_mpx;
  // Backend `SIMPLEX_BACKEND_AUTO` resolves to on this machine.
  enum SimplexBackend selected;
} SimplexProbeReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Fills `out` with this machine's MPX capabilities.
enum SimplexStatus simplex_probe(struct SimplexProbeReport *out);

// Creates a disabled register file. `SIMPLEX_BACKEND_HARDWARE` fails when
// the machine lacks MPX; `SIMPLEX_BACKEND_AUTO` falls back to emulation.
// On success `*out` receives a handle to release with `simplex_file_free`.
enum SimplexStatus simplex_file_new(enum SimplexBackend backend, struct SimplexFile **out);

// Releases a handle. Null is accepted. The slots are wiped first.
enum SimplexStatus simplex_file_free(struct SimplexFile *file);

enum SimplexStatus simplex_file_backend(struct SimplexFile *file, enum SimplexBackend *out);

// Enables the file and resets all slots. Safe to call again.
enum SimplexStatus simplex_process_specific_init(struct SimplexFile *file);

// Resets all slots and disables the file. Safe to call again.
enum SimplexStatus simplex_process_specific_finish(struct SimplexFile *file);

enum SimplexStatus simplex_is_enabled(struct SimplexFile *file, bool *out);

enum SimplexStatus simplex_setbndl(struct SimplexFile *file, uint8_t slot_index, uint64_t value);

enum SimplexStatus simplex_setbndu(struct SimplexFile *file, uint8_t slot_index, uint64_t value);

enum SimplexStatus simplex_setbnd128(struct SimplexFile *file,
                                     uint8_t slot_index,
                                     uint64_t low,
                                     uint64_t high);

// Quick write of the lower half; the upper half is left undefined.
enum SimplexStatus simplex_qsetbndl(struct SimplexFile *file, uint8_t slot_index, uint64_t value);

enum SimplexStatus simplex_getbndl(struct SimplexFile *file, uint8_t slot_index, uint64_t *out);

enum SimplexStatus simplex_getbndu(struct SimplexFile *file, uint8_t slot_index, uint64_t *out);

enum SimplexStatus simplex_getbnd128(struct SimplexFile *file,
                                     uint8_t slot_index,
                                     uint64_t *low,
                                     uint64_t *high);

// Quick read of the lower half; does not clear the spill area.
enum SimplexStatus simplex_qgetbndl(struct SimplexFile *file, uint8_t slot_index, uint64_t *out);

enum SimplexStatus simplex_reset_slot(struct SimplexFile *file, uint8_t slot_index);

enum SimplexStatus simplex_reset_all(struct SimplexFile *file);

// Copies the file's 16-byte spill area into `out` (test hook).
enum SimplexStatus simplex_scratch_snapshot(struct SimplexFile *file, uint8_t *out);

// Static, NUL-terminated description of a status code.
const char *simplex_status_str(enum SimplexStatus status);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIMPLEX_H */
