/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef HYDRORAD_H
#define HYDRORAD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/*
 Distance used by [`hr_database_project`].
 */
typedef enum HrMetric {
  HR_METRIC_L2 = 0,
  HR_METRIC_WASSERSTEIN = 1,
} HrMetric;

/*
 Result of every fallible call.
 */
typedef enum HrStatus {
  HR_STATUS_OK = 0,
  HR_STATUS_NULL_POINTER = 1,
  HR_STATUS_INVALID_ARGUMENT = 2,
  HR_STATUS_BUFFER_TOO_SMALL = 3,
  HR_STATUS_IO = 4,
  HR_STATUS_SIMULATION = 5,
  HR_STATUS_FEATURES = 6,
  HR_STATUS_DATABASE = 7,
  HR_STATUS_MANIFOLD = 8,
  HR_STATUS_NEURAL = 9,
  HR_STATUS_PANIC = 10,
} HrStatus;

/*
 Opaque handle to an open simulation database.
 */
typedef struct HrDatabase HrDatabase;

/*
 Opaque trained generator.
 */
typedef struct HrGenerator HrGenerator;

/*
 Opaque density sequence.
 */
typedef struct HrSequence HrSequence;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *hr_version(void);

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL.

 # Safety
 `buf` is null or points to `len` writable bytes.
 */
size_t hr_last_error(char *buf, size_t len);

/*
 Runs one implosion with the default setup and snapshot schedule.
 `offsets` holds the five fractional parameter offsets (T0, cs, s1, Γ0, cV).

 # Safety
 `offsets` points to 5 values; `out` is a valid pointer to write the handle to.
 */
enum HrStatus hr_simulate(const double *offsets, struct HrSequence **out);

/*
 Reads a sequence file.

 # Safety
 `path` is a NUL-terminated string; `out` is a valid pointer.
 */
enum HrStatus hr_sequence_read(const char *path, struct HrSequence **out);

/*
 Writes a sequence file.

 # Safety
 `seq` is a live handle; `path` is a NUL-terminated string.
 */
enum HrStatus hr_sequence_write(const struct HrSequence *seq, const char *path);

/*
 Grid of a sequence: points per snapshot, snapshot count, spacing [cm].

 # Safety
 `seq` is a live handle; the out pointers are valid.
 */
enum HrStatus hr_sequence_dims(const struct HrSequence *seq,
                               size_t *points,
                               size_t *snapshots,
                               double *dr_cm);

/*
 Copies the densities [g/cm³], snapshot-major, into `buf`.

 # Safety
 `seq` is a live handle; `buf` has room for `capacity` values.
 */
enum HrStatus hr_sequence_copy_data(const struct HrSequence *seq, double *buf, size_t capacity);

/*
 Copies the snapshot times [μs] into `buf`.

 # Safety
 `seq` is a live handle; `buf` has room for `capacity` values.
 */
enum HrStatus hr_sequence_copy_times(const struct HrSequence *seq, double *buf, size_t capacity);

/*
 Releases a sequence. Null is ignored.

 # Safety
 `seq` is null or a handle not yet released.
 */
void hr_sequence_free(struct HrSequence *seq);

/*
 Shock and edge radii [cm] of every snapshot. Both buffers need room for
 one value per snapshot.

 # Safety
 `seq` is a live handle; both buffers have room for `capacity` values.
 */
enum HrStatus hr_extract_features(const struct HrSequence *seq,
                                  double *shock_cm,
                                  double *edge_cm,
                                  size_t capacity);

/*
 Opens a database directory and loads its records.

 # Safety
 `path` is a NUL-terminated string; `out` is a valid pointer.
 */
enum HrStatus hr_database_open(const char *path, struct HrDatabase **out);

/*
 Number of records in the database.

 # Safety
 `db` is a live handle; `len` is a valid pointer.
 */
enum HrStatus hr_database_len(const struct HrDatabase *db, size_t *len);

/*
 Nearest database record to `target` under `metric`. Writes the record
 index, the L2 residual [g/cm³], the five parameter offsets and, when
 `projected` is non-null, a new handle holding the record's sequence.

 # Safety
 `db` and `target` are live handles; `offsets` has room for 5 values;
 `index` and `residual` are valid pointers; `projected` is null or valid.
 */
enum HrStatus hr_database_project(const struct HrDatabase *db,
                                  const struct HrSequence *target,
                                  enum HrMetric metric,
                                  size_t *index,
                                  double *residual,
                                  double *offsets,
                                  struct HrSequence **projected);

/*
 Releases a database. Null is ignored.

 # Safety
 `db` is null or a handle not yet released.
 */
void hr_database_free(struct HrDatabase *db);

/*
 Loads a trained generator of either model family.

 # Safety
 `path` is a NUL-terminated string; `out` is a valid pointer.
 */
enum HrStatus hr_generator_load(const char *path, struct HrGenerator **out);

/*
 Ensemble-mean density sequence for the given features. `times_us`,
 `shock_cm` and `edge_cm` each hold `snapshots` values.

 # Safety
 `gen` is a live handle; the three arrays hold `snapshots` values; `out` is valid.
 */
enum HrStatus hr_generator_reconstruct(const struct HrGenerator *gen,
                                       const double *times_us,
                                       const double *shock_cm,
                                       const double *edge_cm,
                                       size_t snapshots,
                                       size_t ensemble,
                                       bool dropout_at_test,
                                       uint64_t seed,
                                       struct HrSequence **out);

/*
 Releases a generator. Null is ignored.

 # Safety
 `gen` is null or a handle not yet released.
 */
void hr_generator_free(struct HrGenerator *gen);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYDRORAD_H */
