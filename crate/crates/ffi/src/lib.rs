//! C ABI over the simulation, feature, projection and reconstruction pipeline.
//!
//! Objects cross the boundary as opaque handles that the caller releases with
//! the matching `*_free` function. Every fallible call returns an
//! [`HrStatus`]; the message of the last failure on the calling thread is
//! available through [`hr_last_error`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use hydrorad::database::{Database, DatabaseError};
use hydrorad::eos::{EosError, EosParams};
use hydrorad::features::{features_from_sequence, FeatureError, FeatureSet, DEFAULT_FIT_CELLS};
use hydrorad::hydro::{run_and_sample, DensitySequence, HydroError, ImplosionSetup, SequenceIoError, SnapshotSchedule};
use hydrorad::manifold::{estimate_parameters, Aggregate, ManifoldError, Metric};
use hydrorad::neural::{generate_ensemble, load_generator, GeneratorModel, NeuralError};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    BufferTooSmall = 3,
    Io = 4,
    Simulation = 5,
    Features = 6,
    Database = 7,
    Manifold = 8,
    Neural = 9,
    Panic = 10,
}

/// Distance used by [`hr_database_project`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HrMetric {
    L2 = 0,
    Wasserstein = 1,
}

/// Opaque density sequence.
pub struct HrSequence(DensitySequence);

/// Opaque handle to an open simulation database.
pub struct HrDatabase {
    db: Database,
    records: Vec<hydrorad::database::SimulationRecord>,
}

/// Opaque trained generator.
pub struct HrGenerator(GeneratorModel);

thread_local! {
    static LAST_ERROR: RefCell<Vec<u8>> = const { RefCell::new(Vec::new()) };
}

struct Failure(HrStatus, String);

impl Failure {
    fn new(status: HrStatus, msg: impl Into<String>) -> Self {
        Self(status, msg.into())
    }
}

macro_rules! status_from {
    ($($ty:ty => $status:ident),* $(,)?) => {
        $(impl From<$ty> for Failure {
            fn from(e: $ty) -> Self {
                Failure(HrStatus::$status, e.to_string())
            }
        })*
    };
}

status_from!(
    EosError => Simulation,
    HydroError => Simulation,
    SequenceIoError => Io,
    FeatureError => Features,
    DatabaseError => Database,
    ManifoldError => Manifold,
    NeuralError => Neural,
);

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> HrStatus {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<&str>()
            .map(|s| s.to_string())
            .or_else(|| p.downcast_ref::<String>().cloned())
            .unwrap_or_else(|| "panic".into());
        Err(Failure::new(HrStatus::Panic, msg))
    });
    match outcome {
        Ok(()) => {
            LAST_ERROR.with(|e| e.borrow_mut().clear());
            HrStatus::Ok
        }
        Err(Failure(status, msg)) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = msg.into_bytes());
            status
        }
    }
}

fn non_null<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    // SAFETY: the caller passes either null or a pointer it obtained from this library.
    unsafe { p.as_ref() }.ok_or_else(|| Failure::new(HrStatus::NullPointer, format!("{what} is null")))
}

fn out_ptr<T>(p: *mut T, what: &str) -> Result<*mut T, Failure> {
    if p.is_null() {
        Err(Failure::new(HrStatus::NullPointer, format!("{what} is null")))
    } else {
        Ok(p)
    }
}

fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    non_null(p, "path")?;
    // SAFETY: non-null, and the caller guarantees a NUL-terminated string.
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Failure::new(HrStatus::InvalidArgument, "path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn slice_arg<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    non_null(p, what)?;
    // SAFETY: non-null and the caller guarantees `len` readable values.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn write_slice(src: &[f64], dst: *mut f64, capacity: usize, what: &str) -> Result<(), Failure> {
    if capacity < src.len() {
        return Err(Failure::new(
            HrStatus::BufferTooSmall,
            format!("{what} needs {} values, capacity is {capacity}", src.len()),
        ));
    }
    let dst = out_ptr(dst, what)?;
    // SAFETY: non-null with room for `capacity >= src.len()` values.
    unsafe { ptr::copy_nonoverlapping(src.as_ptr(), dst, src.len()) };
    Ok(())
}

fn give<T>(value: T, out: *mut *mut T) {
    // SAFETY: `out` was checked non-null by the caller of this helper.
    unsafe { *out = Box::into_raw(Box::new(value)) };
}

fn release<T>(p: *mut T) {
    if !p.is_null() {
        // SAFETY: `p` came from `Box::into_raw` in this library and is released once.
        drop(unsafe { Box::from_raw(p) });
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length without the NUL.
///
/// # Safety
/// `buf` is null or points to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn hr_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            // SAFETY: `buf` has `len > n` writable bytes.
            unsafe {
                ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
                *buf.add(n) = 0;
            }
        }
        msg.len()
    })
}

/// Runs one implosion with the default setup and snapshot schedule.
/// `offsets` holds the five fractional parameter offsets (T0, cs, s1, Γ0, cV).
///
/// # Safety
/// `offsets` points to 5 values; `out` is a valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn hr_simulate(offsets: *const f64, out: *mut *mut HrSequence) -> HrStatus {
    guard(|| {
        let o = slice_arg(offsets, 5, "offsets")?;
        let out = out_ptr(out, "out")?;
        let params = EosParams::nominal().with_offsets([o[0], o[1], o[2], o[3], o[4]]);
        params.validate()?;
        let seq = run_and_sample(&ImplosionSetup::default(), &params, &SnapshotSchedule::default())?;
        give(HrSequence(seq), out);
        Ok(())
    })
}

/// Reads a sequence file.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_read(path: *const c_char, out: *mut *mut HrSequence) -> HrStatus {
    guard(|| {
        let path = path_arg(path)?;
        let out = out_ptr(out, "out")?;
        give(HrSequence(DensitySequence::read_file(&path)?), out);
        Ok(())
    })
}

/// Writes a sequence file.
///
/// # Safety
/// `seq` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_write(seq: *const HrSequence, path: *const c_char) -> HrStatus {
    guard(|| {
        let seq = non_null(seq, "sequence")?;
        seq.0.write_file(&path_arg(path)?)?;
        Ok(())
    })
}

/// Grid of a sequence: points per snapshot, snapshot count, spacing [cm].
///
/// # Safety
/// `seq` is a live handle; the out pointers are valid.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_dims(
    seq: *const HrSequence,
    points: *mut usize,
    snapshots: *mut usize,
    dr_cm: *mut f64,
) -> HrStatus {
    guard(|| {
        let s = &non_null(seq, "sequence")?.0;
        let (p, n, d) = (
            out_ptr(points, "points")?,
            out_ptr(snapshots, "snapshots")?,
            out_ptr(dr_cm, "dr_cm")?,
        );
        // SAFETY: all three checked non-null.
        unsafe {
            *p = s.points;
            *n = s.snapshots();
            *d = s.dr;
        }
        Ok(())
    })
}

/// Copies the densities [g/cm³], snapshot-major, into `buf`.
///
/// # Safety
/// `seq` is a live handle; `buf` has room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_copy_data(seq: *const HrSequence, buf: *mut f64, capacity: usize) -> HrStatus {
    guard(|| write_slice(&non_null(seq, "sequence")?.0.data, buf, capacity, "buffer"))
}

/// Copies the snapshot times [μs] into `buf`.
///
/// # Safety
/// `seq` is a live handle; `buf` has room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_copy_times(seq: *const HrSequence, buf: *mut f64, capacity: usize) -> HrStatus {
    guard(|| write_slice(&non_null(seq, "sequence")?.0.times, buf, capacity, "buffer"))
}

/// Releases a sequence. Null is ignored.
///
/// # Safety
/// `seq` is null or a handle not yet released.
#[no_mangle]
pub unsafe extern "C" fn hr_sequence_free(seq: *mut HrSequence) {
    release(seq);
}

/// Shock and edge radii [cm] of every snapshot. Both buffers need room for
/// one value per snapshot.
///
/// # Safety
/// `seq` is a live handle; both buffers have room for `capacity` values.
#[no_mangle]
pub unsafe extern "C" fn hr_extract_features(
    seq: *const HrSequence,
    shock_cm: *mut f64,
    edge_cm: *mut f64,
    capacity: usize,
) -> HrStatus {
    guard(|| {
        let f = features_from_sequence(&non_null(seq, "sequence")?.0, DEFAULT_FIT_CELLS)?;
        write_slice(&f.shock_cm, shock_cm, capacity, "shock_cm")?;
        write_slice(&f.edge_cm, edge_cm, capacity, "edge_cm")
    })
}

/// Opens a database directory and loads its records.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_database_open(path: *const c_char, out: *mut *mut HrDatabase) -> HrStatus {
    guard(|| {
        let path = path_arg(path)?;
        let out = out_ptr(out, "out")?;
        let db = Database::open(&path)?;
        let records = db.load_all()?;
        give(HrDatabase { db, records }, out);
        Ok(())
    })
}

/// Number of records in the database.
///
/// # Safety
/// `db` is a live handle; `len` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_database_len(db: *const HrDatabase, len: *mut usize) -> HrStatus {
    guard(|| {
        let db = non_null(db, "database")?;
        let len = out_ptr(len, "len")?;
        // SAFETY: checked non-null.
        unsafe { *len = db.db.len() };
        Ok(())
    })
}

/// Nearest database record to `target` under `metric`. Writes the record
/// index, the L2 residual [g/cm³], the five parameter offsets and, when
/// `projected` is non-null, a new handle holding the record's sequence.
///
/// # Safety
/// `db` and `target` are live handles; `offsets` has room for 5 values;
/// `index` and `residual` are valid pointers; `projected` is null or valid.
#[no_mangle]
pub unsafe extern "C" fn hr_database_project(
    db: *const HrDatabase,
    target: *const HrSequence,
    metric: HrMetric,
    index: *mut usize,
    residual: *mut f64,
    offsets: *mut f64,
    projected: *mut *mut HrSequence,
) -> HrStatus {
    guard(|| {
        let db = non_null(db, "database")?;
        let target = &non_null(target, "target")?.0;
        let (index, residual) = (out_ptr(index, "index")?, out_ptr(residual, "residual")?);
        let metric = match metric {
            HrMetric::L2 => Metric::L2,
            HrMetric::Wasserstein => Metric::Wasserstein,
        };
        let p = estimate_parameters(&db.records, target, metric, Aggregate::Mean)?;
        write_slice(&p.params.offsets_from(&EosParams::nominal()), offsets, 5, "offsets")?;
        // SAFETY: checked non-null.
        unsafe {
            *index = p.index;
            *residual = p.residual;
        }
        if !projected.is_null() {
            give(HrSequence(p.projected), projected);
        }
        Ok(())
    })
}

/// Releases a database. Null is ignored.
///
/// # Safety
/// `db` is null or a handle not yet released.
#[no_mangle]
pub unsafe extern "C" fn hr_database_free(db: *mut HrDatabase) {
    release(db);
}

/// Loads a trained generator of either model family.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn hr_generator_load(path: *const c_char, out: *mut *mut HrGenerator) -> HrStatus {
    guard(|| {
        let path = path_arg(path)?;
        let out = out_ptr(out, "out")?;
        give(HrGenerator(load_generator(&path)?), out);
        Ok(())
    })
}

/// Ensemble-mean density sequence for the given features. `times_us`,
/// `shock_cm` and `edge_cm` each hold `snapshots` values.
///
/// # Safety
/// `gen` is a live handle; the three arrays hold `snapshots` values; `out` is valid.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn hr_generator_reconstruct(
    gen: *const HrGenerator,
    times_us: *const f64,
    shock_cm: *const f64,
    edge_cm: *const f64,
    snapshots: usize,
    ensemble: usize,
    dropout_at_test: bool,
    seed: u64,
    out: *mut *mut HrSequence,
) -> HrStatus {
    guard(|| {
        let gen = &non_null(gen, "generator")?.0;
        let out = out_ptr(out, "out")?;
        if ensemble == 0 {
            return Err(Failure::new(
                HrStatus::InvalidArgument,
                "ensemble size must be positive",
            ));
        }
        let features = FeatureSet {
            times_us: slice_arg(times_us, snapshots, "times_us")?.to_vec(),
            shock_cm: slice_arg(shock_cm, snapshots, "shock_cm")?.to_vec(),
            edge_cm: slice_arg(edge_cm, snapshots, "edge_cm")?.to_vec(),
        };
        let e = generate_ensemble(gen, &features, ensemble, dropout_at_test, seed)?;
        give(HrSequence(e.mean), out);
        Ok(())
    })
}

/// Releases a generator. Null is ignored.
///
/// # Safety
/// `gen` is null or a handle not yet released.
#[no_mangle]
pub unsafe extern "C" fn hr_generator_free(gen: *mut HrGenerator) {
    release(gen);
}
