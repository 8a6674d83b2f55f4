//! Simulation database over the five-dimensional EOS parameter hypercube.
//!
//! A database directory holds `manifest.json` and `records.bin`. Records are
//! appended in grid order; the manifest is rewritten atomically after each
//! append, so an interrupted sweep resumes where it stopped. The record byte
//! layout is documented in `docs/database-format.md`.

use std::fs::{self, File, OpenOptions};
use std::io::{Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::eos::EosParams;
use crate::features::{features_from_sequence, FeatureSet, DEFAULT_FIT_CELLS};
use crate::hydro::{run_and_sample, DensitySequence, ImplosionSetup, SnapshotSchedule};

pub const FORMAT_VERSION: u32 = 1;
pub const RECORD_MAGIC: [u8; 4] = *b"SREC";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_FILE: &str = "records.bin";
/// Relative tolerance when matching parameters to grid points.
pub const GRID_MATCH_TOL: f64 = 1e-9;
/// Parameter-space distances closer than this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

const DIMS: usize = 5;
pub type GridIndex = [usize; DIMS];

#[derive(Debug, Error)]
pub enum DatabaseError {
    #[error("IoFailure: {0}")]
    Io(#[from] std::io::Error),
    #[error("InvalidGrid: {0}")]
    InvalidGrid(String),
    #[error("NotFound: {0}")]
    NotFound(String),
    #[error("CorruptRecord: {0}")]
    CorruptRecord(String),
    #[error("EmptyDatabase")]
    EmptyDatabase,
    #[error("ManifestMismatch: {0}")]
    ManifestMismatch(String),
    #[error("ParseFailure: {0}")]
    Parse(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, DatabaseError>;

/// Fractional offsets around the nominal parameters, one list per dimension
/// of σ = (T0, cs, s1, Γ0, cV).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterGrid {
    pub nominal: EosParams,
    pub offsets: [Vec<f64>; DIMS],
}

impl Default for ParameterGrid {
    fn default() -> Self {
        Self::uniform(3, 0.1)
    }
}

impl ParameterGrid {
    /// `levels` evenly spaced offsets in [−half_width, +half_width] on every
    /// dimension; one level means the nominal value only.
    pub fn uniform(levels: usize, half_width: f64) -> Self {
        let axis: Vec<f64> = if levels <= 1 {
            vec![0.0]
        } else {
            (0..levels)
                .map(|k| {
                    let x = -half_width + 2.0 * half_width * k as f64 / (levels - 1) as f64;
                    // keep the centre exactly zero
                    if (x.abs()) < 1e-15 {
                        0.0
                    } else {
                        x
                    }
                })
                .collect()
        };
        Self {
            nominal: EosParams::nominal(),
            offsets: std::array::from_fn(|_| axis.clone()),
        }
    }

    /// The full ±10% grid in 2% steps (11⁵ points).
    pub fn full() -> Self {
        Self::uniform(11, 0.1)
    }

    pub fn validate(&self) -> Result<()> {
        self.nominal
            .validate()
            .map_err(|e| DatabaseError::InvalidGrid(e.to_string()))?;
        for (d, axis) in self.offsets.iter().enumerate() {
            if axis.is_empty() {
                return Err(DatabaseError::InvalidGrid(format!("dimension {d} has no levels")));
            }
            if axis.windows(2).any(|w| !(w[0] < w[1])) {
                return Err(DatabaseError::InvalidGrid(format!(
                    "dimension {d} offsets are not strictly sorted"
                )));
            }
            let n = axis.len();
            for k in 0..n {
                if (axis[k] + axis[n - 1 - k]).abs() > 1e-12 {
                    return Err(DatabaseError::InvalidGrid(format!(
                        "dimension {d} offsets are not symmetric"
                    )));
                }
            }
            if axis.iter().any(|o| !(*o > -1.0)) {
                return Err(DatabaseError::InvalidGrid(format!(
                    "dimension {d} offset at or below -100%"
                )));
            }
        }
        Ok(())
    }

    pub fn levels(&self) -> [usize; DIMS] {
        std::array::from_fn(|d| self.offsets[d].len())
    }

    pub fn len(&self) -> usize {
        self.levels().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lexicographic grid index of linear position `n` (first dimension slowest).
    pub fn grid_index(&self, mut n: usize) -> GridIndex {
        let levels = self.levels();
        let mut idx = [0; DIMS];
        for d in (0..DIMS).rev() {
            idx[d] = n % levels[d];
            n /= levels[d];
        }
        idx
    }

    pub fn linear_index(&self, idx: &GridIndex) -> usize {
        let levels = self.levels();
        idx.iter().zip(levels).fold(0, |acc, (i, l)| acc * l + i)
    }

    pub fn offsets_at(&self, idx: &GridIndex) -> [f64; DIMS] {
        std::array::from_fn(|d| self.offsets[d][idx[d]])
    }

    pub fn params_at(&self, idx: &GridIndex) -> EosParams {
        self.nominal.with_offsets(self.offsets_at(idx))
    }

    /// Grid index whose parameters match `params` to `GRID_MATCH_TOL` relative.
    pub fn locate(&self, params: &EosParams) -> Option<GridIndex> {
        if (params.rho0 - self.nominal.rho0).abs() > GRID_MATCH_TOL * self.nominal.rho0.abs() {
            return None;
        }
        let want = params.as_vector();
        let nominal = self.nominal.as_vector();
        let mut idx = [0; DIMS];
        for d in 0..DIMS {
            idx[d] = self.offsets[d].iter().position(|o| {
                let v = nominal[d] * (1.0 + o);
                (v - want[d]).abs() <= GRID_MATCH_TOL * v.abs()
            })?;
        }
        Some(idx)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub index: usize,
    pub grid_index: GridIndex,
    pub params: EosParams,
    pub sequence: DensitySequence,
    pub features: FeatureSet,
    /// SHA-256 of the grid, setup, schedule and format version.
    pub config_hash: [u8; 32],
}

impl SimulationRecord {
    pub fn to_bytes(&self) -> Vec<u8> {
        let seq = &self.sequence;
        let n = seq.snapshots();
        let mut out = Vec::with_capacity(record_len(n, seq.points));
        out.extend_from_slice(&RECORD_MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.index as u64).to_le_bytes());
        for i in self.grid_index {
            out.extend_from_slice(&(i as u32).to_le_bytes());
        }
        let p = &self.params;
        for v in [p.t0, p.cs, p.s1, p.gamma0, p.cv, p.rho0] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.config_hash);
        out.extend_from_slice(&(n as u32).to_le_bytes());
        out.extend_from_slice(&(seq.points as u32).to_le_bytes());
        out.extend_from_slice(&seq.dr.to_le_bytes());
        let floats = seq
            .times
            .iter()
            .chain(&seq.data)
            .chain(&self.features.shock_cm)
            .chain(&self.features.edge_cm);
        for v in floats {
            out.extend_from_slice(&v.to_le_bytes());
        }
        let crc = crc32fast::hash(&out);
        out.extend_from_slice(&crc.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let corrupt = |m: &str| DatabaseError::CorruptRecord(m.to_string());
        if bytes.len() < RECORD_FIXED_LEN + 4 {
            return Err(corrupt("record shorter than its header"));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 4);
        let stored = u32::from_le_bytes(tail.try_into().unwrap());
        if crc32fast::hash(body) != stored {
            return Err(corrupt("checksum mismatch"));
        }
        let mut r = Cursor { buf: body, at: 0 };
        if r.take(4) != RECORD_MAGIC {
            return Err(corrupt("bad magic"));
        }
        let version = r.u32();
        if version != FORMAT_VERSION {
            return Err(DatabaseError::CorruptRecord(format!("unsupported version {version}")));
        }
        let index = r.u64() as usize;
        let grid_index: GridIndex = std::array::from_fn(|_| r.u32() as usize);
        let v: [f64; 6] = std::array::from_fn(|_| r.f64());
        let params = EosParams {
            t0: v[0],
            cs: v[1],
            s1: v[2],
            gamma0: v[3],
            cv: v[4],
            rho0: v[5],
        };
        let config_hash: [u8; 32] = r.take(32).try_into().unwrap();
        let n = r.u32() as usize;
        let points = r.u32() as usize;
        let dr = r.f64();
        if body.len() + 4 != record_len(n, points) {
            return Err(corrupt("length does not match header"));
        }
        let times: Vec<f64> = (0..n).map(|_| r.f64()).collect();
        let data: Vec<f64> = (0..n * points).map(|_| r.f64()).collect();
        let shock_cm: Vec<f64> = (0..n).map(|_| r.f64()).collect();
        let edge_cm: Vec<f64> = (0..n).map(|_| r.f64()).collect();
        Ok(Self {
            index,
            grid_index,
            params,
            features: FeatureSet {
                times_us: times.clone(),
                shock_cm,
                edge_cm,
            },
            sequence: DensitySequence::new(points, dr, times, data),
            config_hash,
        })
    }
}

/// magic, version, index, grid index, σ and ρ0, hash, n, points, dr.
const RECORD_FIXED_LEN: usize = 4 + 4 + 8 + 4 * DIMS + 8 * 6 + 32 + 4 + 4 + 8;

fn record_len(snapshots: usize, points: usize) -> usize {
    RECORD_FIXED_LEN + 8 * (snapshots * (points + 3)) + 4
}

struct Cursor<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> &'a [u8] {
        let s = &self.buf[self.at..self.at + n];
        self.at += n;
        s
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take(4).try_into().unwrap())
    }
    fn u64(&mut self) -> u64 {
        u64::from_le_bytes(self.take(8).try_into().unwrap())
    }
    fn f64(&mut self) -> f64 {
        f64::from_le_bytes(self.take(8).try_into().unwrap())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordEntry {
    pub index: usize,
    pub grid_index: GridIndex,
    pub offset: u64,
    pub length: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FailureEntry {
    pub index: usize,
    pub grid_index: GridIndex,
    pub cause: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatabaseManifest {
    pub format_version: u32,
    pub solver_version: String,
    pub config_hash: String,
    pub grid: ParameterGrid,
    pub setup: ImplosionSetup,
    pub schedule: SnapshotSchedule,
    pub fit_cells: usize,
    pub record_count: usize,
    pub records: Vec<RecordEntry>,
    pub failures: Vec<FailureEntry>,
}

impl DatabaseManifest {
    pub fn is_complete(&self) -> bool {
        self.records.len() + self.failures.len() == self.grid.len()
    }

    fn processed(&self) -> usize {
        self.records.len() + self.failures.len()
    }
}

fn config_hash(grid: &ParameterGrid, setup: &ImplosionSetup, schedule: &SnapshotSchedule) -> [u8; 32] {
    #[derive(Serialize)]
    struct Key<'a> {
        format_version: u32,
        solver_version: &'a str,
        grid: &'a ParameterGrid,
        setup: &'a ImplosionSetup,
        schedule: &'a SnapshotSchedule,
        fit_cells: usize,
    }
    let key = Key {
        format_version: FORMAT_VERSION,
        solver_version: env!("CARGO_PKG_VERSION"),
        grid,
        setup,
        schedule,
        fit_cells: DEFAULT_FIT_CELLS,
    };
    Sha256::digest(serde_json::to_vec(&key).expect("config serializes")).into()
}

/// Options for `build_database_with`.
#[derive(Debug, Clone, Default)]
pub struct BuildOptions {
    /// Stop after this many newly processed grid points.
    pub max_new: Option<usize>,
    /// Worker threads; 0 uses the available parallelism.
    pub threads: usize,
}

pub fn build_database(
    grid: &ParameterGrid,
    setup: &ImplosionSetup,
    schedule: &SnapshotSchedule,
    dir: &Path,
) -> Result<DatabaseManifest> {
    build_database_with(grid, setup, schedule, dir, &BuildOptions::default())
}

enum Outcome {
    Done(Box<SimulationRecord>),
    Failed(String),
}

fn simulate(
    index: usize,
    grid: &ParameterGrid,
    setup: &ImplosionSetup,
    schedule: &SnapshotSchedule,
    hash: [u8; 32],
) -> Outcome {
    let grid_index = grid.grid_index(index);
    let params = grid.params_at(&grid_index);
    let seq = match run_and_sample(setup, &params, schedule) {
        Ok(s) => s,
        Err(e) => return Outcome::Failed(format!("SimulationFailed: {e}")),
    };
    match features_from_sequence(&seq, DEFAULT_FIT_CELLS) {
        Ok(features) => Outcome::Done(Box::new(SimulationRecord {
            index,
            grid_index,
            params,
            sequence: seq,
            features,
            config_hash: hash,
        })),
        Err(e) => Outcome::Failed(format!("SimulationFailed: feature extraction: {e}")),
    }
}

pub fn build_database_with(
    grid: &ParameterGrid,
    setup: &ImplosionSetup,
    schedule: &SnapshotSchedule,
    dir: &Path,
    opts: &BuildOptions,
) -> Result<DatabaseManifest> {
    grid.validate()?;
    setup
        .validate()
        .and_then(|_| schedule.validate())
        .map_err(|e| DatabaseError::InvalidGrid(e.to_string()))?;
    fs::create_dir_all(dir)?;
    let hash = config_hash(grid, setup, schedule);
    let hash_hex = hex::encode(hash);
    let manifest_path = dir.join(MANIFEST_FILE);
    let records_path = dir.join(RECORDS_FILE);

    let mut manifest = if manifest_path.exists() {
        let m: DatabaseManifest = serde_json::from_slice(&fs::read(&manifest_path)?)?;
        if m.config_hash != hash_hex {
            return Err(DatabaseError::ManifestMismatch(format!(
                "existing database in {} was built with a different configuration",
                dir.display()
            )));
        }
        m
    } else {
        DatabaseManifest {
            format_version: FORMAT_VERSION,
            solver_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hash_hex,
            grid: grid.clone(),
            setup: setup.clone(),
            schedule: schedule.clone(),
            fit_cells: DEFAULT_FIT_CELLS,
            record_count: 0,
            records: Vec::new(),
            failures: Vec::new(),
        }
    };

    // Drop anything past the last committed record, e.g. a torn append.
    let committed = manifest.records.last().map_or(0, |r| r.offset + r.length);
    let mut file = OpenOptions::new()
        .create(true)
        .read(true)
        .write(true)
        .truncate(false)
        .open(&records_path)?;
    if file.metadata()?.len() < committed {
        return Err(DatabaseError::CorruptRecord(
            "records file is shorter than the manifest".into(),
        ));
    }
    file.set_len(committed)?;
    file.seek(SeekFrom::End(0))?;

    let threads = match opts.threads {
        0 => std::thread::available_parallelism().map_or(1, |n| n.get()),
        n => n,
    };
    let start = manifest.processed();
    let stop = opts.max_new.map_or(grid.len(), |m| (start + m).min(grid.len()));
    let mut next = start;
    while next < stop {
        let batch_end = (next + threads).min(stop);
        let outcomes: Vec<Outcome> = if threads == 1 {
            vec![simulate(next, grid, setup, schedule, hash)]
        } else {
            std::thread::scope(|s| {
                let handles: Vec<_> = (next..batch_end)
                    .map(|i| s.spawn(move || simulate(i, grid, setup, schedule, hash)))
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().expect("simulation thread panicked"))
                    .collect()
            })
        };
        for (i, outcome) in (next..batch_end).zip(outcomes) {
            match outcome {
                Outcome::Done(rec) => {
                    let bytes = rec.to_bytes();
                    let offset = manifest.records.last().map_or(0, |r| r.offset + r.length);
                    file.write_all(&bytes)?;
                    let crc = u32::from_le_bytes(bytes[bytes.len() - 4..].try_into().unwrap());
                    manifest.records.push(RecordEntry {
                        index: i,
                        grid_index: rec.grid_index,
                        offset,
                        length: bytes.len() as u64,
                        crc32: crc,
                    });
                }
                Outcome::Failed(cause) => manifest.failures.push(FailureEntry {
                    index: i,
                    grid_index: grid.grid_index(i),
                    cause,
                }),
            }
        }
        file.sync_data()?;
        manifest.record_count = manifest.records.len();
        write_manifest(&manifest_path, &manifest)?;
        next = batch_end;
    }
    manifest.record_count = manifest.records.len();
    write_manifest(&manifest_path, &manifest)?;
    Ok(manifest)
}

fn write_manifest(path: &Path, manifest: &DatabaseManifest) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    fs::write(&tmp, text)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// How to address a record.
#[derive(Debug, Clone, Copy)]
pub enum RecordKey {
    Index(usize),
    Params(EosParams),
}

/// Read-only view of a built database.
#[derive(Debug, Clone)]
pub struct Database {
    pub dir: PathBuf,
    pub manifest: DatabaseManifest,
}

impl Database {
    pub fn open(dir: &Path) -> Result<Self> {
        let manifest: DatabaseManifest = serde_json::from_slice(&fs::read(dir.join(MANIFEST_FILE))?)?;
        if manifest.format_version != FORMAT_VERSION {
            return Err(DatabaseError::ManifestMismatch(format!(
                "unsupported format version {}",
                manifest.format_version
            )));
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.records.is_empty()
    }

    fn entry(&self, key: RecordKey) -> Result<&RecordEntry> {
        let index = match key {
            RecordKey::Index(i) => i,
            RecordKey::Params(p) => {
                let idx = self
                    .manifest
                    .grid
                    .locate(&p)
                    .ok_or_else(|| DatabaseError::NotFound("parameters are not on the grid".into()))?;
                self.manifest.grid.linear_index(&idx)
            }
        };
        self.manifest
            .records
            .binary_search_by_key(&index, |r| r.index)
            .map(|k| &self.manifest.records[k])
            .map_err(|_| DatabaseError::NotFound(format!("no record with index {index}")))
    }

    pub fn load(&self, key: RecordKey) -> Result<SimulationRecord> {
        let entry = self.entry(key)?.clone();
        let mut file = File::open(self.dir.join(RECORDS_FILE))?;
        let len = file.metadata()?.len();
        if entry.offset + entry.length > len {
            return Err(DatabaseError::CorruptRecord(format!(
                "record {} is truncated",
                entry.index
            )));
        }
        file.seek(SeekFrom::Start(entry.offset))?;
        let mut buf = vec![0; entry.length as usize];
        file.read_exact(&mut buf)?;
        let rec = SimulationRecord::from_bytes(&buf)?;
        if rec.index != entry.index {
            return Err(DatabaseError::CorruptRecord(format!(
                "record at index {} claims {}",
                entry.index, rec.index
            )));
        }
        Ok(rec)
    }

    /// All records in index order.
    pub fn load_all(&self) -> Result<Vec<SimulationRecord>> {
        let bytes = fs::read(self.dir.join(RECORDS_FILE))?;
        self.manifest
            .records
            .iter()
            .map(|e| {
                let end = (e.offset + e.length) as usize;
                if end > bytes.len() {
                    return Err(DatabaseError::CorruptRecord(format!("record {} is truncated", e.index)));
                }
                SimulationRecord::from_bytes(&bytes[e.offset as usize..end])
            })
            .collect()
    }

    /// Up to `k` records ordered by Euclidean distance in fractional-offset
    /// coordinates, ties broken by lexicographic grid index.
    pub fn nearest(&self, query: &EosParams, k: usize) -> Result<Vec<(f64, SimulationRecord)>> {
        let ranked = nearest_indices(&self.manifest, query, k)?;
        ranked
            .into_iter()
            .map(|(d, i)| Ok((d, self.load(RecordKey::Index(i))?)))
            .collect()
    }
}

pub fn load_record(db: &Database, key: RecordKey) -> Result<SimulationRecord> {
    db.load(key)
}

/// Distance and linear index of the `k` nearest stored records.
pub fn nearest_indices(manifest: &DatabaseManifest, query: &EosParams, k: usize) -> Result<Vec<(f64, usize)>> {
    if manifest.records.is_empty() {
        return Err(DatabaseError::EmptyDatabase);
    }
    let grid = &manifest.grid;
    let q = query.offsets_from(&grid.nominal);
    let mut ranked: Vec<(f64, GridIndex, usize)> = manifest
        .records
        .iter()
        .map(|r| {
            let o = grid.offsets_at(&r.grid_index);
            let d = o.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            (d, r.grid_index, r.index)
        })
        .collect();
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    // distances equal up to round-off count as ties
    let mut start = 0;
    while start < ranked.len() {
        let d0 = ranked[start].0;
        let end = start
            + ranked[start..]
                .iter()
                .take_while(|r| r.0 - d0 <= TIE_TOL * (1.0 + d0))
                .count();
        ranked[start..end].sort_by_key(|a| a.1);
        start = end;
    }
    ranked.truncate(k.max(1));
    Ok(ranked.into_iter().map(|(d, _, i)| (d, i)).collect())
}

pub fn nearest_records(db: &Database, query: &EosParams, k: usize) -> Result<Vec<(f64, SimulationRecord)>> {
    db.nearest(query, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_roundtrips() {
        let g = ParameterGrid::uniform(3, 0.1);
        assert_eq!(g.len(), 243);
        for n in 0..g.len() {
            assert_eq!(g.linear_index(&g.grid_index(n)), n);
        }
        assert_eq!(g.grid_index(1), [0, 0, 0, 0, 1]);
        assert_eq!(g.offsets[0], vec![-0.1, 0.0, 0.1]);
    }

    #[test]
    fn full_grid_has_eleven_levels() {
        let g = ParameterGrid::full();
        assert_eq!(g.len(), 161_051);
        assert!((g.offsets[0][1] + 0.08).abs() < 1e-15);
        assert_eq!(g.offsets[0][5], 0.0);
        g.validate().unwrap();
    }

    #[test]
    fn asymmetric_grid_is_rejected() {
        let mut g = ParameterGrid::uniform(3, 0.1);
        g.offsets[2] = vec![-0.1, 0.0, 0.05];
        assert!(g.validate().is_err());
        g.offsets[2] = vec![0.1, 0.0, -0.1];
        assert!(g.validate().is_err());
    }

    #[test]
    fn locate_matches_grid_points_only() {
        let g = ParameterGrid::uniform(3, 0.1);
        let idx = [2, 0, 1, 1, 0];
        assert_eq!(g.locate(&g.params_at(&idx)), Some(idx));
        let off = g.nominal.with_offsets([0.05, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(g.locate(&off), None);
    }

    #[test]
    fn record_bytes_roundtrip_and_checksum() {
        let seq = DensitySequence::new(3, 0.5, vec![58.0, 58.5], vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let rec = SimulationRecord {
            index: 7,
            grid_index: [0, 0, 0, 2, 1],
            params: EosParams::nominal(),
            features: FeatureSet {
                times_us: seq.times.clone(),
                shock_cm: vec![1.0, 1.1],
                edge_cm: vec![2.0, 2.1],
            },
            sequence: seq,
            config_hash: [9; 32],
        };
        let bytes = rec.to_bytes();
        assert_eq!(bytes.len(), record_len(2, 3));
        assert_eq!(SimulationRecord::from_bytes(&bytes).unwrap(), rec);
        let mut bad = bytes.clone();
        bad[40] ^= 1;
        assert!(matches!(
            SimulationRecord::from_bytes(&bad),
            Err(DatabaseError::CorruptRecord(_))
        ));
        assert!(SimulationRecord::from_bytes(&bytes[..bytes.len() - 9]).is_err());
    }
}
