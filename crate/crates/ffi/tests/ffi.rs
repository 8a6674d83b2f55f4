use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use hydrorad::database::{build_database, ParameterGrid};
use hydrorad::eos::EosParams;
use hydrorad::features::{features_from_sequence, DEFAULT_FIT_CELLS};
use hydrorad::hydro::{run_and_sample, DensitySequence, ImplosionSetup, SnapshotSchedule};
use hydrorad_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 512];
    unsafe { hr_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

fn cpath(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

fn copy_out(seq: *const HrSequence) -> DensitySequence {
    let (mut points, mut snaps, mut dr) = (0usize, 0usize, 0.0);
    assert_eq!(
        unsafe { hr_sequence_dims(seq, &mut points, &mut snaps, &mut dr) },
        HrStatus::Ok
    );
    let mut data = vec![0.0; points * snaps];
    let mut times = vec![0.0; snaps];
    assert_eq!(
        unsafe { hr_sequence_copy_data(seq, data.as_mut_ptr(), data.len()) },
        HrStatus::Ok
    );
    assert_eq!(
        unsafe { hr_sequence_copy_times(seq, times.as_mut_ptr(), times.len()) },
        HrStatus::Ok
    );
    DensitySequence::new(points, dr, times, data)
}

#[test]
fn simulate_and_extract_match_the_library() {
    let offsets = [0.05, -0.02, 0.0, 0.03, -0.08];
    let mut seq = ptr::null_mut();
    assert_eq!(unsafe { hr_simulate(offsets.as_ptr(), &mut seq) }, HrStatus::Ok);
    let direct = run_and_sample(
        &ImplosionSetup::default(),
        &EosParams::nominal().with_offsets(offsets),
        &SnapshotSchedule::default(),
    )
    .unwrap();
    assert_eq!(copy_out(seq), direct);

    let f = features_from_sequence(&direct, DEFAULT_FIT_CELLS).unwrap();
    let (mut shock, mut edge) = ([0.0; 4], [0.0; 4]);
    assert_eq!(
        unsafe { hr_extract_features(seq, shock.as_mut_ptr(), edge.as_mut_ptr(), 4) },
        HrStatus::Ok
    );
    assert_eq!(shock.to_vec(), f.shock_cm);
    assert_eq!(edge.to_vec(), f.edge_cm);
    assert_eq!(
        unsafe { hr_extract_features(seq, shock.as_mut_ptr(), edge.as_mut_ptr(), 3) },
        HrStatus::BufferTooSmall
    );
    assert!(last_error().contains("needs 4"));
    unsafe { hr_sequence_free(seq) };
}

#[test]
fn errors_are_reported_as_codes() {
    let mut seq = ptr::null_mut();
    assert_eq!(unsafe { hr_simulate(ptr::null(), &mut seq) }, HrStatus::NullPointer);
    assert!(seq.is_null());
    assert_eq!(last_error(), "offsets is null");
    let bad = [0.0, 0.0, 0.0, 0.0, -2.0];
    assert_eq!(unsafe { hr_simulate(bad.as_ptr(), &mut seq) }, HrStatus::Simulation);
    let missing = cpath(Path::new("/nonexistent/seq.ds"));
    assert_eq!(unsafe { hr_sequence_read(missing.as_ptr(), &mut seq) }, HrStatus::Io);
    let mut db = ptr::null_mut();
    assert_eq!(
        unsafe { hr_database_open(missing.as_ptr(), &mut db) },
        HrStatus::Database
    );
    let mut gen = ptr::null_mut();
    assert_eq!(
        unsafe { hr_generator_load(missing.as_ptr(), &mut gen) },
        HrStatus::Neural
    );
    unsafe {
        hr_sequence_free(ptr::null_mut());
        hr_database_free(ptr::null_mut());
        hr_generator_free(ptr::null_mut());
    }
    let version = unsafe { CStr::from_ptr(hr_version()) };
    assert_eq!(version.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn projection_and_file_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let setup = ImplosionSetup::default();
    build_database(
        &ParameterGrid::uniform(1, 0.1),
        &setup,
        &SnapshotSchedule::default(),
        dir.path(),
    )
    .unwrap();
    let mut db = ptr::null_mut();
    assert_eq!(
        unsafe { hr_database_open(cpath(dir.path()).as_ptr(), &mut db) },
        HrStatus::Ok
    );
    let mut len = 0;
    assert_eq!(unsafe { hr_database_len(db, &mut len) }, HrStatus::Ok);
    assert_eq!(len, 1);

    let mut seq = ptr::null_mut();
    assert_eq!(unsafe { hr_simulate([0.0; 5].as_ptr(), &mut seq) }, HrStatus::Ok);
    let file = dir.path().join("nominal.ds");
    assert_eq!(unsafe { hr_sequence_write(seq, cpath(&file).as_ptr()) }, HrStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(
        unsafe { hr_sequence_read(cpath(&file).as_ptr(), &mut back) },
        HrStatus::Ok
    );
    assert_eq!(copy_out(back), copy_out(seq));

    for metric in [HrMetric::L2, HrMetric::Wasserstein] {
        let (mut index, mut residual, mut offsets) = (9usize, 1.0, [1.0; 5]);
        let mut projected = ptr::null_mut();
        let status = unsafe {
            hr_database_project(
                db,
                back,
                metric,
                &mut index,
                &mut residual,
                offsets.as_mut_ptr(),
                &mut projected,
            )
        };
        assert_eq!(status, HrStatus::Ok, "{}", last_error());
        assert_eq!((index, residual), (0, 0.0));
        assert!(offsets.iter().all(|o| o.abs() < 1e-15));
        assert_eq!(copy_out(projected), copy_out(seq));
        unsafe { hr_sequence_free(projected) };
    }
    unsafe {
        hr_sequence_free(seq);
        hr_sequence_free(back);
        hr_database_free(db);
    }
}

fn target_dir() -> PathBuf {
    // tests run from <target>/<profile>/deps
    std::env::current_exe()
        .unwrap()
        .parent()
        .unwrap()
        .parent()
        .unwrap()
        .to_path_buf()
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let include = crate_dir.join("include");
    let lib = target_dir().join("libhydrorad_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let exe = dir.path().join("smoke");
    let status = Command::new("cc")
        .args(["-std=c11", "-Wall", "-Wextra", "-Werror", "-I"])
        .arg(&include)
        .arg(crate_dir.join("tests").join("c_smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .expect("C compiler available");
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = text.split_whitespace().collect();
    assert_eq!(fields[..3], [env!("CARGO_PKG_VERSION"), "360", "4"]);
}
