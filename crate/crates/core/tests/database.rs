use hydrorad::database::*;
use hydrorad::eos::EosParams;
use hydrorad::features::features_from_sequence;
use hydrorad::hydro::*;

fn small_setup() -> ImplosionSetup {
    ImplosionSetup {
        cells: 325,
        output_points: 180,
        ..Default::default()
    }
}

fn files(dir: &std::path::Path) -> (Vec<u8>, Vec<u8>) {
    (
        std::fs::read(dir.join(MANIFEST_FILE)).unwrap(),
        std::fs::read(dir.join(RECORDS_FILE)).unwrap(),
    )
}

#[test]
fn nominal_only_grid_matches_standalone_run() {
    let dir = tempfile::tempdir().unwrap();
    let setup = ImplosionSetup::default();
    let schedule = SnapshotSchedule::default();
    let m = build_database(&ParameterGrid::uniform(1, 0.1), &setup, &schedule, dir.path()).unwrap();
    assert_eq!(m.record_count, 1);
    let db = Database::open(dir.path()).unwrap();
    let rec = db.load(RecordKey::Index(0)).unwrap();
    let direct = run_and_sample(&setup, &EosParams::nominal(), &schedule).unwrap();
    assert_eq!(rec.sequence, direct);
    assert_eq!(rec.features, features_from_sequence(&direct, 5).unwrap());
}

#[test]
fn three_level_sweep_resumes_byte_identically() {
    let grid = ParameterGrid::uniform(3, 0.1);
    let setup = small_setup();
    let schedule = SnapshotSchedule::default();

    let full = tempfile::tempdir().unwrap();
    let m = build_database(&grid, &setup, &schedule, full.path()).unwrap();
    assert_eq!(m.record_count + m.failures.len(), 243);
    assert_eq!(m.record_count, 243, "failures: {:?}", m.failures);
    assert!(m.is_complete());

    let part = tempfile::tempdir().unwrap();
    let opts = BuildOptions {
        max_new: Some(100),
        threads: 1,
    };
    let half = build_database_with(&grid, &setup, &schedule, part.path(), &opts).unwrap();
    assert_eq!(half.record_count, 100);
    let (_, before) = files(part.path());
    build_database(&grid, &setup, &schedule, part.path()).unwrap();
    let (_, after) = files(part.path());
    assert_eq!(&after[..before.len()], &before[..]);
    assert_eq!(files(part.path()), files(full.path()));

    // resuming a finished sweep is a no-op
    build_database(&grid, &setup, &schedule, part.path()).unwrap();
    assert_eq!(files(part.path()), files(full.path()));

    let db = Database::open(full.path()).unwrap();
    let all = db.load_all().unwrap();
    for rec in all.iter().step_by(17) {
        let again = features_from_sequence(&rec.sequence, 5).unwrap();
        assert!(again.max_abs_diff(&rec.features) <= 1e-12);
        let by_params = db.load(RecordKey::Params(rec.params)).unwrap();
        assert_eq!(&by_params, rec);
    }

    // grid point: itself first at distance zero
    let target = &all[121];
    let near = db.nearest(&target.params, 3).unwrap();
    assert_eq!(near[0].0, 0.0);
    assert_eq!(near[0].1.index, target.index);

    // cell centre: 32 equidistant corners in lexicographic order
    let centre = grid.nominal.with_offsets([0.05; 5]);
    let ranked = nearest_indices(&db.manifest, &centre, 40).unwrap();
    let d0 = ranked[0].0;
    let ties: Vec<_> = ranked.iter().take_while(|(d, _)| (d - d0).abs() < 1e-12).collect();
    assert_eq!(ties.len(), 32);
    let idx: Vec<_> = ties.iter().map(|(_, i)| grid.grid_index(*i)).collect();
    assert!(idx.windows(2).all(|w| w[0] < w[1]));
    assert!(idx.iter().all(|g| g.iter().all(|&l| l == 1 || l == 2)));

    assert_eq!(nearest_indices(&db.manifest, &centre, 1000).unwrap().len(), 243);
}

#[test]
fn off_grid_and_truncated_lookups_fail() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ParameterGrid::uniform(1, 0.1);
    build_database(&grid, &small_setup(), &SnapshotSchedule::default(), dir.path()).unwrap();
    let db = Database::open(dir.path()).unwrap();
    let off = EosParams::nominal().with_offsets([0.01, 0.0, 0.0, 0.0, 0.0]);
    assert!(matches!(
        db.load(RecordKey::Params(off)),
        Err(DatabaseError::NotFound(_))
    ));
    assert!(matches!(db.load(RecordKey::Index(5)), Err(DatabaseError::NotFound(_))));

    let path = dir.path().join(RECORDS_FILE);
    let bytes = std::fs::read(&path).unwrap();
    std::fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
    assert!(matches!(
        db.load(RecordKey::Index(0)),
        Err(DatabaseError::CorruptRecord(_))
    ));
    let mut flipped = bytes.clone();
    flipped[500] ^= 0x40;
    std::fs::write(&path, &flipped).unwrap();
    assert!(matches!(
        db.load(RecordKey::Index(0)),
        Err(DatabaseError::CorruptRecord(_))
    ));
}

#[test]
fn mismatched_configuration_is_refused() {
    let dir = tempfile::tempdir().unwrap();
    let grid = ParameterGrid::uniform(1, 0.1);
    build_database(&grid, &small_setup(), &SnapshotSchedule::default(), dir.path()).unwrap();
    let other = ImplosionSetup {
        cells: 330,
        ..small_setup()
    };
    assert!(matches!(
        build_database(&grid, &other, &SnapshotSchedule::default(), dir.path()),
        Err(DatabaseError::ManifestMismatch(_))
    ));
}

#[test]
fn empty_database_has_no_neighbours() {
    let dir = tempfile::tempdir().unwrap();
    let opts = BuildOptions {
        max_new: Some(0),
        threads: 1,
    };
    let m = build_database_with(
        &ParameterGrid::uniform(3, 0.1),
        &small_setup(),
        &SnapshotSchedule::default(),
        dir.path(),
        &opts,
    )
    .unwrap();
    assert!(matches!(
        nearest_indices(&m, &EosParams::nominal(), 1),
        Err(DatabaseError::EmptyDatabase)
    ));
}
