use hydrorad::database::*;
use hydrorad::hydro::*;
use hydrorad::manifold::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn records() -> (tempfile::TempDir, Vec<SimulationRecord>) {
    let dir = tempfile::tempdir().unwrap();
    let setup = ImplosionSetup {
        cells: 325,
        output_points: 180,
        ..Default::default()
    };
    build_database(
        &ParameterGrid::uniform(2, 0.1),
        &setup,
        &SnapshotSchedule::default(),
        dir.path(),
    )
    .unwrap();
    let recs = Database::open(dir.path()).unwrap().load_all().unwrap();
    assert_eq!(recs.len(), 32);
    (dir, recs)
}

fn min_gap(recs: &[SimulationRecord]) -> f64 {
    let mut gap = f64::INFINITY;
    for (i, a) in recs.iter().enumerate() {
        for b in &recs[i + 1..] {
            gap = gap.min(combined_l2(&a.sequence, &b.sequence).unwrap());
        }
    }
    gap
}

#[test]
fn every_record_projects_onto_itself() {
    let (_d, recs) = records();
    for metric in [Metric::L2, Metric::Wasserstein] {
        for r in &recs {
            let p = estimate_parameters(&recs, &r.sequence, metric, Aggregate::Mean).unwrap();
            assert_eq!(p.index, r.index, "{metric:?}");
            assert_eq!(p.residual, 0.0);
            assert_eq!(p.params, r.params);
        }
    }
}

#[test]
fn small_noise_does_not_move_the_projection() {
    let (_d, recs) = records();
    let gap = min_gap(&recs);
    assert!(gap > 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for r in recs.iter().step_by(3) {
        let mut noisy = r.sequence.clone();
        for v in noisy.data.iter_mut() {
            *v += rng.random_range(-1.0..1.0);
        }
        // Rescale the perturbation to 0.45 of the smallest pairwise distance.
        let norm = combined_l2(&noisy, &r.sequence).unwrap();
        for (v, base) in noisy.data.iter_mut().zip(&r.sequence.data) {
            *v = base + (*v - base) * 0.45 * gap / norm;
        }
        let p = estimate_parameters(&recs, &noisy, Metric::L2, Aggregate::Mean).unwrap();
        assert_eq!(p.index, r.index);
        assert!((p.residual - 0.45 * gap).abs() < 1e-9 * gap);
    }
}

#[test]
fn projection_is_the_brute_force_argmin() {
    let (_d, recs) = records();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..6 {
        let a = &recs[rng.random_range(0..recs.len())];
        let b = &recs[rng.random_range(0..recs.len())];
        let mid = DensitySequence::new(
            a.sequence.points,
            a.sequence.dr,
            a.sequence.times.clone(),
            a.sequence
                .data
                .iter()
                .zip(&b.sequence.data)
                .map(|(x, y)| 0.5 * (x + y))
                .collect(),
        );
        for metric in [Metric::L2, Metric::Wasserstein] {
            let p = estimate_parameters(&recs, &mid, metric, Aggregate::Mean).unwrap();
            let best = recs
                .iter()
                .map(|r| distance(metric, Aggregate::Mean, &mid, &r.sequence).unwrap())
                .fold(f64::INFINITY, f64::min);
            assert!(p.table[0].distance - best <= TIE_TOL * (1.0 + best));
            // Near-ties are ordered by grid index, so monotone only up to round-off.
            assert!(p
                .table
                .windows(2)
                .all(|w| w[0].distance <= w[1].distance + TIE_TOL * (1.0 + w[1].distance)));
            assert_eq!(p.table.len(), recs.len());
        }
        // The midpoint is half the pair distance from either end.
        let p = estimate_parameters(&recs, &mid, Metric::L2, Aggregate::Mean).unwrap();
        let half = 0.5 * combined_l2(&a.sequence, &b.sequence).unwrap();
        assert!(p.table[0].distance <= half * (1.0 + 1e-12));
    }
}

#[test]
fn kinematics_of_database_records_are_inside_their_cloud() {
    let (_d, recs) = records();
    let cloud = KinematicsCloud::from_features(recs.iter().map(|r| &r.features)).unwrap();
    let inside = recs
        .iter()
        .filter(|r| ood_score(&cloud, &fit_shock_kinematics(&r.features).unwrap()).verdict == Verdict::Inside)
        .count();
    assert!(inside >= recs.len() * 9 / 10, "{inside} of {}", recs.len());
}
