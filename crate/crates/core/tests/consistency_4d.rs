mod common;

use common::{five, random_event, random_orientations};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stereoloc::geometry::{intersect_past_cones, Event, NullSolver};
use stereoloc::localization::localize_4d_unchecked;
use stereoloc::observation::Orientation;
use stereoloc::positioning::{
    assemble_station_records_4d, AttributionTable, Constellation, StationBundle4D,
};

fn bundle(
    c: &Constellation,
    table: &AttributionTable,
    e: &Event,
    o: &[Orientation],
) -> StationBundle4D {
    assemble_station_records_4d(c, table, e, o, "e").unwrap()
}

#[test]
fn seeded_event_satisfies_the_matching_rule() {
    let c = five();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = random_event(&mut rng, 3, 3.0);
    let b = bundle(
        &c,
        &AttributionTable::default(),
        &e,
        &[Orientation::identity(3); 4],
    );
    let p = localize_4d_unchecked(&b.records(), Some(b.anchor.stamp))
        .unwrap()
        .position;
    assert_eq!(p.constraint_residuals.len(), 4);
    assert!(
        p.max_residual() <= 1e-9,
        "residuals {:?}",
        p.constraint_residuals
    );
}

#[test]
fn residuals_shrink_with_solver_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e = random_event(&mut rng, 3, 3.0);
    let residual = |tol: f64| {
        let solver = NullSolver {
            bisection_tol: tol,
            newton_tol: tol,
            ..NullSolver::default()
        };
        let c = five().with_solver(solver);
        let b = bundle(
            &c,
            &AttributionTable::default(),
            &e,
            &[Orientation::identity(3); 4],
        );
        localize_4d_unchecked(&b.records(), Some(b.anchor.stamp))
            .unwrap()
            .position
            .max_residual()
    };
    let r: Vec<f64> = [1e-8, 1e-10, 1e-12].iter().map(|t| residual(*t)).collect();
    assert!(
        r[0] <= 1e-7 && r[1] <= 1e-9 && r[2] <= 1e-11,
        "residuals {r:?}"
    );
}

#[test]
fn reversed_attribution_localizes_the_same_event() {
    let c = five();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let e = random_event(&mut rng, 3, 3.0);
        let o = random_orientations(&mut rng, 3, 4);
        let mut stereo = Vec::new();
        for table in [AttributionTable::default(), AttributionTable::reversed()] {
            let b = bundle(&c, &table, &e, &o);
            let apexes: Vec<Event> = b
                .stations
                .iter()
                .map(|s| s.geometry.reception.clone())
                .collect();
            let back = intersect_past_cones(&apexes).unwrap();
            assert!(back.coord_distance(&e) <= 1e-9, "{back} vs {e}");
            stereo.push(
                localize_4d_unchecked(&b.records(), Some(b.anchor.stamp))
                    .unwrap()
                    .position,
            );
        }
        let moved = stereo[0]
            .stamps
            .iter()
            .zip(&stereo[1].stamps)
            .any(|(a, b)| (a - b).abs() > 1e-9);
        assert!(moved, "{:?}", stereo[0].stamps);
        assert_eq!(stereo[0].anchor, stereo[1].anchor);
    }
}
