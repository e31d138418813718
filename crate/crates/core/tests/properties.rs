mod common;

use common::{five, random_event, random_orientations, triangle};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use stereoloc::constellation::Emitter;
use stereoloc::geometry::intersect_past_cones;
use stereoloc::localization::{embed_event, localize_3d_intrinsic};
use stereoloc::observation::Orientation;
use stereoloc::positioning::{assemble_echo_3d, emission_coordinates, grid_change};
use stereoloc::projective::{apply_moebius, solve_frame_change_rp1, stamp_of_reading, ProjPoint1};

fn distinct(a: f64, b: f64, c: f64) -> bool {
    (a - b).abs() > 1e-3 && (b - c).abs() > 1e-3 && (a - c).abs() > 1e-3
}

proptest! {
    #[test]
    fn frame_readings_give_the_targets(a in -1e3..1e3f64, b in -1e3..1e3f64, c in -1e3..1e3f64) {
        prop_assume!(distinct(a, b, c));
        let at = |p, q| stamp_of_reading(a, b, c, &ProjPoint1::new(p, q).unwrap()).unwrap().unwrap();
        prop_assert!((at(0.0, 1.0) - a).abs() <= 1e-12);
        prop_assert!((at(1.0, 0.0) - b).abs() <= 1e-12);
        prop_assert_eq!(at(1.0, 1.0), c);
    }

    #[test]
    fn moebius_maps_are_birational(
        dst in prop::array::uniform3(-50.0..50.0f64),
        t in -1e2..1e2f64,
    ) {
        prop_assume!(distinct(dst[0], dst[1], dst[2]));
        let [a, b, c] = dst.map(ProjPoint1::finite);
        let k = solve_frame_change_rp1(a, b, c).unwrap();
        let p = ProjPoint1::finite(t);
        let back = apply_moebius(&k.inverse(), &apply_moebius(&k, &p));
        prop_assert!(back.distance(&p) <= 1e-12, "{:?} vs {:?}", back, p);
    }
}

#[test]
fn stations_are_a_fibered_product_of_past_cones() {
    let c = triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let e = random_event(&mut rng, 2, 3.5);
        let b = assemble_echo_3d(&c, &e, &[Orientation::identity(2); 3], "e").unwrap();
        let apexes: Vec<_> = b
            .stations
            .iter()
            .map(|s| s.geometry.reception.clone())
            .collect();
        let back = intersect_past_cones(&apexes).unwrap();
        assert!(back.coord_distance(&e) <= 1e-10, "{back} vs {e}");
    }
}

#[test]
fn grid_changes_around_the_five_grids_close() {
    let c = five();
    let mut all: Vec<Emitter> = c.emitters.clone();
    all.push(c.localizer.as_ref().unwrap().emitter.clone());
    let grids: Vec<Vec<Emitter>> = (0..5)
        .map(|skip| {
            all.iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, e)| e.clone())
                .collect()
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..50 {
        let e = random_event(&mut rng, 3, 3.0);
        let start = emission_coordinates(&grids[0], &e).unwrap();
        let mut p = start.clone();
        for k in 0..5 {
            p = grid_change(&grids[k], &grids[(k + 1) % 5], &p, Some(&e)).unwrap();
        }
        assert!(p.max_abs_diff(&start) <= 1e-9, "{:?} vs {:?}", p, start);
    }
}

#[test]
fn stereometric_coordinates_ignore_tetrad_rotations() {
    let c = triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..200 {
        let e = random_event(&mut rng, 2, 3.5);
        let localize = |o: &[Orientation]| {
            let b = assemble_echo_3d(&c, &e, o, "e").unwrap();
            let readings = b.stations.clone().map(|s| s.normalized);
            localize_3d_intrinsic(&b.records(), &readings, Some(b.anchor.stamp)).unwrap()
        };
        let fixed = localize(&[Orientation::identity(2); 3]);
        let turned = localize(&random_orientations(&mut rng, 2, 3));
        for (a, b) in fixed.stamps.iter().zip(&turned.stamps) {
            assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
        }
    }
}

#[test]
fn embedding_separates_distinct_events() {
    let c = triangle();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut min = f64::INFINITY;
    for _ in 0..1000 {
        let mut embed = || {
            let e = random_event(&mut rng, 2, 3.5);
            let b = assemble_echo_3d(&c, &e, &[Orientation::identity(2); 3], "e").unwrap();
            let readings = b.stations.clone().map(|s| s.normalized);
            let p = localize_3d_intrinsic(&b.records(), &readings, Some(b.anchor.stamp)).unwrap();
            embed_event(&p).unwrap()
        };
        let (u, v) = (embed(), embed());
        let d = u
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt();
        min = min.min(d);
    }
    assert!(min > 0.0);
}
