#![allow(dead_code)]

use rand::Rng;
use stereoloc::constellation::{
    AnchoringWorldline, Clock, Emitter, MessageSense, WorldlineSpec, DEFAULT_DOMAIN,
};
use stereoloc::geometry::Event;
use stereoloc::observation::Orientation;
use stereoloc::positioning::Constellation;

pub fn static_emitter(id: &str, x: &[f64]) -> Emitter {
    Emitter::new(
        id,
        WorldlineSpec::stationary(x, DEFAULT_DOMAIN).unwrap(),
        Clock::proper_time(),
    )
    .unwrap()
}

fn anchored(emitters: Vec<Emitter>, s: Emitter) -> Constellation {
    let anchor = AnchoringWorldline::new(s, -500.0, 500.0, MessageSense::Emission).unwrap();
    Constellation::new(emitters, Some(anchor), None).unwrap()
}

pub fn triangle() -> Constellation {
    anchored(
        vec![
            static_emitter("A", &[10.0, 0.5]),
            static_emitter("B", &[-4.5, 8.0]),
            static_emitter("C", &[-5.5, -9.0]),
        ],
        static_emitter("S", &[20.0, 12.0]),
    )
}

pub fn five() -> Constellation {
    anchored(
        vec![
            static_emitter("A", &[11.0, 1.0, -2.0]),
            static_emitter("B", &[-1.0, 9.0, 0.5]),
            static_emitter("C", &[2.0, -1.0, 12.0]),
            static_emitter("D", &[-7.0, -5.0, -6.5]),
        ],
        static_emitter("S", &[4.0, -8.0, 5.0]),
    )
}

/// Uniform in a ball of `radius` around the spatial origin.
pub fn random_event<R: Rng>(rng: &mut R, spatial_dim: usize, radius: f64) -> Event {
    let x = loop {
        let v: Vec<f64> = (0..spatial_dim)
            .map(|_| rng.gen_range(-radius..radius))
            .collect();
        if v.iter().map(|c| c * c).sum::<f64>() <= radius * radius {
            break v;
        }
    };
    let mut c = vec![rng.gen_range(-5.0..5.0)];
    c.extend(x);
    Event::new(&c).unwrap()
}

pub fn random_orientations<R: Rng>(rng: &mut R, spatial_dim: usize, n: usize) -> Vec<Orientation> {
    (0..n)
        .map(|_| {
            let angle = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            if spatial_dim == 2 {
                Orientation::planar(angle)
            } else {
                let axis = [
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(0.1..1.0),
                ];
                Orientation::spatial(axis, angle)
            }
        })
        .collect()
}
