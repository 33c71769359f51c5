#![allow(dead_code)]

use fictus::model::CoupledSystem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// One-dimensional system with a, g uniform on [−1, 1] and d uniform on [0.5, 1.5].
pub fn random_system(m: usize, c: usize, seed: u64) -> CoupledSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Vec<f64> = (0..m).map(|_| rng.random_range(0.5..1.5)).collect();
    let g = (0..m).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    let a = (0..m).map(|_| (0..m).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
    CoupledSystem::one_d(c, &d, g, a, 1.0, 1.0, (0.3, 0.7))
}

/// Random system in n dimensions with isotropic diffusion.
pub fn random_system_nd(m: usize, n: usize, c: usize, seed: u64) -> CoupledSystem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sys = random_system(m, c, seed ^ 0xabcd);
    sys.n = n;
    sys.d = (0..m)
        .map(|_| {
            let v = rng.random_range(0.5..1.5);
            (0..n).map(|i| (0..n).map(|k| if i == k { v } else { 0.0 }).collect()).collect()
        })
        .collect();
    sys.g = (0..m).map(|_| (0..m).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect()).collect();
    sys
}

pub fn sine_power(x: f64, length: f64, k: i32) -> f64 {
    (std::f64::consts::PI * x / length).sin().powi(k)
}
