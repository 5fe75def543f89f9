//! Seeded instance generation: identical seed, identical instance.

use motsink_core::DiscreteMeasure;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `n` points uniform in `[-1/2, 1/2]^d`.
pub fn uniform_cloud(n: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() - 0.5)
}

/// `n` points uniform in `[0, span]^d`.
pub fn box_cloud(n: usize, d: usize, span: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() * span)
}

/// Uniform-weight measure on a seeded uniform cloud.
pub fn uniform_measure(n: usize, d: usize, seed: u64) -> DiscreteMeasure<f64> {
    DiscreteMeasure::uniform(uniform_cloud(n, d, seed)).expect("nonempty cloud")
}

/// Random-weight measure on a seeded cloud in `[0, span]^d`.
pub fn random_measure(n: usize, d: usize, span: f64, seed: u64) -> DiscreteMeasure<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let points = Array2::from_shape_fn((n, d), |_| rng.gen::<f64>() * span);
    let mut w = Array1::from_shape_fn(n, |_| rng.gen::<f64>() + 0.1);
    let s = w.sum();
    w.mapv_inplace(|v| v / s);
    DiscreteMeasure::new(points, w).expect("valid random measure")
}

/// A ring-shaped point cloud in `[0, 1]^2`, used as a synthetic stand-in
/// for dithered test images.
pub fn ring_cloud(n: usize, center: (f64, f64), radius: f64, width: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n, 2));
    for i in 0..n {
        let angle = rng.gen::<f64>() * std::f64::consts::TAU;
        let r = radius + (rng.gen::<f64>() - 0.5) * width;
        out[(i, 0)] = (center.0 + r * angle.cos()).clamp(0.0, 1.0);
        out[(i, 1)] = (center.1 + r * angle.sin()).clamp(0.0, 1.0);
    }
    out
}

/// A Gaussian blob in `[0, 1]^2`, clamped to the box.
pub fn blob_cloud(n: usize, center: (f64, f64), spread: f64, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Array2::zeros((n, 2));
    for i in 0..n {
        // Box-Muller
        let u1: f64 = rng.gen::<f64>().max(1e-12);
        let u2: f64 = rng.gen();
        let g0 = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
        let g1 = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).sin();
        out[(i, 0)] = (center.0 + spread * g0).clamp(0.0, 1.0);
        out[(i, 1)] = (center.1 + spread * g1).clamp(0.0, 1.0);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_cloud() {
        assert_eq!(uniform_cloud(10, 2, 7), uniform_cloud(10, 2, 7));
        assert_ne!(uniform_cloud(10, 2, 7), uniform_cloud(10, 2, 8));
    }

    #[test]
    fn clouds_stay_in_their_boxes() {
        let c = uniform_cloud(100, 1, 3);
        assert!(c.iter().all(|&x| (-0.5..0.5).contains(&x)));
        let r = ring_cloud(50, (0.5, 0.5), 0.3, 0.05, 4);
        assert!(r.iter().all(|&x| (0.0..=1.0).contains(&x)));
        let b = blob_cloud(50, (0.3, 0.7), 0.1, 5);
        assert!(b.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }
}
