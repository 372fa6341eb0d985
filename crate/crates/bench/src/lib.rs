//! Shared setup for the selection and index benchmarks.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fastarm_core::linalg::norm2;
use fastarm_core::{Environment, InstanceKind, PointSet};

pub fn sphere_points(k: usize, d: usize, seed: u64) -> Arc<PointSet> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm2(&v).max(1e-12);
            v.iter().map(|x| x / n).collect()
        })
        .collect();
    Arc::new(PointSet::new(d, rows).unwrap())
}

pub fn planted_env(k: usize, d: usize, seed: u64) -> Environment {
    Environment::make_instance(InstanceKind::PlantedGap, k, d, 0.5, 0.3, seed).unwrap()
}

/// A query within the norm bound, biased toward a stored point so the index
/// has something to find (the regime a bandit select runs in).
pub fn planted_query(points: &PointSet, q_bar: f64, along: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let row = rng.random_range(0..points.len());
    let x = points.point_at(row);
    let raw: Vec<f64> = (0..points.dim())
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    let proj: f64 = raw.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let mut perp: Vec<f64> = raw.iter().zip(x.iter()).map(|(r, b)| r - proj * b).collect();
    let n = norm2(&perp).max(1e-12);
    for v in &mut perp {
        *v /= n;
    }
    let across = (1.0 - along * along).max(0.0).sqrt();
    x.iter()
        .zip(perp.iter())
        .map(|(xi, wi)| q_bar * (along * xi + across * wi))
        .collect()
}
