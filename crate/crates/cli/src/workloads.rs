//! Contract and probe-count workloads: planted instances, an adaptive
//! adversary, and probe measurement over an index. Used by the acceptance
//! battery and the `index-stats` subcommand.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use fastarm_core::linalg::{dot, norm2};
use fastarm_core::{mix_seed, AdaptiveMipsIndex, Error, PointSet, Result};

/// A point set with one planted direction `u` (id 0) and background points
/// whose alignment with `u` is capped.
pub struct PlantedMips {
    pub points: Arc<PointSet>,
    pub planted: Vec<f64>,
}

fn unit_sphere(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let n = norm2(&v);
        if n > 1e-9 {
            return v.iter().map(|x| x / n).collect();
        }
    }
}

fn unit_perp(rng: &mut ChaCha8Rng, base: &[f64]) -> Vec<f64> {
    loop {
        let raw = unit_sphere(rng, base.len());
        let proj = dot(&raw, base);
        let perp: Vec<f64> = raw.iter().zip(base.iter()).map(|(r, b)| r - proj * b).collect();
        let n = norm2(&perp);
        if n > 1e-6 {
            return perp.iter().map(|v| v / n).collect();
        }
    }
}

pub fn planted_mips_instance(k: usize, d: usize, align_cap: f64, seed: u64) -> Result<PlantedMips> {
    if k < 2 {
        return Err(Error::invalid("k", k as f64, "need at least two points"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x91A));
    let planted = unit_sphere(&mut rng, d);
    let mut rows = vec![planted.clone()];
    for _ in 1..k {
        let mut tries = 0;
        let v = loop {
            let v = unit_sphere(&mut rng, d);
            if dot(&v, &planted).abs() <= align_cap {
                break v;
            }
            tries += 1;
            if tries > 100_000 {
                return Err(Error::Numerical("background rejection sampling stalled"));
            }
        };
        rows.push(v);
    }
    Ok(PlantedMips {
        points: Arc::new(PointSet::new(d, rows)?),
        planted,
    })
}

#[derive(Debug, Clone, Copy, Default)]
pub struct AdversaryOutcome {
    pub queries: usize,
    /// Queries with a qualifying point that came back null.
    pub misses: usize,
    /// Non-null answers below the certification threshold (must stay 0).
    pub unsound: usize,
    pub total_probes: usize,
}

/// Drives an adaptive query sequence against an index over a planted
/// instance. Every query is constructed to keep the planted point qualifying
/// (`<q, u> = target_ip >= r + eps`), while the off-component direction
/// evolves as a function of the previous answer, which is exactly the
/// dependence pattern that breaks per-query guarantees.
pub fn adaptive_adversary_trial(
    index: &AdaptiveMipsIndex,
    instance: &PlantedMips,
    queries: usize,
    target_ip: f64,
    seed: u64,
) -> Result<AdversaryOutcome> {
    let spec = *index.spec();
    if target_ip < spec.qualifying_threshold() || target_ip > spec.q_bar {
        return Err(Error::invalid(
            "target_ip",
            target_ip,
            "must lie in [r + eps, q_bar]",
        ));
    }
    let d = instance.points.dim();
    let u = &instance.planted;
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xADA));
    let mut w = unit_perp(&mut rng, u);

    let along = target_ip / spec.q_bar;
    let across = (1.0 - along * along).max(0.0).sqrt();

    let mut outcome = AdversaryOutcome::default();
    for _ in 0..queries {
        let q: Vec<f64> = u
            .iter()
            .zip(w.iter())
            .map(|(ui, wi)| spec.q_bar * (along * ui + across * wi))
            .collect();
        let reply = index.query(&q)?;
        outcome.queries += 1;
        outcome.total_probes += reply.probes;

        match reply.answer {
            Some((id, value)) => {
                let point = instance.points.point_by_id(id).ok_or(Error::UnknownArm(id))?;
                let recomputed = dot(&q, point);
                if recomputed < spec.sanity_threshold() || (recomputed - value).abs() > 1e-9 {
                    outcome.unsound += 1;
                }
                // steer the off-component toward the answer's direction
                let proj = dot(point, u);
                let perp: Vec<f64> =
                    point.iter().zip(u.iter()).map(|(p, ui)| p - proj * ui).collect();
                let pn = norm2(&perp);
                let jitter = unit_perp(&mut rng, u);
                let mixed: Vec<f64> = (0..d)
                    .map(|i| {
                        let steer = if pn > 1e-9 { perp[i] / pn } else { 0.0 };
                        w[i] + 0.7 * steer + 0.1 * jitter[i]
                    })
                    .collect();
                let proj_u = dot(&mixed, u);
                let mut next: Vec<f64> =
                    mixed.iter().zip(u.iter()).map(|(m, ui)| m - proj_u * ui).collect();
                let n = norm2(&next).max(1e-12);
                for v in &mut next {
                    *v /= n;
                }
                w = next;
            }
            None => {
                outcome.misses += 1;
                // flip and jitter on a miss
                let jitter = unit_perp(&mut rng, u);
                let mixed: Vec<f64> = (0..d).map(|i| -w[i] + 0.3 * jitter[i]).collect();
                let proj_u = dot(&mixed, u);
                let mut next: Vec<f64> =
                    mixed.iter().zip(u.iter()).map(|(m, ui)| m - proj_u * ui).collect();
                let n = norm2(&next).max(1e-12);
                for v in &mut next {
                    *v /= n;
                }
                w = next;
            }
        }
    }
    Ok(outcome)
}

/// Probe counts over a planted-answer workload: each query is aligned with a
/// random stored point strongly enough to qualify, which is the regime a
/// bandit select runs in.
pub fn mean_probes_planted(
    index: &AdaptiveMipsIndex,
    queries: usize,
    seed: u64,
) -> Result<f64> {
    let spec = *index.spec();
    let points = index.points().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x9B0B));
    let along = ((spec.qualifying_threshold() / spec.q_bar) * 1.02).min(1.0);
    let across = (1.0 - along * along).max(0.0).sqrt();
    let mut total = 0usize;
    for _ in 0..queries {
        let row = rng.random_range(0..points.len());
        let x = points.point_at(row).to_vec();
        let w = unit_perp(&mut rng, &x);
        let q: Vec<f64> = x
            .iter()
            .zip(w.iter())
            .map(|(xi, wi)| spec.q_bar * (along * xi + across * wi))
            .collect();
        total += index.query(&q)?.probes;
    }
    Ok(total as f64 / queries as f64)
}
