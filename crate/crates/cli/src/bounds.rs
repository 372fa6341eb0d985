//! Closed-form regret ceilings evaluated at a run's parameters.

use fastarm_core::lints::{perturbation_radius, ANTI_CONCENTRATION_P};
use fastarm_core::ridge::confidence_radius;

use crate::config::Algo;

/// Staged-UCB ceiling: `16 beta sqrt(T d ln(1 + T/d)) + 40 eta T` with the
/// confidence radius taken at `delta/2`.
pub fn oful_regret_bound(d: usize, horizon: usize, eta: f64, delta: f64) -> f64 {
    let beta = confidence_radius(d, horizon, delta / 2.0);
    let t = horizon as f64;
    let dd = d as f64;
    16.0 * beta * (t * dd * (1.0 + t / dd).ln()).sqrt() + 40.0 * eta * t
}

/// Leveled-TS ceiling with the confidence radius at `delta/(4T)`:
/// `(4 gamma / p)(sqrt(2 T d ln(1+T/d)) + sqrt(8 T ln(4/delta)))
///  + (gamma + beta) sqrt(2 T d ln(1+T/d)) + (2 (3+gamma+beta)/p) eta T`.
pub fn lints_regret_bound(d: usize, horizon: usize, eta: f64, delta: f64) -> f64 {
    let t = horizon as f64;
    let dd = d as f64;
    let fail = delta / (4.0 * t);
    let beta = confidence_radius(d, horizon, fail);
    let gamma = perturbation_radius(beta, d, fail);
    let p = ANTI_CONCENTRATION_P;
    let sqrt_td = (2.0 * t * dd * (1.0 + t / dd).ln()).sqrt();
    let sqrt_tail = (8.0 * t * (4.0 / delta).ln()).sqrt();
    4.0 * gamma / p * (sqrt_td + sqrt_tail)
        + (gamma + beta) * sqrt_td
        + 2.0 * (3.0 + gamma + beta) / p * eta * t
}

/// The ceiling matching an algorithm choice; exact baselines evaluate with a
/// zero approximation term.
pub fn regret_bound(algo: Algo, d: usize, horizon: usize, eta: f64, delta: f64) -> f64 {
    let eta = if algo.is_exact() { 0.0 } else { eta };
    if algo.is_sampling() {
        lints_regret_bound(d, horizon, eta, delta)
    } else {
        oful_regret_bound(d, horizon, eta, delta)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BoundReport {
    pub bound: f64,
    pub empirical: f64,
    pub ratio: f64,
}

pub fn compare_bound(
    algo: Algo,
    d: usize,
    horizon: usize,
    eta: f64,
    delta: f64,
    empirical: f64,
) -> BoundReport {
    let bound = regret_bound(algo, d, horizon, eta, delta);
    BoundReport {
        bound,
        empirical,
        ratio: empirical / bound,
    }
}
