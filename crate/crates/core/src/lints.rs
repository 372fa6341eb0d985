//! Accelerated linear Thompson sampling over leveled indexes.
//!
//! Thompson sampling already selects by a single inner product
//! `argmax_a <x_a, theta_tilde>`, so the index applies directly. One index
//! cannot know in advance how large the maximum will be, so selection keeps
//! `M = ceil(1/eta)` indexes at staggered thresholds `r_m = q_bar * m * eta`
//! and takes the non-null answer with the largest level: a non-null at level
//! `m` certifies `<x_a, theta_tilde> >= (1 - 1/(m+1)) r_m - eta`, so higher
//! firing levels certify larger values. With an exact backend the firing
//! levels are a prefix of `1..=M`, which justifies a binary search; hash
//! backends can break the prefix structure with probability at most the
//! per-level failure, so the search tracks the best non-null seen and an
//! exact scan covers the all-null case (logged).

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::adaptive::{AdaptiveMipsIndex, AdaptiveReply, BackendKind};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::mips::{MipsSpec, PointId, PointSet};
use crate::oracle::exact_argmax;
use crate::ridge::{confidence_radius, RidgeState};
use crate::seeding::mix_seed;

/// Anti-concentration mass `p` of the standard Gaussian perturbation:
/// `P(u^T xi >= 1) = Phi(-1) ~ 0.1587`, asserted with margin as 0.15.
pub const ANTI_CONCENTRATION_P: f64 = 0.15;
/// Concentration constant `b` in `P(||xi|| <= sqrt(b d ln(b' d / delta)))`.
pub const CONCENTRATION_B: f64 = 4.0;
/// Concentration constant `b'`.
pub const CONCENTRATION_B_PRIME: f64 = 4.0;

/// Perturbation norm radius `gamma = beta * sqrt(b d ln(b' d / fail))`.
pub fn perturbation_radius(beta: f64, dim: usize, fail: f64) -> f64 {
    let d = dim as f64;
    beta * (CONCENTRATION_B * d * (CONCENTRATION_B_PRIME * d / fail).ln()).sqrt()
}

/// Seeded standard Gaussian sampler for the perturbation direction.
pub struct TsSampler {
    dim: usize,
    rng: ChaCha8Rng,
}

impl TsSampler {
    pub fn new(dim: usize, seed: u64) -> Self {
        TsSampler {
            dim,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn sample(&mut self) -> Vec<f64> {
        (0..self.dim).map(|_| self.rng.sample(StandardNormal)).collect()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LinTsParams {
    pub horizon: usize,
    pub delta: f64,
    pub eta: f64,
}

/// Stream tag for the perturbation sampler, shared with the exact baseline so
/// paired runs draw identical perturbations.
const SAMPLER_STREAM: u64 = u64::MAX - 1;

/// Outcome of one selection step.
#[derive(Debug, Clone)]
pub struct LinTsStep {
    pub arm: PointId,
    /// Certification level that fired (0 when the exact-scan fallback ran).
    pub level: usize,
    pub probes: usize,
    /// True when no level answered (or the sample norm failed the
    /// concentration check) and the exact scan decided.
    pub fallback: bool,
    /// True when `||theta_tilde||` exceeded `1 + beta + gamma`.
    pub norm_violation: bool,
    /// Certified inner product at the firing level.
    pub certificate: Option<f64>,
    /// The perturbed estimate used this step.
    pub theta_tilde: Vec<f64>,
}

enum LevelBank {
    /// Prebuilt hash indexes, level `m` at position `m - 1`.
    Lsh(Vec<AdaptiveMipsIndex>),
    /// Exact backend: level indexes carry no state beyond their contract, so
    /// they are materialized on demand (important when `1/eta` is huge).
    Brute { oracle_fail: f64, seed: u64 },
}

pub struct LinTsState {
    ridge: RidgeState,
    arms: Arc<PointSet>,
    eta: f64,
    beta: f64,
    gamma: f64,
    q_bar: f64,
    index_fail: f64,
    level_count: usize,
    levels: LevelBank,
    sampler: TsSampler,
    fallbacks: usize,
    norm_violations: usize,
}

impl LinTsState {
    pub fn new(
        arms: Arc<PointSet>,
        params: LinTsParams,
        backend: BackendKind,
        oracle_fail: f64,
        seed: u64,
    ) -> Result<Self> {
        if params.eta <= 0.0 || params.eta >= 1.0 {
            return Err(Error::invalid("eta", params.eta, "must lie in (0, 1)"));
        }
        if params.horizon == 0 {
            return Err(Error::invalid("horizon", 0.0, "must be at least 1"));
        }
        if params.delta <= 0.0 || params.delta >= 1.0 {
            return Err(Error::invalid("delta", params.delta, "must lie in (0, 1)"));
        }
        let d = arms.dim();
        let index_fail = params.delta / (4.0 * params.horizon as f64);
        let beta = confidence_radius(d, params.horizon, index_fail);
        let gamma = perturbation_radius(beta, d, index_fail);
        let q_bar = 1.0 + beta + gamma;
        let level_count = ((1.0 / params.eta).ceil() as usize).max(1);

        let levels = match backend {
            BackendKind::Brute => LevelBank::Brute { oracle_fail, seed },
            BackendKind::Lsh => {
                let built: Result<Vec<AdaptiveMipsIndex>> = (1..=level_count)
                    .into_par_iter()
                    .map(|m| {
                        let spec = level_spec(m, params.eta, q_bar, index_fail)?;
                        AdaptiveMipsIndex::build(
                            arms.clone(),
                            spec,
                            BackendKind::Lsh,
                            oracle_fail,
                            mix_seed(seed, m as u64),
                        )
                    })
                    .collect();
                LevelBank::Lsh(built?)
            }
        };

        Ok(LinTsState {
            ridge: RidgeState::new(d),
            arms,
            eta: params.eta,
            beta,
            gamma,
            q_bar,
            index_fail,
            level_count,
            levels,
            sampler: TsSampler::new(d, mix_seed(seed, SAMPLER_STREAM)),
            fallbacks: 0,
            norm_violations: 0,
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Query-norm budget `1 + beta + gamma`.
    pub fn q_bar(&self) -> f64 {
        self.q_bar
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn level_count(&self) -> usize {
        self.level_count
    }

    pub fn fallbacks(&self) -> usize {
        self.fallbacks
    }

    pub fn norm_violations(&self) -> usize {
        self.norm_violations
    }

    pub fn level_spec(&self, m: usize) -> Result<MipsSpec> {
        level_spec(m, self.eta, self.q_bar, self.index_fail)
    }

    /// Statistics of the prebuilt level indexes (hash backend only; the
    /// exact backend materializes levels on demand and has no tables).
    pub fn level_stats(&self) -> Vec<crate::adaptive::AdaptiveStats> {
        match &self.levels {
            LevelBank::Lsh(indexes) => indexes.iter().map(|idx| idx.stats()).collect(),
            LevelBank::Brute { .. } => Vec::new(),
        }
    }

    fn query_level(&self, m: usize, q: &[f64]) -> Result<AdaptiveReply> {
        match &self.levels {
            LevelBank::Lsh(indexes) => indexes[m - 1].query(q),
            LevelBank::Brute { oracle_fail, seed } => {
                let spec = self.level_spec(m)?;
                let idx = AdaptiveMipsIndex::build(
                    self.arms.clone(),
                    spec,
                    BackendKind::Brute,
                    *oracle_fail,
                    mix_seed(*seed, m as u64),
                )?;
                idx.query(q)
            }
        }
    }

    /// Draws the perturbation, forms `theta_tilde = theta_hat + beta V^{-1/2} xi`,
    /// and selects by the largest firing level.
    pub fn select(&mut self) -> Result<LinTsStep> {
        let xi = self.sampler.sample();
        let root = self.ridge.inv_sqrt()?;
        let shift = root.matvec(&xi);
        let theta_tilde: Vec<f64> = self
            .ridge
            .theta_hat()
            .iter()
            .zip(shift.iter())
            .map(|(t, s)| t + self.beta * s)
            .collect();
        self.select_for_sample(theta_tilde)
    }

    /// Level search for a given perturbed estimate (exposed so the sampling
    /// step and the search can be exercised separately).
    pub fn select_for_sample(&mut self, theta_tilde: Vec<f64>) -> Result<LinTsStep> {
        if norm2(&theta_tilde) > self.q_bar {
            // Concentration failure: expected at most index_fail per step.
            self.norm_violations += 1;
            self.fallbacks += 1;
            let (arm, value) = exact_argmax(&self.arms, &theta_tilde);
            return Ok(LinTsStep {
                arm,
                level: 0,
                probes: self.arms.len(),
                fallback: true,
                norm_violation: true,
                certificate: Some(value),
                theta_tilde,
            });
        }

        let mut probes = 0;
        let mut best: Option<(usize, PointId, f64)> = None;
        let (mut lo, mut hi) = (1usize, self.level_count);
        while lo <= hi {
            let mid = (lo + hi) / 2;
            let reply = self.query_level(mid, &theta_tilde)?;
            probes += reply.probes;
            match reply.answer {
                Some((arm, value)) => {
                    best = Some((mid, arm, value));
                    lo = mid + 1;
                }
                None => {
                    if mid == 1 {
                        break;
                    }
                    hi = mid - 1;
                }
            }
        }

        match best {
            Some((level, arm, value)) => Ok(LinTsStep {
                arm,
                level,
                probes,
                fallback: false,
                norm_violation: false,
                certificate: Some(value),
                theta_tilde,
            }),
            None => {
                self.fallbacks += 1;
                let (arm, value) = exact_argmax(&self.arms, &theta_tilde);
                Ok(LinTsStep {
                    arm,
                    level: 0,
                    probes: probes + self.arms.len(),
                    fallback: true,
                    norm_violation: false,
                    certificate: Some(value),
                    theta_tilde,
                })
            }
        }
    }

    pub fn update(&mut self, arm: PointId, reward: f64) -> Result<()> {
        let x = self
            .arms
            .point_by_id(arm)
            .ok_or(Error::UnknownArm(arm))?
            .to_vec();
        self.ridge.update(&x, reward)
    }
}

fn level_spec(m: usize, eta: f64, q_bar: f64, index_fail: f64) -> Result<MipsSpec> {
    let c = 1.0 - 1.0 / (m as f64 + 1.0);
    let r = q_bar * m as f64 * eta;
    MipsSpec::new(c, r, eta, q_bar, index_fail)
}

/// Exact-scan Thompson baseline: argmax of `<x_a, theta_tilde>`, ties toward
/// the smallest id. Also returns the number of arms scanned.
pub fn baseline_select(arms: &PointSet, theta_tilde: &[f64]) -> (PointId, usize) {
    let (arm, _) = exact_argmax(arms, theta_tilde);
    (arm, arms.len())
}

/// Stateful exact-scan Thompson sampler. Built from the same parameters and
/// sampler stream as the accelerated state, so a matched seed yields the same
/// `theta_tilde` sequence and paired runs differ only in the selection rule.
pub struct LinTsBaseline {
    ridge: RidgeState,
    arms: Arc<PointSet>,
    beta: f64,
    sampler: TsSampler,
}

impl LinTsBaseline {
    pub fn new(arms: Arc<PointSet>, params: LinTsParams, seed: u64) -> Result<Self> {
        if params.horizon == 0 {
            return Err(Error::invalid("horizon", 0.0, "must be at least 1"));
        }
        if params.delta <= 0.0 || params.delta >= 1.0 {
            return Err(Error::invalid("delta", params.delta, "must lie in (0, 1)"));
        }
        let d = arms.dim();
        let index_fail = params.delta / (4.0 * params.horizon as f64);
        let beta = confidence_radius(d, params.horizon, index_fail);
        Ok(LinTsBaseline {
            ridge: RidgeState::new(d),
            arms,
            beta,
            sampler: TsSampler::new(d, mix_seed(seed, SAMPLER_STREAM)),
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Draws the perturbation and scans for the argmax. Returns the arm, the
    /// scan size, and the perturbed estimate used.
    pub fn select(&mut self) -> Result<(PointId, usize, Vec<f64>)> {
        let xi = self.sampler.sample();
        let root = self.ridge.inv_sqrt()?;
        let shift = root.matvec(&xi);
        let theta_tilde: Vec<f64> = self
            .ridge
            .theta_hat()
            .iter()
            .zip(shift.iter())
            .map(|(t, s)| t + self.beta * s)
            .collect();
        let (arm, probes) = baseline_select(&self.arms, &theta_tilde);
        Ok((arm, probes, theta_tilde))
    }

    pub fn update(&mut self, arm: PointId, reward: f64) -> Result<()> {
        let x = self
            .arms
            .point_by_id(arm)
            .ok_or(Error::UnknownArm(arm))?
            .to_vec();
        self.ridge.update(&x, reward)
    }
}
