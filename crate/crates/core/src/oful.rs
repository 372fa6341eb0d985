//! Staged, elimination-based accelerated UCB arm selection.
//!
//! The optimistic index `<x_a, theta_hat> + beta ||x_a||_{V^-1}` is not a
//! single inner product, but the uncertainty half is:
//! `||x_a||^2_{V^-1} = <vec(V^-1), vec(x_a x_a^T)>`. Selection therefore runs
//! on the vectorized outer products with query `vec(beta^2 4^s V^-1)`. The
//! horizon is split into stages; while the index answers, some arm still has
//! uncertainty above `2^-s` and playing it makes progress. A null triggers a
//! confidence-bound elimination pass over the active arms, a stage increment,
//! and an index rebuild over the survivors. At the final stage every survivor
//! is near-optimal and a uniformly random one is played.

use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::adaptive::{AdaptiveMipsIndex, BackendKind};
use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::mips::{MipsSpec, PointId, PointSet};
use crate::ridge::{confidence_radius, RidgeState};
use crate::seeding::mix_seed;

#[derive(Debug, Clone, Copy)]
pub struct OfulParams {
    pub horizon: usize,
    pub delta: f64,
    pub eta: f64,
}

/// Outcome of one selection step.
#[derive(Debug, Clone)]
pub struct OfulStep {
    pub arm: PointId,
    pub stage: usize,
    /// Candidates examined by the index during this selection.
    pub probes: usize,
    /// Index rebuilds triggered during this selection.
    pub rebuilds: usize,
    /// Certified inner product `beta^2 4^s ||x_a||^2_{V^-1}` when the index
    /// answered; `None` for the final-stage random arm.
    pub certificate: Option<f64>,
    /// True when the arm came from the final-stage uniform draw.
    pub random_arm: bool,
}

pub struct OfulState {
    ridge: RidgeState,
    arms: Arc<PointSet>,
    /// Vectorized outer products of all arms (d^2 dims, ids = arm ids).
    vec_arms: Arc<PointSet>,
    active: Vec<PointId>,
    stage: usize,
    max_stage: usize,
    beta: f64,
    eta: f64,
    spec: MipsSpec,
    backend: BackendKind,
    oracle_fail: f64,
    seed: u64,
    index: AdaptiveMipsIndex,
    rebuilds: usize,
    rng: ChaCha8Rng,
}

fn vectorize_outer(x: &[f64]) -> Vec<f64> {
    let d = x.len();
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        for j in 0..d {
            out.push(x[i] * x[j]);
        }
    }
    out
}

fn vectorized_arms(arms: &PointSet) -> Result<PointSet> {
    let mut ids = Vec::with_capacity(arms.len());
    let mut rows = Vec::with_capacity(arms.len());
    for (id, x) in arms.iter() {
        ids.push(id);
        // ||vec(x x^T)|| = ||x||^2 <= 1, so these are valid index points.
        rows.push(vectorize_outer(x));
    }
    PointSet::with_ids(arms.dim() * arms.dim(), ids, rows)
}

impl OfulState {
    pub fn new(
        arms: Arc<PointSet>,
        params: OfulParams,
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
        let fail = params.delta / 2.0;
        let beta = confidence_radius(d, params.horizon, fail);
        let eta = params.eta;
        let q_bar = d as f64 * beta * beta / (eta * eta);
        let spec = MipsSpec::new(0.25, 1.0 - eta * eta, eta * eta, q_bar, fail)?;
        let max_stage = ((1.0 / eta).log2().ceil() as usize).max(1);

        let vec_arms = Arc::new(vectorized_arms(&arms)?);
        let index =
            AdaptiveMipsIndex::build(vec_arms.clone(), spec, backend, oracle_fail, mix_seed(seed, 0))?;
        Ok(OfulState {
            ridge: RidgeState::new(d),
            active: arms.ids().to_vec(),
            arms,
            vec_arms,
            stage: 1,
            max_stage,
            beta,
            eta,
            spec,
            backend,
            oracle_fail,
            seed,
            index,
            rebuilds: 0,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, u64::MAX)),
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn max_stage(&self) -> usize {
        self.max_stage
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    pub fn active_arms(&self) -> &[PointId] {
        &self.active
    }

    pub fn spec(&self) -> &MipsSpec {
        &self.spec
    }

    pub fn index(&self) -> &AdaptiveMipsIndex {
        &self.index
    }

    /// The staged uncertainty query `vec(beta^2 2^{2s} V^-1)`.
    fn uncertainty_query(&self) -> Vec<f64> {
        let d = self.ridge.dim();
        let scale = self.beta * self.beta * 2f64.powi(2 * self.stage as i32);
        let inv = self.ridge.gram_inv();
        let mut q = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                q.push(scale * inv.get(i, j));
            }
        }
        q
    }

    /// Selects the next arm, eliminating and advancing stages on nulls.
    pub fn select(&mut self) -> Result<OfulStep> {
        let mut probes = 0;
        let mut rebuilds_this_step = 0;
        loop {
            if self.stage >= self.max_stage {
                let pick = self.rng.random_range(0..self.active.len());
                return Ok(OfulStep {
                    arm: self.active[pick],
                    stage: self.stage,
                    probes,
                    rebuilds: rebuilds_this_step,
                    certificate: None,
                    random_arm: true,
                });
            }
            let q = self.uncertainty_query();
            // Parameterization guard: ||q||_F <= sqrt(d) beta^2 2^{2s} stays
            // within q_bar for every stage that issues queries.
            let qn = crate::linalg::norm2(&q);
            if qn > self.spec.q_bar {
                return Err(Error::QueryNormTooLarge {
                    norm: qn,
                    bound: self.spec.q_bar,
                });
            }
            let reply = self.index.query(&q)?;
            probes += reply.probes;
            match reply.answer {
                Some((arm, value)) => {
                    return Ok(OfulStep {
                        arm,
                        stage: self.stage,
                        probes,
                        rebuilds: rebuilds_this_step,
                        certificate: Some(value),
                        random_arm: false,
                    });
                }
                None => {
                    self.eliminate_and_advance()?;
                    rebuilds_this_step += 1;
                }
            }
        }
    }

    /// Confidence-bound elimination: keep arms whose optimistic value reaches
    /// the best pessimistic value, advance the stage, rebuild the index over
    /// the survivors.
    pub fn eliminate_and_advance(&mut self) -> Result<()> {
        if self.stage >= self.max_stage {
            return Err(Error::Numerical("elimination past the final stage"));
        }
        let theta = self.ridge.theta_hat().to_vec();
        let mut floor = f64::NEG_INFINITY;
        let mut scored = Vec::with_capacity(self.active.len());
        for &arm in &self.active {
            let x = self.arms.point_by_id(arm).ok_or(Error::UnknownArm(arm))?;
            let mean = dot(&theta, x);
            let width = self.beta * self.ridge.mahalanobis_inv(x)?;
            floor = floor.max(mean - width);
            scored.push((arm, mean, width));
        }
        let survivors: Vec<PointId> = scored
            .iter()
            .filter(|(_, mean, width)| mean + width >= floor)
            .map(|(arm, _, _)| *arm)
            .collect();
        debug_assert!(
            !survivors.is_empty(),
            "the floor-achieving arm always survives its own threshold"
        );
        if survivors.is_empty() {
            return Err(Error::Numerical("elimination emptied the active set"));
        }
        self.active = survivors;
        self.stage += 1;
        let subset = Arc::new(self.vec_arms.subset(&self.active)?);
        self.index = AdaptiveMipsIndex::build(
            subset,
            self.spec,
            self.backend,
            self.oracle_fail,
            mix_seed(self.seed, self.stage as u64),
        )?;
        self.rebuilds += 1;
        Ok(())
    }

    /// Feeds back the observed reward for the played arm.
    pub fn update(&mut self, arm: PointId, reward: f64) -> Result<()> {
        let x = self
            .arms
            .point_by_id(arm)
            .ok_or(Error::UnknownArm(arm))?
            .to_vec();
        self.ridge.update(&x, reward)
    }
}

/// Stateful exact-scan optimistic baseline with the same confidence radius as
/// the accelerated state.
pub struct OfulBaseline {
    ridge: RidgeState,
    arms: Arc<PointSet>,
    beta: f64,
}

impl OfulBaseline {
    pub fn new(arms: Arc<PointSet>, params: OfulParams) -> Result<Self> {
        if params.horizon == 0 {
            return Err(Error::invalid("horizon", 0.0, "must be at least 1"));
        }
        if params.delta <= 0.0 || params.delta >= 1.0 {
            return Err(Error::invalid("delta", params.delta, "must lie in (0, 1)"));
        }
        let d = arms.dim();
        let beta = confidence_radius(d, params.horizon, params.delta / 2.0);
        Ok(OfulBaseline {
            ridge: RidgeState::new(d),
            arms,
            beta,
        })
    }

    pub fn ridge(&self) -> &RidgeState {
        &self.ridge
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn select(&self) -> Result<(PointId, usize)> {
        baseline_select(&self.ridge, &self.arms, self.beta)
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

/// Exact-scan optimistic baseline: argmax of
/// `<x_a, theta_hat> + beta ||x_a||_{V^-1}`, ties toward the smallest id.
/// Also returns the number of arms scanned.
pub fn baseline_select(
    ridge: &RidgeState,
    arms: &PointSet,
    beta: f64,
) -> Result<(PointId, usize)> {
    let theta = ridge.theta_hat();
    let mut best_id = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (id, x) in arms.iter() {
        let v = dot(theta, x) + beta * ridge.mahalanobis_inv(x)?;
        if v > best_v || (v == best_v && id < best_id) {
            best_v = v;
            best_id = id;
        }
    }
    Ok((best_id, arms.len()))
}
