//! Synthetic stochastic linear-reward environment and regret bookkeeping.
//!
//! Rewards are `<theta_star, x_arm> + noise` with Gaussian noise of standard
//! deviation at most 1 (hence 1-subgaussian). The arm set and features are
//! fixed for the whole horizon. Noise is drawn from a dedicated stream, one
//! draw per pull regardless of which arm is played, so paired runs of
//! different selection rules consume identical noise.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, norm2};
use crate::mips::{PointId, PointSet};
use crate::seeding::mix_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstanceKind {
    SphereUniform,
    Clustered,
    PlantedGap,
}

impl std::str::FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere-uniform" => Ok(InstanceKind::SphereUniform),
            "clustered" => Ok(InstanceKind::Clustered),
            "planted-gap" => Ok(InstanceKind::PlantedGap),
            other => Err(Error::Parse(format!("unknown instance kind `{other}`"))),
        }
    }
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InstanceKind::SphereUniform => write!(f, "sphere-uniform"),
            InstanceKind::Clustered => write!(f, "clustered"),
            InstanceKind::PlantedGap => write!(f, "planted-gap"),
        }
    }
}

pub struct Environment {
    theta_star: Vec<f64>,
    arms: Arc<PointSet>,
    noise_std: f64,
    kind: InstanceKind,
    seed: u64,
    gap: f64,
    rng: ChaCha8Rng,
    pulls: usize,
    best_arm: PointId,
    best_value: f64,
}

impl Environment {
    pub fn new(
        theta_star: Vec<f64>,
        arms: Arc<PointSet>,
        noise_std: f64,
        kind: InstanceKind,
        gap: f64,
        seed: u64,
    ) -> Result<Self> {
        if !all_finite(&theta_star) {
            return Err(Error::NonFinite {
                context: "theta_star",
            });
        }
        if theta_star.len() != arms.dim() {
            return Err(Error::DimensionMismatch {
                expected: arms.dim(),
                got: theta_star.len(),
            });
        }
        let n = norm2(&theta_star);
        if n > 1.0 + 1e-9 {
            return Err(Error::PointNormTooLarge { norm: n });
        }
        if !(0.0..=1.0).contains(&noise_std) {
            return Err(Error::invalid(
                "noise_std",
                noise_std,
                "must lie in [0, 1] to stay 1-subgaussian",
            ));
        }
        let mut best_arm = usize::MAX;
        let mut best_value = f64::NEG_INFINITY;
        for (id, x) in arms.iter() {
            let v = dot(&theta_star, x);
            if v > best_value || (v == best_value && id < best_arm) {
                best_value = v;
                best_arm = id;
            }
        }
        Ok(Environment {
            theta_star,
            arms,
            noise_std,
            kind,
            seed,
            gap,
            rng: ChaCha8Rng::seed_from_u64(mix_seed(seed, 0xE77)),
            pulls: 0,
            best_arm,
            best_value,
        })
    }

    /// Generates a synthetic instance. `gap` is only meaningful for the
    /// planted kind (suboptimal arms are capped at `1 - gap`).
    pub fn make_instance(
        kind: InstanceKind,
        k: usize,
        d: usize,
        noise_std: f64,
        gap: f64,
        seed: u64,
    ) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("k", k as f64, "need at least two arms"));
        }
        if d < 1 {
            return Err(Error::invalid("d", d as f64, "need at least one dimension"));
        }
        if kind == InstanceKind::PlantedGap && !(0.0 < gap && gap < 1.0) {
            return Err(Error::invalid("gap", gap, "must lie in (0, 1)"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x1A57));
        let theta_star = unit_sphere(&mut rng, d);

        let rows: Vec<Vec<f64>> = match kind {
            InstanceKind::SphereUniform => (0..k).map(|_| unit_sphere(&mut rng, d)).collect(),
            InstanceKind::Clustered => {
                let centers: Vec<Vec<f64>> =
                    (0..8.min(k)).map(|_| unit_sphere(&mut rng, d)).collect();
                (0..k)
                    .map(|i| {
                        let c = &centers[i % centers.len()];
                        let mut v: Vec<f64> = c
                            .iter()
                            .map(|x| x + 0.15 * rng.sample::<f64, _>(StandardNormal))
                            .collect();
                        let n = norm2(&v).max(1e-9);
                        for x in &mut v {
                            *x /= n;
                        }
                        v
                    })
                    .collect()
            }
            InstanceKind::PlantedGap => {
                let mut rows = vec![theta_star.clone()];
                for _ in 1..k {
                    // rejection-sample below the cap; the cap region is tiny
                    let mut tries = 0;
                    let v = loop {
                        let v = unit_sphere(&mut rng, d);
                        if dot(&v, &theta_star) <= 1.0 - gap {
                            break v;
                        }
                        tries += 1;
                        if tries > 100_000 {
                            return Err(Error::Numerical(
                                "planted-gap rejection sampling stalled",
                            ));
                        }
                    };
                    rows.push(v);
                }
                rows
            }
        };
        let arms = Arc::new(PointSet::new(d, rows)?);
        Environment::new(theta_star, arms, noise_std, kind, gap, seed)
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn arms(&self) -> &Arc<PointSet> {
        &self.arms
    }

    pub fn noise_std(&self) -> f64 {
        self.noise_std
    }

    pub fn optimal_arm(&self) -> PointId {
        self.best_arm
    }

    pub fn optimal_value(&self) -> f64 {
        self.best_value
    }

    pub fn expected_reward(&self, arm: PointId) -> Result<f64> {
        let x = self.arms.point_by_id(arm).ok_or(Error::UnknownArm(arm))?;
        Ok(dot(&self.theta_star, x))
    }

    /// Gap to the best arm; nonnegative by definition of the optimum.
    pub fn instant_regret(&self, arm: PointId) -> Result<f64> {
        Ok(self.best_value - self.expected_reward(arm)?)
    }

    /// Plays an arm. The noise draw is indexed by the pull count, not the
    /// arm, so matched seeds give matched noise across selection rules.
    pub fn pull(&mut self, arm: PointId) -> Result<f64> {
        let mean = self.expected_reward(arm)?;
        self.pulls += 1;
        let noise: f64 = self.rng.sample(StandardNormal);
        Ok(mean + self.noise_std * noise)
    }

    /// Writes `<base>.points.csv` and `<base>.env.txt`.
    pub fn save(&self, base: &Path) -> Result<()> {
        self.arms.save_csv(&with_suffix(base, ".points.csv"))?;
        let theta: Vec<String> = self.theta_star.iter().map(|v| format!("{v}")).collect();
        let header = format!(
            "kind = {}\nk = {}\nd = {}\nseed = {}\nsigma = {}\ngap = {}\ntheta_star = {}\n",
            self.kind,
            self.arms.len(),
            self.arms.dim(),
            self.seed,
            self.noise_std,
            self.gap,
            theta.join(",")
        );
        std::fs::write(with_suffix(base, ".env.txt"), header)?;
        Ok(())
    }

    pub fn load(base: &Path) -> Result<Self> {
        let arms = Arc::new(PointSet::load_csv(&with_suffix(base, ".points.csv"))?);
        let text = std::fs::read_to_string(with_suffix(base, ".env.txt"))?;
        let mut kind = None;
        let mut seed = None;
        let mut sigma = None;
        let mut gap = 0.0;
        let mut theta_star = None;
        for line in text.lines() {
            let Some((key, value)) = line.split_once('=') else {
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            match key {
                "kind" => kind = Some(value.parse::<InstanceKind>()?),
                "seed" => {
                    seed = Some(value.parse::<u64>().map_err(|e| {
                        Error::Parse(format!("seed: {e}"))
                    })?)
                }
                "sigma" => {
                    sigma = Some(value.parse::<f64>().map_err(|e| {
                        Error::Parse(format!("sigma: {e}"))
                    })?)
                }
                "gap" => {
                    gap = value
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("gap: {e}")))?
                }
                "theta_star" => {
                    theta_star = Some(
                        value
                            .split(',')
                            .map(|f| {
                                f.trim()
                                    .parse::<f64>()
                                    .map_err(|e| Error::Parse(format!("theta_star: {e}")))
                            })
                            .collect::<Result<Vec<f64>>>()?,
                    )
                }
                _ => {}
            }
        }
        let kind = kind.ok_or_else(|| Error::Parse("missing kind".into()))?;
        let seed = seed.ok_or_else(|| Error::Parse("missing seed".into()))?;
        let sigma = sigma.ok_or_else(|| Error::Parse("missing sigma".into()))?;
        let theta_star = theta_star.ok_or_else(|| Error::Parse("missing theta_star".into()))?;
        Environment::new(theta_star, arms, sigma, kind, gap, seed)
    }
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    PathBuf::from(s)
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

/// Per-step record of one run.
#[derive(Debug, Clone)]
pub struct StepRecord {
    pub t: usize,
    pub arm: PointId,
    pub reward: f64,
    pub regret: f64,
    pub cum_regret: f64,
    pub probes: usize,
    /// Stage (UCB) or level (TS); 0 for baselines and fallbacks.
    pub stage_or_level: usize,
    pub select_micros: f64,
    pub fallback: bool,
    /// Approximation loss `J(theta_tilde) - <theta_tilde, x_arm>` when tracked.
    pub delta: Option<f64>,
}

/// Accumulated per-step records plus the running totals the harness reports.
#[derive(Debug, Clone, Default)]
pub struct RegretTrace {
    pub steps: Vec<StepRecord>,
    pub cum_regret: f64,
}

impl RegretTrace {
    pub fn push(
        &mut self,
        t: usize,
        arm: PointId,
        reward: f64,
        regret: f64,
        probes: usize,
        stage_or_level: usize,
        select_micros: f64,
        fallback: bool,
        delta: Option<f64>,
    ) -> Result<()> {
        if regret < -1e-9 {
            return Err(Error::Numerical("negative instantaneous regret"));
        }
        self.cum_regret += regret.max(0.0);
        self.steps.push(StepRecord {
            t,
            arm,
            reward,
            regret,
            cum_regret: self.cum_regret,
            probes,
            stage_or_level,
            select_micros,
            fallback,
            delta,
        });
        Ok(())
    }

    pub fn final_regret(&self) -> f64 {
        self.cum_regret
    }

    pub fn mean_probes(&self) -> f64 {
        if self.steps.is_empty() {
            return 0.0;
        }
        self.steps.iter().map(|s| s.probes as f64).sum::<f64>() / self.steps.len() as f64
    }

    pub fn fallback_count(&self) -> usize {
        self.steps.iter().filter(|s| s.fallback).count()
    }

    pub fn select_micros_percentiles(&self) -> (f64, f64) {
        if self.steps.is_empty() {
            return (0.0, 0.0);
        }
        let mut times: Vec<f64> = self.steps.iter().map(|s| s.select_micros).collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = times[times.len() / 2];
        let p99 = times[((times.len() as f64 * 0.99) as usize).min(times.len() - 1)];
        (median, p99)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_rewards_are_exact() {
        let arms = Arc::new(PointSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap());
        let mut env =
            Environment::new(vec![1.0, 0.0], arms, 0.0, InstanceKind::SphereUniform, 0.0, 1)
                .unwrap();
        assert_eq!(env.pull(0).unwrap(), 1.0);
        assert_eq!(env.pull(1).unwrap(), 0.0);
        assert_eq!(env.optimal_arm(), 0);
        assert_eq!(env.instant_regret(0).unwrap(), 0.0);
        assert!(env.pull(7).is_err());
    }

    #[test]
    fn noisy_rewards_average_to_the_mean() {
        let arms = Arc::new(PointSet::new(2, vec![vec![0.8, 0.0], vec![0.0, 1.0]]).unwrap());
        let mut env =
            Environment::new(vec![1.0, 0.0], arms, 0.5, InstanceKind::SphereUniform, 0.0, 3)
                .unwrap();
        let n = 10_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += env.pull(0).unwrap();
        }
        let mean = acc / n as f64;
        let tol = 4.0 * 0.5 / (n as f64).sqrt();
        assert!((mean - 0.8).abs() < tol, "mean {mean} off by more than {tol}");
    }

    #[test]
    fn planted_gap_construction() {
        let env =
            Environment::make_instance(InstanceKind::PlantedGap, 50, 6, 0.1, 0.3, 9).unwrap();
        let mut ones = 0;
        for (id, _) in env.arms().iter() {
            let v = env.expected_reward(id).unwrap();
            if (v - 1.0).abs() < 1e-12 {
                ones += 1;
            } else {
                assert!(v <= 0.7 + 1e-12);
            }
        }
        assert_eq!(ones, 1);
        assert_eq!(env.optimal_arm(), 0);
    }

    #[test]
    fn sphere_instances_have_unit_arms() {
        let env =
            Environment::make_instance(InstanceKind::SphereUniform, 40, 5, 0.1, 0.0, 4).unwrap();
        for (_, x) in env.arms().iter() {
            assert!((norm2(x) - 1.0).abs() < 1e-12);
        }
        assert!((norm2(env.theta_star()) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn clustered_instances_have_unit_arms() {
        let env =
            Environment::make_instance(InstanceKind::Clustered, 40, 5, 0.1, 0.0, 4).unwrap();
        for (_, x) in env.arms().iter() {
            assert!((norm2(x) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn same_seed_reproduces_instance_and_noise() {
        let mut a =
            Environment::make_instance(InstanceKind::SphereUniform, 20, 4, 0.3, 0.0, 77).unwrap();
        let mut b =
            Environment::make_instance(InstanceKind::SphereUniform, 20, 4, 0.3, 0.0, 77).unwrap();
        assert_eq!(a.theta_star(), b.theta_star());
        for (pa, pb) in a.arms().iter().zip(b.arms().iter()) {
            assert_eq!(pa.1, pb.1);
        }
        for t in 0..50 {
            // different arms, same noise stream position
            let ra = a.pull(t % 20).unwrap();
            let rb = b.pull(t % 20).unwrap();
            assert_eq!(ra, rb);
        }
    }

    #[test]
    fn noise_stream_independent_of_arm_choice() {
        let mut a =
            Environment::make_instance(InstanceKind::PlantedGap, 10, 4, 0.5, 0.3, 5).unwrap();
        let mut b =
            Environment::make_instance(InstanceKind::PlantedGap, 10, 4, 0.5, 0.3, 5).unwrap();
        for t in 0..100 {
            let arm_a = t % 10;
            let arm_b = (t * 3 + 1) % 10;
            let na = a.pull(arm_a).unwrap() - a.expected_reward(arm_a).unwrap();
            let nb = b.pull(arm_b).unwrap() - b.expected_reward(arm_b).unwrap();
            assert!((na - nb).abs() < 1e-12);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let dir = std::env::temp_dir().join("fastarm_env_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let base = dir.join("inst");
        let env =
            Environment::make_instance(InstanceKind::PlantedGap, 12, 3, 0.25, 0.4, 42).unwrap();
        env.save(&base).unwrap();
        let back = Environment::load(&base).unwrap();
        assert_eq!(back.theta_star(), env.theta_star());
        assert_eq!(back.noise_std(), env.noise_std());
        assert_eq!(back.arms().len(), env.arms().len());
        for (a, b) in env.arms().iter().zip(back.arms().iter()) {
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn trace_accumulates_and_rejects_negative_regret() {
        let mut trace = RegretTrace::default();
        trace.push(1, 0, 1.0, 0.5, 10, 1, 2.0, false, None).unwrap();
        trace.push(2, 1, 0.0, 0.25, 10, 1, 2.0, false, None).unwrap();
        assert!((trace.final_regret() - 0.75).abs() < 1e-12);
        assert!(trace.push(3, 0, 0.0, -0.5, 1, 1, 1.0, false, None).is_err());
    }
}
