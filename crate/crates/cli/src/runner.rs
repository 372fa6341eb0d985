//! The experiment loop: one environment, one selection rule, matched seeds,
//! per-step records, and post-run invariant checks.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use fastarm_core::linalg::dot;
use fastarm_core::oracle::exact_argmax;
use fastarm_core::{
    mix_seed, BackendKind, Environment, Error, LinTsBaseline, LinTsParams, LinTsState,
    OfulBaseline, OfulParams, OfulState, RegretTrace, Result,
};

use crate::bounds::regret_bound;
use crate::config::{Algo, RunConfig};
use crate::report;

/// Stream tags separating environment randomness from algorithm randomness;
/// paired algorithm variants under one seed then share the noise stream.
const ENV_STREAM: u64 = 0x0E27;
const ALG_STREAM: u64 = 0xA16;

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub algo: Algo,
    pub k: usize,
    pub d: usize,
    pub horizon: usize,
    pub eta: f64,
    pub delta: f64,
    pub oracle: BackendKind,
    pub seed: u64,
    pub final_regret: f64,
    pub bound: f64,
    pub bound_ratio: f64,
    pub mean_probes: f64,
    /// `mean_probes / K`, the scan-fraction complexity proxy.
    pub probe_ratio: f64,
    pub rebuilds: usize,
    pub fallbacks: usize,
    pub norm_violations: usize,
    pub max_stage_or_level: usize,
    pub max_delta: Option<f64>,
    pub potential: f64,
    pub potential_bound: f64,
    pub select_us_median: f64,
    pub select_us_p99: f64,
}

pub struct RunOutput {
    pub trace: RegretTrace,
    pub summary: RunSummary,
    pub index_report: Option<String>,
}

fn load_environment(cfg: &RunConfig, seed: u64) -> Result<Environment> {
    match &cfg.instance_file {
        Some(base) => Environment::load(base),
        None => Environment::make_instance(
            cfg.instance,
            cfg.k,
            cfg.d,
            cfg.noise_std,
            cfg.gap,
            seed,
        ),
    }
}

/// Executes one repetition with the config's seed as-is.
pub fn run_experiment(cfg: &RunConfig) -> Result<RunOutput> {
    run_with_seed(cfg, cfg.seed)
}

/// Executes repetition `rep` under a derived seed (rep 0 keeps the original).
pub fn run_rep(cfg: &RunConfig, rep: usize) -> Result<RunOutput> {
    let seed = if rep == 0 {
        cfg.seed
    } else {
        mix_seed(cfg.seed, 0x5EED_0000 + rep as u64)
    };
    run_with_seed(cfg, seed)
}

/// All repetitions, in parallel, results in repetition order.
pub fn run_many(cfg: &RunConfig) -> Result<Vec<RunOutput>> {
    (0..cfg.reps)
        .into_par_iter()
        .map(|rep| run_rep(cfg, rep))
        .collect()
}

fn run_with_seed(cfg: &RunConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let mut env = load_environment(cfg, mix_seed(seed, ENV_STREAM))?;
    let arms = env.arms().clone();
    let k = arms.len();
    let d = arms.dim();
    let alg_seed = mix_seed(seed, ALG_STREAM);

    let mut trace = RegretTrace::default();
    let mut rebuilds = 0usize;
    let mut fallbacks = 0usize;
    let mut norm_violations = 0usize;
    let mut max_stage_or_level = 0usize;
    let mut max_delta: Option<f64> = None;
    let mut index_report = None;
    let potential;
    let potential_bound;

    match cfg.algo {
        Algo::Oful => {
            let params = OfulParams {
                horizon: cfg.horizon,
                delta: cfg.delta,
                eta: cfg.eta,
            };
            let mut state =
                OfulState::new(arms.clone(), params, cfg.oracle, cfg.oracle_fail, alg_seed)?;
            for t in 1..=cfg.horizon {
                let start = Instant::now();
                let step = state.select()?;
                let micros = start.elapsed().as_secs_f64() * 1e6;
                let regret = env.instant_regret(step.arm)?;
                let reward = env.pull(step.arm)?;
                state.update(step.arm, reward)?;
                max_stage_or_level = max_stage_or_level.max(step.stage);
                trace.push(
                    t,
                    step.arm,
                    reward,
                    regret,
                    step.probes,
                    step.stage,
                    micros,
                    step.random_arm,
                    None,
                )?;
            }
            if state.stage() > state.max_stage() {
                return Err(Error::Numerical("stage exceeded its ceiling"));
            }
            rebuilds = state.rebuilds();
            if rebuilds > state.max_stage() {
                return Err(Error::Numerical("rebuild count exceeded the stage ceiling"));
            }
            index_report = Some(report::index_report_text(&state.index().stats()));
            potential = state.ridge().elliptical_potential();
            potential_bound = state.ridge().elliptical_potential_bound();
        }
        Algo::OfulExact => {
            // eta is irrelevant to the exact scan; only horizon/delta matter
            let params = OfulParams {
                horizon: cfg.horizon,
                delta: cfg.delta,
                eta: cfg.eta,
            };
            let mut state = OfulBaseline::new(arms.clone(), params)?;
            for t in 1..=cfg.horizon {
                let start = Instant::now();
                let (arm, probes) = state.select()?;
                let micros = start.elapsed().as_secs_f64() * 1e6;
                let regret = env.instant_regret(arm)?;
                let reward = env.pull(arm)?;
                state.update(arm, reward)?;
                trace.push(t, arm, reward, regret, probes, 0, micros, false, None)?;
            }
            potential = state.ridge().elliptical_potential();
            potential_bound = state.ridge().elliptical_potential_bound();
        }
        Algo::Lints => {
            let params = LinTsParams {
                horizon: cfg.horizon,
                delta: cfg.delta,
                eta: cfg.eta,
            };
            let mut state =
                LinTsState::new(arms.clone(), params, cfg.oracle, cfg.oracle_fail, alg_seed)?;
            for t in 1..=cfg.horizon {
                let start = Instant::now();
                let step = state.select()?;
                let micros = start.elapsed().as_secs_f64() * 1e6;
                let delta_t = if cfg.track_delta {
                    let (_, best) = exact_argmax(&arms, &step.theta_tilde);
                    let chosen = dot(
                        &step.theta_tilde,
                        arms.point_by_id(step.arm).ok_or(Error::UnknownArm(step.arm))?,
                    );
                    Some(best - chosen)
                } else {
                    None
                };
                if let Some(dt) = delta_t {
                    max_delta = Some(max_delta.map_or(dt, |m: f64| m.max(dt)));
                }
                let regret = env.instant_regret(step.arm)?;
                let reward = env.pull(step.arm)?;
                state.update(step.arm, reward)?;
                max_stage_or_level = max_stage_or_level.max(step.level);
                trace.push(
                    t,
                    step.arm,
                    reward,
                    regret,
                    step.probes,
                    step.level,
                    micros,
                    step.fallback,
                    delta_t,
                )?;
            }
            fallbacks = state.fallbacks();
            norm_violations = state.norm_violations();
            let level_stats = state.level_stats();
            if !level_stats.is_empty() {
                let mut text = String::new();
                for (m, stats) in level_stats.iter().enumerate() {
                    text.push_str(&format!("level {}\n", m + 1));
                    text.push_str(&report::index_report_text(stats));
                    text.push('\n');
                }
                index_report = Some(text);
            }
            potential = state.ridge().elliptical_potential();
            potential_bound = state.ridge().elliptical_potential_bound();
        }
        Algo::LintsExact => {
            let params = LinTsParams {
                horizon: cfg.horizon,
                delta: cfg.delta,
                eta: cfg.eta,
            };
            let mut state = LinTsBaseline::new(arms.clone(), params, alg_seed)?;
            for t in 1..=cfg.horizon {
                let start = Instant::now();
                let (arm, probes, _theta) = state.select()?;
                let micros = start.elapsed().as_secs_f64() * 1e6;
                let regret = env.instant_regret(arm)?;
                let reward = env.pull(arm)?;
                state.update(arm, reward)?;
                trace.push(t, arm, reward, regret, probes, 0, micros, false, None)?;
            }
            potential = state.ridge().elliptical_potential();
            potential_bound = state.ridge().elliptical_potential_bound();
        }
    }

    // Cumulative uncertainty ceiling, checked on every simulated run.
    if potential > potential_bound + 1e-8 {
        return Err(Error::Numerical("elliptical potential bound violated"));
    }

    let bound = regret_bound(cfg.algo, d, cfg.horizon, cfg.eta, cfg.delta);
    let mean_probes = trace.mean_probes();
    let (median, p99) = trace.select_micros_percentiles();
    let summary = RunSummary {
        algo: cfg.algo,
        k,
        d,
        horizon: cfg.horizon,
        eta: if cfg.algo.is_exact() { 0.0 } else { cfg.eta },
        delta: cfg.delta,
        oracle: cfg.oracle,
        seed,
        final_regret: trace.final_regret(),
        bound,
        bound_ratio: trace.final_regret() / bound,
        mean_probes,
        probe_ratio: mean_probes / k as f64,
        rebuilds,
        fallbacks,
        norm_violations,
        max_stage_or_level,
        max_delta,
        potential,
        potential_bound,
        select_us_median: median,
        select_us_p99: p99,
    };
    Ok(RunOutput {
        trace,
        summary,
        index_report,
    })
}

/// Runs all repetitions and writes per-rep step files plus one summary file.
pub fn run_and_write(cfg: &RunConfig, out: &Path) -> Result<Vec<RunOutput>> {
    let outputs = run_many(cfg)?;
    report::write_outputs(cfg, out, &outputs)?;
    Ok(outputs)
}
