//! CSV and index-report emission.
//!
//! Step files carry exactly one row per decision. Everything except the
//! wall-clock column is a deterministic function of config and seed.

use std::path::Path;

use fastarm_core::adaptive::AdaptiveStats;
use fastarm_core::{RegretTrace, Result};

use crate::config::RunConfig;
use crate::runner::{RunOutput, RunSummary};

pub const STEPS_HEADER: &str =
    "t,arm,regret,cum_regret,probes,stage_or_level,select_micros,fallback";

pub const SUMMARY_HEADER: &str = "algo,K,d,T,eta,delta,oracle,seed,final_regret,bound,\
bound_ratio,mean_probes,probe_ratio,rebuilds,fallbacks,norm_violations,max_stage_or_level,\
max_delta,potential,potential_bound,select_us_median,select_us_p99";

pub fn steps_csv(trace: &RegretTrace) -> String {
    let mut out = String::with_capacity(trace.steps.len() * 48 + STEPS_HEADER.len() + 1);
    out.push_str(STEPS_HEADER);
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{:.1},{}\n",
            s.t,
            s.arm,
            s.regret,
            s.cum_regret,
            s.probes,
            s.stage_or_level,
            s.select_micros,
            u8::from(s.fallback),
        ));
    }
    out
}

pub fn summary_csv_row(s: &RunSummary) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.1},{:.1}",
        s.algo,
        s.k,
        s.d,
        s.horizon,
        s.eta,
        s.delta,
        s.oracle,
        s.seed,
        s.final_regret,
        s.bound,
        s.bound_ratio,
        s.mean_probes,
        s.probe_ratio,
        s.rebuilds,
        s.fallbacks,
        s.norm_violations,
        s.max_stage_or_level,
        s.max_delta.map_or(String::new(), |d| format!("{d}")),
        s.potential,
        s.potential_bound,
        s.select_us_median,
        s.select_us_p99,
    )
}

pub fn index_report_text(stats: &AdaptiveStats) -> String {
    let mut out = String::new();
    out.push_str(&format!("backend = {}\n", stats.backend));
    out.push_str(&format!("kappa = {}\n", stats.kappa));
    out.push_str(&format!("oracle_fail = {}\n", stats.oracle_fail));
    out.push_str(&format!("lattice_step = {}\n", stats.lattice_step));
    out.push_str(&format!("vacuous = {}\n", stats.vacuous));
    if let Some(lsh) = &stats.lsh {
        out.push_str(&format!("hashes_per_table = {}\n", lsh.hashes_per_table));
        out.push_str(&format!("tables_per_oracle = {}\n", lsh.tables));
        out.push_str(&format!("points = {}\n", lsh.points));
        out.push_str(&format!("c_prime = {}\n", lsh.c_prime));
        out.push_str(&format!("r_prime = {}\n", lsh.r_prime));
        out.push_str("bucket_histogram (size count):\n");
        for (size, count) in &lsh.bucket_histogram {
            out.push_str(&format!("  {size} {count}\n"));
        }
    }
    out
}

/// Writes `<base>.rep<N>.steps.csv` per repetition, `<base>.summary.csv`
/// with one row per repetition, and `<base>.index.txt` when an index report
/// exists.
pub fn write_outputs(cfg: &RunConfig, base: &Path, outputs: &[RunOutput]) -> Result<()> {
    if let Some(dir) = base.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for (rep, output) in outputs.iter().enumerate() {
        std::fs::write(
            with_suffix(base, &format!(".rep{rep}.steps.csv")),
            steps_csv(&output.trace),
        )?;
        summary.push_str(&summary_csv_row(&output.summary));
        summary.push('\n');
    }
    std::fs::write(with_suffix(base, ".summary.csv"), summary)?;
    if let Some(report) = outputs.iter().find_map(|o| o.index_report.as_ref()) {
        let mut text = String::new();
        for (key, value) in cfg.descriptor() {
            text.push_str(&format!("{key} = {value}\n"));
        }
        text.push('\n');
        text.push_str(report);
        std::fs::write(with_suffix(base, ".index.txt"), text)?;
    }
    Ok(())
}

fn with_suffix(base: &Path, suffix: &str) -> std::path::PathBuf {
    let mut s = base.as_os_str().to_os_string();
    s.push(suffix);
    std::path::PathBuf::from(s)
}
