//! Sublinear-time arm selection for stochastic linear bandits.
//!
//! Arm selection in linear bandits is an inner-product argmax over the arm
//! set, which lets an approximate maximum-inner-product index replace the
//! per-step linear scan. This crate provides the full stack:
//!
//! - [`ridge`]: the regularized least-squares state both algorithms share;
//! - [`mips`]: the relaxed search contract and its reduction to near-neighbor
//!   search over lifted unit vectors;
//! - [`lsh`]: a hyperplane-hashing oracle with constant per-query success;
//! - [`adaptive`]: lattice rounding plus independent oracle copies, turning a
//!   constant-success oracle into one that survives a full adaptive query
//!   sequence;
//! - [`oful`]: staged, elimination-based accelerated UCB selection, plus the
//!   exact-scan baseline;
//! - [`lints`]: accelerated Thompson sampling over leveled indexes, plus the
//!   exact-scan baseline;
//! - [`env`]: a synthetic linear-reward environment and regret bookkeeping.

pub mod adaptive;
pub mod env;
pub mod error;
pub mod linalg;
pub mod lints;
pub mod lsh;
pub mod mips;
pub mod oful;
pub mod oracle;
pub mod ridge;
pub mod seeding;

pub use adaptive::{amplification_count, round_to_lattice, AdaptiveMipsIndex, AdaptiveReply, BackendKind};
pub use env::{Environment, InstanceKind, RegretTrace, StepRecord};
pub use error::{Error, Result};
pub use lints::{LinTsBaseline, LinTsParams, LinTsState, LinTsStep, TsSampler};
pub use lsh::{collision_probability, table_params, LshIndex, LshStats};
pub use mips::{
    ann_params, brute_force_mips, lift_point, lift_points, lift_query, AnnSpec, MipsSpec, PointId,
    PointSet, SharedPoints,
};
pub use oful::{OfulBaseline, OfulParams, OfulState, OfulStep};
pub use oracle::{BruteForceOracle, MipsOracle, NullOracle, OracleReply};
pub use ridge::{confidence_radius, RidgeState};
pub use seeding::mix_seed;
