//! Amplification of a constant-success oracle into an index that answers a
//! whole adaptive query sequence.
//!
//! Per-query guarantees break down when later queries depend on earlier
//! answers. The fix is twofold: queries are snapped to a lattice of pitch
//! `eps/d` (a finite query universe, at an `eps` inner-product cost), and
//! `kappa` independent oracle copies are queried until one answers, so the
//! union bound over the lattice and the point set goes through. Any non-null
//! answer is re-checked against the *unrounded* query before it is returned,
//! which makes soundness unconditional: the only failure mode is a null.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, norm2};
use crate::lsh::{LshIndex, LshStats};
use crate::mips::{ann_params, lift_points, MipsSpec, PointId, PointSet, QUERY_NORM_SLACK};
use crate::oracle::{BruteForceOracle, MipsOracle, OracleReply};
use crate::seeding::mix_seed;

/// Which oracle implementation backs the index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendKind {
    /// Exact scan; answers every query and collapses the amplification.
    Brute,
    /// Hyperplane hashing with constant per-query success probability.
    Lsh,
}

impl std::str::FromStr for BackendKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "brute" => Ok(BackendKind::Brute),
            "lsh" => Ok(BackendKind::Lsh),
            other => Err(Error::Parse(format!("unknown oracle backend `{other}`"))),
        }
    }
}

impl std::fmt::Display for BackendKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BackendKind::Brute => write!(f, "brute"),
            BackendKind::Lsh => write!(f, "lsh"),
        }
    }
}

/// Number of independent oracle copies:
/// `kappa = ceil(d ln(K d q_bar / (eps delta)) / ln(1/oracle_fail))`.
pub fn amplification_count(
    dim: usize,
    n_points: usize,
    spec: &MipsSpec,
    oracle_fail: f64,
) -> Result<usize> {
    if spec.eps <= 0.0 {
        return Err(Error::invalid(
            "eps",
            spec.eps,
            "must be positive (the query lattice is undefined at 0)",
        ));
    }
    if oracle_fail <= 0.0 || oracle_fail >= 1.0 {
        return Err(Error::invalid(
            "oracle_fail",
            oracle_fail,
            "must lie in (0, 1)",
        ));
    }
    let d = dim as f64;
    let inside = n_points as f64 * d * spec.q_bar / (spec.eps * spec.delta);
    let kappa = (d * inside.ln() / (1.0 / oracle_fail).ln()).ceil();
    Ok((kappa.max(1.0)) as usize)
}

/// Rounds every coordinate to the nearest multiple of `step`, ties toward
/// positive infinity.
pub fn round_to_lattice(q: &[f64], step: f64) -> Vec<f64> {
    debug_assert!(step > 0.0);
    q.iter().map(|v| ((v / step) + 0.5).floor() * step).collect()
}

/// Reply of one amplified query.
#[derive(Debug, Clone, Copy, Default)]
pub struct AdaptiveReply {
    /// Returned point and its inner product with the original query.
    pub answer: Option<(PointId, f64)>,
    /// Candidates examined across all oracles tried.
    pub probes: usize,
    /// Oracles queried before the first accepted answer (all of them on null).
    pub oracles_tried: usize,
}

enum OracleSet {
    /// One instance stands in for all copies: a deterministic oracle makes
    /// the independent copies identical.
    Brute(BruteForceOracle),
    /// `kappa` independently seeded hash indexes.
    Lsh(Vec<LshIndex>),
    /// Vacuous contract (`r + eps > q_bar`): null is always correct.
    Vacuous,
}

/// A `(c, r, eps, q_bar)` index valid for adaptive query sequences.
pub struct AdaptiveMipsIndex {
    points: Arc<PointSet>,
    spec: MipsSpec,
    backend: BackendKind,
    kappa: usize,
    lattice_step: f64,
    oracle_fail: f64,
    oracles: OracleSet,
}

impl AdaptiveMipsIndex {
    pub fn build(
        points: Arc<PointSet>,
        spec: MipsSpec,
        backend: BackendKind,
        oracle_fail: f64,
        seed: u64,
    ) -> Result<Self> {
        let kappa = amplification_count(points.dim(), points.len(), &spec, oracle_fail)?;
        let lattice_step = spec.eps / points.dim() as f64;

        let oracles = match backend {
            BackendKind::Brute => OracleSet::Brute(BruteForceOracle::new(points.clone(), spec.r)),
            BackendKind::Lsh if spec.is_vacuous() => OracleSet::Vacuous,
            BackendKind::Lsh => {
                let ann = ann_params(&spec)?;
                let lifted = Arc::new(lift_points(&points)?);
                let built: Result<Vec<LshIndex>> = (0..kappa)
                    .into_par_iter()
                    .map(|i| {
                        LshIndex::build(
                            lifted.clone(),
                            ann,
                            spec.q_bar,
                            oracle_fail,
                            mix_seed(seed, i as u64),
                        )
                    })
                    .collect();
                OracleSet::Lsh(built?)
            }
        };

        Ok(AdaptiveMipsIndex {
            points,
            spec,
            backend,
            kappa,
            lattice_step,
            oracle_fail,
            oracles,
        })
    }

    pub fn spec(&self) -> &MipsSpec {
        &self.spec
    }

    pub fn backend(&self) -> BackendKind {
        self.backend
    }

    pub fn kappa(&self) -> usize {
        self.kappa
    }

    pub fn lattice_step(&self) -> f64 {
        self.lattice_step
    }

    pub fn oracle_fail(&self) -> f64 {
        self.oracle_fail
    }

    pub fn points(&self) -> &Arc<PointSet> {
        &self.points
    }

    pub fn is_vacuous(&self) -> bool {
        self.spec.is_vacuous()
    }

    /// Answers one query of an adaptive sequence.
    ///
    /// The query is snapped to the lattice (and projected back onto the
    /// `q_bar` ball if rounding left it: projection is 1-Lipschitz, so the
    /// effective query stays within the lattice budget of the original).
    /// Oracles are tried in order; the first candidate whose inner product
    /// with the *original* query clears `c*r - eps` is returned.
    pub fn query(&self, q: &[f64]) -> Result<AdaptiveReply> {
        if q.len() != self.points.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.points.dim(),
                got: q.len(),
            });
        }
        if !all_finite(q) {
            return Err(Error::NonFinite {
                context: "adaptive query",
            });
        }
        let norm = norm2(q);
        if norm > self.spec.q_bar * (1.0 + QUERY_NORM_SLACK) {
            return Err(Error::QueryNormTooLarge {
                norm,
                bound: self.spec.q_bar,
            });
        }

        let mut rounded = round_to_lattice(q, self.lattice_step);
        let rn = norm2(&rounded);
        if rn > self.spec.q_bar {
            let scale = self.spec.q_bar / rn;
            for v in &mut rounded {
                *v *= scale;
            }
        }

        let mut probes = 0;
        let mut tried = 0;
        match &self.oracles {
            OracleSet::Vacuous => {}
            OracleSet::Brute(oracle) => {
                tried = 1;
                let reply = oracle.query(&rounded)?;
                probes += reply.probes;
                if let Some(accepted) = self.accept(q, reply)? {
                    return Ok(AdaptiveReply {
                        answer: Some(accepted),
                        probes,
                        oracles_tried: tried,
                    });
                }
            }
            OracleSet::Lsh(indexes) => {
                for idx in indexes {
                    tried += 1;
                    let reply = idx.query(&rounded)?;
                    probes += reply.probes;
                    if let Some(accepted) = self.accept(q, reply)? {
                        return Ok(AdaptiveReply {
                            answer: Some(accepted),
                            probes,
                            oracles_tried: tried,
                        });
                    }
                }
            }
        }
        Ok(AdaptiveReply {
            answer: None,
            probes,
            oracles_tried: tried,
        })
    }

    /// Sanity check against the original query: accept only answers with
    /// `<q, p> >= c*r - eps`.
    fn accept(&self, q: &[f64], reply: OracleReply) -> Result<Option<(PointId, f64)>> {
        if let Some((id, _)) = reply.answer {
            let point = self.points.point_by_id(id).ok_or(Error::UnknownArm(id))?;
            let value = dot(q, point);
            if value >= self.spec.sanity_threshold() {
                return Ok(Some((id, value)));
            }
        }
        Ok(None)
    }

    /// Index statistics for reporting: `kappa`, backend, and per-oracle table
    /// shape with the bucket occupancy histogram aggregated over all copies.
    pub fn stats(&self) -> AdaptiveStats {
        let lsh = match &self.oracles {
            OracleSet::Lsh(indexes) => {
                let mut merged: Option<LshStats> = None;
                for idx in indexes {
                    let s = idx.stats();
                    merged = Some(match merged {
                        None => s,
                        Some(mut acc) => {
                            let mut hist: std::collections::BTreeMap<usize, usize> =
                                acc.bucket_histogram.iter().copied().collect();
                            for (size, count) in s.bucket_histogram {
                                *hist.entry(size).or_insert(0) += count;
                            }
                            acc.bucket_histogram = hist.into_iter().collect();
                            acc
                        }
                    });
                }
                merged
            }
            _ => None,
        };
        AdaptiveStats {
            kappa: self.kappa,
            backend: self.backend,
            vacuous: self.spec.is_vacuous(),
            oracle_fail: self.oracle_fail,
            lattice_step: self.lattice_step,
            lsh,
        }
    }
}

/// Summary of one adaptive index.
#[derive(Debug, Clone)]
pub struct AdaptiveStats {
    pub kappa: usize,
    pub backend: BackendKind,
    pub vacuous: bool,
    pub oracle_fail: f64,
    pub lattice_step: f64,
    pub lsh: Option<LshStats>,
}
