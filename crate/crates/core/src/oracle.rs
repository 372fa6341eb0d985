//! The single-query oracle interface the amplification layer builds on.
//!
//! An oracle solves the zero-additive-slack contract `(c, r, 0, q_bar)` on
//! the query it is handed (already lattice-rounded by the caller): whenever
//! some point reaches inner product `r`, it must answer, and any answer it
//! gives is certified by construction. A null is therefore the only failure
//! mode, which is what makes independent copies composable.

use std::sync::Arc;

use crate::error::Result;
use crate::linalg::dot;
use crate::mips::{PointId, PointSet};

#[derive(Debug, Clone, Copy, Default)]
pub struct OracleReply {
    /// Returned point and its inner product with the oracle's query.
    pub answer: Option<(PointId, f64)>,
    /// Candidate points examined to produce the reply.
    pub probes: usize,
}

pub trait MipsOracle: Send + Sync {
    fn query(&self, q: &[f64]) -> Result<OracleReply>;
}

/// Exact-scan oracle. Deterministic, so independent copies coincide and the
/// amplification layer stores a single instance.
///
/// Returns the argmax whenever its value reaches `r` (a qualifying point
/// forces this even after lattice rounding), null otherwise.
pub struct BruteForceOracle {
    points: Arc<PointSet>,
    return_threshold: f64,
}

impl BruteForceOracle {
    pub fn new(points: Arc<PointSet>, return_threshold: f64) -> Self {
        BruteForceOracle {
            points,
            return_threshold,
        }
    }
}

impl MipsOracle for BruteForceOracle {
    fn query(&self, q: &[f64]) -> Result<OracleReply> {
        let (id, value) = crate::mips::brute_force_mips(&self.points, q)?;
        let answer = (value >= self.return_threshold).then_some((id, value));
        Ok(OracleReply {
            answer,
            probes: self.points.len(),
        })
    }
}

/// Oracle for vacuous contracts (`r + eps > q_bar`): no query can have a
/// qualifying point, so an unconditional null is always correct.
pub struct NullOracle;

impl MipsOracle for NullOracle {
    fn query(&self, _q: &[f64]) -> Result<OracleReply> {
        Ok(OracleReply::default())
    }
}

/// Shared helper for exact-scan argmax over raw points (ties toward the
/// smallest id), used by the baselines and fallbacks.
pub fn exact_argmax(points: &PointSet, q: &[f64]) -> (PointId, f64) {
    let mut best_id = usize::MAX;
    let mut best_v = f64::NEG_INFINITY;
    for (id, p) in points.iter() {
        let v = dot(p, q);
        if v > best_v || (v == best_v && id < best_id) {
            best_v = v;
            best_id = id;
        }
    }
    (best_id, best_v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mips::PointSet;

    #[test]
    fn brute_oracle_thresholds() {
        let ps = Arc::new(
            PointSet::new(2, vec![vec![1.0, 0.0], vec![0.0, 0.4]]).unwrap(),
        );
        let oracle = BruteForceOracle::new(ps.clone(), 0.5);
        let hit = oracle.query(&[1.0, 0.0]).unwrap();
        assert_eq!(hit.answer, Some((0, 1.0)));
        assert_eq!(hit.probes, 2);

        let miss = oracle.query(&[0.0, 1.0]).unwrap();
        assert_eq!(miss.answer, None);
        assert_eq!(miss.probes, 2);
    }

    #[test]
    fn null_oracle_never_answers() {
        let reply = NullOracle.query(&[1.0, 2.0]).unwrap();
        assert!(reply.answer.is_none());
        assert_eq!(reply.probes, 0);
    }
}
