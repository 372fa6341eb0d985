//! The relaxed inner-product search contract and its reduction to near
//! neighbor search over lifted unit vectors.
//!
//! A `(c, r, eps, q_bar)` search over a point set with unit-ball points must,
//! whenever some point reaches inner product `r + eps` with the query, return
//! a point reaching at least `c*r - eps`. Appending one coordinate to the
//! points and one to the (scaled) query places both on the unit sphere, where
//! squared distance and inner product are interchangeable:
//! `||p' - q'||^2 = 2 - 2<p, q>/q_bar`. That identity carries the whole
//! reduction; it is checked to 1e-10 in the tests and the acceptance suite.

use std::path::Path;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, norm2};

pub type PointId = usize;

/// Slack allowed on stored point norms before rejection.
pub const POINT_NORM_TOLERANCE: f64 = 1e-12;

/// Relative slack allowed on query norms. Lattice rounding near the ball
/// boundary can push a query infinitesimally outside it.
pub const QUERY_NORM_SLACK: f64 = 1e-9;

/// Parameters of the relaxed inner-product search contract.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MipsSpec {
    /// Multiplicative relaxation, in (0, 1].
    pub c: f64,
    /// Target inner-product level.
    pub r: f64,
    /// Additive relaxation, >= 0.
    pub eps: f64,
    /// Upper bound on query norms.
    pub q_bar: f64,
    /// Target failure probability for a full query sequence.
    pub delta: f64,
}

impl MipsSpec {
    pub fn new(c: f64, r: f64, eps: f64, q_bar: f64, delta: f64) -> Result<Self> {
        for (name, v) in [("c", c), ("r", r), ("eps", eps), ("q_bar", q_bar), ("delta", delta)] {
            if !v.is_finite() {
                return Err(Error::invalid(name, v, "must be finite"));
            }
        }
        if c <= 0.0 || c > 1.0 {
            return Err(Error::invalid("c", c, "must lie in (0, 1]"));
        }
        if eps < 0.0 {
            return Err(Error::invalid("eps", eps, "must be nonnegative"));
        }
        if q_bar <= 0.0 {
            return Err(Error::invalid("q_bar", q_bar, "must be positive"));
        }
        if delta <= 0.0 || delta >= 1.0 {
            return Err(Error::invalid("delta", delta, "must lie in (0, 1)"));
        }
        Ok(MipsSpec { c, r, eps, q_bar, delta })
    }

    /// True when no query can ever have a qualifying point (`r + eps > q_bar`),
    /// so a null answer is always correct. Flagged, not rejected.
    pub fn is_vacuous(&self) -> bool {
        self.r + self.eps > self.q_bar
    }

    /// Minimum inner product a returned point must certify: `c*r - eps`.
    pub fn sanity_threshold(&self) -> f64 {
        self.c * self.r - self.eps
    }

    /// Inner product at which some point forces a non-null answer: `r + eps`.
    pub fn qualifying_threshold(&self) -> f64 {
        self.r + self.eps
    }
}

/// Near-neighbor parameters produced by the reduction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnSpec {
    /// Distance approximation factor, > 1 whenever `c < 1` and `r < q_bar`.
    pub c_prime: f64,
    /// Near-neighbor radius in the lifted space.
    pub r_prime: f64,
    /// Reported query exponent `(2 c'^2 - 1) / c'^4` (informational).
    pub rho_q: f64,
}

/// Maps a search contract to the equivalent near-neighbor parameters:
/// `c' = sqrt((q_bar - c r) / (q_bar - r))`, `r' = sqrt(2 - 2 r / q_bar)`.
pub fn ann_params(spec: &MipsSpec) -> Result<AnnSpec> {
    if spec.r >= spec.q_bar {
        return Err(Error::invalid("r", spec.r, "must be < q_bar for the reduction"));
    }
    if spec.c * spec.r >= spec.q_bar {
        return Err(Error::invalid("c*r", spec.c * spec.r, "must be < q_bar"));
    }
    if spec.r < -spec.q_bar {
        return Err(Error::invalid("r", spec.r, "must be >= -q_bar"));
    }
    let c_prime = ((spec.q_bar - spec.c * spec.r) / (spec.q_bar - spec.r)).sqrt();
    let r_prime = (2.0 - 2.0 * spec.r / spec.q_bar).sqrt();
    let c2 = c_prime * c_prime;
    let rho_q = (2.0 * c2 - 1.0) / (c2 * c2);
    Ok(AnnSpec { c_prime, r_prime, rho_q })
}

/// An immutable set of points inside the unit ball, with stable ids.
#[derive(Debug, Clone)]
pub struct PointSet {
    dim: usize,
    ids: Vec<PointId>,
    /// Row-major storage, `ids.len() * dim`.
    data: Vec<f64>,
    /// (id, row) pairs sorted by id, for answer-to-point lookups.
    id_index: Vec<(PointId, u32)>,
}

impl PointSet {
    /// Builds a point set with identity ids `0..rows.len()`.
    pub fn new(dim: usize, rows: Vec<Vec<f64>>) -> Result<Self> {
        let ids = (0..rows.len()).collect();
        Self::with_ids(dim, ids, rows)
    }

    pub fn with_ids(dim: usize, ids: Vec<PointId>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        if ids.len() != rows.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: ids.len(),
            });
        }
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            if !all_finite(row) {
                return Err(Error::NonFinite { context: "point coordinates" });
            }
            let norm = norm2(row);
            if norm > 1.0 + POINT_NORM_TOLERANCE {
                return Err(Error::PointNormTooLarge { norm });
            }
            data.extend_from_slice(row);
        }
        let mut id_index: Vec<(PointId, u32)> =
            ids.iter().enumerate().map(|(row, &id)| (id, row as u32)).collect();
        id_index.sort_unstable();
        for w in id_index.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::DuplicateId(w[0].0));
            }
        }
        Ok(PointSet { dim, ids, data, id_index })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ids(&self) -> &[PointId] {
        &self.ids
    }

    #[inline]
    pub fn id_at(&self, row: usize) -> PointId {
        self.ids[row]
    }

    #[inline]
    pub fn point_at(&self, row: usize) -> &[f64] {
        &self.data[row * self.dim..(row + 1) * self.dim]
    }

    pub fn row_of_id(&self, id: PointId) -> Option<usize> {
        self.id_index
            .binary_search_by_key(&id, |&(pid, _)| pid)
            .ok()
            .map(|pos| self.id_index[pos].1 as usize)
    }

    pub fn point_by_id(&self, id: PointId) -> Option<&[f64]> {
        self.row_of_id(id).map(|row| self.point_at(row))
    }

    pub fn iter(&self) -> impl Iterator<Item = (PointId, &[f64])> {
        self.ids
            .iter()
            .enumerate()
            .map(move |(row, &id)| (id, self.point_at(row)))
    }

    /// Subset keeping the given ids (and their original id values).
    pub fn subset(&self, keep: &[PointId]) -> Result<PointSet> {
        let mut ids = Vec::with_capacity(keep.len());
        let mut rows = Vec::with_capacity(keep.len());
        for &id in keep {
            let row = self.row_of_id(id).ok_or(Error::UnknownArm(id))?;
            ids.push(id);
            rows.push(self.point_at(row).to_vec());
        }
        PointSet::with_ids(self.dim, ids, rows)
    }

    /// One row per point, `dim` comma-separated decimal reals.
    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for (_, p) in self.iter() {
            let row: Vec<String> = p.iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 1)))
                })
                .collect::<Result<_>>()?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::EmptyPointSet);
        }
        let dim = rows[0].len();
        PointSet::new(dim, rows)
    }
}

/// Lifts a unit-ball point to the unit sphere: `[p; sqrt(1 - ||p||^2); 0]`.
pub fn lift_point(p: &[f64]) -> Result<Vec<f64>> {
    if !all_finite(p) {
        return Err(Error::NonFinite { context: "lift_point input" });
    }
    let sq = dot(p, p);
    if sq > (1.0 + POINT_NORM_TOLERANCE) * (1.0 + POINT_NORM_TOLERANCE) {
        return Err(Error::PointNormTooLarge { norm: sq.sqrt() });
    }
    let mut out = Vec::with_capacity(p.len() + 2);
    out.extend_from_slice(p);
    out.push((1.0 - sq).max(0.0).sqrt());
    out.push(0.0);
    Ok(out)
}

/// Lifts a bounded query to the unit sphere: `[q/q_bar; 0; sqrt(1 - ||q/q_bar||^2)]`.
pub fn lift_query(q: &[f64], q_bar: f64) -> Result<Vec<f64>> {
    if !all_finite(q) {
        return Err(Error::NonFinite { context: "lift_query input" });
    }
    if q_bar <= 0.0 {
        return Err(Error::invalid("q_bar", q_bar, "must be positive"));
    }
    let norm = norm2(q);
    if norm > q_bar * (1.0 + QUERY_NORM_SLACK) {
        return Err(Error::QueryNormTooLarge { norm, bound: q_bar });
    }
    let mut out = Vec::with_capacity(q.len() + 2);
    let mut sq = 0.0;
    for v in q {
        let s = v / q_bar;
        sq += s * s;
        out.push(s);
    }
    out.push(0.0);
    out.push((1.0 - sq).max(0.0).sqrt());
    Ok(out)
}

/// Lifts every point of a set, preserving ids. The result is unit-norm.
pub fn lift_points(ps: &PointSet) -> Result<PointSet> {
    let mut rows = Vec::with_capacity(ps.len());
    for (_, p) in ps.iter() {
        rows.push(lift_point(p)?);
    }
    PointSet::with_ids(ps.dim() + 2, ps.ids().to_vec(), rows)
}

/// Exact reference search: the argmax of `<q, p>` with ties broken toward the
/// smallest id.
pub fn brute_force_mips(ps: &PointSet, q: &[f64]) -> Result<(PointId, f64)> {
    if q.len() != ps.dim() {
        return Err(Error::DimensionMismatch {
            expected: ps.dim(),
            got: q.len(),
        });
    }
    if !all_finite(q) {
        return Err(Error::NonFinite { context: "brute force query" });
    }
    let mut best: Option<(PointId, f64)> = None;
    for (id, p) in ps.iter() {
        let v = dot(q, p);
        best = match best {
            None => Some((id, v)),
            Some((bid, bv)) => {
                if v > bv || (v == bv && id < bid) {
                    Some((id, v))
                } else {
                    Some((bid, bv))
                }
            }
        };
    }
    best.ok_or(Error::EmptyPointSet)
}

/// Shared handle used by indexes and the bandit states.
pub type SharedPoints = Arc<PointSet>;
