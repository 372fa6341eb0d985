//! Hyperplane-sign hashing over lifted unit vectors.
//!
//! One index instance is a constant-success near-neighbor oracle: `L` tables
//! of `k` concatenated sign bits each, with `k = ceil(log2 K)` and `L` the
//! smallest integer driving the miss probability of a point at the target
//! radius below the oracle's failure budget. Every candidate pulled from a
//! bucket is verified against the exact lifted distance before it can be
//! returned, so a false null is the only possible failure.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::mips::{lift_query, AnnSpec, PointId, PointSet};
use crate::oracle::{MipsOracle, OracleReply};
use crate::seeding::mix_seed;

/// Hard cap on derived table counts; beyond this the requested contract is
/// outside what the backend can amplify at reasonable cost.
pub const MAX_TABLES: usize = 1_000_000;

/// Probability that two unit vectors at lifted distance `r_prime` land on the
/// same side of a random hyperplane: `1 - theta/pi` with
/// `theta = 2 asin(r_prime / 2)`.
pub fn collision_probability(r_prime: f64) -> f64 {
    let half = (r_prime / 2.0).clamp(0.0, 1.0);
    1.0 - 2.0 * half.asin() / std::f64::consts::PI
}

/// Bits per table and table count for a target failure probability:
/// `k = ceil(log2 K)`, `L` minimal with `(1 - p1^k)^L <= fail`.
pub fn table_params(ann: &AnnSpec, n_points: usize, fail: f64) -> Result<(usize, usize)> {
    if fail <= 0.0 || fail >= 1.0 {
        return Err(Error::invalid("fail", fail, "must lie in (0, 1)"));
    }
    let k = (n_points.max(2) as f64).log2().ceil() as usize;
    let k = k.max(1);
    if k > 32 {
        return Err(Error::invalid(
            "k",
            k as f64,
            "hash width beyond 32 bits is unsupported",
        ));
    }
    let p1 = collision_probability(ann.r_prime);
    if p1 <= 0.0 {
        return Err(Error::Numerical(
            "hyperplane collision probability vanished at the target radius",
        ));
    }
    let pk = p1.powi(k as i32);
    let l = if pk >= 1.0 {
        1
    } else {
        (fail.ln() / (1.0 - pk).ln()).ceil().max(1.0) as usize
    };
    if l > MAX_TABLES {
        return Err(Error::invalid(
            "tables",
            l as f64,
            "derived table count exceeds the supported limit",
        ));
    }
    Ok((k, l))
}

struct Table {
    /// Bucket keys sorted ascending, aligned with `rows`.
    hashes: Vec<u32>,
    /// Row indices into the lifted point set.
    rows: Vec<u32>,
}

/// Multi-table hyperplane index over one lifted point set.
pub struct LshIndex {
    lifted: Arc<PointSet>,
    ann: AnnSpec,
    q_bar: f64,
    k: usize,
    tables: usize,
    target_fail: f64,
    seed: u64,
    /// `tables * k * lifted_dim`, row per (table, bit).
    planes: Vec<f64>,
    buckets: Vec<Table>,
}

/// Structured report of one index instance.
#[derive(Debug, Clone)]
pub struct LshStats {
    pub hashes_per_table: usize,
    pub tables: usize,
    pub points: usize,
    pub target_fail: f64,
    pub c_prime: f64,
    pub r_prime: f64,
    /// (bucket size, number of buckets of that size) across all tables.
    pub bucket_histogram: Vec<(usize, usize)>,
}

impl LshIndex {
    /// Builds the index over lifted (unit-norm) points. Deterministic given
    /// `seed`; table hyperplanes use per-table derived seeds so parallel
    /// construction cannot reorder randomness.
    pub fn build(
        lifted: Arc<PointSet>,
        ann: AnnSpec,
        q_bar: f64,
        target_fail: f64,
        seed: u64,
    ) -> Result<Self> {
        if ann.c_prime <= 1.0 {
            return Err(Error::invalid(
                "c_prime",
                ann.c_prime,
                "must exceed 1 for a sublinear regime to exist",
            ));
        }
        for (_, p) in lifted.iter() {
            let n = norm2(p);
            if (n - 1.0).abs() > 1e-8 {
                return Err(Error::PointNormTooLarge { norm: n });
            }
        }
        let (k, tables) = table_params(&ann, lifted.len(), target_fail)?;
        let dim = lifted.dim();

        let planes: Vec<Vec<f64>> = (0..tables)
            .into_par_iter()
            .map(|t| {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, t as u64));
                (0..k * dim).map(|_| rng.sample(StandardNormal)).collect()
            })
            .collect();

        let buckets: Vec<Table> = planes
            .par_iter()
            .map(|table_planes| {
                let mut keyed: Vec<(u32, u32)> = (0..lifted.len())
                    .map(|row| {
                        let h = hash_with(table_planes, k, dim, lifted.point_at(row));
                        (h, row as u32)
                    })
                    .collect();
                keyed.sort_unstable();
                let (hashes, rows) = keyed.into_iter().unzip();
                Table { hashes, rows }
            })
            .collect();

        Ok(LshIndex {
            lifted,
            ann,
            q_bar,
            k,
            tables,
            target_fail,
            seed,
            planes: planes.into_iter().flatten().collect(),
            buckets,
        })
    }

    pub fn hashes_per_table(&self) -> usize {
        self.k
    }

    pub fn tables(&self) -> usize {
        self.tables
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn hash_one(&self, table: usize, v: &[f64]) -> u32 {
        let dim = self.lifted.dim();
        let start = table * self.k * dim;
        hash_with(&self.planes[start..start + self.k * dim], self.k, dim, v)
    }

    /// Near-neighbor query in the lifted space. Candidates are the union of
    /// the query's buckets; each is checked against the exact lifted distance
    /// bound `c' r'`, and the closest survivor is returned.
    pub fn query_lifted(&self, lifted_q: &[f64]) -> Result<OracleReply> {
        if lifted_q.len() != self.lifted.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lifted.dim(),
                got: lifted_q.len(),
            });
        }
        let qn = norm2(lifted_q);
        if (qn - 1.0).abs() > 1e-8 {
            return Err(Error::QueryNormTooLarge {
                norm: qn,
                bound: 1.0,
            });
        }

        let mut candidates: Vec<u32> = Vec::new();
        for (t, table) in self.buckets.iter().enumerate() {
            let h = self.hash_one(t, lifted_q);
            let start = table.hashes.partition_point(|&x| x < h);
            let mut i = start;
            while i < table.hashes.len() && table.hashes[i] == h {
                candidates.push(table.rows[i]);
                i += 1;
            }
        }
        if candidates.is_empty() {
            return Ok(OracleReply::default());
        }
        candidates.sort_unstable();
        candidates.dedup();

        let bound_sq = (self.ann.c_prime * self.ann.r_prime).powi(2);
        let probes = candidates.len();
        let mut best: Option<(PointId, f64)> = None;
        for row in candidates {
            let p = self.lifted.point_at(row as usize);
            let dist_sq: f64 = p
                .iter()
                .zip(lifted_q.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if dist_sq <= bound_sq {
                let id = self.lifted.id_at(row as usize);
                best = match best {
                    None => Some((id, dist_sq)),
                    Some((bid, bd)) => {
                        if dist_sq < bd || (dist_sq == bd && id < bid) {
                            Some((id, dist_sq))
                        } else {
                            Some((bid, bd))
                        }
                    }
                };
            }
        }
        Ok(OracleReply {
            answer: best.map(|(id, dist_sq)| (id, self.q_bar * (1.0 - dist_sq / 2.0))),
            probes,
        })
    }

    pub fn stats(&self) -> LshStats {
        let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
        for table in &self.buckets {
            let mut i = 0;
            while i < table.hashes.len() {
                let mut j = i + 1;
                while j < table.hashes.len() && table.hashes[j] == table.hashes[i] {
                    j += 1;
                }
                *histogram.entry(j - i).or_insert(0) += 1;
                i = j;
            }
        }
        LshStats {
            hashes_per_table: self.k,
            tables: self.tables,
            points: self.lifted.len(),
            target_fail: self.target_fail,
            c_prime: self.ann.c_prime,
            r_prime: self.ann.r_prime,
            bucket_histogram: histogram.into_iter().collect(),
        }
    }
}

fn hash_with(planes: &[f64], k: usize, dim: usize, v: &[f64]) -> u32 {
    let mut h = 0u32;
    for bit in 0..k {
        let row = &planes[bit * dim..(bit + 1) * dim];
        let proj: f64 = row.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
        if proj > 0.0 {
            h |= 1 << bit;
        }
    }
    h
}

impl MipsOracle for LshIndex {
    fn query(&self, q: &[f64]) -> Result<OracleReply> {
        let lifted_q = lift_query(q, self.q_bar)?;
        self.query_lifted(&lifted_q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::dot;
    use crate::mips::lift_points;
    use rand::Rng;

    fn unit_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        loop {
            let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let n = norm2(&v);
            if n > 1e-9 {
                return v.iter().map(|x| x / n).collect();
            }
        }
    }

    fn unit_sphere_set(rng: &mut ChaCha8Rng, n: usize, d: usize) -> PointSet {
        let rows: Vec<Vec<f64>> = (0..n).map(|_| unit_vec(rng, d)).collect();
        PointSet::new(d, rows).unwrap()
    }

    fn ann(c_prime: f64, r_prime: f64) -> AnnSpec {
        let c2 = c_prime * c_prime;
        AnnSpec {
            c_prime,
            r_prime,
            rho_q: (2.0 * c2 - 1.0) / (c2 * c2),
        }
    }

    /// Rotate `base` by angle `phi` toward a direction orthogonal to it.
    fn at_angle(rng: &mut ChaCha8Rng, base: &[f64], phi: f64) -> Vec<f64> {
        let d = base.len();
        let w = loop {
            let raw = unit_vec(rng, d);
            let proj = dot(&raw, base);
            let perp: Vec<f64> = raw.iter().zip(base.iter()).map(|(r, b)| r - proj * b).collect();
            let n = norm2(&perp);
            if n > 1e-9 {
                break perp.iter().map(|v| v / n).collect::<Vec<f64>>();
            }
        };
        base.iter()
            .zip(w.iter())
            .map(|(b, w)| phi.cos() * b + phi.sin() * w)
            .collect()
    }

    fn angle_for_distance(dist: f64) -> f64 {
        // dist^2 = 2 - 2 cos(phi)
        (1.0 - dist * dist / 2.0).acos()
    }

    #[test]
    fn table_params_arithmetic() {
        // K = 256, r' = 0.6, fail = 0.3:
        // p1 = 1 - 2 asin(0.3)/pi = 0.806029, p1^8 = 0.178168,
        // L = ceil(ln 0.3 / ln(1 - 0.178168)) = 7.
        let (k, l) = table_params(&ann(1.5, 0.6), 256, 0.3).unwrap();
        assert_eq!(k, 8);
        assert_eq!(l, 7);

        // duplicate-route check of the same arithmetic
        let p1 = 1.0 - 2.0 * (0.3f64).asin() / std::f64::consts::PI;
        let want_l = ((0.3f64).ln() / (1.0 - p1.powi(8)).ln()).ceil() as usize;
        assert_eq!(l, want_l);

        // exact-duplicate radius: one table suffices
        let (_, l0) = table_params(&ann(1.5, 0.0), 256, 0.3).unwrap();
        assert_eq!(l0, 1);
    }

    #[test]
    fn collision_probability_edges() {
        assert!((collision_probability(0.0) - 1.0).abs() < 1e-15);
        assert!(collision_probability(2.0).abs() < 1e-15);
        // orthogonal unit vectors: distance sqrt(2), angle pi/2
        assert!((collision_probability(std::f64::consts::SQRT_2) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_c_prime_at_most_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let lifted = Arc::new(lift_points(&unit_sphere_set(&mut rng, 8, 4)).unwrap());
        assert!(LshIndex::build(lifted, ann(1.0, 0.5), 1.0, 0.3, 1).is_err());
    }

    #[test]
    fn singleton_point_set() {
        let ps = PointSet::new(2, vec![vec![1.0, 0.0]]).unwrap();
        let lifted = Arc::new(lift_points(&ps).unwrap());
        let idx = LshIndex::build(lifted, ann(1.5, 0.5), 1.0, 0.3, 7).unwrap();
        // query at the stored point: distance 0, must pass the filter
        let reply = idx.query(&[1.0, 0.0]).unwrap();
        assert_eq!(reply.answer.map(|(id, _)| id), Some(0));
    }

    #[test]
    fn same_seed_reproduces_identical_tables() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let lifted = Arc::new(lift_points(&unit_sphere_set(&mut rng, 64, 8)).unwrap());
        let a = LshIndex::build(lifted.clone(), ann(1.5, 0.5), 1.0, 0.3, 42).unwrap();
        let b = LshIndex::build(lifted, ann(1.5, 0.5), 1.0, 0.3, 42).unwrap();
        for (ta, tb) in a.buckets.iter().zip(b.buckets.iter()) {
            assert_eq!(ta.hashes, tb.hashes);
            assert_eq!(ta.rows, tb.rows);
        }
        assert_eq!(a.planes, b.planes);
    }

    #[test]
    fn every_point_in_exactly_one_bucket_per_table() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let lifted = Arc::new(lift_points(&unit_sphere_set(&mut rng, 100, 6)).unwrap());
        let idx = LshIndex::build(lifted, ann(1.4, 0.6), 1.0, 0.25, 3).unwrap();
        for table in &idx.buckets {
            assert_eq!(table.rows.len(), 100);
            let mut rows = table.rows.clone();
            rows.sort_unstable();
            rows.dedup();
            assert_eq!(rows.len(), 100);
        }
        let stats = idx.stats();
        let total: usize = stats.bucket_histogram.iter().map(|(s, c)| s * c).sum();
        assert_eq!(total, 100 * idx.tables());
    }

    #[test]
    fn filter_blocks_everything_beyond_bound() {
        // all points strictly beyond c'r' from the query: null always
        let c_prime = 1.5;
        let r_prime = 0.5;
        let d = 8;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let q = unit_vec(&mut rng, d);
        let phi = angle_for_distance(1.1 * c_prime * r_prime);
        let rows: Vec<Vec<f64>> = (0..64).map(|_| at_angle(&mut rng, &q, phi)).collect();
        let ps = PointSet::new(d, rows).unwrap();
        let lifted = Arc::new(lift_points(&ps).unwrap());
        for seed in 0..50 {
            let idx =
                LshIndex::build(lifted.clone(), ann(c_prime, r_prime), 1.0, 0.3, seed).unwrap();
            let reply = idx.query(&q).unwrap();
            assert!(reply.answer.is_none(), "verification filter must hold");
        }
    }

    #[test]
    fn planted_needle_recall_meets_target() {
        // One point at 0.9 r', the rest at 1.1 c'r'. Needle recall must reach
        // 1 - fail; checked with a 99% binomial lower bound over 1000 builds.
        let r_prime = 0.5;
        let fail = 0.3;
        let d = 10;
        let trials = 1000;
        for c_prime in [1.2, 1.5, 2.0] {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + (c_prime * 10.0) as u64);
            let q = unit_vec(&mut rng, d);
            let needle = at_angle(&mut rng, &q, angle_for_distance(0.9 * r_prime));
            let mut rows = vec![needle];
            let far = angle_for_distance((1.1 * c_prime * r_prime).min(1.99));
            for _ in 0..63 {
                rows.push(at_angle(&mut rng, &q, far));
            }
            let ps = PointSet::new(d, rows).unwrap();
            let lifted = Arc::new(lift_points(&ps).unwrap());

            let mut hits = 0;
            for seed in 0..trials {
                let idx =
                    LshIndex::build(lifted.clone(), ann(c_prime, r_prime), 1.0, fail, seed)
                        .unwrap();
                let reply = idx.query(&q).unwrap();
                if reply.answer.is_some() {
                    hits += 1;
                }
            }
            let rate = hits as f64 / trials as f64;
            let margin = 2.326 * (fail * (1.0 - fail) / trials as f64).sqrt();
            assert!(
                rate >= (1.0 - fail) - margin,
                "recall {rate} below target at c'={c_prime}"
            );
        }
    }

    #[test]
    fn probe_fraction_is_small_and_shrinks_with_scale() {
        // mean fraction of points probed < 0.5 at K = 4096, and the fraction
        // shrinks when K doubles at fixed parameters
        let d = 16;
        let spec = ann(1.5, 0.5);
        let mut fractions = Vec::new();
        for (seed, n) in [(1u64, 2048usize), (2, 4096)] {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lifted = Arc::new(lift_points(&unit_sphere_set(&mut rng, n, d)).unwrap());
            let idx = LshIndex::build(lifted, spec, 1.0, 0.3, 77).unwrap();
            let mut total = 0usize;
            let queries = 100;
            for _ in 0..queries {
                let q = unit_vec(&mut rng, d);
                total += idx.query(&q).unwrap().probes;
            }
            fractions.push(total as f64 / (queries * n) as f64);
        }
        assert!(fractions[1] < 0.5, "probe fraction {} too large", fractions[1]);
        assert!(
            fractions[1] < fractions[0] + 1e-12,
            "probe fraction should not grow with K: {fractions:?}"
        );
    }
}
