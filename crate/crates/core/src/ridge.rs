//! Regularized least-squares state shared by both bandit algorithms.
//!
//! `RidgeState` maintains the design matrix `V_t = I + sum x_s x_s^T`, its
//! inverse, and the estimate `theta_hat = V_t^{-1} X^T y`. The inverse is kept
//! incrementally with the Sherman-Morrison rank-1 identity (O(d^2) per step)
//! and re-factorized from scratch every `REFRESH_INTERVAL` updates to cap
//! numerical drift.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dot, spd_inverse, sym_eigen, Matrix};

/// Full inverse re-factorization cadence for the rank-1 updates.
const REFRESH_INTERVAL: usize = 1024;

/// Confidence radius `1 + sqrt(2 ln(1/fail) + d ln(1 + horizon/d))`.
///
/// This is the self-normalized concentration radius for the ridge estimate;
/// both bandit algorithms instantiate it with their own failure split.
pub fn confidence_radius(dim: usize, horizon: usize, fail: f64) -> f64 {
    let d = dim as f64;
    1.0 + (2.0 * (1.0 / fail).ln() + d * (1.0 + horizon as f64 / d).ln()).sqrt()
}

#[derive(Debug, Clone)]
pub struct RidgeState {
    dim: usize,
    gram: Matrix,
    gram_inv: Matrix,
    xty: Vec<f64>,
    theta_hat: Vec<f64>,
    step: usize,
    updates_since_refresh: usize,
    /// Running sum of the pre-update quadratic forms `x^T V_t^{-1} x`.
    potential: f64,
}

impl RidgeState {
    pub fn new(dim: usize) -> Self {
        RidgeState {
            dim,
            gram: Matrix::identity(dim),
            gram_inv: Matrix::identity(dim),
            xty: vec![0.0; dim],
            theta_hat: vec![0.0; dim],
            step: 0,
            updates_since_refresh: 0,
            potential: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn step(&self) -> usize {
        self.step
    }

    pub fn gram(&self) -> &Matrix {
        &self.gram
    }

    pub fn gram_inv(&self) -> &Matrix {
        &self.gram_inv
    }

    pub fn theta_hat(&self) -> &[f64] {
        &self.theta_hat
    }

    /// `sum_t ||x_t||^2_{V_t^{-1}}` accumulated over all updates so far.
    pub fn elliptical_potential(&self) -> f64 {
        self.potential
    }

    /// The elliptical potential bound `2 d ln(1 + t/d)` at the current step.
    pub fn elliptical_potential_bound(&self) -> f64 {
        let d = self.dim as f64;
        2.0 * d * (1.0 + self.step as f64 / d).ln()
    }

    /// Rank-1 update with observation `(x, reward)`.
    pub fn update(&mut self, x: &[f64], reward: f64) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !all_finite(x) || !reward.is_finite() {
            return Err(Error::NonFinite {
                context: "ridge update input",
            });
        }
        debug_assert!(dot(x, x) <= 1.0 + 1e-9, "arm features live in the unit ball");

        let vx = self.gram_inv.matvec(x);
        let xvx = dot(x, &vx).max(0.0);
        self.potential += xvx;

        self.gram.add_outer(x, 1.0);
        let denom = 1.0 + xvx;
        // V^{-1} <- V^{-1} - (V^{-1} x)(V^{-1} x)^T / (1 + x^T V^{-1} x)
        let d = self.dim;
        for i in 0..d {
            let ui = vx[i] / denom;
            for j in 0..d {
                let cur = self.gram_inv.get(i, j);
                self.gram_inv.set(i, j, cur - ui * vx[j]);
            }
        }

        for (acc, xi) in self.xty.iter_mut().zip(x.iter()) {
            *acc += reward * xi;
        }
        self.step += 1;
        self.updates_since_refresh += 1;
        if self.updates_since_refresh >= REFRESH_INTERVAL {
            self.refresh()?;
        }
        self.theta_hat = self.gram_inv.matvec(&self.xty);
        Ok(())
    }

    fn refresh(&mut self) -> Result<()> {
        self.gram_inv = spd_inverse(&self.gram)?;
        self.updates_since_refresh = 0;
        Ok(())
    }

    /// The symmetric square root `S` of the inverse Gram matrix: `S S = V^{-1}`.
    ///
    /// Computed from the eigendecomposition of `V` so the result is the unique
    /// symmetric root.
    pub fn inv_sqrt(&self) -> Result<Matrix> {
        let (eigs, v) = sym_eigen(&self.gram)?;
        let d = self.dim;
        let mut s = Matrix::zeros(d);
        for i in 0..d {
            for j in 0..=i {
                let mut acc = 0.0;
                for k in 0..d {
                    if eigs[k] <= 0.0 {
                        return Err(Error::Numerical("gram matrix lost positive definiteness"));
                    }
                    acc += v.get(i, k) * v.get(j, k) / eigs[k].sqrt();
                }
                s.set(i, j, acc);
                s.set(j, i, acc);
            }
        }
        if !s.is_finite() {
            return Err(Error::NonFinite {
                context: "inverse square root",
            });
        }
        Ok(s)
    }

    /// `||x||_{V^{-1}} = sqrt(x^T V^{-1} x)`.
    pub fn mahalanobis_inv(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        if !all_finite(x) {
            return Err(Error::NonFinite {
                context: "mahalanobis input",
            });
        }
        Ok(self.gram_inv.quad_form(x).max(0.0).sqrt())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent dense oracle: solve (X^T X + I) theta = X^T y by Gaussian
    /// elimination, no Sherman-Morrison involved.
    fn direct_ridge_solve(xs: &[Vec<f64>], ys: &[f64], d: usize) -> Vec<f64> {
        let mut a = vec![vec![0.0; d + 1]; d];
        for i in 0..d {
            a[i][i] = 1.0;
        }
        for (x, &y) in xs.iter().zip(ys.iter()) {
            for i in 0..d {
                for j in 0..d {
                    a[i][j] += x[i] * x[j];
                }
                a[i][d] += y * x[i];
            }
        }
        // Gaussian elimination with partial pivoting.
        for col in 0..d {
            let pivot = (col..d)
                .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())
                .unwrap();
            a.swap(col, pivot);
            for row in (col + 1)..d {
                let f = a[row][col] / a[col][col];
                for k in col..=d {
                    a[row][k] -= f * a[col][k];
                }
            }
        }
        let mut theta = vec![0.0; d];
        for row in (0..d).rev() {
            let mut s = a[row][d];
            for k in (row + 1)..d {
                s -= a[row][k] * theta[k];
            }
            theta[row] = s / a[row][row];
        }
        theta
    }

    fn unit_ball_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = crate::linalg::norm2(&raw);
        if n > 1.0 {
            raw.iter().map(|v| v / n).collect()
        } else {
            raw
        }
    }

    #[test]
    fn single_observation_closed_form() {
        let mut st = RidgeState::new(2);
        st.update(&[1.0, 0.0], 1.0).unwrap();
        assert_eq!(st.gram().get(0, 0), 2.0);
        assert_eq!(st.gram().get(1, 1), 1.0);
        assert_eq!(st.gram().get(0, 1), 0.0);
        assert!((st.gram_inv().get(0, 0) - 0.5).abs() < 1e-12);
        assert!((st.gram_inv().get(1, 1) - 1.0).abs() < 1e-12);
        assert!((st.theta_hat()[0] - 0.5).abs() < 1e-12);
        assert!(st.theta_hat()[1].abs() < 1e-12);
        assert_eq!(st.step(), 1);
    }

    #[test]
    fn zero_feature_adds_nothing() {
        let mut st = RidgeState::new(3);
        st.update(&[0.0, 0.0, 0.0], 5.0).unwrap();
        assert_eq!(st.gram(), &Matrix::identity(3));
        assert!(st.theta_hat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn matches_direct_solve_after_random_updates() {
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut st = RidgeState::new(d);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..10 {
            let x = unit_ball_vec(&mut rng, d);
            let y: f64 = rng.random_range(-2.0..2.0);
            st.update(&x, y).unwrap();
            xs.push(x);
            ys.push(y);
        }
        let oracle = direct_ridge_solve(&xs, &ys, d);
        for (a, b) in st.theta_hat().iter().zip(oracle.iter()) {
            assert!((a - b).abs() < 1e-8, "theta mismatch: {a} vs {b}");
        }
    }

    #[test]
    fn rank_one_inverse_tracks_fresh_inversion() {
        let d = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut st = RidgeState::new(d);
        for _ in 0..50 {
            let x = unit_ball_vec(&mut rng, d);
            st.update(&x, rng.random_range(-1.0..1.0)).unwrap();
        }
        let fresh = spd_inverse(st.gram()).unwrap();
        assert!(st.gram_inv().frobenius_distance(&fresh) < 1e-8);
        let prod = st.gram().mul(st.gram_inv());
        assert!(prod.frobenius_distance(&Matrix::identity(d)) < 1e-8);
    }

    #[test]
    fn inv_sqrt_identity_and_diagonal() {
        let st = RidgeState::new(3);
        let s = st.inv_sqrt().unwrap();
        assert!(s.frobenius_distance(&Matrix::identity(3)) < 1e-10);

        // gram = diag(4, 1) -> S = diag(0.5, 1)
        let mut st = RidgeState::new(2);
        // three unit pulls along e1: V = I + 3 e1 e1^T = diag(4, 1)
        for _ in 0..3 {
            st.update(&[1.0, 0.0], 0.0).unwrap();
        }
        let s = st.inv_sqrt().unwrap();
        assert!((s.get(0, 0) - 0.5).abs() < 1e-10);
        assert!((s.get(1, 1) - 1.0).abs() < 1e-10);
        assert!(s.get(0, 1).abs() < 1e-10);
        assert!(s.max_asymmetry() < 1e-10);
    }

    #[test]
    fn inv_sqrt_multiply_back() {
        let d = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut st = RidgeState::new(d);
        for _ in 0..25 {
            let x = unit_ball_vec(&mut rng, d);
            st.update(&x, rng.random_range(-1.0..1.0)).unwrap();
        }
        let s = st.inv_sqrt().unwrap();
        let ss = s.mul(&s);
        assert!(ss.frobenius_distance(st.gram_inv()) < 1e-8);
        assert!(s.max_asymmetry() < 1e-10);
    }

    #[test]
    fn mahalanobis_diagonal_cases() {
        let st = RidgeState::new(2);
        assert!((st.mahalanobis_inv(&[1.0, 0.0]).unwrap() - 1.0).abs() < 1e-12);

        let mut st = RidgeState::new(2);
        for _ in 0..3 {
            st.update(&[1.0, 0.0], 0.0).unwrap();
        }
        // V = diag(4,1): ||e1||_{V^-1} = 0.5
        assert!((st.mahalanobis_inv(&[1.0, 0.0]).unwrap() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn mahalanobis_equals_vectorized_inner_product() {
        // ||x||^2_{V^-1} = <vec(x x^T), vec(V^-1)>, the identity the staged UCB
        // query relies on.
        let d = 4;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut st = RidgeState::new(d);
        for _ in 0..15 {
            let x = unit_ball_vec(&mut rng, d);
            st.update(&x, rng.random_range(-1.0..1.0)).unwrap();
        }
        for _ in 0..20 {
            let x = unit_ball_vec(&mut rng, d);
            let direct = st.mahalanobis_inv(&x).unwrap();
            let mut vec_ip = 0.0;
            for i in 0..d {
                for j in 0..d {
                    vec_ip += x[i] * x[j] * st.gram_inv().get(i, j);
                }
            }
            assert!((direct * direct - vec_ip).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_non_finite_input() {
        let mut st = RidgeState::new(2);
        assert!(st.update(&[f64::NAN, 0.0], 1.0).is_err());
        assert!(st.update(&[0.1, 0.0], f64::INFINITY).is_err());
        assert!(st.mahalanobis_inv(&[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn refresh_keeps_inverse_exact_over_long_runs() {
        let d = 3;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut st = RidgeState::new(d);
        for _ in 0..2500 {
            let x = unit_ball_vec(&mut rng, d);
            st.update(&x, rng.random_range(-1.0..1.0)).unwrap();
        }
        let prod = st.gram().mul(st.gram_inv());
        assert!(prod.frobenius_distance(&Matrix::identity(d)) < 1e-8);
    }

    #[test]
    fn confidence_radius_example() {
        // d = 2, horizon = 98, fail = 0.5:
        // 1 + sqrt(2 ln 2 + 2 ln 50) = 4.034854...
        let beta = confidence_radius(2, 98, 0.5);
        assert!((beta - 4.0348538).abs() < 1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn elliptical_potential_bound_holds(seed in 0u64..500, steps in 1usize..200) {
            let d = 3;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut st = RidgeState::new(d);
            for _ in 0..steps {
                let x = unit_ball_vec(&mut rng, d);
                st.update(&x, rng.random_range(-1.0..1.0)).unwrap();
            }
            prop_assert!(st.elliptical_potential() <= st.elliptical_potential_bound() + 1e-8);
        }

        #[test]
        fn uncertainty_shrinks_monotonically(seed in 0u64..500) {
            let d = 4;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut st = RidgeState::new(d);
            let probe = unit_ball_vec(&mut rng, d);
            let mut prev = st.mahalanobis_inv(&probe).unwrap();
            for _ in 0..30 {
                let x = unit_ball_vec(&mut rng, d);
                st.update(&x, 0.0).unwrap();
                let cur = st.mahalanobis_inv(&probe).unwrap();
                prop_assert!(cur <= prev + 1e-12);
                prev = cur;
            }
        }
    }
}
