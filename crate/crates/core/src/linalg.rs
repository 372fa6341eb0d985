//! Small dense linear algebra for the ridge estimator.
//!
//! Dimensions here are bandit feature dimensions (tens, not thousands), so a
//! row-major `Vec<f64>` matrix with straightforward loops is all we need.
//! The symmetric eigensolver is a cyclic Jacobi sweep; it is exact enough for
//! the well-conditioned Gram matrices this crate produces (eigenvalues >= 1).

use crate::error::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Square row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    dim: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(dim: usize) -> Self {
        Matrix {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Matrix::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let dim = rows.len();
        let mut m = Matrix::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix rows must be square");
            m.data[i * dim..(i + 1) * dim].copy_from_slice(row);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.data)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.dim);
        let mut out = vec![0.0; self.dim];
        for i in 0..self.dim {
            out[i] = dot(&self.data[i * self.dim..(i + 1) * self.dim], x);
        }
        out
    }

    /// x^T M x.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        dot(&self.matvec(x), x)
    }

    pub fn mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = Matrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.data[i * d + k];
                if a == 0.0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.data[k * d + j];
                }
            }
        }
        out
    }

    /// M += w * x x^T.
    pub fn add_outer(&mut self, x: &[f64], w: f64) {
        debug_assert_eq!(x.len(), self.dim);
        let d = self.dim;
        for i in 0..d {
            let xi = w * x[i];
            for j in 0..d {
                self.data[i * d + j] += xi * x[j];
            }
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn frobenius_distance(&self, other: &Matrix) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let d = self.dim;
        let mut worst: f64 = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let d = self.dim;
        for i in 0..d {
            for j in (i + 1)..d {
                let v = 0.5 * (self.get(i, j) + self.get(j, i));
                self.set(i, j, v);
                self.set(j, i, v);
            }
        }
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
pub fn cholesky(m: &Matrix) -> Result<Matrix> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "cholesky input",
        });
    }
    let d = m.dim();
    let mut l = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = m.get(i, j);
            for k in 0..j {
                s -= l.get(i, k) * l.get(j, k);
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::Numerical("matrix is not positive definite"));
                }
                l.set(i, j, s.sqrt());
            } else {
                l.set(i, j, s / l.get(j, j));
            }
        }
    }
    Ok(l)
}

/// Inverse of a symmetric positive-definite matrix via its Cholesky factor.
pub fn spd_inverse(m: &Matrix) -> Result<Matrix> {
    let d = m.dim();
    let l = cholesky(m)?;
    // Invert L by forward substitution, then A^{-1} = L^{-T} L^{-1}.
    let mut linv = Matrix::zeros(d);
    for j in 0..d {
        linv.set(j, j, 1.0 / l.get(j, j));
        for i in (j + 1)..d {
            let mut s = 0.0;
            for k in j..i {
                s -= l.get(i, k) * linv.get(k, j);
            }
            linv.set(i, j, s / l.get(i, i));
        }
    }
    let mut inv = Matrix::zeros(d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = 0.0;
            for k in i..d {
                s += linv.get(k, i) * linv.get(k, j);
            }
            inv.set(i, j, s);
            inv.set(j, i, s);
        }
    }
    Ok(inv)
}

/// Symmetric eigendecomposition by cyclic Jacobi rotations.
///
/// Returns eigenvalues and the orthogonal matrix whose columns are the
/// matching eigenvectors (`m = V diag(eigs) V^T`).
pub fn sym_eigen(m: &Matrix) -> Result<(Vec<f64>, Matrix)> {
    if !m.is_finite() {
        return Err(Error::NonFinite {
            context: "eigendecomposition input",
        });
    }
    let d = m.dim();
    let mut a = m.clone();
    a.symmetrize();
    let mut v = Matrix::identity(d);
    let scale = a.frobenius_norm().max(1.0);

    const MAX_SWEEPS: usize = 100;
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0;
        for i in 0..d {
            for j in (i + 1)..d {
                off += a.get(i, j) * a.get(i, j);
            }
        }
        if off.sqrt() <= 1e-14 * scale {
            break;
        }
        for p in 0..d {
            for q in (p + 1)..d {
                let apq = a.get(p, q);
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let tau = (aqq - app) / (2.0 * apq);
                let sgn = if tau >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;

                for k in 0..d {
                    if k != p && k != q {
                        let akp = a.get(k, p);
                        let akq = a.get(k, q);
                        let new_kp = c * akp - s * akq;
                        let new_kq = s * akp + c * akq;
                        a.set(k, p, new_kp);
                        a.set(p, k, new_kp);
                        a.set(k, q, new_kq);
                        a.set(q, k, new_kq);
                    }
                }
                a.set(p, p, c * c * app - 2.0 * s * c * apq + s * s * aqq);
                a.set(q, q, s * s * app + 2.0 * s * c * apq + c * c * aqq);
                a.set(p, q, 0.0);
                a.set(q, p, 0.0);

                for k in 0..d {
                    let vkp = v.get(k, p);
                    let vkq = v.get(k, q);
                    v.set(k, p, c * vkp - s * vkq);
                    v.set(k, q, s * vkp + c * vkq);
                }
            }
        }
    }

    let eigs: Vec<f64> = (0..d).map(|i| a.get(i, i)).collect();
    if !all_finite(&eigs) || !v.is_finite() {
        return Err(Error::NonFinite {
            context: "eigendecomposition result",
        });
    }
    Ok((eigs, v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_spd(d: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::identity(d);
        for _ in 0..(3 * d) {
            let x: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
            m.add_outer(&x, rng.random_range(0.1..2.0));
        }
        m
    }

    #[test]
    fn spd_inverse_round_trip() {
        for seed in 0..5 {
            let m = random_spd(6, seed);
            let inv = spd_inverse(&m).unwrap();
            let prod = m.mul(&inv);
            assert!(prod.frobenius_distance(&Matrix::identity(6)) < 1e-9);
        }
    }

    #[test]
    fn jacobi_reconstructs_matrix() {
        for seed in 10..15 {
            let m = random_spd(7, seed);
            let (eigs, v) = sym_eigen(&m).unwrap();
            // V diag(eigs) V^T == m
            let d = m.dim();
            let mut recon = Matrix::zeros(d);
            for i in 0..d {
                for j in 0..d {
                    let mut s = 0.0;
                    for k in 0..d {
                        s += v.get(i, k) * eigs[k] * v.get(j, k);
                    }
                    recon.set(i, j, s);
                }
            }
            assert!(recon.frobenius_distance(&m) < 1e-9 * m.frobenius_norm().max(1.0));
        }
    }

    #[test]
    fn jacobi_rejects_non_finite() {
        let mut m = Matrix::identity(3);
        m.set(0, 1, f64::NAN);
        assert!(sym_eigen(&m).is_err());
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let mut m = Matrix::identity(2);
        m.set(0, 0, -1.0);
        assert!(cholesky(&m).is_err());
    }
}
