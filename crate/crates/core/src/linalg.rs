//! Symmetric eigendecomposition by cyclic Jacobi rotations and the matrix
//! functions built on it.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Maximum number of Jacobi sweeps before giving up.
pub const MAX_SWEEPS: usize = 100;
/// Off-diagonal Frobenius norm, relative to the full norm, at which a sweep stops.
pub const OFF_DIAGONAL_TOL: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// Eigenvectors stored as columns.
    pub vectors: DMatrix<f64>,
}

/// Eigendecomposition of a symmetric matrix. Only the upper triangle is trusted;
/// the input is symmetrized first.
pub fn sym_eigen(m: &DMatrix<f64>) -> Result<SymEigen> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::Shape(format!("matrix is {}x{}, not square", n, m.ncols())));
    }
    let mut a = (m + m.transpose()) * 0.5;
    let mut v = DMatrix::<f64>::identity(n, n);
    let total = a.norm();
    if !total.is_finite() {
        return Err(Error::Numeric("non-finite matrix entries".into()));
    }
    let threshold = OFF_DIAGONAL_TOL * total;
    for _ in 0..MAX_SWEEPS {
        let off = off_diagonal_norm(&a);
        if off <= threshold || off == 0.0 {
            let values = (0..n).map(|i| a[(i, i)]).collect();
            return Ok(SymEigen { values, vectors: v });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    Err(Error::Numeric(format!(
        "Jacobi eigendecomposition did not converge in {MAX_SWEEPS} sweeps"
    )))
}

fn off_diagonal_norm(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

impl SymEigen {
    /// `V diag(f(λ)) Vᵀ`, symmetrized.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lambda) in self.values.iter().enumerate() {
            let fj = f(lambda);
            for i in 0..n {
                scaled[(i, j)] *= fj;
            }
        }
        let out = &scaled * self.vectors.transpose();
        (&out + out.transpose()) * 0.5
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn random_symmetric(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        (&m + m.transpose()) * 0.5
    }

    #[test]
    fn matches_nalgebra_eigenvalues() {
        for seed in 0..20 {
            let n = 1 + (seed as usize % 7);
            let m = random_symmetric(n, seed);
            let mut ours = sym_eigen(&m).unwrap().values;
            let mut theirs: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
            ours.sort_by(f64::total_cmp);
            theirs.sort_by(f64::total_cmp);
            for (a, b) in ours.iter().zip(&theirs) {
                assert_relative_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn reconstructs_input() {
        let m = random_symmetric(6, 99);
        let e = sym_eigen(&m).unwrap();
        let back = e.map(|x| x);
        assert!((back - &m).norm() < 1e-12);
        let vtv = e.vectors.transpose() * &e.vectors;
        assert!((vtv - DMatrix::<f64>::identity(6, 6)).norm() < 1e-12);
    }

    #[test]
    fn diagonal_input_needs_no_rotation() {
        let m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![3.0, 1.0, 2.0]));
        let e = sym_eigen(&m).unwrap();
        assert_eq!(e.values, vec![3.0, 1.0, 2.0]);
    }

    #[test]
    fn rejects_non_square_and_non_finite() {
        assert!(sym_eigen(&DMatrix::<f64>::zeros(2, 3)).is_err());
        let mut m = DMatrix::<f64>::identity(2, 2);
        m[(0, 1)] = f64::NAN;
        assert!(sym_eigen(&m).is_err());
    }
}
