use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{parse_floats, HadamardSpace};
use crate::error::{Error, Result};
use crate::linalg::{sym_eigen, SymEigen};

/// Symmetric positive-definite `d × d` matrices with the affine-invariant metric
/// `d(A, B) = ‖log(A^{-1/2} B A^{-1/2})‖_F`.
///
/// Congruence-invariant quantities are computed through the Cholesky factor
/// `A = L Lᵀ`: `L⁻¹ B L⁻ᵀ` is orthogonally similar to `A^{-1/2} B A^{-1/2}`, so
/// distances agree, and the geodesic `γ(t) = L (L⁻¹ B L⁻ᵀ)^t Lᵀ` is the same curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Spd {
    dim: usize,
}

const SYMMETRY_TOL: f64 = 1e-12;
const MIN_EIGENVALUE: f64 = 1e-12;

impl Spd {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_shape(&self, a: &DMatrix<f64>) -> Result<()> {
        if a.nrows() != self.dim || a.ncols() != self.dim {
            return Err(Error::Shape(format!(
                "{}x{} matrix in spd:{}",
                a.nrows(),
                a.ncols(),
                self.dim
            )));
        }
        Ok(())
    }

    fn cholesky(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check_shape(a)?;
        a.clone()
            .cholesky()
            .map(|c| c.l())
            .ok_or_else(|| Error::Numeric("Cholesky factorization failed: matrix not positive definite".into()))
    }

    /// Eigendecomposition of `L⁻¹ B L⁻ᵀ` where `L` is the Cholesky factor of the base.
    fn relative(&self, l: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<SymEigen> {
        self.check_shape(b)?;
        let y = l
            .solve_lower_triangular(b)
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        let m = l
            .solve_lower_triangular(&y.transpose())
            .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
        sym_eigen(&m)
    }

    /// Matrix exponential of a symmetric matrix.
    pub fn sym_exp(&self, s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        Ok(sym_eigen(s)?.map(f64::exp))
    }

    /// Matrix logarithm of an SPD matrix.
    pub fn sym_log(&self, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let e = sym_eigen(a)?;
        if e.min_value() <= 0.0 {
            return Err(Error::Numeric("logarithm of a non-positive-definite matrix".into()));
        }
        Ok(e.map(f64::ln))
    }

    /// `L S Lᵀ` symmetrized.
    fn congruence(l: &DMatrix<f64>, s: &DMatrix<f64>) -> DMatrix<f64> {
        let out = l * s * l.transpose();
        (&out + out.transpose()) * 0.5
    }
}

impl HadamardSpace for Spd {
    type Point = DMatrix<f64>;

    fn describe(&self) -> String {
        format!("spd:{}", self.dim)
    }

    fn check_point(&self, a: &DMatrix<f64>) -> Result<()> {
        self.check_shape(a)?;
        let scale = a.amax().max(1.0);
        if (a - a.transpose()).amax() > SYMMETRY_TOL * scale {
            return Err(Error::Domain("matrix is not symmetric".into()));
        }
        let e = sym_eigen(a)?;
        if e.min_value() <= MIN_EIGENVALUE {
            return Err(Error::Domain(format!("smallest eigenvalue {} too small", e.min_value())));
        }
        Ok(())
    }

    fn distance(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<f64> {
        let l = self.cholesky(a)?;
        let e = self.relative(&l, b)?;
        let mut s = 0.0;
        for &lambda in &e.values {
            if lambda <= 0.0 {
                return Err(Error::Numeric("relative eigenvalue is not positive".into()));
            }
            s += lambda.ln().powi(2);
        }
        Ok(s.sqrt())
    }

    fn geodesic_unchecked(&self, a: &DMatrix<f64>, b: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        if t == 0.0 {
            self.check_shape(a)?;
            return Ok(a.clone());
        }
        if t == 1.0 {
            self.check_shape(b)?;
            return Ok(b.clone());
        }
        let l = self.cholesky(a)?;
        let e = self.relative(&l, b)?;
        Ok(Self::congruence(&l, &e.map(|x| x.powf(t))))
    }

    fn tangent_average(
        &self,
        base: &DMatrix<f64>,
        points: &[DMatrix<f64>],
        weights: &[f64],
    ) -> Option<Result<(DMatrix<f64>, f64)>> {
        Some((|| {
            let l = self.cholesky(base)?;
            let mut acc = DMatrix::zeros(self.dim, self.dim);
            let mut total = 0.0;
            for (y, &w) in points.iter().zip(weights) {
                if w > 0.0 {
                    let log = self.relative(&l, y)?.map(f64::ln);
                    acc += log * w;
                    total += w;
                }
            }
            if !(total > 0.0) {
                return Ok((base.clone(), 0.0));
            }
            acc /= total;
            let step = acc.norm();
            Ok((Self::congruence(&l, &self.sym_exp(&acc)?), step))
        })())
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> DMatrix<f64> {
        let n = self.dim;
        let g = DMatrix::from_fn(n, n, |_, _| scale * rng.sample::<f64, _>(StandardNormal));
        let s = (&g + g.transpose()) * 0.5;
        // symmetric input: the eigendecomposition converges
        self.sym_exp(&s).expect("exponential of a symmetric matrix")
    }

    fn parse_point(&self, fields: &[&str]) -> Result<DMatrix<f64>> {
        let v = parse_floats(fields)?;
        let n = self.dim;
        if v.len() != n * n {
            return Err(Error::Shape(format!("expected {} columns, found {}", n * n, v.len())));
        }
        let a = DMatrix::from_row_slice(n, n, &v);
        self.check_point(&a)?;
        Ok(a)
    }

    fn coordinates(&self, p: &DMatrix<f64>) -> Vec<f64> {
        p.transpose().as_slice().to_vec()
    }

    fn format_point(&self, a: &DMatrix<f64>) -> Vec<String> {
        let n = self.dim;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)].to_string())
            .collect()
    }
}
