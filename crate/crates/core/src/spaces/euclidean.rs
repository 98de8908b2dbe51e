use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{parse_floats, GeodesicEnd, HadamardSpace, POINT_EQ_TOL};
use crate::error::{Error, Result};

/// `ℝ^d` with the Euclidean norm.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Euclidean {
    dim: usize,
}

impl Euclidean {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Domain("dimension must be at least 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_shape(&self, p: &DVector<f64>) -> Result<()> {
        if p.len() != self.dim {
            return Err(Error::Shape(format!("point of length {} in euclidean:{}", p.len(), self.dim)));
        }
        Ok(())
    }
}

impl HadamardSpace for Euclidean {
    type Point = DVector<f64>;

    fn describe(&self) -> String {
        format!("euclidean:{}", self.dim)
    }

    fn check_point(&self, p: &DVector<f64>) -> Result<()> {
        self.check_shape(p)?;
        if p.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(Error::Domain("non-finite coordinate".into()))
        }
    }

    #[inline]
    fn distance(&self, q: &DVector<f64>, p: &DVector<f64>) -> Result<f64> {
        if q.len() != self.dim || p.len() != self.dim {
            return Err(Error::Shape(format!(
                "points of length {} and {} in euclidean:{}",
                q.len(),
                p.len(),
                self.dim
            )));
        }
        Ok(q.iter().zip(p.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
    }

    fn geodesic_unchecked(&self, q: &DVector<f64>, p: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.check_shape(q)?;
        self.check_shape(p)?;
        if t == 0.0 {
            return Ok(q.clone());
        }
        if t == 1.0 {
            return Ok(p.clone());
        }
        Ok(q.zip_map(p, |a, b| a + t * (b - a)))
    }

    fn directional_derivative(
        &self,
        y: &DVector<f64>,
        q: &DVector<f64>,
        p: &DVector<f64>,
        end: GeodesicEnd,
    ) -> Result<f64> {
        let len = self.distance(q, p)?;
        if len <= POINT_EQ_TOL {
            return Err(Error::Degenerate("geodesic endpoints coincide".into()));
        }
        let u = (p - q) / len;
        let from = match end {
            GeodesicEnd::Start => q,
            GeodesicEnd::Finish => p,
        };
        // d/dt ‖γ(t) - y‖ = ⟨γ(t) - y, u⟩ / ‖γ(t) - y‖, evaluated at the knot
        let r = y - from;
        let norm = r.norm();
        if norm <= POINT_EQ_TOL {
            return Err(Error::Degenerate("point coincides with a knot".into()));
        }
        Ok(-r.dot(&u) / norm)
    }

    fn tangent_average(
        &self,
        base: &DVector<f64>,
        points: &[DVector<f64>],
        weights: &[f64],
    ) -> Option<Result<(DVector<f64>, f64)>> {
        Some((|| {
            self.check_shape(base)?;
            let mut acc = DVector::zeros(self.dim);
            let mut total = 0.0;
            for (y, &w) in points.iter().zip(weights) {
                if w > 0.0 {
                    acc.axpy(w, y, 1.0);
                    total += w;
                }
            }
            if !(total > 0.0) {
                return Ok((base.clone(), 0.0));
            }
            acc /= total;
            let step = self.distance(base, &acc)?;
            Ok((acc, step))
        })())
    }

    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> DVector<f64> {
        DVector::from_fn(self.dim, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
    }

    fn parse_point(&self, fields: &[&str]) -> Result<DVector<f64>> {
        let v = parse_floats(fields)?;
        if v.len() != self.dim {
            return Err(Error::Shape(format!("expected {} columns, found {}", self.dim, v.len())));
        }
        Ok(DVector::from_vec(v))
    }

    fn coordinates(&self, p: &DVector<f64>) -> Vec<f64> {
        p.as_slice().to_vec()
    }

    fn format_point(&self, p: &DVector<f64>) -> Vec<String> {
        p.iter().map(|x| x.to_string()).collect()
    }
}
