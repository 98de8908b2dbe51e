//! Hadamard space models: distance, constant-speed geodesics, one-sided
//! distance derivatives along geodesics, bow ties and the quadruple gap.

mod euclidean;
mod io;
mod spd;
mod tree;

use std::fmt::Debug;

use rand::Rng;

pub use euclidean::Euclidean;
pub use io::{read_points, write_points, AnySpace, SpaceSpec, DEFAULT_STAR_LENGTH};
pub use spd::Spd;
pub use tree::{MetricTree, TreePoint};

use crate::error::{domain, Error, Result};
use crate::transforms::{Transform, TransformKind};

/// Which end of the geodesic a one-sided derivative is taken at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicEnd {
    /// Right derivative at `t = 0`.
    Start,
    /// Left derivative at `t = d(q, p)`.
    Finish,
}

/// Absolute tolerance used to decide that two points coincide.
pub const POINT_EQ_TOL: f64 = 1e-12;

/// A complete CAT(0) metric space with computable geodesics.
pub trait HadamardSpace: Send + Sync {
    type Point: Clone + Debug + Send + Sync;

    /// Spec string of the model, e.g. `euclidean:3`.
    fn describe(&self) -> String;

    fn check_point(&self, p: &Self::Point) -> Result<()>;

    fn distance(&self, q: &Self::Point, p: &Self::Point) -> Result<f64>;

    /// Constant-speed geodesic from `q` (t = 0) to `p` (t = 1); `t` already validated.
    fn geodesic_unchecked(&self, q: &Self::Point, p: &Self::Point, t: f64) -> Result<Self::Point>;

    fn geodesic_point(&self, q: &Self::Point, p: &Self::Point, t: f64) -> Result<Self::Point> {
        if !(0.0..=1.0).contains(&t) {
            return Err(domain(format!("geodesic parameter {t} outside [0, 1]")));
        }
        self.geodesic_unchecked(q, p, t)
    }

    fn same_point(&self, a: &Self::Point, b: &Self::Point) -> bool {
        self.distance(a, b).map(|d| d <= POINT_EQ_TOL).unwrap_or(false)
    }

    /// One-sided derivative of `t ↦ d(y, γ(t))` along the unit-speed geodesic
    /// from `q` to `p`. The default uses a one-sided finite difference with
    /// step `1e-6 · max(1, d(q, p))`.
    fn directional_derivative(
        &self,
        y: &Self::Point,
        q: &Self::Point,
        p: &Self::Point,
        end: GeodesicEnd,
    ) -> Result<f64> {
        let len = self.distance(q, p)?;
        if len <= POINT_EQ_TOL {
            return Err(Error::Degenerate("geodesic endpoints coincide".into()));
        }
        let h = (1e-6 * len.max(1.0)).min(0.5 * len);
        let frac = h / len;
        match end {
            GeodesicEnd::Start => {
                let d0 = self.distance(y, q)?;
                if d0 <= POINT_EQ_TOL {
                    return Err(Error::Degenerate("point coincides with the start knot".into()));
                }
                let near = self.geodesic_unchecked(q, p, frac)?;
                Ok((self.distance(y, &near)? - d0) / h)
            }
            GeodesicEnd::Finish => {
                let d1 = self.distance(y, p)?;
                if d1 <= POINT_EQ_TOL {
                    return Err(Error::Degenerate("point coincides with the finish knot".into()));
                }
                let near = self.geodesic_unchecked(q, p, 1.0 - frac)?;
                Ok((d1 - self.distance(y, &near)?) / h)
            }
        }
    }

    /// Weighted tangent-space average at `base`, where the space has one.
    ///
    /// Returns `T = Exp_base(Σ wᵢ Log_base(yᵢ) / Σ wᵢ)` together with the norm
    /// of the averaged tangent vector, which equals `d(base, T)`. Points with
    /// zero weight are ignored. Spaces without a linear tangent structure
    /// (metric trees) return `None`.
    fn tangent_average(
        &self,
        _base: &Self::Point,
        _points: &[Self::Point],
        _weights: &[f64],
    ) -> Option<Result<(Self::Point, f64)>> {
        None
    }

    /// A random point at roughly the given spread around the space's origin.
    fn random_point<R: Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Self::Point;

    /// Parses one CSV record of the point format.
    fn parse_point(&self, fields: &[&str]) -> Result<Self::Point>;

    /// Formats a point as one CSV record.
    fn format_point(&self, p: &Self::Point) -> Vec<String>;

    /// Numeric coordinates of the CSV record, used as a canonical sort key.
    fn coordinates(&self, p: &Self::Point) -> Vec<f64> {
        self.format_point(p)
            .iter()
            .map(|f| f.parse().unwrap_or(f64::NAN))
            .collect()
    }
}

pub(crate) fn parse_floats(fields: &[&str]) -> Result<Vec<f64>> {
    fields
        .iter()
        .map(|f| {
            let v = f
                .trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("bad number `{f}`")))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse(format!("non-finite coordinate `{f}`")))
            }
        })
        .collect()
}

/// Membership in the bow tie `B(q, p, w)`.
///
/// For `q ≠ p` a point belongs to the bow tie iff the larger squared one-sided
/// derivative of the distance to it (right derivative at `q`, left derivative
/// at `p`) is at least `1 - w²`. A point coinciding with a knot is contained.
/// For `q = p` the bow tie is `{q}` when `w < 1` and the whole space when `w = 1`.
pub fn bowtie_contains<S: HadamardSpace>(
    space: &S,
    q: &S::Point,
    p: &S::Point,
    w: f64,
    y: &S::Point,
) -> Result<bool> {
    if !(0.0..=1.0).contains(&w) {
        return Err(domain(format!("widening {w} outside [0, 1]")));
    }
    if space.same_point(q, p) {
        return Ok(w >= 1.0 || space.same_point(y, q));
    }
    if space.same_point(y, q) || space.same_point(y, p) {
        return Ok(true);
    }
    let d0 = space.directional_derivative(y, q, p, GeodesicEnd::Start)?;
    let d1 = space.directional_derivative(y, q, p, GeodesicEnd::Finish)?;
    // finite differences land a hair below 1 on exactly collinear points
    Ok(d0.powi(2).max(d1.powi(2)) >= 1.0 - w * w - 1e-9)
}

/// Constant `c` in `τ(d(y,q)) - τ(d(y,p)) - τ(d(z,q)) + τ(d(z,p)) ≤ c · d(q,p) · τ'(d(y,z))`.
///
/// For `τ(x) = x^α` the sharp bound `2^{2-α} α d(q,p) d(y,z)^{α-1}` is
/// `2^{2-α} d(q,p) τ'(d(y,z))`, so `c = 2^{2-α}`.
pub fn quadruple_constant(t: &Transform) -> f64 {
    match t.kind() {
        TransformKind::Power { alpha } => 2f64.powf(2.0 - alpha),
        _ => 2.0,
    }
}

/// Quadruple gap together with the largest absolute term, for relative tolerances.
#[derive(Debug, Clone, Copy)]
pub struct QuadrupleGap {
    pub gap: f64,
    pub max_term: f64,
}

/// Left side minus right side of the quadruple inequality; theory says `≤ 0`.
pub fn quadruple_gap<S: HadamardSpace>(
    space: &S,
    t: &Transform,
    q: &S::Point,
    p: &S::Point,
    y: &S::Point,
    z: &S::Point,
) -> Result<QuadrupleGap> {
    quadruple_gap_with_constant(space, t, quadruple_constant(t), q, p, y, z)
}

pub fn quadruple_gap_with_constant<S: HadamardSpace>(
    space: &S,
    t: &Transform,
    c: f64,
    q: &S::Point,
    p: &S::Point,
    y: &S::Point,
    z: &S::Point,
) -> Result<QuadrupleGap> {
    let yq = t.tau(space.distance(y, q)?)?;
    let yp = t.tau(space.distance(y, p)?)?;
    let zq = t.tau(space.distance(z, q)?)?;
    let zp = t.tau(space.distance(z, p)?)?;
    let rhs = c * space.distance(q, p)? * t.dtau(space.distance(y, z)?)?;
    let gap = yq - yp - zq + zp - rhs;
    let max_term = [yq, yp, zq, zp, rhs].into_iter().fold(0.0, f64::max);
    Ok(QuadrupleGap { gap, max_term })
}

/// `d(q, mid)² - (½d(y₀,q)² + ½d(y₁,q)² - ¼d(y₀,y₁)²)`, nonpositive in a CAT(0) space.
pub fn midpoint_gap<S: HadamardSpace>(space: &S, y0: &S::Point, y1: &S::Point, q: &S::Point) -> Result<f64> {
    let mid = space.geodesic_unchecked(y0, y1, 0.5)?;
    let lhs = space.distance(q, &mid)?.powi(2);
    let rhs = 0.5 * space.distance(y0, q)?.powi(2) + 0.5 * space.distance(y1, q)?.powi(2)
        - 0.25 * space.distance(y0, y1)?.powi(2);
    Ok(lhs - rhs)
}

#[cfg(test)]
mod tests;
