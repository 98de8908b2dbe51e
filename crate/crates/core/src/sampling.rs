//! Seeded distributions with a known population τ-Fréchet mean, and
//! ε-contamination.
//!
//! Every family is symmetric under an isometry group whose only common fixed
//! point is the construction center, so the population mean is the center for
//! every transform with a unique minimizer:
//!
//! * radial laws in ℝᵈ: orthogonal maps about the center,
//! * star trees: leg permutations (at least three legs),
//! * SPD matrices: the geodesic symmetry `C^½ e^V C^½ ↦ C^½ e^{-V} C^½`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{domain, Error, Result};
use crate::ext::ExtReal;
use crate::rng::{mix_seed, substream, tag};
use crate::spaces::{Euclidean, HadamardSpace, MetricTree, Spd, TreePoint};
use crate::transforms::Transform;

/// Median of |Z| for a standard normal Z.
const HALF_NORMAL_MEDIAN: f64 = 0.674_489_750_196_081_7;

/// Default leg length of the star tree family; far beyond any radius drawn in practice.
pub const DEFAULT_LEG_LENGTH: f64 = 1e9;

/// Law of the distance `d(Y, m)` to the center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialLaw {
    /// `P(R > r) = (scale / r)^a` for `r ≥ scale`.
    Pareto { a: f64, scale: f64 },
    /// `R = σ|Z|`.
    HalfGaussian { sigma: f64 },
    /// `P(R ≤ x) = (x / xmax)^k` on `[0, xmax]`.
    PowerCdf { k: f64, xmax: f64 },
    PointMass,
}

impl RadialLaw {
    pub fn pareto(a: f64, scale: f64) -> Result<Self> {
        positive("pareto index", a)?;
        positive("pareto scale", scale)?;
        Ok(Self::Pareto { a, scale })
    }

    pub fn half_gaussian(sigma: f64) -> Result<Self> {
        positive("sigma", sigma)?;
        Ok(Self::HalfGaussian { sigma })
    }

    pub fn power_cdf(k: f64, xmax: f64) -> Result<Self> {
        positive("cdf exponent", k)?;
        positive("xmax", xmax)?;
        Ok(Self::PowerCdf { k, xmax })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Self::Pareto { a, scale } => {
                let u = 1.0 - rng.random::<f64>();
                scale * u.powf(-1.0 / a)
            }
            Self::HalfGaussian { sigma } => {
                let z: f64 = rng.sample(StandardNormal);
                sigma * z.abs()
            }
            Self::PowerCdf { k, xmax } => {
                let u = 1.0 - rng.random::<f64>();
                xmax * u.powf(1.0 / k)
            }
            Self::PointMass => 0.0,
        }
    }

    /// `E[R^b]`; infinite when the moment diverges.
    pub fn moment(&self, b: f64) -> ExtReal {
        if b == 0.0 {
            return ExtReal::Finite(1.0);
        }
        match *self {
            Self::Pareto { a, scale } => {
                if b >= a {
                    ExtReal::Infinite
                } else {
                    ExtReal::Finite(a * scale.powf(b) / (a - b))
                }
            }
            Self::HalfGaussian { sigma } => {
                if b <= -1.0 {
                    ExtReal::Infinite
                } else {
                    let g = libm::tgamma((b + 1.0) / 2.0);
                    ExtReal::Finite(sigma.powf(b) * 2f64.powf(b / 2.0) * g / std::f64::consts::PI.sqrt())
                }
            }
            Self::PowerCdf { k, xmax } => {
                if k + b <= 0.0 {
                    ExtReal::Infinite
                } else {
                    ExtReal::Finite(k * xmax.powf(b) / (k + b))
                }
            }
            Self::PointMass => {
                if b > 0.0 {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::Infinite
                }
            }
        }
    }

    /// `χ = median(R)`.
    pub fn median(&self) -> f64 {
        match *self {
            Self::Pareto { a, scale } => scale * 2f64.powf(1.0 / a),
            Self::HalfGaussian { sigma } => HALF_NORMAL_MEDIAN * sigma,
            Self::PowerCdf { k, xmax } => xmax * 2f64.powf(-1.0 / k),
            Self::PointMass => 0.0,
        }
    }

    /// `P(R > r)`.
    pub fn tail(&self, r: f64) -> f64 {
        match *self {
            Self::Pareto { a, scale } => {
                if r < scale {
                    1.0
                } else {
                    (scale / r).powf(a)
                }
            }
            Self::HalfGaussian { sigma } => libm::erfc(r / (sigma * std::f64::consts::SQRT_2)).min(1.0),
            Self::PowerCdf { k, xmax } => {
                if r >= xmax {
                    0.0
                } else if r <= 0.0 {
                    1.0
                } else {
                    1.0 - (r / xmax).powf(k)
                }
            }
            Self::PointMass => {
                if r < 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

impl fmt::Display for RadialLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pareto { a, scale } => write!(f, "pareto:{a}:{scale}"),
            Self::HalfGaussian { sigma } => write!(f, "halfgauss:{sigma}"),
            Self::PowerCdf { k, xmax } => write!(f, "powercdf:{k}:{xmax}"),
            Self::PointMass => write!(f, "pointmass"),
        }
    }
}

impl FromStr for RadialLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        match parts.as_slice() {
            ["pareto", a, scale] => Self::pareto(num(a)?, num(scale)?),
            ["halfgauss" | "half-gaussian", sigma] => Self::half_gaussian(num(sigma)?),
            ["powercdf", k, xmax] => Self::power_cdf(num(k)?, num(xmax)?),
            ["pointmass"] => Ok(Self::PointMass),
            _ => Err(Error::Parse(format!("unknown radial law `{s}`"))),
        }
    }
}

/// A law on a space whose samples are drawn one substream per point.
pub trait Distribution: Send + Sync {
    type Space: HadamardSpace;

    fn space(&self) -> &Self::Space;

    fn describe(&self) -> String;

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> <Self::Space as HadamardSpace>::Point;

    /// Population τ-Fréchet mean.
    fn population_mean(&self, t: &Transform) -> Result<<Self::Space as HadamardSpace>::Point>;

    /// Law of `d(Y, m)` when it is known in closed form.
    fn radial_law(&self) -> Option<RadialLaw> {
        None
    }
}

/// Draws `n` points; point `i` uses substream `i` of `seed`.
pub fn sample<D: Distribution>(dist: &D, n: usize, seed: u64) -> Result<Vec<<D::Space as HadamardSpace>::Point>> {
    if n == 0 {
        return Err(domain("sample size must be at least 1"));
    }
    Ok((0..n as u64).map(|i| dist.draw(&mut substream(seed, i))).collect())
}

/// Indicator of replacement for each of `n` points, independently with probability `eps`.
pub fn contamination_mask(n: usize, eps: f64, seed: u64) -> Result<Vec<bool>> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(domain(format!("contamination fraction {eps} outside (0, 1)")));
    }
    let seed = mix_seed(&[seed, tag("contaminate")]);
    Ok((0..n as u64).map(|i| substream(seed, i).random::<f64>() < eps).collect())
}

/// Replaces each point by `contaminant` independently with probability `eps`.
pub fn contaminate<P: Clone>(points: &[P], eps: f64, contaminant: &P, seed: u64) -> Result<Vec<P>> {
    let mask = contamination_mask(points.len(), eps, seed)?;
    Ok(points
        .iter()
        .zip(mask)
        .map(|(p, hit)| if hit { contaminant.clone() } else { p.clone() })
        .collect())
}

/// Rotationally symmetric law about `center` in ℝᵈ.
#[derive(Debug, Clone)]
pub struct RadialSymmetric {
    space: Euclidean,
    center: DVector<f64>,
    law: RadialLaw,
}

impl RadialSymmetric {
    pub fn new(center: DVector<f64>, law: RadialLaw) -> Result<Self> {
        let space = Euclidean::new(center.len())?;
        space.check_point(&center)?;
        Ok(Self { space, center, law })
    }

    pub fn centered(dim: usize, law: RadialLaw) -> Result<Self> {
        Self::new(DVector::zeros(dim), law)
    }

    pub fn law(&self) -> RadialLaw {
        self.law
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
}

/// Uniform direction on the unit sphere of ℝᵈ (a random sign when d = 1).
pub fn unit_direction<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
        let norm = g.norm();
        if norm > 1e-300 {
            return g / norm;
        }
    }
}

impl Distribution for RadialSymmetric {
    type Space = Euclidean;

    fn space(&self) -> &Euclidean {
        &self.space
    }

    fn describe(&self) -> String {
        format!("radial:{}@euclidean:{}", self.law, self.space.dim())
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let dir = unit_direction(rng, self.space.dim());
        let r = self.law.draw(rng);
        &self.center + dir * r
    }

    fn population_mean(&self, _t: &Transform) -> Result<DVector<f64>> {
        Ok(self.center.clone())
    }

    fn radial_law(&self) -> Option<RadialLaw> {
        Some(self.law)
    }
}

/// Hub-centered law on a star tree: uniform leg, radius from the law clipped to the leg.
#[derive(Debug, Clone)]
pub struct StarSymmetric {
    tree: MetricTree,
    legs: usize,
    length: f64,
    law: RadialLaw,
}

impl StarSymmetric {
    pub fn new(legs: usize, law: RadialLaw, length: f64) -> Result<Self> {
        if legs < 3 {
            return Err(domain("a symmetric star law needs at least 3 legs"));
        }
        let tree = MetricTree::star(legs, length)?;
        Ok(Self { tree, legs, length, law })
    }

    pub fn law(&self) -> RadialLaw {
        self.law
    }
}

impl Distribution for StarSymmetric {
    type Space = MetricTree;

    fn space(&self) -> &MetricTree {
        &self.tree
    }

    fn describe(&self) -> String {
        format!("star:{}:{}", self.legs, self.law)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> TreePoint {
        let leg = rng.random_range(0..self.legs);
        let r = self.law.draw(rng).min(self.length);
        self.tree.canonicalize(TreePoint::new(leg, r))
    }

    fn population_mean(&self, _t: &Transform) -> Result<TreePoint> {
        Ok(self.tree.vertex(0))
    }

    fn radial_law(&self) -> Option<RadialLaw> {
        // clipping only matters beyond the leg length
        (self.law.tail(self.length) == 0.0 || self.length >= DEFAULT_LEG_LENGTH).then_some(self.law)
    }
}

/// `C^½ exp(V) C^½` with `V` a symmetric Gaussian matrix (diagonal variance
/// `scale²`, off-diagonal `scale²/2`).
#[derive(Debug, Clone)]
pub struct SpdSymmetric {
    space: Spd,
    center: DMatrix<f64>,
    root: DMatrix<f64>,
    scale: f64,
}

impl SpdSymmetric {
    pub fn new(center: DMatrix<f64>, scale: f64) -> Result<Self> {
        let space = Spd::new(center.nrows())?;
        space.check_point(&center)?;
        positive("tangent scale", scale)?;
        let root = crate::linalg::sym_eigen(&center)?.map(f64::sqrt);
        Ok(Self { space, center, root, scale })
    }

    pub fn at_identity(dim: usize, scale: f64) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim), scale)
    }
}

impl Distribution for SpdSymmetric {
    type Space = Spd;

    fn space(&self) -> &Spd {
        &self.space
    }

    fn describe(&self) -> String {
        format!("spd-sym:{}:{}", self.space.dim(), self.scale)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let d = self.space.dim();
        let mut v = DMatrix::zeros(d, d);
        for i in 0..d {
            v[(i, i)] = self.scale * rng.sample::<f64, _>(StandardNormal);
            for j in 0..i {
                let x = self.scale * std::f64::consts::FRAC_1_SQRT_2 * rng.sample::<f64, _>(StandardNormal);
                v[(i, j)] = x;
                v[(j, i)] = x;
            }
        }
        // a symmetric matrix always has a convergent Jacobi decomposition at this size
        let e = self.space.sym_exp(&v).expect("exponential of a symmetric matrix");
        let y = &self.root * e * &self.root;
        (&y + y.transpose()) * 0.5
    }

    fn population_mean(&self, _t: &Transform) -> Result<DMatrix<f64>> {
        Ok(self.center.clone())
    }
}

/// Two atoms `(±1, 0)` of mass `ρ/2` each and two far spikes of mass
/// `(1-ρ)/2` each at distance `s` from the origin, at angles 80° and 100°.
#[derive(Debug, Clone)]
pub struct FourPoint {
    space: Euclidean,
    rho: f64,
    s: f64,
}

impl FourPoint {
    pub fn new(rho: f64, s: f64) -> Result<Self> {
        if !(rho > 0.5 && rho <= 1.0) {
            return Err(domain(format!("four-point mass {rho} outside (1/2, 1]")));
        }
        positive("spike distance", s)?;
        Ok(Self { space: Euclidean::new(2)?, rho, s })
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    /// The four support points: left atom, right atom, spikes.
    pub fn atoms(&self) -> [DVector<f64>; 4] {
        let spike = |deg: f64| {
            let a = deg.to_radians();
            DVector::from_vec(vec![self.s * a.cos(), self.s * a.sin()])
        };
        [
            DVector::from_vec(vec![-1.0, 0.0]),
            DVector::from_vec(vec![1.0, 0.0]),
            spike(80.0),
            spike(100.0),
        ]
    }

    /// Smallest multiset whose empirical law equals the population law exactly.
    pub fn balanced_sample(&self) -> Result<Vec<DVector<f64>>> {
        for total in (2..=20_000).step_by(2) {
            let core = self.rho * total as f64 / 2.0;
            let spikes = (1.0 - self.rho) * total as f64 / 2.0;
            if (core - core.round()).abs() < 1e-9 && (spikes - spikes.round()).abs() < 1e-9 {
                let counts = [core.round(), core.round(), spikes.round(), spikes.round()];
                return Ok(self
                    .atoms()
                    .into_iter()
                    .zip(counts)
                    .flat_map(|(p, c)| std::iter::repeat_n(p, c as usize))
                    .collect());
            }
        }
        Err(domain(format!("mass {} has no small balanced multiset", self.rho)))
    }
}

impl Distribution for FourPoint {
    type Space = Euclidean;

    fn space(&self) -> &Euclidean {
        &self.space
    }

    fn describe(&self) -> String {
        format!("fourpoint:{}:{}", self.rho, self.s)
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let u = rng.random::<f64>();
        let atoms = self.atoms();
        let half = self.rho / 2.0;
        let idx = if u < half {
            0
        } else if u < self.rho {
            1
        } else if u < self.rho + (1.0 - self.rho) / 2.0 {
            2
        } else {
            3
        };
        atoms[idx].clone()
    }

    fn population_mean(&self, _t: &Transform) -> Result<DVector<f64>> {
        Err(Error::NoAnalyticMean("the four-point family is not symmetric".into()))
    }
}

/// Parsed distribution grammar:
/// `radial:<law>@euclidean:<d>`, `star:<legs>:<law>`, `spd-sym:<d>:<scale>`, `fourpoint:<rho>:<s>`.
#[derive(Debug, Clone, PartialEq)]
pub enum DistributionSpec {
    Radial { dim: usize, law: RadialLaw },
    Star { legs: usize, law: RadialLaw },
    SpdSym { dim: usize, scale: f64 },
    FourPoint { rho: f64, s: f64 },
}

impl fmt::Display for DistributionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Radial { dim, law } => write!(f, "radial:{law}@euclidean:{dim}"),
            Self::Star { legs, law } => write!(f, "star:{legs}:{law}"),
            Self::SpdSym { dim, scale } => write!(f, "spd-sym:{dim}:{scale}"),
            Self::FourPoint { rho, s } => write!(f, "fourpoint:{rho}:{s}"),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse(format!("unknown distribution `{s}`"));
        let (head, rest) = s.split_once(':').ok_or_else(bad)?;
        match head {
            "radial" => {
                let (law, space) = rest.split_once('@').ok_or_else(bad)?;
                let dim = space.strip_prefix("euclidean:").ok_or_else(bad)?;
                Ok(Self::Radial { dim: count(dim)?, law: law.parse()? })
            }
            "star" => {
                let (legs, law) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Self::Star { legs: count(legs)?, law: law.parse()? })
            }
            "spd-sym" => {
                let (dim, scale) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Self::SpdSym { dim: count(dim)?, scale: num(scale)? })
            }
            "fourpoint" => {
                let (rho, spike) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Self::FourPoint { rho: num(rho)?, s: num(spike)? })
            }
            _ => Err(bad()),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("{name} must be positive and finite, got {v}")))
    }
}

fn num(s: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad number `{s}`")))
}

fn count(s: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::Parse(format!("bad count `{s}`")))
}
