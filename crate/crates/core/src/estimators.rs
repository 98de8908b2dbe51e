//! Empirical τ-Fréchet means `m_n = argmin_q (1/n) Σ τ(d(Yᵢ, q))`.
//!
//! Two solvers are provided:
//!
//! * **Weiszfeld** (iteratively reweighted tangent averaging). With
//!   `wᵢ = τ'(dᵢ)/dᵢ` the update `x ← Exp_x(Σ wᵢ Log_x Yᵢ / Σ wᵢ)` is the
//!   classical Weiszfeld step for the median and the arithmetic mean for
//!   `τ(x) = x²`. Points within the distance floor of the iterate are handled
//!   as in Vardi and Zhang: they contribute `η = Σ τ'(0)` to a subgradient
//!   ball, the iterate is optimal if the pull of the other points is at most
//!   `η`, and the step is otherwise shortened by the factor `1 - η/r`.
//!   Requires a tangent structure (Euclidean and SPD spaces).
//! * **Cyclic proximal point** for any geodesic space, followed by a
//!   refinement phase of exact line searches along geodesics towards the
//!   sample points. On a tree every descent direction at `x` points into a
//!   branch that holds sample points, so these directions suffice.
//!
//! Convergence is certified by the stopping rule together with a first-order
//! check: short moves towards random sample points must not decrease the
//! objective.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::rng::mix_seed;
use crate::spaces::HadamardSpace;
use crate::stats;
use crate::transforms::{Transform, TransformKind};

/// Number of random directions in the first-order certificate.
const CERTIFICATE_DIRECTIONS: usize = 32;
/// Relative objective decrease tolerated by the certificate.
const CERTIFICATE_SLACK: f64 = 1e-9;
/// Sample points checked as alternative minimizers when the solver stops.
const ANCHOR_NEIGHBOURS: usize = 8;
/// Weiszfeld epochs between anchor checks.
const ANCHOR_PERIOD: usize = 50;
const MAX_BACKTRACKS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverMethod {
    Weiszfeld,
    CyclicProx,
    /// Weiszfeld where the space has a tangent structure, cyclic prox otherwise.
    Auto,
}

impl fmt::Display for SolverMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Weiszfeld => "weiszfeld",
            Self::CyclicProx => "cyclic_prox",
            Self::Auto => "auto",
        })
    }
}

impl FromStr for SolverMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weiszfeld" => Ok(Self::Weiszfeld),
            "cyclic_prox" | "cyclic-prox" => Ok(Self::CyclicProx),
            "auto" => Ok(Self::Auto),
            _ => Err(Error::Parse(format!("unknown solver method `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub max_epochs: usize,
    /// Relative objective decrease per epoch.
    pub tol_obj: f64,
    /// Point movement per epoch, in distance units.
    pub tol_step: f64,
    pub prox_lambda0: f64,
    /// Prox epochs before switching to geodesic line searches.
    pub prox_epochs: usize,
    /// Run the line-search phase after the prox epochs.
    pub refine: bool,
    pub weiszfeld_floor: f64,
    pub shuffle_seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: SolverMethod::Auto,
            max_epochs: 500,
            tol_obj: 1e-10,
            tol_step: 1e-9,
            prox_lambda0: 1.0,
            prox_epochs: 20,
            refine: true,
            weiszfeld_floor: 1e-9,
            shuffle_seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("tol_obj", self.tol_obj),
            ("tol_step", self.tol_step),
            ("prox_lambda0", self.prox_lambda0),
            ("weiszfeld_floor", self.weiszfeld_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EstimateResult<P> {
    pub point: P,
    /// `(1/n) Σ τ(d(Yᵢ, point))`, summed in sample order.
    pub objective: f64,
    pub epochs_used: usize,
    pub converged: bool,
    pub final_step: f64,
    pub method: SolverMethod,
}

/// `(1/n) Σ τ(d(Yᵢ, q))`, accumulated in index order.
pub fn objective<S: HadamardSpace>(space: &S, t: &Transform, sample: &[S::Point], q: &S::Point) -> Result<f64> {
    if sample.is_empty() {
        return Err(domain("objective of an empty sample"));
    }
    let mut terms = Vec::with_capacity(sample.len());
    for y in sample {
        terms.push(t.tau_unchecked(space.distance(y, q)?));
    }
    let v = stats::sum(terms) / sample.len() as f64;
    if v.is_nan() {
        return Err(Error::Numeric("objective evaluated to NaN".into()));
    }
    Ok(v)
}

/// Minimizer of `s ↦ τ(d - s) + s²/(2λ)` over `[0, d]`.
pub fn prox_step(t: &Transform, d: f64, lambda: f64) -> f64 {
    if !(d > 0.0) {
        return 0.0;
    }
    match t.kind() {
        TransformKind::Identity => return lambda.min(d),
        TransformKind::Power { alpha } if alpha == 2.0 => return 2.0 * lambda * d / (1.0 + 2.0 * lambda),
        _ => {}
    }
    // g(s) = τ'(d - s) - s/λ is decreasing; find its crossing
    let g = |s: f64| t.dtau_unchecked((d - s).max(0.0)) - s / lambda;
    if g(d) >= 0.0 {
        return d;
    }
    let (mut lo, mut hi) = (0.0, d);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Empirical τ-Fréchet mean of `sample`.
pub fn estimate<S: HadamardSpace>(
    space: &S,
    t: &Transform,
    sample: &[S::Point],
    cfg: &SolverConfig,
) -> Result<EstimateResult<S::Point>> {
    estimate_from(space, t, sample, cfg, None)
}

/// As [`estimate`], optionally warm-started at `start`.
pub fn estimate_from<S: HadamardSpace>(
    space: &S,
    t: &Transform,
    sample: &[S::Point],
    cfg: &SolverConfig,
    start: Option<&S::Point>,
) -> Result<EstimateResult<S::Point>> {
    cfg.validate()?;
    if sample.is_empty() {
        return Err(domain("cannot estimate from an empty sample"));
    }
    for y in sample {
        space.check_point(y)?;
    }
    let has_tangent = space.tangent_average(&sample[0], &sample[..1], &[1.0]).is_some();
    let method = match cfg.method {
        SolverMethod::Auto if has_tangent => SolverMethod::Weiszfeld,
        SolverMethod::Auto => SolverMethod::CyclicProx,
        SolverMethod::Weiszfeld if !has_tangent => {
            return Err(Error::Config(format!("weiszfeld needs a tangent structure; {} has none", space.describe())))
        }
        m => m,
    };
    let mut solver = Solver { space, t, cfg, sample };
    let (point, epochs_used, converged, final_step) = match method {
        SolverMethod::Weiszfeld => solver.weiszfeld(start)?,
        _ => solver.cyclic_prox(start)?,
    };
    let objective = objective(space, t, sample, &point)?;
    Ok(EstimateResult { point, objective, epochs_used, converged, final_step, method })
}

/// Estimates on the samples with `Yᵢ` replaced by `fresh[i]`, warm-started at `m_n`.
pub fn replace_one_estimates<S: HadamardSpace>(
    space: &S,
    t: &Transform,
    sample: &[S::Point],
    fresh: &[S::Point],
    cfg: &SolverConfig,
    m_n: &S::Point,
) -> Result<Vec<EstimateResult<S::Point>>> {
    if fresh.len() != sample.len() {
        return Err(Error::Shape(format!(
            "{} replacement points for a sample of {}",
            fresh.len(),
            sample.len()
        )));
    }
    let mut work = sample.to_vec();
    let mut out = Vec::with_capacity(sample.len());
    for (i, y) in fresh.iter().enumerate() {
        let original = std::mem::replace(&mut work[i], y.clone());
        out.push(estimate_from(space, t, &work, cfg, Some(m_n))?);
        work[i] = original;
    }
    Ok(out)
}

struct Solver<'a, S: HadamardSpace> {
    space: &'a S,
    t: &'a Transform,
    cfg: &'a SolverConfig,
    sample: &'a [S::Point],
}

impl<S: HadamardSpace> Solver<'_, S> {
    fn obj(&self, pts: &[S::Point], q: &S::Point) -> Result<f64> {
        objective(self.space, self.t, pts, q)
    }

    fn stopped(&self, before: f64, after: f64, step: f64) -> bool {
        let rel = (before - after) / before.abs().max(f64::MIN_POSITIVE);
        rel < self.cfg.tol_obj && step < self.cfg.tol_step
    }

    /// Index order of the sample sorted by coordinates; makes the solver
    /// independent of the input permutation.
    fn canonical(&self) -> Vec<S::Point> {
        let keys: Vec<Vec<f64>> = self.sample.iter().map(|p| self.space.coordinates(p)).collect();
        let mut idx: Vec<usize> = (0..self.sample.len()).collect();
        idx.sort_by(|&a, &b| {
            keys[a]
                .iter()
                .zip(&keys[b])
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| *o != Ordering::Equal)
                .unwrap_or(Ordering::Equal)
        });
        idx.into_iter().map(|i| self.sample[i].clone()).collect()
    }

    fn weiszfeld(&mut self, start: Option<&S::Point>) -> Result<(S::Point, usize, bool, f64)> {
        let pts = self.canonical();
        let n = pts.len();
        let floor = self.cfg.weiszfeld_floor;
        let dtau0 = self.t.dtau_unchecked(0.0);
        let mut x = match start {
            Some(s) => s.clone(),
            None => self.tangent(&pts[0], &pts, &vec![1.0; n])?.0,
        };
        let mut f = self.obj(&pts, &x)?;
        let mut weights = vec![0.0; n];
        let mut step = f64::INFINITY;
        for epoch in 1..=self.cfg.max_epochs {
            let mut eta = 0.0;
            for (w, y) in weights.iter_mut().zip(&pts) {
                let d = self.space.distance(&x, y)?;
                if d < floor {
                    *w = 0.0;
                    eta += dtau0;
                } else {
                    *w = self.t.dtau_unchecked(d) / d;
                }
            }
            let total: f64 = stats::sum(weights.iter().copied());
            let mut next = x.clone();
            if total > 0.0 {
                let (target, len) = self.tangent(&x, &pts, &weights)?;
                let pull = total * len;
                if pull > eta && len > 0.0 {
                    next = self.space.geodesic_unchecked(&x, &target, 1.0 - eta / pull)?;
                }
            }
            let mut f_next = self.obj(&pts, &next)?;
            // the majorization step descends in flat space; elsewhere guard it
            let mut tries = 0;
            while f_next > f && tries < MAX_BACKTRACKS {
                tries += 1;
                next = self.space.geodesic_unchecked(&x, &next, 0.5)?;
                f_next = self.obj(&pts, &next)?;
            }
            if f_next > f {
                next = x.clone();
                f_next = f;
            }
            step = self.space.distance(&x, &next)?;
            let before = f;
            x = next;
            f = f_next;
            if self.stopped(before, f, step) {
                if let Some((better, fb)) = self.better_anchor(&pts, &x, f)? {
                    x = better;
                    f = fb;
                    continue;
                }
                let ok = self.certificate(&pts, &x, f, epoch)?;
                return Ok((x, epoch, ok, step));
            }
            // the iteration crawls towards a minimizer sitting on a sample point
            if epoch % ANCHOR_PERIOD == 0 {
                if let Some((better, fb)) = self.better_anchor(&pts, &x, f)? {
                    x = better;
                    f = fb;
                }
            }
        }
        if let Some((better, _)) = self.better_anchor(&pts, &x, f)? {
            x = better;
        }
        Ok((x, self.cfg.max_epochs, false, step))
    }

    fn tangent(&self, base: &S::Point, pts: &[S::Point], w: &[f64]) -> Result<(S::Point, f64)> {
        self.space
            .tangent_average(base, pts, w)
            .ok_or_else(|| Error::Config("space has no tangent averaging".into()))?
    }

    fn cyclic_prox(&mut self, start: Option<&S::Point>) -> Result<(S::Point, usize, bool, f64)> {
        let pts = self.sample;
        let mut x = start.cloned().unwrap_or_else(|| pts[0].clone());
        let mut f = self.obj(pts, &x)?;
        let mut best = (x.clone(), f);
        let mut order: Vec<usize> = (0..pts.len()).collect();
        let mut step = f64::INFINITY;
        let prox_epochs = if self.cfg.refine { self.cfg.prox_epochs } else { self.cfg.max_epochs };
        let mut epoch = 0;
        while epoch < self.cfg.max_epochs.min(prox_epochs) && start.is_none() {
            epoch += 1;
            let lambda = self.cfg.prox_lambda0 / epoch as f64;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.cfg.shuffle_seed, epoch as u64]));
            order.shuffle(&mut rng);
            let begin = x.clone();
            for &i in &order {
                let d = self.space.distance(&x, &pts[i])?;
                if d > 0.0 {
                    let s = prox_step(self.t, d, lambda);
                    x = self.space.geodesic_unchecked(&x, &pts[i], s / d)?;
                }
            }
            step = self.space.distance(&begin, &x)?;
            let before = f;
            f = self.obj(pts, &x)?;
            if f < best.1 {
                best = (x.clone(), f);
            }
            if !self.cfg.refine && self.stopped(before, f, step) {
                let ok = self.certificate(pts, &x, f, epoch)?;
                return Ok((x, epoch, ok, step));
            }
        }
        if !self.cfg.refine {
            return Ok((best.0, epoch, false, step));
        }
        let (mut x, mut f) = best;
        while epoch < self.cfg.max_epochs {
            epoch += 1;
            let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.cfg.shuffle_seed, epoch as u64, 1]));
            order.shuffle(&mut rng);
            let begin = x.clone();
            let before = f;
            for &i in &order {
                if let Some((y, fy)) = self.line_search(pts, &x, f, &pts[i])? {
                    x = y;
                    f = fy;
                }
            }
            step = self.space.distance(&begin, &x)?;
            if self.stopped(before, f, step) {
                if let Some((better, fb)) = self.better_anchor(pts, &x, f)? {
                    x = better;
                    f = fb;
                    continue;
                }
                let ok = self.certificate(pts, &x, f, epoch)?;
                return Ok((x, epoch, ok, step));
            }
        }
        Ok((x, epoch, false, step))
    }

    /// Golden-section search of the objective on the geodesic from `x` to `y`.
    fn line_search(&self, pts: &[S::Point], x: &S::Point, fx: f64, y: &S::Point) -> Result<Option<(S::Point, f64)>> {
        let len = self.space.distance(x, y)?;
        if len <= 0.0 {
            return Ok(None);
        }
        let phi = |s: f64| -> Result<(S::Point, f64)> {
            let p = self.space.geodesic_unchecked(x, y, s)?;
            let v = self.obj(pts, &p)?;
            Ok((p, v))
        };
        // skip directions that ascend right away
        let probe = (1e-3 * self.cfg.tol_step / len).min(1.0);
        if phi(probe)?.1 >= fx {
            return Ok(None);
        }
        const INV_PHI: f64 = 0.618_033_988_749_894_9;
        let (mut a, mut b) = (0.0, 1.0);
        let mut c = b - INV_PHI * (b - a);
        let mut d = a + INV_PHI * (b - a);
        let mut fc = phi(c)?.1;
        let mut fd = phi(d)?.1;
        let width = 1e-3 * self.cfg.tol_step / len;
        while (b - a) > width && (b - a) > 1e-15 {
            if fc <= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - INV_PHI * (b - a);
                fc = phi(c)?.1;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + INV_PHI * (b - a);
                fd = phi(d)?.1;
            }
        }
        let mut cands = vec![phi(0.5 * (a + b))?, phi(probe)?];
        if b >= 1.0 {
            cands.push(phi(1.0)?);
        }
        let (p, v) = cands
            .into_iter()
            .min_by(|u, w| u.1.total_cmp(&w.1))
            .expect("nonempty");
        Ok((v < fx).then_some((p, v)))
    }

    /// A nearby sample point with a lower objective, if any.
    fn better_anchor(&self, pts: &[S::Point], x: &S::Point, fx: f64) -> Result<Option<(S::Point, f64)>> {
        let mut near: Vec<(f64, usize)> = Vec::with_capacity(pts.len());
        for (i, y) in pts.iter().enumerate() {
            near.push((self.space.distance(x, y)?, i));
        }
        near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut best: Option<(S::Point, f64)> = None;
        for &(d, i) in near.iter().take(ANCHOR_NEIGHBOURS) {
            if d == 0.0 {
                continue;
            }
            let v = self.obj(pts, &pts[i])?;
            let bar = best.as_ref().map_or(fx, |b| b.1);
            if v < bar - 1e-15 * bar.abs() {
                best = Some((pts[i].clone(), v));
            }
        }
        Ok(best)
    }

    /// First-order check: moves of length `10·tol_step` towards random sample points.
    fn certificate(&self, pts: &[S::Point], x: &S::Point, fx: f64, epoch: usize) -> Result<bool> {
        let h = 10.0 * self.cfg.tol_step;
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.cfg.shuffle_seed, epoch as u64, 2]));
        idx.shuffle(&mut rng);
        for &i in idx.iter().take(CERTIFICATE_DIRECTIONS) {
            let d = self.space.distance(x, &pts[i])?;
            if d <= 0.0 {
                continue;
            }
            let p = self.space.geodesic_unchecked(x, &pts[i], (h / d).min(1.0))?;
            let v = self.obj(pts, &p)?;
            if v < fx - CERTIFICATE_SLACK * fx.abs() {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
