//! Closed-form risk, location and deviation bounds.
//!
//! All calculators are pure. Infinite moments propagate to an infinite bound
//! instead of NaN.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{domain, Error, Result};
use crate::ext::ExtReal;
use crate::sampling::RadialLaw;
use crate::stats;
use crate::transforms::{Classification, Transform};

/// Where a moment value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Analytic,
    /// Plug-in average over this many draws.
    PlugIn { draws: usize },
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Analytic => f.write_str("analytic"),
            Self::PlugIn { draws } => write!(f, "plugin-estimate({draws})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moment {
    pub value: ExtReal,
    pub provenance: Provenance,
}

/// Moments of `d(Y, m)` keyed by tag: `sigma_<a>` for `E[d^a]`, `sigma_dtau`
/// for `E[τ'(d)]`, `sigma_dtau_sq` for `E[τ'(d)²]`, and `chi` for the median.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentSet {
    entries: BTreeMap<String, Moment>,
}

pub fn power_tag(a: f64) -> String {
    // rounding keeps 2·1.8 - 2 and 1.6 on the same key
    format!("sigma_{}", (a * 1e9).round() / 1e9)
}

pub const CHI: &str = "chi";
pub const SIGMA_DTAU: &str = "sigma_dtau";
pub const SIGMA_DTAU_SQ: &str = "sigma_dtau_sq";

impl MomentSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, tag: impl Into<String>, value: ExtReal, provenance: Provenance) -> Result<()> {
        if let ExtReal::Finite(v) = value {
            if !(v >= 0.0) {
                return Err(domain(format!("moment values must be nonnegative, got {v}")));
            }
        }
        self.entries.insert(tag.into(), Moment { value, provenance });
        Ok(())
    }

    pub fn with_power(mut self, a: f64, value: f64) -> Self {
        self.insert(power_tag(a), ExtReal::from_f64(value), Provenance::Analytic)
            .expect("nonnegative moment");
        self
    }

    pub fn get(&self, tag: &str) -> Result<Moment> {
        self.entries
            .get(tag)
            .copied()
            .ok_or_else(|| Error::MissingMoment(tag.to_string()))
    }

    pub fn value(&self, tag: &str) -> Result<ExtReal> {
        Ok(self.get(tag)?.value)
    }

    pub fn sigma(&self, a: f64) -> Result<ExtReal> {
        self.value(&power_tag(a))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Moment)> {
        self.entries.iter()
    }

    /// True when any entry is a plug-in estimate.
    pub fn is_estimated(&self) -> bool {
        self.entries.values().any(|m| m.provenance != Provenance::Analytic)
    }

    /// Exponent pairs `(a, 2a)` that violate `σ_{2a} ≥ σ_a²` beyond a relative slack.
    pub fn jensen_violations(&self, slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        for (tag, m) in &self.entries {
            let Some(a) = tag.strip_prefix("sigma_").and_then(|s| s.parse::<f64>().ok()) else {
                continue;
            };
            if let (ExtReal::Finite(s1), Ok(ExtReal::Finite(s2))) = (m.value, self.sigma(2.0 * a)) {
                if s2 < s1 * s1 * (1.0 - slack) {
                    out.push(format!("sigma_{} < sigma_{a}^2", 2.0 * a));
                }
            }
        }
        out
    }

    /// Analytic power moments and median of a radial law.
    pub fn from_law(law: &RadialLaw, exponents: &[f64]) -> Result<Self> {
        let mut set = Self::new();
        for &a in exponents {
            set.insert(power_tag(a), law.moment(a), Provenance::Analytic)?;
        }
        set.insert(CHI, ExtReal::Finite(law.median()), Provenance::Analytic)?;
        Ok(set)
    }

    /// Plug-in power moments, median and `τ'` moments from draws of `d(Y, m)`.
    pub fn plug_in(distances: &[f64], exponents: &[f64], t: Option<&Transform>) -> Result<Self> {
        if distances.is_empty() {
            return Err(domain("plug-in moments need at least one draw"));
        }
        let prov = Provenance::PlugIn { draws: distances.len() };
        let mut set = Self::new();
        for &a in exponents {
            set.insert(power_tag(a), ExtReal::from_f64(stats::mean(distances.iter().map(|d| d.powf(a)))), prov)?;
        }
        set.insert(CHI, ExtReal::Finite(stats::median(distances)), prov)?;
        if let Some(t) = t {
            set.insert(SIGMA_DTAU, ExtReal::from_f64(stats::mean(distances.iter().map(|&d| t.dtau_unchecked(d)))), prov)?;
            set.insert(
                SIGMA_DTAU_SQ,
                ExtReal::from_f64(stats::mean(distances.iter().map(|&d| t.dtau_unchecked(d).powi(2)))),
                prov,
            )?;
        }
        Ok(set)
    }
}

/// `min(χ^{α-2} d², d^α)`.
pub fn power_loss(alpha: f64, chi: f64, dist: f64) -> Result<f64> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(domain(format!("power exponent {alpha} outside (1, 2]")));
    }
    if !(chi > 0.0) {
        return Err(domain(format!("median distance must be positive, got {chi}")));
    }
    check_dist(dist)?;
    Ok((chi.powf(alpha - 2.0) * dist * dist).min(dist.powf(alpha)))
}

/// `d² min(τ''₊(2χ), τ''₊(2d))`, zero at `d = 0`.
pub fn general_loss(t: &Transform, chi: f64, dist: f64) -> Result<f64> {
    if t.classify() == Classification::Median {
        return Err(Error::Inapplicable("the median uses median_loss".into()));
    }
    if !(chi > 0.0) {
        return Err(domain(format!("median distance must be positive, got {chi}")));
    }
    check_dist(dist)?;
    if dist == 0.0 {
        return Ok(0.0);
    }
    let curv = t.ddtau_plus(2.0 * chi)?.min(t.ddtau_plus(2.0 * dist)?);
    Ok(dist * dist * curv.to_f64())
}

/// `min(d, d²)`.
pub fn median_loss(dist: f64) -> Result<f64> {
    check_dist(dist)?;
    Ok(dist.min(dist * dist))
}

fn check_dist(dist: f64) -> Result<()> {
    if dist >= 0.0 && dist.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("distance must be finite and nonnegative, got {dist}")))
    }
}

/// The three constants of the power-mean rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerConstants {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
}

pub fn power_constants(alpha: f64) -> Result<PowerConstants> {
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(domain(format!("power exponent {alpha} outside (1, 2]")));
    }
    let am1 = alpha - 1.0;
    let e = (2.0 - alpha) / am1;
    let two = |x: f64| 2f64.powf(x);
    if alpha >= 1.5 {
        Ok(PowerConstants {
            c0: two(6.0 - alpha) / (am1 * am1),
            c1: 3.0 * two((5.0 - 5.0 * alpha + alpha * alpha) / am1) * (1.0 + two((3.0 - 2.0 * alpha) / am1)) * alpha.powf(e)
                + 0.5,
            c2: 3.0 * two((6.0 - 6.0 * alpha + alpha * alpha) / am1) * alpha.powf(e) + 0.25,
        })
    } else {
        Ok(PowerConstants {
            c0: two(9.0 - 3.0 * alpha) / (am1 * am1),
            c1: 3.0
                * two((9.0 - 8.0 * alpha + alpha * alpha) / am1)
                * (1.0 + two(e) + two((3.0 - 2.0 * alpha) / am1))
                * alpha.powf(e)
                + 0.5,
            c2: 3.0 * two((12.0 - 10.0 * alpha + alpha * alpha) / am1) * alpha.powf(e) + 0.25,
        })
    }
}

/// Full right side of the power-mean risk bound, including the `1/n` factor.
pub fn power_rate_constant(alpha: f64, moments: &MomentSet, n: usize) -> Result<ExtReal> {
    let c = power_constants(alpha)?;
    if n == 0 {
        return Err(domain("n must be at least 1"));
    }
    let n = n as f64;
    let s2a2 = moments.sigma(2.0 * alpha - 2.0)?;
    let sa = moments.sigma(alpha)?;
    let (product, decay) = if alpha >= 1.5 {
        let e = (2.0 - alpha) / (alpha - 1.0);
        (moments.sigma(alpha - 1.0)?.powf(e).mul(s2a2), n.powf(-e))
    } else {
        (moments.sigma(2.0 - alpha)?.mul(s2a2), 1.0 / n)
    };
    Ok(product
        .scale(c.c1)
        .add(sa.scale(c.c2 * decay))
        .scale(c.c0 / n))
}

/// `(91/n)(7 σ_{1/2} σ₁ + 2 σ_{3/2}/n)`.
pub fn threehalfs_bound(sigma_half: f64, sigma_one: f64, sigma_threehalfs: f64, n: usize) -> f64 {
    let n = n as f64;
    91.0 / n * (7.0 * sigma_half * sigma_one + 2.0 * sigma_threehalfs / n)
}

/// `g(x) = 1/τ''₊(7x)`.
pub fn g_fn(t: &Transform, x: f64) -> ExtReal {
    t.ddtau_plus_ext(7.0 * x).recip()
}

/// `h(x) = g((τ')⁻¹(12x))`.
pub fn h_fn(t: &Transform, x: f64) -> Result<ExtReal> {
    match t.inv_dtau_ext(12.0 * x)? {
        ExtReal::Finite(y) => Ok(g_fn(t, y)),
        ExtReal::Infinite => Ok(ExtReal::Infinite),
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeneralRateTerms {
    pub p: f64,
    pub q: f64,
    pub s_1: ExtReal,
    pub s_p: ExtReal,
    pub v_n1: ExtReal,
    pub v_np: ExtReal,
    pub r0: f64,
    pub b_n: ExtReal,
    pub sigma_dtau: f64,
    pub sigma_dtau_sq: f64,
    pub bound: ExtReal,
}

/// Inputs to [`general_rate_terms`]: plug-in draws of `d(Y, m)` and the
/// outer Monte Carlo size for `E[h(2σ̂_{τ'})^p]`.
#[derive(Debug, Clone)]
pub struct GeneralRateInputs<'a> {
    pub distances: &'a [f64],
    pub chi: f64,
    pub outer_reps: usize,
    pub seed: u64,
}

/// Every quantity of the general tail-robust risk bound.
///
/// Expectations over `Y` are plug-in averages over `distances`.
/// `E[h(2σ̂_{τ'})^p]` averages over `outer_reps` resamples of size `n` drawn
/// with replacement from `distances`.
pub fn general_rate_terms(t: &Transform, inputs: &GeneralRateInputs<'_>, n: usize, p: f64) -> Result<GeneralRateTerms> {
    if t.classify() != Classification::TailRobust {
        return Err(Error::Inapplicable(format!("{t} has a bounded slope; the bound needs D = ∞")));
    }
    if !(p > 1.0) {
        return Err(domain(format!("p must exceed 1, got {p}")));
    }
    let ds = inputs.distances;
    if ds.is_empty() || n == 0 || inputs.outer_reps == 0 {
        return Err(domain("general rate terms need draws, n ≥ 1 and outer_reps ≥ 1"));
    }
    let nf = n as f64;
    let q = p / (p - 1.0);
    let dtau: Vec<f64> = ds.iter().map(|&d| t.dtau_unchecked(d)).collect();
    let ext_mean = |vals: Vec<ExtReal>| -> ExtReal {
        if vals.iter().any(|v| v.is_infinite()) {
            ExtReal::Infinite
        } else {
            ExtReal::from_f64(stats::mean(vals.into_iter().map(ExtReal::to_f64)))
        }
    };
    let sigma_dtau = stats::mean(dtau.iter().copied());
    let sigma_dtau_sq = stats::mean(dtau.iter().map(|v| v * v));
    let sigma_dtau_2p = stats::mean(dtau.iter().map(|v| v.powf(2.0 * p)));

    let mut rng = ChaCha8Rng::seed_from_u64(inputs.seed);
    let mut resampled = Vec::with_capacity(inputs.outer_reps);
    for _ in 0..inputs.outer_reps {
        let s = stats::mean((0..n).map(|_| dtau[rng.random_range(0..dtau.len())]));
        resampled.push(s);
    }

    let s_of = |pp: f64| -> Result<ExtReal> {
        let sigma_g = ext_mean(ds.iter().map(|&d| g_fn(t, d).powf(pp)).collect());
        let h_mean = h_fn(t, sigma_dtau)?.powf(pp).scale(2.0);
        let outer = ext_mean(
            resampled
                .iter()
                .map(|&s| h_fn(t, 2.0 * s).map(|v| v.powf(pp)))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(sigma_g.max(h_mean).max(outer))
    };
    let v_of = |pp: f64| -> Result<ExtReal> {
        let first = ext_mean(
            ds.iter()
                .zip(&dtau)
                .map(|(&d, &v)| ExtReal::Finite(v.powf(2.0 * pp)).mul(g_fn(t, d).powf(pp)))
                .collect(),
        );
        let second = ext_mean(
            dtau.iter()
                .map(|&v| h_fn(t, 2.0 * v / nf).map(|h| ExtReal::Finite(v.powf(2.0 * pp)).mul(h.powf(pp))))
                .collect::<Result<Vec<_>>>()?,
        );
        Ok(first.scale(1.0 / nf).add(second))
    };

    let s_1 = s_of(1.0)?;
    let s_p = s_of(p)?;
    let v_n1 = v_of(1.0)?;
    let v_np = v_of(p)?;
    let r0 = inputs.chi.max(2.0 * t.inv_dtau(16.0 * sigma_dtau)?);
    let ratio = if sigma_dtau > 0.0 { sigma_dtau_sq / (sigma_dtau * sigma_dtau) - 1.0 } else { 0.0 };
    let tail_factor = ((-nf / 16.0).exp() + 2.0 / nf * ratio.max(0.0)).powf(1.0 / q);
    let b_n = v_np.add(s_p.scale(4.0 * sigma_dtau_2p)).powf(1.0 / p).scale(tail_factor);
    let first = s_1.scale(4.0 * sigma_dtau_sq).add(v_n1);
    let second = t.ddtau_plus_ext(4.0 * r0).recip().scale(4.0 * sigma_dtau_sq).add(b_n);
    let bound = first.min(second).scale(64.0 / nf);
    Ok(GeneralRateTerms { p, q, s_1, s_p, v_n1, v_np, r0, b_n, sigma_dtau, sigma_dtau_sq, bound })
}

/// `max(x₀², R² - δ²)` with `a = (1-ρ)/ρ` and
/// `x₀ = δ/(λ - a) · (a + λ√(1 - λ² + a²))/(a + λ)`.
pub fn deterministic_location_bound(rho: f64, delta: f64, lambda: f64, big_r: f64) -> Result<f64> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(domain(format!("λ = {lambda} outside (0, 1]")));
    }
    if !(delta >= 0.0) || !(big_r > 0.0) || !(rho <= 1.0) {
        return Err(domain("need δ ≥ 0, R > 0 and ρ ≤ 1"));
    }
    if !(rho > 1.0 / (1.0 + lambda)) {
        return Err(Error::Inapplicable(format!("ρ = {rho} must exceed 1/(1+λ) = {}", 1.0 / (1.0 + lambda))));
    }
    let x0 = location_x0(rho, delta, lambda);
    Ok((x0 * x0).max(big_r * big_r - delta * delta))
}

/// The `x₀` term alone.
pub fn location_x0(rho: f64, delta: f64, lambda: f64) -> f64 {
    let a = (1.0 - rho) / rho;
    delta / (lambda - a) * (a + lambda * (1.0 - lambda * lambda + a * a).sqrt()) / (a + lambda)
}

/// Distance bound for the median: `2ρδ(1-ρ)/(2ρ-1)`.
pub fn median_location_bound(rho: f64, delta: f64) -> Result<f64> {
    if !(rho > 0.5 && rho <= 1.0) {
        return Err(Error::Inapplicable(format!("ρ = {rho} must lie in (1/2, 1]")));
    }
    Ok(2.0 * rho * delta * (1.0 - rho) / (2.0 * rho - 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    pub radius_multiplier: f64,
    /// `multiplier · r`.
    pub radius: f64,
    pub probability_bound: f64,
}

/// Large-deviation bound for transforms with bounded slope.
pub fn tail_bound(lambda: f64, eta: f64, rho: f64, r: f64, n: usize) -> Result<TailBound> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::Inapplicable(format!("λ = {lambda} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Inapplicable(format!("η = {eta} outside [0, 1]")));
    }
    if !(0.0..=1.0).contains(&rho) || !(r >= 0.0) {
        return Err(domain("need ρ ∈ [0, 1] and r ≥ 0"));
    }
    let k = (lambda + 1.0) * eta * rho;
    if !(k > 1.0) {
        return Err(Error::Inapplicable(format!("(λ+1)ηρ = {k} must exceed 1")));
    }
    let m = ((3.0 + lambda) * eta * rho - 1.0) / (k - 1.0);
    Ok(TailBound { radius_multiplier: m, radius: m * r, probability_bound: deviation_probability(rho, eta, n) })
}

/// Checks the attested condition `τ(R) ≥ λDR` and `r ≥ R/2`.
pub fn check_tail_radius(t: &Transform, lambda: f64, big_r: f64, r: f64) -> Result<()> {
    let d = match t.slope_sup() {
        ExtReal::Finite(d) => d,
        ExtReal::Infinite => return Err(Error::Inapplicable(format!("{t} has unbounded slope"))),
    };
    let lhs = t.tau(big_r)?;
    if lhs < lambda * d * big_r {
        return Err(Error::Inapplicable(format!("τ(R) = {lhs} < λDR = {}", lambda * d * big_r)));
    }
    if r < big_r / 2.0 {
        return Err(Error::Inapplicable(format!("r = {r} < R/2 = {}", big_r / 2.0)));
    }
    Ok(())
}

/// Smallest `R` with `τ(R) ≥ λDR`, or `None` when no `R ≤ 1e12` qualifies.
///
/// `τ(R)/R` is nondecreasing for the convex transforms here, so the
/// qualifying radii form a half-line.
pub fn min_tail_radius(t: &Transform, lambda: f64) -> Result<Option<f64>> {
    let d = match t.slope_sup() {
        ExtReal::Finite(d) => d,
        ExtReal::Infinite => return Err(Error::Inapplicable(format!("{t} has unbounded slope"))),
    };
    let ok = |r: f64| t.tau_unchecked(r) >= lambda * d * r;
    let mut hi = 1.0;
    while !ok(hi) {
        hi *= 2.0;
        if hi > 1e12 {
            return Ok(None);
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Large-deviation bound for the median.
pub fn median_tail_bound(eta: f64, rho: f64, r: f64, n: usize) -> Result<TailBound> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Inapplicable(format!("η = {eta} outside (0, 1]")));
    }
    if !(0.0..=1.0).contains(&rho) || !(r >= 0.0) {
        return Err(domain("need ρ ∈ [0, 1] and r ≥ 0"));
    }
    let k = eta * rho;
    if !(2.0 * k > 1.0) {
        return Err(Error::Inapplicable(format!("2ηρ = {} must exceed 1", 2.0 * k)));
    }
    let m = (6.0 * k - 1.0 - 4.0 * k * k) / (2.0 * k - 1.0);
    Ok(TailBound { radius_multiplier: m, radius: m * r, probability_bound: deviation_probability(rho, eta, n) })
}

/// `(2(1-ρ)^{1-η})^n`, computed in log space.
fn deviation_probability(rho: f64, eta: f64, n: usize) -> f64 {
    let p = 1.0 - rho;
    if p == 0.0 {
        return if eta < 1.0 { 0.0 } else { 2f64.powi(n as i32) };
    }
    (n as f64 * (2f64.ln() + (1.0 - eta) * p.ln())).exp()
}
