//! Risk-rate experiments: power and general transforms, the fast-rate arm,
//! and the median.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use super::{
    aggregate_by_n, aggregate_slope, aux_seed, fit_log_slope, json_f64, moments_json, par_cells, with_distribution,
    ExperimentConfig, ExperimentOutput, ExperimentRecord,
};
use crate::bounds::{self, GeneralRateInputs, MomentSet};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::ext::ExtReal;
use crate::rng::substream;
use crate::sampling::{
    sample, Distribution, DistributionSpec, FourPoint, RadialLaw, RadialSymmetric, SpdSymmetric, StarSymmetric,
    DEFAULT_LEG_LENGTH,
};
use crate::spaces::{bowtie_contains, HadamardSpace};
use crate::stats;
use crate::transforms::{Classification, Transform};

type Point<D> = <<D as Distribution>::Space as HadamardSpace>::Point;

/// Draws of `d(Y, m)`: straight from the radial law when it is known, else
/// from sampled points. Draw `i` uses substream `i` of `seed`.
pub(crate) fn distance_draws<D: Distribution>(dist: &D, m: &Point<D>, count: usize, seed: u64) -> Result<Vec<f64>> {
    match dist.radial_law() {
        Some(law) => Ok((0..count as u64)
            .into_par_iter()
            .map(|i| law.draw(&mut substream(seed, i)))
            .collect()),
        None => (0..count as u64)
            .into_par_iter()
            .map(|i| dist.space().distance(&dist.draw(&mut substream(seed, i)), m))
            .collect(),
    }
}

/// Median of `d(Y, m)`, analytic when the radial law is known.
fn chi_of<D: Distribution>(dist: &D, draws: impl FnOnce() -> Result<Vec<f64>>) -> Result<(f64, &'static str)> {
    match dist.radial_law() {
        Some(law) => Ok((law.median(), "analytic")),
        None => Ok((stats::median(&draws()?), "plugin")),
    }
}

/// Moments needed by the power-mean bound, plus those of the three-halves corollary.
fn power_moments<D: Distribution>(dist: &D, m: &Point<D>, alpha: f64, cfg: &ExperimentConfig) -> Result<MomentSet> {
    let mut exps = vec![alpha, 2.0 * alpha - 2.0, if alpha >= 1.5 { alpha - 1.0 } else { 2.0 - alpha }];
    exps.extend([0.5, 1.0, 1.5]);
    match dist.radial_law() {
        Some(law) => MomentSet::from_law(&law, &exps),
        None => {
            let draws = distance_draws(dist, m, cfg.plugin_draws, aux_seed(cfg.seed, cfg.kind, "plugin"))?;
            MomentSet::plug_in(&draws, &exps, None)
        }
    }
}

fn base_summary(cfg: &ExperimentConfig, dist: &str, t: &Transform) -> Map<String, Value> {
    let mut s = Map::new();
    s.insert("kind".into(), json!(cfg.kind.name()));
    s.insert("distribution".into(), json!(dist));
    s.insert("transform".into(), json!(t.to_string()));
    s.insert("seed".into(), json!(cfg.seed));
    s.insert("replications".into(), json!(cfg.replications));
    s.insert("n_grid".into(), json!(cfg.n_grid));
    s
}

/// The median-distance scale `χ` enters the losses through `χ^{α-2}` and
/// `τ''₊(2χ)`; at `χ = 0` both losses are taken at their `χ ↘ 0` limit.
fn positive_chi(chi: f64) -> f64 {
    chi.max(f64::MIN_POSITIVE)
}

pub fn run_rate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    with_distribution!(cfg.distribution()?, |d| rate_generic(cfg, &t, &d))
}

enum RateLoss {
    Power { alpha: f64 },
    General,
}

fn rate_generic<D: Distribution>(cfg: &ExperimentConfig, t: &Transform, dist: &D) -> Result<ExperimentOutput> {
    let space = dist.space();
    let m = dist.population_mean(t)?;
    let mut summary = base_summary(cfg, &dist.describe(), t);
    let plugin_seed = aux_seed(cfg.seed, cfg.kind, "plugin");

    let (loss_kind, chi, bounds_by_n, aux_by_n): (RateLoss, f64, Vec<ExtReal>, Vec<Option<f64>>) =
        match (t.classify(), t.power_exponent()) {
            (Classification::Median, _) => {
                return Err(Error::Config("the median has its own experiment: use median_rate".into()))
            }
            (_, Some(alpha)) => {
                let moments = power_moments(dist, &m, alpha, cfg)?;
                let (chi, prov) = chi_of(dist, || distance_draws(dist, &m, cfg.plugin_draws, plugin_seed))?;
                let bounds = cfg
                    .n_grid
                    .iter()
                    .map(|&n| bounds::power_rate_constant(alpha, &moments, n))
                    .collect::<Result<Vec<_>>>()?;
                let threehalfs = cfg
                    .n_grid
                    .iter()
                    .map(|&n| {
                        if alpha != 1.5 {
                            return None;
                        }
                        let v = |a| moments.sigma(a).ok().map(ExtReal::to_f64);
                        Some(bounds::threehalfs_bound(v(0.5)?, v(1.0)?, v(1.5)?, n))
                    })
                    .collect();
                summary.insert("moments".into(), moments_json(&moments));
                summary.insert("chi_provenance".into(), json!(prov));
                summary.insert("bound".into(), json!("power_rate_constant"));
                if alpha == 1.5 {
                    summary.insert("aux1".into(), json!("threehalfs_bound"));
                }
                (RateLoss::Power { alpha }, chi, bounds, threehalfs)
            }
            (Classification::TailRobust, None) => {
                let draws = distance_draws(dist, &m, cfg.plugin_draws, plugin_seed)?;
                let (chi, prov) = chi_of(dist, || Ok(draws.clone()))?;
                let inputs = GeneralRateInputs {
                    distances: &draws,
                    chi: positive_chi(chi),
                    outer_reps: cfg.outer_reps,
                    seed: aux_seed(cfg.seed, cfg.kind, "outer"),
                };
                let mut terms_json = Vec::new();
                let mut bounds = Vec::new();
                for &n in &cfg.n_grid {
                    let terms = bounds::general_rate_terms(t, &inputs, n, cfg.p)?;
                    terms_json.push(serde_json::to_value(terms)?);
                    bounds.push(terms.bound);
                }
                let moments = MomentSet::plug_in(&draws, &[1.0, 2.0], Some(t))?;
                summary.insert("moments".into(), moments_json(&moments));
                summary.insert("chi_provenance".into(), json!(prov));
                summary.insert("bound".into(), json!("general_rate_terms"));
                summary.insert("general_rate_terms".into(), Value::Array(terms_json));
                let none = vec![None; cfg.n_grid.len()];
                (RateLoss::General, chi, bounds, none)
            }
            _ => {
                let (chi, prov) = chi_of(dist, || distance_draws(dist, &m, cfg.plugin_draws, plugin_seed))?;
                summary.insert("chi_provenance".into(), json!(prov));
                summary.insert("bound".into(), json!("none: the constant is not explicit"));
                let n = cfg.n_grid.len();
                (RateLoss::General, chi, vec![ExtReal::Infinite; n], vec![None; n])
            }
        };
    summary.insert("chi".into(), json_f64(chi));

    let chi_loss = positive_chi(chi);
    let records = par_cells(cfg, |n, rep, seed| {
        let s = sample(dist, n, seed)?;
        let est = estimate(space, t, &s, &cfg.solver)?;
        let d = space.distance(&m, &est.point)?;
        let loss = match loss_kind {
            RateLoss::Power { alpha } => bounds::power_loss(alpha, chi_loss, d)?,
            RateLoss::General => bounds::general_loss(t, chi_loss, d)?,
        };
        let i = cfg.n_grid.iter().position(|&k| k == n).expect("n from the grid");
        Ok(ExperimentRecord { n, rep, seed, dist: d, loss, bound: bounds_by_n[i], aux1: aux_by_n[i], aux2: None })
    })?;
    let aggregates = aggregate_by_n(&records, &cfg.n_grid);
    if let Some(slope) = aggregate_slope(&aggregates) {
        summary.insert("slope".into(), json_f64(slope));
    }
    summary.insert(
        "n_times_risk".into(),
        Value::Array(aggregates.iter().map(|a| json_f64(a.n as f64 * a.mean_loss)).collect()),
    );
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}

pub fn run_fast_rate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    let alpha = t
        .power_exponent()
        .ok_or_else(|| Error::Config(format!("the fast-rate experiment needs a power transform, got {t}")))?;
    let beta = cfg.beta.ok_or_else(|| Error::Config("the fast-rate experiment needs beta".into()))?;
    if !(beta > alpha && beta <= 2.0) {
        return Err(Error::Config(format!("beta = {beta} outside (alpha, 2] = ({alpha}, 2]")));
    }
    with_distribution!(cfg.distribution()?, |d| fast_generic(cfg, &t, alpha, beta, &d))
}

fn fast_generic<D: Distribution>(
    cfg: &ExperimentConfig,
    t: &Transform,
    alpha: f64,
    beta: f64,
    dist: &D,
) -> Result<ExperimentOutput> {
    match dist.radial_law() {
        Some(RadialLaw::PowerCdf { k, .. }) if (k - (beta - alpha)).abs() <= 1e-9 => {}
        other => {
            return Err(Error::Config(format!(
                "the fast-rate experiment needs a power-CDF law with exponent beta - alpha = {}, got {:?}",
                beta - alpha,
                other
            )))
        }
    }
    let space = dist.space();
    let m = dist.population_mean(t)?;
    let records = par_cells(cfg, |n, rep, seed| {
        let s = sample(dist, n, seed)?;
        let est = estimate(space, t, &s, &cfg.solver)?;
        let d = space.distance(&m, &est.point)?;
        let loss = d.powf(beta).min(d.powf(alpha));
        Ok(ExperimentRecord { n, rep, seed, dist: d, loss, bound: ExtReal::Infinite, aux1: None, aux2: None })
    })?;
    let aggregates = aggregate_by_n(&records, &cfg.n_grid);
    let mean_dist: Vec<(f64, f64)> = cfg
        .n_grid
        .iter()
        .map(|&n| (n as f64, stats::mean(records.iter().filter(|r| r.n == n).map(|r| r.dist))))
        .collect();
    let mut summary = base_summary(cfg, &dist.describe(), t);
    summary.insert("alpha".into(), json_f64(alpha));
    summary.insert("beta".into(), json_f64(beta));
    summary.insert("target_slope".into(), json_f64(-1.0 / beta));
    summary.insert("mean_dist".into(), Value::Array(mean_dist.iter().map(|p| json_f64(p.1)).collect()));
    if let Ok(s) = fit_log_slope(&mean_dist) {
        summary.insert("slope".into(), json_f64(s));
    }
    if let Some(s) = aggregate_slope(&aggregates) {
        summary.insert("loss_slope".into(), json_f64(s));
    }
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}

pub fn run_median_rate(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    if t.classify() != Classification::Median {
        return Err(Error::Config(format!("the median-rate experiment needs the identity transform, got {t}")));
    }
    with_distribution!(cfg.distribution()?, |d| median_generic(cfg, &t, &d))
}

/// Estimated bow-tie masses over the grid of candidates `p`.
pub struct BowtieMass {
    pub sup: f64,
    pub masses: Vec<f64>,
}

/// Estimates `sup_p P(Y ∈ B(m, p, w))` over a grid of `p` in the ball of
/// radius `χ` about `m`: 16 directions given by draws of `Y`, each at
/// distances `χ/4`, `χ/2` and `χ`. A law without mass away from `m` gives 1.
pub fn bowtie_mass<D: Distribution>(
    dist: &D,
    m: &Point<D>,
    w: f64,
    draws: usize,
    seed: u64,
) -> Result<BowtieMass> {
    let space = dist.space();
    let ys: Vec<Point<D>> = (0..draws as u64).map(|i| dist.draw(&mut substream(seed, i))).collect();
    let dists: Vec<f64> = ys.iter().map(|y| space.distance(y, m)).collect::<Result<_>>()?;
    let chi = stats::median(&dists);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xB0B7_1E5);
    let mut grid = Vec::new();
    for _ in 0..16 {
        let dir = dist.draw(&mut rng);
        let len = space.distance(&dir, m)?;
        if len <= crate::spaces::POINT_EQ_TOL || chi <= 0.0 {
            continue;
        }
        for frac in [0.25, 0.5, 1.0] {
            grid.push(space.geodesic_point(m, &dir, (frac * chi / len).min(1.0))?);
        }
    }
    if grid.is_empty() {
        return Ok(BowtieMass { sup: 1.0, masses: vec![1.0] });
    }
    let masses: Vec<f64> = grid
        .par_iter()
        .map(|p| {
            let mut hits = 0usize;
            for y in &ys {
                if bowtie_contains(space, m, p, w, y)? {
                    hits += 1;
                }
            }
            Ok(hits as f64 / ys.len() as f64)
        })
        .collect::<Result<_>>()?;
    let sup = masses.iter().copied().fold(0.0, f64::max);
    Ok(BowtieMass { sup, masses })
}

/// Bow-tie mass at or above this level makes the median-rate experiment inapplicable.
pub const BOWTIE_MASS_LIMIT: f64 = 0.99;

fn median_generic<D: Distribution>(cfg: &ExperimentConfig, t: &Transform, dist: &D) -> Result<ExperimentOutput> {
    let space = dist.space();
    let m = dist.population_mean(t)?;
    let bt = bowtie_mass(dist, &m, cfg.widening, cfg.bowtie_draws, aux_seed(cfg.seed, cfg.kind, "bowtie"))?;
    if bt.sup >= BOWTIE_MASS_LIMIT {
        return Err(Error::Inapplicable(format!(
            "estimated bow-tie mass {} ≥ {BOWTIE_MASS_LIMIT} at widening {}",
            bt.sup, cfg.widening
        )));
    }
    let records = par_cells(cfg, |n, rep, seed| {
        let s = sample(dist, n, seed)?;
        let est = estimate(space, t, &s, &cfg.solver)?;
        let d = space.distance(&m, &est.point)?;
        Ok(ExperimentRecord {
            n,
            rep,
            seed,
            dist: d,
            loss: bounds::median_loss(d)?,
            bound: ExtReal::Infinite,
            aux1: None,
            aux2: None,
        })
    })?;
    let aggregates = aggregate_by_n(&records, &cfg.n_grid);
    let mut summary = base_summary(cfg, &dist.describe(), t);
    summary.insert("widening".into(), json_f64(cfg.widening));
    summary.insert("bowtie_mass_sup".into(), json_f64(bt.sup));
    summary.insert("bowtie_masses".into(), Value::Array(bt.masses.iter().map(|&v| json_f64(v)).collect()));
    summary.insert("bound".into(), json!("none: the constant is not explicit"));
    if let Some(s) = aggregate_slope(&aggregates) {
        summary.insert("slope".into(), json_f64(s));
    }
    summary.insert(
        "n_times_risk".into(),
        Value::Array(aggregates.iter().map(|a| json_f64(a.n as f64 * a.mean_loss)).collect()),
    );
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}
