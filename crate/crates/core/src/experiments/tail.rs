use serde_json::json;

use super::rate::distance_draws;
use super::{aux_seed, json_f64, par_cells, with_distribution, AggregateRow, ExperimentConfig, ExperimentOutput, ExperimentRecord};
use crate::bounds::{self, TailBound};
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::ext::ExtReal;
use crate::sampling::{
    sample, Distribution, DistributionSpec, FourPoint, RadialSymmetric, SpdSymmetric, StarSymmetric, DEFAULT_LEG_LENGTH,
};
use crate::spaces::HadamardSpace;
use crate::transforms::{Classification, Transform};

/// Defaults of the deviation corollaries: `λ = 9/10, η = 3/4` for bounded
/// slopes and `η = 2/3` for the median.
pub const DEFAULT_LAMBDA: f64 = 0.9;
pub const DEFAULT_ETA: f64 = 0.75;
pub const DEFAULT_MEDIAN_ETA: f64 = 2.0 / 3.0;

pub fn run_tail(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    let r = cfg.r.ok_or_else(|| Error::Config("the tail experiment needs r".into()))?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::Config(format!("r must be positive, got {r}")));
    }
    with_distribution!(cfg.distribution()?, |d| tail_generic(cfg, &t, r, &d))
}

fn tail_generic<D: Distribution>(cfg: &ExperimentConfig, t: &Transform, r: f64, dist: &D) -> Result<ExperimentOutput> {
    let space = dist.space();
    let m = dist.population_mean(t)?;
    let (rho, provenance) = match dist.radial_law() {
        Some(law) => (1.0 - law.tail(r), "analytic".to_string()),
        None => {
            let draws = distance_draws(dist, &m, cfg.plugin_draws, aux_seed(cfg.seed, cfg.kind, "plugin"))?;
            let inside = draws.iter().filter(|&&d| d <= r).count();
            (inside as f64 / draws.len() as f64, format!("plugin-estimate({})", draws.len()))
        }
    };
    let mut summary = serde_json::Map::new();
    summary.insert("kind".into(), json!(cfg.kind.name()));
    summary.insert("distribution".into(), json!(dist.describe()));
    summary.insert("transform".into(), json!(t.to_string()));
    summary.insert("r".into(), json_f64(r));
    summary.insert("rho".into(), json_f64(rho));
    summary.insert("rho_provenance".into(), json!(provenance));

    let bound_at = |n: usize| -> Result<TailBound> {
        match t.classify() {
            Classification::Median => bounds::median_tail_bound(cfg.eta.unwrap_or(DEFAULT_MEDIAN_ETA), rho, r, n),
            Classification::TailRobust => {
                Err(Error::Config(format!("{t} has unbounded slope; tail bounds need D < ∞")))
            }
            _ => bounds::tail_bound(cfg.lambda.unwrap_or(DEFAULT_LAMBDA), cfg.eta.unwrap_or(DEFAULT_ETA), rho, r, n),
        }
    };
    if !matches!(t.classify(), Classification::Median | Classification::TailRobust) {
        let lambda = cfg.lambda.unwrap_or(DEFAULT_LAMBDA);
        let big_r = cfg.big_r.unwrap_or(2.0 * r);
        bounds::check_tail_radius(t, lambda, big_r, r)?;
        summary.insert("lambda".into(), json_f64(lambda));
        summary.insert("big_r".into(), json_f64(big_r));
    }
    let per_n: Vec<TailBound> = cfg.n_grid.iter().map(|&n| bound_at(n)).collect::<Result<_>>()?;
    summary.insert("radius_multiplier".into(), json_f64(per_n[0].radius_multiplier));

    let records = par_cells(cfg, |n, rep, seed| {
        let b = per_n[cfg.n_grid.iter().position(|&k| k == n).expect("n from the grid")];
        let s = sample(dist, n, seed)?;
        let est = estimate(space, t, &s, &cfg.solver)?;
        let d = space.distance(&m, &est.point)?;
        Ok(ExperimentRecord {
            n,
            rep,
            seed,
            dist: d,
            loss: if d > b.radius { 1.0 } else { 0.0 },
            bound: ExtReal::Finite(b.probability_bound),
            aux1: Some(b.radius),
            aux2: Some(rho),
        })
    })?;

    let aggregates = cfg
        .n_grid
        .iter()
        .zip(&per_n)
        .map(|(&n, b)| {
            let hits = records.iter().filter(|x| x.n == n && x.loss > 0.0).count();
            let freq = hits as f64 / cfg.replications as f64;
            let p = b.probability_bound.min(1.0);
            let stderr = (p * (1.0 - p) / cfg.replications as f64).sqrt();
            AggregateRow {
                n,
                mean_loss: freq,
                stderr,
                bound: ExtReal::Finite(b.probability_bound),
                pass: freq <= b.probability_bound + 3.0 * stderr,
            }
        })
        .collect();
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}
