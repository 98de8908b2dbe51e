use nalgebra::DVector;
use serde_json::{json, Value};

use super::{json_ext, json_f64, par_cells, AggregateRow, ExperimentConfig, ExperimentOutput, ExperimentRecord};
use crate::bounds;
use crate::error::{Error, Result};
use crate::estimators::estimate;
use crate::ext::ExtReal;
use crate::rng::{mix_seed, tag};
use crate::sampling::{contamination_mask, sample, Distribution, DistributionSpec, RadialSymmetric};
use crate::spaces::{Euclidean, HadamardSpace};
use crate::stats;
use crate::transforms::Transform;

/// `λ` values scanned for the smallest deterministic cap.
fn lambda_grid() -> impl Iterator<Item = f64> {
    (50..=100).map(|k| k as f64 / 100.0)
}

/// Cap on `d(m, m̃_n)` for a sample whose clean part lies in the ball of
/// radius `b` about `m`, with a fraction `rho` of all points inside it.
///
/// The ball is convex with diameter `2b`, so `d(m̃_n, B)` is bounded by the
/// deterministic location bound; adding `b` reaches `m`. The smallest bound
/// over the `λ` grid is used.
pub fn breakdown_cap(rho: f64, b: f64, radii: &[(f64, f64)]) -> ExtReal {
    let mut best = ExtReal::Infinite;
    for &(lambda, big_r) in radii {
        if let Ok(sq) = bounds::deterministic_location_bound(rho, 2.0 * b, lambda, big_r) {
            best = best.min(ExtReal::Finite(sq.sqrt() + b));
        }
    }
    best
}

pub fn run_breakdown(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    if !(0.0..0.5).contains(&cfg.epsilon) {
        return Err(Error::Config(format!("epsilon {} outside [0, 1/2)", cfg.epsilon)));
    }
    if cfg.radii.is_empty() || cfg.radii.iter().any(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::Config("radii must be a nonempty list of positive numbers".into()));
    }
    match cfg.distribution()? {
        DistributionSpec::Radial { dim, law } => breakdown_generic(cfg, &t, &RadialSymmetric::centered(dim, law)?),
        other => Err(Error::Config(format!("the breakdown experiment needs a radial law in ℝᵈ, got {other}"))),
    }
}

fn breakdown_generic<D: Distribution<Space = Euclidean>>(
    cfg: &ExperimentConfig,
    t: &Transform,
    dist: &D,
) -> Result<ExperimentOutput> {
    let space = dist.space();
    let m = dist.population_mean(t)?;
    let bounded = !t.slope_sup().is_infinite();
    let lambda_radii: Vec<(f64, f64)> = if bounded {
        lambda_grid()
            .filter_map(|l| bounds::min_tail_radius(t, l).ok().flatten().map(|r| (l, r)))
            .collect()
    } else {
        Vec::new()
    };
    let mut e1 = DVector::zeros(space.dim());
    e1[0] = 1.0;

    let cells = par_cells(cfg, |n, rep, seed| {
        let clean = sample(dist, n, seed)?;
        let b = clean.iter().map(|y| space.distance(y, &m)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
        let mask = if cfg.epsilon > 0.0 {
            contamination_mask(n, cfg.epsilon, mix_seed(&[seed, tag("mask")]))?
        } else {
            vec![false; n]
        };
        let mut rows = Vec::with_capacity(cfg.radii.len());
        for &radius in &cfg.radii {
            let contaminant = &m + &e1 * radius;
            let s: Vec<DVector<f64>> =
                clean.iter().zip(&mask).map(|(y, &hit)| if hit { contaminant.clone() } else { y.clone() }).collect();
            let inside = s.iter().filter(|y| (*y - &m).norm() <= b).count();
            let rho = inside as f64 / n as f64;
            let cap = if bounded { breakdown_cap(rho, b, &lambda_radii) } else { ExtReal::Infinite };
            let est = estimate(space, t, &s, &cfg.solver)?;
            let d = space.distance(&m, &est.point)?;
            rows.push(ExperimentRecord { n, rep, seed, dist: d, loss: d, bound: cap, aux1: Some(radius), aux2: Some(rho) });
        }
        Ok(rows)
    })?;

    let mut growth = Vec::new();
    let mut monotone = 0usize;
    for rows in &cells {
        let first = rows.first().expect("nonempty radii").dist;
        let last = rows.last().expect("nonempty radii").dist;
        growth.push(if first > 0.0 { last / first } else { f64::INFINITY });
        if rows.windows(2).all(|w| w[1].dist >= w[0].dist) {
            monotone += 1;
        }
    }
    let records: Vec<ExperimentRecord> = cells.into_iter().flatten().collect();

    let mut aggregates = Vec::new();
    for &n in &cfg.n_grid {
        for &radius in &cfg.radii {
            let rows: Vec<&ExperimentRecord> =
                records.iter().filter(|r| r.n == n && r.aux1 == Some(radius)).collect();
            let ds: Vec<f64> = rows.iter().map(|r| r.dist).collect();
            let (mean_loss, stderr) = stats::mean_stderr(&ds);
            let bound = rows.iter().map(|r| r.bound).fold(ExtReal::Infinite, ExtReal::min);
            let pass = rows.iter().all(|r| match r.bound {
                ExtReal::Finite(c) => r.dist <= c,
                ExtReal::Infinite => true,
            });
            aggregates.push(AggregateRow { n, mean_loss, stderr, bound, pass });
        }
    }

    let mut summary = serde_json::Map::new();
    summary.insert("kind".into(), json!(cfg.kind.name()));
    summary.insert("distribution".into(), json!(dist.describe()));
    summary.insert("transform".into(), json!(t.to_string()));
    summary.insert("epsilon".into(), json_f64(cfg.epsilon));
    summary.insert("radii".into(), Value::Array(cfg.radii.iter().map(|&r| json_f64(r)).collect()));
    summary.insert("capped".into(), json!(bounded));
    summary.insert("growth_factors".into(), Value::Array(growth.iter().map(|&g| json_f64(g)).collect()));
    let min_growth = growth.iter().copied().fold(f64::INFINITY, f64::min);
    summary.insert("min_growth_factor".into(), json_ext(ExtReal::from_f64(min_growth)));
    summary.insert("monotone_fraction".into(), json_f64(monotone as f64 / growth.len() as f64));
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}
