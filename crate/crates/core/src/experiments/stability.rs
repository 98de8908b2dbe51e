//! Double excess risk and the replace-one stability bounds.
//!
//! Per replication, with `Yᵢ'` fresh draws and `m_nⁱ` the estimate on the
//! sample with `Yᵢ` replaced by `Yᵢ'`:
//!
//! * `V = (1/N) Σ_k [τ(d(Y_k*, m_n)) - τ(d(Y_k*, m))] + (1/n) Σ_i [τ(d(Yᵢ, m)) - τ(d(Yᵢ, m_n))]`
//!   with `Y_k*` an independent test sample of size `N`,
//! * `U = (1/n) Σ_i d(m_n, m_nⁱ) τ'(d(Yᵢ, Yᵢ'))`, whose expectation bounds `E V`,
//! * the per-i ratio `d(m_n, m_nⁱ) H̃ᵢ / ((4/n) τ'(d(Yᵢ, Yᵢ')))`, at most 1,
//! * the ratio `τ'(d(m, m_n)) / (8σ_{τ'} + 4σ̂_{τ'})`, at most 1.

use serde_json::json;

use super::rate::distance_draws;
use super::{aux_seed, json_f64, par_cells, with_distribution, AggregateRow, ExperimentConfig, ExperimentOutput, ExperimentRecord};
use crate::error::{Error, Result};
use crate::estimators::{estimate, replace_one_estimates};
use crate::ext::ExtReal;
use crate::rng::{mix_seed, tag};
use crate::sampling::{
    sample, Distribution, DistributionSpec, FourPoint, RadialSymmetric, SpdSymmetric, StarSymmetric, DEFAULT_LEG_LENGTH,
};
use crate::spaces::HadamardSpace;
use crate::stats;
use crate::transforms::Transform;

/// Largest sample size the diagnostic accepts.
pub const MAX_STABILITY_N: usize = 256;
/// Multiplicative slack on the stability bounds.
pub const STABILITY_SLACK: f64 = 1.1;

pub fn run_stability_diagnostic(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let t = cfg.transform()?;
    if cfg.n_grid.iter().any(|&n| n > MAX_STABILITY_N) {
        return Err(Error::Config(format!("the stability diagnostic needs n ≤ {MAX_STABILITY_N}")));
    }
    with_distribution!(cfg.distribution()?, |d| stability_generic(cfg, &t, &d))
}

struct Cell {
    record: ExperimentRecord,
    pop_term: f64,
    pop_stderr: f64,
    emp_term: f64,
}

fn stability_generic<D: Distribution>(cfg: &ExperimentConfig, t: &Transform, dist: &D) -> Result<ExperimentOutput> {
    let space = dist.space();
    let m = dist.population_mean(t)?;
    // σ_{τ'}: analytic for power transforms with a known radial law
    let (sigma_dtau, sigma_prov) = match (dist.radial_law(), t.power_exponent()) {
        (Some(law), Some(alpha)) => (law.moment(alpha - 1.0).scale(alpha), "analytic".to_string()),
        _ => {
            let draws = distance_draws(dist, &m, cfg.plugin_draws, aux_seed(cfg.seed, cfg.kind, "plugin"))?;
            (
                ExtReal::from_f64(stats::mean(draws.iter().map(|&d| t.dtau_unchecked(d)))),
                format!("plugin-estimate({})", draws.len()),
            )
        }
    };

    let cells = par_cells(cfg, |n, rep, seed| {
        let ys = sample(dist, n, seed)?;
        let fresh = sample(dist, n, mix_seed(&[seed, tag("fresh")]))?;
        let est = estimate(space, t, &ys, &cfg.solver)?;
        let mn = &est.point;
        let others = replace_one_estimates(space, t, &ys, &fresh, &cfg.solver, mn)?;

        let test_seed = mix_seed(&[seed, tag("test")]);
        let diffs: Vec<f64> = (0..cfg.n_test as u64)
            .map(|k| {
                let y = dist.draw(&mut crate::rng::substream(test_seed, k));
                Ok(t.tau_unchecked(space.distance(&y, mn)?) - t.tau_unchecked(space.distance(&y, &m)?))
            })
            .collect::<Result<_>>()?;
        let (pop_term, pop_stderr) = stats::mean_stderr(&diffs);
        let d_ym: Vec<f64> = ys.iter().map(|y| space.distance(y, &m)).collect::<Result<_>>()?;
        let d_ymn: Vec<f64> = ys.iter().map(|y| space.distance(y, mn)).collect::<Result<_>>()?;
        let emp_term = stats::mean(d_ym.iter().zip(&d_ymn).map(|(&a, &b)| t.tau_unchecked(a) - t.tau_unchecked(b)));

        let nf = n as f64;
        let mut u_terms = Vec::with_capacity(n);
        let mut worst_ratio: f64 = 0.0;
        for (i, oi) in others.iter().enumerate() {
            let di = space.distance(mn, &oi.point)?;
            let slope = t.dtau_unchecked(space.distance(&ys[i], &fresh[i])?);
            u_terms.push(di * slope);
            if di == 0.0 {
                continue;
            }
            let mut h = 0.0;
            for j in 0..n {
                let yj_i = if j == i { &fresh[i] } else { &ys[j] };
                h += t.ddtau_plus_ext(d_ymn[j] + di).to_f64();
                h += t.ddtau_plus_ext(space.distance(yj_i, &oi.point)? + di).to_f64();
            }
            let lhs = di * h / nf;
            let rhs = 4.0 / nf * slope;
            let ratio = if rhs > 0.0 { lhs / rhs } else { f64::INFINITY };
            worst_ratio = worst_ratio.max(ratio);
        }
        let u = stats::mean(u_terms);

        let d = space.distance(&m, mn)?;
        let sigma_hat = stats::mean(d_ym.iter().map(|&x| t.dtau_unchecked(x)));
        let slope_ratio = match sigma_dtau {
            ExtReal::Finite(s) => {
                let num = t.dtau_unchecked(d);
                if num == 0.0 { 0.0 } else { num / (8.0 * s + 4.0 * sigma_hat) }
            }
            ExtReal::Infinite => 0.0,
        };
        Ok(Cell {
            record: ExperimentRecord {
                n,
                rep,
                seed,
                dist: d,
                loss: pop_term + emp_term,
                bound: ExtReal::from_f64(u),
                aux1: Some(worst_ratio),
                aux2: Some(slope_ratio),
            },
            pop_term,
            pop_stderr,
            emp_term,
        })
    })?;

    let mut aggregates = Vec::new();
    for &n in &cfg.n_grid {
        let cs: Vec<&Cell> = cells.iter().filter(|c| c.record.n == n).collect();
        let vs: Vec<f64> = cs.iter().map(|c| c.record.loss).collect();
        let (mean_v, se_v) = stats::mean_stderr(&vs);
        let mean_u = stats::mean(cs.iter().map(|c| c.record.bound.to_f64()));
        let per_i = cs.iter().all(|c| c.record.aux1.unwrap_or(0.0) <= STABILITY_SLACK);
        let slope_ratio = cs.iter().all(|c| c.record.aux2.unwrap_or(0.0) <= STABILITY_SLACK);
        aggregates.push(AggregateRow {
            n,
            mean_loss: mean_v,
            stderr: se_v,
            bound: ExtReal::from_f64(mean_u),
            pass: mean_v <= STABILITY_SLACK * mean_u + 3.0 * se_v && per_i && slope_ratio,
        });
    }

    let mut summary = serde_json::Map::new();
    summary.insert("kind".into(), json!(cfg.kind.name()));
    summary.insert("distribution".into(), json!(dist.describe()));
    summary.insert("transform".into(), json!(t.to_string()));
    summary.insert("n_test".into(), json!(cfg.n_test));
    summary.insert("sigma_dtau".into(), super::json_ext(sigma_dtau));
    summary.insert("sigma_dtau_provenance".into(), json!(sigma_prov));
    let max_of = |f: &dyn Fn(&Cell) -> f64| cells.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let min_of = |f: &dyn Fn(&Cell) -> f64| cells.iter().map(f).fold(f64::INFINITY, f64::min);
    summary.insert("max_per_i_ratio".into(), json_f64(max_of(&|c| c.record.aux1.unwrap_or(0.0))));
    summary.insert("max_slope_ratio".into(), json_f64(max_of(&|c| c.record.aux2.unwrap_or(0.0))));
    summary.insert("min_empirical_term".into(), json_f64(min_of(&|c| c.emp_term)));
    summary.insert("mean_population_term".into(), json_f64(stats::mean(cells.iter().map(|c| c.pop_term))));
    summary.insert("max_population_stderr".into(), json_f64(max_of(&|c| c.pop_stderr)));
    let records = cells.into_iter().map(|c| c.record).collect();
    Ok(ExperimentOutput { kind: cfg.kind, records, aggregates, summary })
}
