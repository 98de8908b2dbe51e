//! Seeded Monte Carlo harness.
//!
//! An experiment is a grid of cells `(n, rep)`. Cell `(n, r)` draws all of its
//! randomness from `mix_seed([base_seed, tag(kind), n, r])`, so results do not
//! depend on the number of worker threads. Cells run in parallel and are
//! collected in `(n, rep)` order before any aggregation.

mod breakdown;
pub mod checks;
mod rate;
mod stability;
mod tail;

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::estimators::SolverConfig;
use crate::ext::ExtReal;
use crate::rng::{mix_seed, tag};
use crate::sampling::{DistributionSpec, DEFAULT_LEG_LENGTH};
use crate::stats;
use crate::transforms::Transform;

pub use breakdown::run_breakdown;
pub use checks::{run_checks, CheckKind};
pub use rate::{run_fast_rate, run_median_rate, run_rate};
pub use stability::run_stability_diagnostic;
pub use tail::run_tail;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Rate,
    Tail,
    Breakdown,
    MedianRate,
    FastRate,
    Stability,
    Checks,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Rate => "rate",
            Self::Tail => "tail",
            Self::Breakdown => "breakdown",
            Self::MedianRate => "median_rate",
            Self::FastRate => "fast_rate",
            Self::Stability => "stability",
            Self::Checks => "checks",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(s.replace('-', "_")))
            .map_err(|_| Error::Parse(format!("unknown experiment kind `{s}`")))
    }
}

/// Everything an experiment needs. Keys of the JSON config file mirror these
/// field names; kind-specific fields are ignored by other kinds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    /// Distribution grammar of the sampling module.
    pub distribution: String,
    pub transform: String,
    /// Optional; must agree with the distribution's space when given.
    pub space: Option<String>,
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub seed: u64,
    pub solver: SolverConfig,
    pub output: Option<PathBuf>,

    /// Tail radius `r`.
    pub r: Option<f64>,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    /// Radius `R` of the attested condition `τ(R) ≥ λDR`; defaults to `2r`.
    pub big_r: Option<f64>,

    pub epsilon: f64,
    /// Contaminant distances from the population mean.
    pub radii: Vec<f64>,

    pub beta: Option<f64>,

    /// Widening of the bow ties in the median precondition.
    pub widening: f64,
    pub bowtie_draws: usize,

    /// Draws behind plug-in moments.
    pub plugin_draws: usize,
    /// Outer Monte Carlo size for `E[h(2σ̂_{τ'})^p]`.
    pub outer_reps: usize,
    pub p: f64,

    /// Test-sample size for the population term of the double excess risk.
    pub n_test: usize,

    pub check: CheckKind,
    pub trials: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kind: ExperimentKind::Rate,
            distribution: "radial:halfgauss:1@euclidean:2".into(),
            transform: "power:2".into(),
            space: None,
            n_grid: vec![16, 64, 256],
            replications: 100,
            seed: 0,
            solver: SolverConfig::default(),
            output: None,
            r: None,
            lambda: None,
            eta: None,
            big_r: None,
            epsilon: 0.4,
            radii: (1..=6).map(|k| 10f64.powi(k)).collect(),
            beta: None,
            widening: 0.1,
            bowtie_draws: 2000,
            plugin_draws: 1_000_000,
            outer_reps: 1000,
            p: 2.0,
            n_test: 100_000,
            check: CheckKind::Quadruple,
            trials: 100_000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn transform(&self) -> Result<Transform> {
        self.transform.parse().map_err(config_error)
    }

    pub fn distribution(&self) -> Result<DistributionSpec> {
        self.distribution.parse().map_err(config_error)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.kind == ExperimentKind::Checks {
            if self.trials == 0 {
                return Err(Error::Config("trials must be at least 1".into()));
            }
            self.transform()?;
            return Ok(());
        }
        if self.n_grid.is_empty() || self.n_grid[0] == 0 {
            return Err(Error::Config("n_grid must be nonempty with every n ≥ 1".into()));
        }
        if self.n_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config(format!("n_grid {:?} is not strictly increasing", self.n_grid)));
        }
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.plugin_draws == 0 || self.outer_reps == 0 || self.n_test == 0 || self.bowtie_draws == 0 {
            return Err(Error::Config("draw counts must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.widening) {
            return Err(Error::Config(format!("widening {} outside [0, 1]", self.widening)));
        }
        self.transform()?;
        let dist = self.distribution()?;
        if let Some(space) = &self.space {
            let expected = distribution_space(&dist);
            if space.trim() != expected {
                return Err(Error::Config(format!("space `{space}` does not match distribution space `{expected}`")));
            }
        }
        Ok(())
    }
}

fn config_error(e: Error) -> Error {
    match e {
        Error::Parse(m) | Error::Domain(m) => Error::Config(m),
        e => e,
    }
}

/// Space string of the samples a distribution produces.
pub fn distribution_space(d: &DistributionSpec) -> String {
    match d {
        DistributionSpec::Radial { dim, .. } => format!("euclidean:{dim}"),
        DistributionSpec::Star { legs, .. } => format!("star:{legs}:{DEFAULT_LEG_LENGTH}"),
        DistributionSpec::SpdSym { dim, .. } => format!("spd:{dim}"),
        DistributionSpec::FourPoint { .. } => "euclidean:2".into(),
    }
}

/// Runs `$body` with `$d` bound to the concrete distribution of a spec.
macro_rules! with_distribution {
    ($spec:expr, |$d:ident| $body:expr) => {
        match $spec {
            DistributionSpec::Radial { dim, law } => {
                let $d = RadialSymmetric::centered(dim, law)?;
                $body
            }
            DistributionSpec::Star { legs, law } => {
                let $d = StarSymmetric::new(legs, law, DEFAULT_LEG_LENGTH)?;
                $body
            }
            DistributionSpec::SpdSym { dim, scale } => {
                let $d = SpdSymmetric::at_identity(dim, scale)?;
                $body
            }
            DistributionSpec::FourPoint { rho, s } => {
                let $d = FourPoint::new(rho, s)?;
                $body
            }
        }
    };
}
pub(crate) use with_distribution;

/// One row of the per-replication CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub n: usize,
    pub rep: usize,
    pub seed: u64,
    /// `d(m, m_n)`.
    pub dist: f64,
    pub loss: f64,
    pub bound: ExtReal,
    pub aux1: Option<f64>,
    pub aux2: Option<f64>,
}

/// One row of the aggregate CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    pub n: usize,
    pub mean_loss: f64,
    pub stderr: f64,
    pub bound: ExtReal,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub kind: ExperimentKind,
    pub records: Vec<ExperimentRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Moments with provenance, fitted slopes and other per-run findings.
    pub summary: serde_json::Map<String, serde_json::Value>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.aggregates.iter().all(|a| a.pass)
    }

    pub fn summary_f64(&self, key: &str) -> Option<f64> {
        self.summary.get(key).and_then(serde_json::Value::as_f64)
    }

    pub fn write_records<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.records)
    }

    pub fn write_aggregates<W: Write>(&self, w: W) -> Result<()> {
        write_csv(w, &self.aggregates)
    }

    /// Writes `path`, `<path>.agg.csv` and `<path>.summary.json`.
    pub fn write_files(&self, path: &Path) -> Result<()> {
        self.write_records(std::fs::File::create(path)?)?;
        self.write_aggregates(std::fs::File::create(sidecar(path, "agg.csv"))?)?;
        let json = serde_json::to_string_pretty(&self.summary)?;
        std::fs::write(sidecar(path, "summary.json"), json + "\n")?;
        Ok(())
    }
}

fn sidecar(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.with_extension("").into_os_string();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_csv<W: Write, T: Serialize>(w: W, rows: &[T]) -> Result<()> {
    let mut wr = csv::Writer::from_writer(w);
    for r in rows {
        wr.serialize(r)?;
    }
    wr.flush()?;
    Ok(())
}

/// Runs the experiment named by `cfg.kind`.
pub fn run(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    match cfg.kind {
        ExperimentKind::Rate => run_rate(cfg),
        ExperimentKind::Tail => run_tail(cfg),
        ExperimentKind::Breakdown => run_breakdown(cfg),
        ExperimentKind::MedianRate => run_median_rate(cfg),
        ExperimentKind::FastRate => run_fast_rate(cfg),
        ExperimentKind::Stability => run_stability_diagnostic(cfg),
        ExperimentKind::Checks => run_checks(cfg),
    }
}

/// As [`run`] on a pool of `threads` workers (`None`: rayon's default).
pub fn run_with_threads(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<ExperimentOutput> {
    match threads {
        None => run(cfg),
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run(cfg)),
    }
}

/// Seed of cell `(n, rep)`.
pub fn cell_seed(base: u64, kind: ExperimentKind, n: usize, rep: usize) -> u64 {
    mix_seed(&[base, tag(kind.name()), n as u64, rep as u64])
}

/// Seed for a per-config auxiliary computation such as plug-in moments.
pub(crate) fn aux_seed(base: u64, kind: ExperimentKind, what: &str) -> u64 {
    mix_seed(&[base, tag(kind.name()), tag(what)])
}

/// Evaluates `f(n, rep, seed)` over the grid in parallel; results in `(n, rep)` order.
pub(crate) fn par_cells<T, F>(cfg: &ExperimentConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize, u64) -> Result<T> + Sync,
{
    let cells: Vec<(usize, usize)> = cfg
        .n_grid
        .iter()
        .flat_map(|&n| (0..cfg.replications).map(move |r| (n, r)))
        .collect();
    cells
        .into_par_iter()
        .map(|(n, r)| f(n, r, cell_seed(cfg.seed, cfg.kind, n, r)))
        .collect()
}

/// Per-n mean and standard error of the loss column, compared to `bound + 3 se`.
pub(crate) fn aggregate_by_n(records: &[ExperimentRecord], n_grid: &[usize]) -> Vec<AggregateRow> {
    n_grid
        .iter()
        .map(|&n| {
            let rows: Vec<&ExperimentRecord> = records.iter().filter(|r| r.n == n).collect();
            let losses: Vec<f64> = rows.iter().map(|r| r.loss).collect();
            let (mean_loss, stderr) = stats::mean_stderr(&losses);
            let bound = rows.first().map_or(ExtReal::Infinite, |r| r.bound);
            let pass = match bound {
                ExtReal::Finite(b) => mean_loss <= b + 3.0 * stderr,
                ExtReal::Infinite => true,
            };
            AggregateRow { n, mean_loss, stderr, bound, pass }
        })
        .collect()
}

/// Ordinary least-squares slope of `ln value` on `ln n`.
pub fn fit_log_slope(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(domain("a slope needs at least two points"));
    }
    if let Some(&(n, v)) = points.iter().find(|&&(n, v)| !(n > 0.0 && v > 0.0)) {
        return Err(domain(format!("log-log fit needs positive values, got ({n}, {v})")));
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = stats::mean(xs.iter().copied());
    let my = stats::mean(ys.iter().copied());
    let sxy = stats::sum(xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)));
    let sxx = stats::sum(xs.iter().map(|x| (x - mx).powi(2)));
    if sxx == 0.0 {
        return Err(domain("log-log fit needs at least two distinct n"));
    }
    Ok(sxy / sxx)
}

/// Slope of the aggregate means against n, when every mean is positive.
pub(crate) fn aggregate_slope(rows: &[AggregateRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows.iter().map(|a| (a.n as f64, a.mean_loss)).collect();
    fit_log_slope(&pts).ok()
}

pub(crate) fn json_f64(v: f64) -> serde_json::Value {
    serde_json::Number::from_f64(v).map_or_else(|| serde_json::Value::String(v.to_string()), serde_json::Value::Number)
}

pub(crate) fn json_ext(v: ExtReal) -> serde_json::Value {
    match v {
        ExtReal::Finite(x) => json_f64(x),
        ExtReal::Infinite => serde_json::Value::String("inf".into()),
    }
}

/// Moments with provenance as a JSON object.
pub(crate) fn moments_json(m: &crate::bounds::MomentSet) -> serde_json::Value {
    let mut obj = serde_json::Map::new();
    for (tag, mo) in m.iter() {
        obj.insert(
            tag.clone(),
            serde_json::json!({ "value": json_ext(mo.value), "provenance": mo.provenance.to_string() }),
        );
    }
    serde_json::Value::Object(obj)
}

#[cfg(test)]
mod tests;
