mod args;

use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use tfmean::bounds::{self, MomentSet, Provenance};
use tfmean::experiments::{self, ExperimentConfig, ExperimentKind, ExperimentOutput};
use tfmean::spaces::{read_points, write_points, SpaceSpec};
use tfmean::{estimate, with_space, Error, ExtReal, SolverConfig, Transform};

use args::{BoundsCommand, Cli, Command, CommonArgs, EstimateArgs, SolverArgs};

const EXIT_FAILED: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_ERROR: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_FAILED),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}

/// Runs the subcommand; `Ok(false)` means a check or bound comparison failed.
fn dispatch(cli: Cli) -> Result<bool, Error> {
    let threads = cli.threads.map(|k| k as usize);
    let kind = match &cli.command {
        Command::Estimate(a) => return run_estimate(a, cli.seed.unwrap_or(0)),
        Command::Bounds { which } => return run_bounds(which),
        Command::Rates(_) => ExperimentKind::Rate,
        Command::Tails(_) => ExperimentKind::Tail,
        Command::Breakdown(_) => ExperimentKind::Breakdown,
        Command::Fast(_) => ExperimentKind::FastRate,
        Command::Median(_) => ExperimentKind::MedianRate,
        Command::Stability(_) => ExperimentKind::Stability,
        Command::Check(_) => ExperimentKind::Checks,
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.kind = kind;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    match cli.command {
        Command::Rates(a) => {
            apply_common(&mut cfg, a.common);
            set(&mut cfg.outer_reps, a.outer_reps);
            set(&mut cfg.p, a.p);
        }
        Command::Tails(a) => {
            apply_common(&mut cfg, a.common);
            cfg.r = a.r.or(cfg.r);
            cfg.lambda = a.lambda.or(cfg.lambda);
            cfg.eta = a.eta.or(cfg.eta);
            cfg.big_r = a.big_r.or(cfg.big_r);
        }
        Command::Breakdown(a) => {
            apply_common(&mut cfg, a.common);
            set(&mut cfg.epsilon, a.epsilon);
            set(&mut cfg.radii, a.radii);
        }
        Command::Fast(a) => {
            apply_common(&mut cfg, a.common);
            cfg.beta = a.beta.or(cfg.beta);
        }
        Command::Median(a) => {
            apply_common(&mut cfg, a.common);
            set(&mut cfg.widening, a.widening);
            set(&mut cfg.bowtie_draws, a.bowtie_draws);
        }
        Command::Stability(a) => {
            apply_common(&mut cfg, a.common);
            set(&mut cfg.n_test, a.n_test);
        }
        Command::Check(a) => {
            cfg.check = a.check.into();
            cfg.space = a.space.or(cfg.space.take());
            set(&mut cfg.transform, a.transform);
            set(&mut cfg.trials, a.trials);
            cfg.output = a.output.or(cfg.output.take());
        }
        Command::Estimate(_) | Command::Bounds { .. } => unreachable!("handled above"),
    }
    let out = experiments::run_with_threads(&cfg, threads)?;
    report(&cfg, &out)?;
    Ok(out.passed())
}

fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

fn apply_common(cfg: &mut ExperimentConfig, a: CommonArgs) {
    set(&mut cfg.distribution, a.distribution);
    set(&mut cfg.transform, a.transform);
    cfg.space = a.space.or(cfg.space.take());
    set(&mut cfg.n_grid, a.n_grid);
    set(&mut cfg.replications, a.replications);
    cfg.output = a.output.or(cfg.output.take());
    set(&mut cfg.plugin_draws, a.plugin_draws);
    apply_solver(&mut cfg.solver, a.solver);
}

fn apply_solver(cfg: &mut SolverConfig, a: SolverArgs) {
    set(&mut cfg.method, a.method.map(Into::into));
    set(&mut cfg.max_epochs, a.max_epochs);
    set(&mut cfg.tol_obj, a.tol_obj);
    set(&mut cfg.tol_step, a.tol_step);
}

/// Aggregate CSV on stdout, summary on stderr, full tables under `cfg.output`.
fn report(cfg: &ExperimentConfig, out: &ExperimentOutput) -> Result<(), Error> {
    if let Some(path) = &cfg.output {
        out.write_files(path)?;
    }
    let stdout = std::io::stdout();
    out.write_aggregates(stdout.lock())?;
    let mut err = std::io::stderr().lock();
    writeln!(err, "{}", serde_json::to_string(&out.summary)?)?;
    writeln!(err, "{}: {}", out.kind, if out.passed() { "PASS" } else { "FAIL" })?;
    Ok(())
}

fn run_estimate(a: &EstimateArgs, seed: u64) -> Result<bool, Error> {
    let spec: SpaceSpec = a.space.parse()?;
    let t: Transform = a.transform.parse()?;
    let mut solver = SolverConfig { shuffle_seed: seed, ..SolverConfig::default() };
    apply_solver(&mut solver, a.solver.clone());
    let any = spec.build()?;
    let input = std::fs::File::open(&a.input)?;
    with_space!(&any, |s| {
        let pts = read_points(s, input)?;
        let r = estimate(s, &t, &pts, &solver)?;
        write_points(s, std::slice::from_ref(&r.point), std::io::stdout().lock())?;
        if a.report {
            eprintln!(
                "objective={} epochs={} converged={} method={}",
                r.objective, r.epochs_used, r.converged, r.method
            );
        }
    });
    Ok(true)
}

/// Prints `key=value` with twelve significant digits.
fn kv(key: &str, v: f64) {
    let rounded: f64 = format!("{v:.11e}").parse().unwrap_or(v);
    if rounded != 0.0 && rounded.abs() < 1e-4 {
        println!("{key}={rounded:e}");
    } else {
        println!("{key}={rounded}");
    }
}

fn run_bounds(which: &BoundsCommand) -> Result<bool, Error> {
    match *which {
        BoundsCommand::ThreeHalfs { sigma_half, sigma_one, sigma_three_halfs, n } => {
            if [sigma_half, sigma_one, sigma_three_halfs].iter().any(|s| !(*s >= 0.0)) || n == 0 {
                return Err(Error::Domain("need nonnegative moments and n ≥ 1".into()));
            }
            kv("bound", bounds::threehalfs_bound(sigma_half, sigma_one, sigma_three_halfs, n));
        }
        BoundsCommand::Power { alpha, ref moments, n } => {
            let mut set = MomentSet::new();
            for &(a, v) in moments {
                set.insert(bounds::power_tag(a), ExtReal::from_f64(v), Provenance::Analytic)?;
            }
            let c = bounds::power_constants(alpha)?;
            kv("c0", c.c0);
            kv("c1", c.c1);
            kv("c2", c.c2);
            match bounds::power_rate_constant(alpha, &set, n)? {
                ExtReal::Finite(b) => kv("bound", b),
                ExtReal::Infinite => println!("bound=inf"),
            }
        }
        BoundsCommand::Tail { lambda, eta, rho, r, n, ref transform, big_r } => {
            if let (Some(t), Some(big_r)) = (transform, big_r) {
                bounds::check_tail_radius(&t.parse()?, lambda, big_r, r)?;
            }
            print_tail(bounds::tail_bound(lambda, eta, rho, r, n)?);
        }
        BoundsCommand::MedianTail { eta, rho, r, n } => print_tail(bounds::median_tail_bound(eta, rho, r, n)?),
        BoundsCommand::Location { rho, delta, lambda, big_r } => {
            let big_r = big_r.unwrap_or(delta.max(f64::MIN_POSITIVE));
            let sq = bounds::deterministic_location_bound(rho, delta, lambda, big_r)?;
            kv("x0", bounds::location_x0(rho, delta, lambda));
            kv("bound_sq", sq);
            kv("bound", sq.sqrt());
            if lambda == 1.0 {
                kv("median_closed_form", bounds::median_location_bound(rho, delta)?);
            }
        }
    }
    Ok(true)
}

fn print_tail(b: bounds::TailBound) {
    kv("radius_multiplier", b.radius_multiplier);
    kv("radius", b.radius);
    kv("probability_bound", b.probability_bound);
}
