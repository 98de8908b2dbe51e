use super::*;
use crate::bounds;
use crate::estimators::estimate;
use crate::sampling::{sample, Distribution};
use crate::spaces::{Euclidean, HadamardSpace};
use approx::assert_relative_eq;
use nalgebra::DVector;

fn cfg(kind: ExperimentKind, dist: &str, t: &str, n_grid: &[usize], reps: usize) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        distribution: dist.into(),
        transform: t.into(),
        n_grid: n_grid.to_vec(),
        replications: reps,
        seed: 3,
        plugin_draws: 20_000,
        outer_reps: 50,
        n_test: 2_000,
        bowtie_draws: 500,
        ..ExperimentConfig::default()
    }
}

#[test]
fn log_slope_examples() {
    assert_relative_eq!(fit_log_slope(&[(1.0, 1.0), (10.0, 0.1)]).unwrap(), -1.0, epsilon = 1e-12);
    assert_relative_eq!(fit_log_slope(&[(1.0, 3.0), (10.0, 3.0)]).unwrap(), 0.0, epsilon = 1e-12);
    assert_relative_eq!(fit_log_slope(&[(1.0, 1.0), (100.0, 0.01)]).unwrap(), -1.0, epsilon = 1e-12);
    assert!(fit_log_slope(&[(1.0, 1.0)]).is_err());
    assert!(fit_log_slope(&[(1.0, 1.0), (2.0, 0.0)]).is_err());
}

#[test]
fn config_validation_and_json() {
    let mut c = cfg(ExperimentKind::Rate, "radial:halfgauss:1@euclidean:2", "power:2", &[4, 8], 2);
    c.validate().unwrap();
    let back = ExperimentConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
    let partial = ExperimentConfig::from_json(r#"{"kind":"tail","n_grid":[32],"r":5}"#).unwrap();
    assert_eq!(partial.kind, ExperimentKind::Tail);
    assert_eq!(partial.r, Some(5.0));
    assert_eq!(partial.replications, ExperimentConfig::default().replications);
    assert!(ExperimentConfig::from_json(r#"{"bogus":1}"#).is_err());

    c.n_grid = vec![8, 8];
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    c.n_grid = vec![8];
    c.replications = 0;
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    c.replications = 1;
    c.space = Some("euclidean:3".into());
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    c.space = Some("euclidean:2".into());
    c.validate().unwrap();
    c.transform = "nope".into();
    assert!(matches!(c.validate(), Err(Error::Config(_))));
    assert_eq!("median-rate".parse::<ExperimentKind>().unwrap(), ExperimentKind::MedianRate);
}

#[test]
fn point_mass_gives_zero_loss() {
    let c = cfg(ExperimentKind::Rate, "radial:pointmass@euclidean:2", "power:1.5", &[4, 8], 3);
    let out = run(&c).unwrap();
    assert!(out.records.iter().all(|r| r.dist == 0.0 && r.loss == 0.0));
    assert!(out.passed());
}

#[test]
fn square_loss_matches_the_mean_oracle() {
    // radius |σZ| in a uniform direction: E‖Y - m‖² = σ², so E‖Ȳ - m‖² = σ²/n
    let c = cfg(ExperimentKind::Rate, "radial:halfgauss:1.5@euclidean:4", "power:2", &[8, 32], 400);
    let out = run(&c).unwrap();
    for a in &out.aggregates {
        let target = 2.25 / a.n as f64;
        assert!((a.mean_loss - target).abs() <= 3.0 * a.stderr, "{a:?} vs {target}");
        assert!(a.pass);
    }
    // α = 2: the loss is d² exactly
    for r in &out.records {
        assert_relative_eq!(r.loss, r.dist * r.dist, max_relative = 1e-14);
    }
}

#[test]
fn rows_are_recomputable_and_thread_independent() {
    let c = cfg(ExperimentKind::Rate, "radial:pareto:1.8:1@euclidean:3", "power:1.5", &[8, 16], 6);
    let one = run_with_threads(&c, Some(1)).unwrap();
    let two = run_with_threads(&c, Some(2)).unwrap();
    let csv = |o: &ExperimentOutput| {
        let mut b = Vec::new();
        o.write_records(&mut b).unwrap();
        o.write_aggregates(&mut b).unwrap();
        b
    };
    assert_eq!(csv(&one), csv(&two));
    let text = String::from_utf8(csv(&one)).unwrap();
    assert!(text.starts_with("n,rep,seed,dist,loss,bound,aux1,aux2\n"));
    assert!(text.contains("n,mean_loss,stderr,bound,pass\n"));
    let chi = one.summary_f64("chi").unwrap();
    for r in &one.records {
        assert_eq!(r.loss, bounds::power_loss(1.5, chi, r.dist).unwrap());
        assert_eq!(r.seed, cell_seed(3, ExperimentKind::Rate, r.n, r.rep));
        assert!(r.aux1.unwrap() >= r.bound.to_f64());
    }
}

#[test]
fn incompatible_rate_pairings() {
    let c = cfg(ExperimentKind::Rate, "radial:halfgauss:1@euclidean:2", "identity", &[4], 1);
    assert!(matches!(run(&c), Err(Error::Config(_))));
    let c = cfg(ExperimentKind::Rate, "fourpoint:0.75:100", "power:2", &[4], 1);
    assert!(matches!(run(&c), Err(Error::NoAnalyticMean(_))));
}

#[test]
fn general_transforms_get_bounds() {
    let c = cfg(ExperimentKind::Rate, "radial:halfgauss:1@euclidean:2", "entropic", &[8, 16], 5);
    let out = run(&c).unwrap();
    assert!(out.aggregates.iter().all(|a| a.bound.finite().is_some()));
    let c = cfg(ExperimentKind::Rate, "radial:halfgauss:1@euclidean:2", "pseudo-huber:1", &[8], 5);
    let out = run(&c).unwrap();
    assert!(out.aggregates[0].bound.is_infinite());
    let chi = out.summary_f64("chi").unwrap();
    let t = Transform::pseudo_huber(1.0).unwrap();
    for r in &out.records {
        assert_eq!(r.loss, bounds::general_loss(&t, chi, r.dist).unwrap());
    }
}

#[test]
fn tail_without_outside_mass_never_exceeds() {
    let mut c = cfg(ExperimentKind::Tail, "radial:powercdf:2:1@euclidean:2", "pseudo-huber:1", &[8], 50);
    c.r = Some(5.0);
    let out = run(&c).unwrap();
    assert_eq!(out.summary_f64("rho"), Some(1.0));
    assert!(out.records.iter().all(|r| r.loss == 0.0 && r.bound == ExtReal::Finite(0.0)));
    assert!(out.passed());
    for r in &out.records {
        assert_eq!(r.loss, if r.dist > r.aux1.unwrap() { 1.0 } else { 0.0 });
    }

    c.r = Some(2.0);
    assert!(matches!(run(&c), Err(Error::Inapplicable(_))), "τ(4) < 0.9·4");
    c.transform = "power:1.5".into();
    c.r = Some(5.0);
    assert!(matches!(run(&c), Err(Error::Config(_))));
}

#[test]
fn median_tail_uses_twenty_nine_fifths() {
    // P(R > 1) = (s/1)² = 1/10
    let s = 0.1f64.sqrt();
    let mut c = cfg(ExperimentKind::Tail, &format!("radial:pareto:2:{s}@euclidean:2"), "identity", &[16], 10);
    c.r = Some(1.0);
    let out = run(&c).unwrap();
    assert_relative_eq!(out.summary_f64("rho").unwrap(), 0.9, epsilon = 1e-12);
    assert_relative_eq!(out.summary_f64("radius_multiplier").unwrap(), 5.8, epsilon = 1e-12);
    c.r = Some(0.4);
    assert!(matches!(run(&c), Err(Error::Inapplicable(_))));
}

#[test]
fn breakdown_without_contamination_is_the_clean_estimate() {
    let mut c = cfg(ExperimentKind::Breakdown, "radial:powercdf:2:1@euclidean:2", "pseudo-huber:1", &[20], 2);
    c.epsilon = 0.0;
    c.radii = vec![10.0, 1000.0];
    let out = run(&c).unwrap();
    let dist = crate::sampling::RadialSymmetric::centered(2, crate::sampling::RadialLaw::power_cdf(2.0, 1.0).unwrap()).unwrap();
    let t = Transform::pseudo_huber(1.0).unwrap();
    for r in &out.records {
        let s = sample(&dist, 20, r.seed).unwrap();
        let m = estimate(dist.space(), &t, &s, &c.solver).unwrap();
        assert_eq!(r.dist, m.point.norm());
    }
    assert!(out.passed());
}

#[test]
fn breakdown_dichotomy_small() {
    let mut c = cfg(ExperimentKind::Breakdown, "radial:powercdf:2:1@euclidean:2", "pseudo-huber:1", &[60], 3);
    c.radii = vec![10.0, 1e3, 1e5];
    let capped = run(&c).unwrap();
    assert!(capped.passed(), "{:?}", capped.aggregates);
    assert!(capped.aggregates.iter().all(|a| a.bound.finite().is_some()));
    c.transform = "power:1.5".into();
    let free = run(&c).unwrap();
    assert!(free.summary_f64("min_growth_factor").unwrap() > 1e3);
    c.epsilon = 0.5;
    assert!(matches!(run(&c), Err(Error::Config(_))));
}

#[test]
fn breakdown_cap_matches_the_location_bound() {
    let grid = [(1.0, 1e-9)];
    let cap = breakdown::breakdown_cap(0.75, 1.0, &grid).to_f64();
    assert_relative_eq!(cap, bounds::median_location_bound(0.75, 2.0).unwrap() + 1.0, epsilon = 1e-9);
    assert!(breakdown::breakdown_cap(0.5, 1.0, &grid).is_infinite());
}

#[test]
fn median_rate_needs_spread_directions() {
    let mut c = cfg(ExperimentKind::MedianRate, "radial:halfgauss:1@euclidean:1", "identity", &[8], 2);
    c.widening = 0.0;
    assert!(matches!(run(&c), Err(Error::Inapplicable(_))));
    let mut c = cfg(ExperimentKind::MedianRate, "radial:halfgauss:1@euclidean:2", "identity", &[8, 32], 10);
    c.widening = 0.1;
    let out = run(&c).unwrap();
    assert!(out.summary_f64("bowtie_mass_sup").unwrap() < 0.5);
    for r in &out.records {
        assert_eq!(r.loss, bounds::median_loss(r.dist).unwrap());
    }
    c.transform = "power:2".into();
    assert!(matches!(run(&c), Err(Error::Config(_))));
}

#[test]
fn fast_rate_validation() {
    let mut c = cfg(ExperimentKind::FastRate, "radial:powercdf:0.25:1@euclidean:1", "power:1.5", &[16, 64], 4);
    assert!(matches!(run(&c), Err(Error::Config(_))), "beta missing");
    c.beta = Some(2.5);
    assert!(matches!(run(&c), Err(Error::Config(_))));
    c.beta = Some(2.0);
    assert!(matches!(run(&c), Err(Error::Config(_))), "k must be beta - alpha");
    c.beta = Some(1.75);
    let out = run(&c).unwrap();
    assert!(out.summary_f64("slope").is_some());
    for r in &out.records {
        assert_eq!(r.loss, r.dist.powf(1.75).min(r.dist.powf(1.5)));
    }
}

#[test]
fn stability_point_mass_is_trivial() {
    let c = cfg(ExperimentKind::Stability, "radial:pointmass@euclidean:2", "power:1.5", &[8], 2);
    let out = run(&c).unwrap();
    for r in &out.records {
        assert_eq!(r.loss, 0.0);
        assert_eq!(r.bound, ExtReal::Finite(0.0));
        assert_eq!(r.aux1, Some(0.0));
    }
    assert!(out.passed());
}

#[test]
fn stability_bounds_hold_on_a_small_run() {
    let c = cfg(ExperimentKind::Stability, "radial:pareto:1.8:1@euclidean:2", "power:1.5", &[16], 4);
    let out = run(&c).unwrap();
    assert!(out.passed(), "{:?} {:?}", out.aggregates, out.summary);
    assert!(out.summary_f64("min_empirical_term").unwrap() >= -1e-9);
    let mut c = c;
    c.n_grid = vec![512];
    assert!(matches!(run(&c), Err(Error::Config(_))));
}

#[test]
fn check_suites_pass_on_small_runs() {
    for (space, t) in [("euclidean:3", "power:1.5"), ("star:4", "log-cosh"), ("spd:2", "pseudo-huber:1")] {
        let mut c = cfg(ExperimentKind::Checks, "", t, &[1], 1);
        c.space = Some(space.into());
        c.trials = 2000;
        let out = run(&c).unwrap();
        assert!(out.passed(), "{space} {t}: {:?}", out.summary);
        c.check = CheckKind::Midpoint;
        assert!(run(&c).unwrap().passed(), "{space} midpoint");
    }
    let mut c = cfg(ExperimentKind::Checks, "", "identity", &[1], 1);
    assert!(matches!(run(&c), Err(Error::Config(_))), "space missing");
    c.space = Some("euclidean:2".into());
    c.trials = 0;
    assert!(run(&c).is_err());
}

#[test]
fn constant_below_sharp_fails_somewhere() {
    // ℝ¹, α = 3/2: the sharp constant cannot be lowered by 10%
    let e = Euclidean::new(1).unwrap();
    let t = Transform::power(1.5).unwrap();
    let c = crate::spaces::quadruple_constant(&t);
    let v = |x: f64| DVector::from_vec(vec![x]);
    let worst = (1..400)
        .map(|k| {
            let y = k as f64 / 100.0 - 2.0;
            crate::spaces::quadruple_gap_with_constant(&e, &t, 0.9 * c, &v(0.0), &v(1.0), &v(y), &v(1.0 - y))
                .unwrap()
                .gap
        })
        .fold(f64::NEG_INFINITY, f64::max);
    assert!(worst > 0.0);
}

#[test]
fn variance_inequalities_at_estimates() {
    let e = Euclidean::new(2).unwrap();
    let d = crate::sampling::RadialSymmetric::centered(2, crate::sampling::RadialLaw::pareto(1.8, 1.0).unwrap()).unwrap();
    let s = sample(&d, 40, 9).unwrap();
    let mut rng = crate::rng::substream(1, 0);
    for t in [Transform::power(1.5).unwrap(), Transform::pseudo_huber(1.0).unwrap()] {
        let m = estimate(&e, &t, &s, &Default::default()).unwrap().point;
        for _ in 0..100 {
            let q = &m + e.random_point(&mut rng, 1.0);
            assert!(checks::variance_inequality_gap(&e, &t, &s, &m, &q).unwrap() >= -1e-7);
        }
    }
    let m = estimate(&e, &Transform::identity(), &s, &Default::default()).unwrap().point;
    for _ in 0..100 {
        let q = &m + e.random_point(&mut rng, 1.0);
        assert!(checks::median_variance_inequality_gap(&e, &s, &m, &q, 0.5).unwrap() >= -1e-7);
    }
}

#[test]
fn output_files_have_sidecars() {
    let dir = std::env::temp_dir().join(format!("tfmean-exp-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let c = cfg(ExperimentKind::Rate, "radial:halfgauss:1@euclidean:2", "power:2", &[4], 2);
    let out = run(&c).unwrap();
    let path = dir.join("rate.csv");
    out.write_files(&path).unwrap();
    assert!(std::fs::read_to_string(&path).unwrap().starts_with("n,rep,seed"));
    assert!(std::fs::read_to_string(dir.join("rate.agg.csv")).unwrap().starts_with("n,mean_loss"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("rate.summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "rate");
    std::fs::remove_dir_all(&dir).unwrap();
}
