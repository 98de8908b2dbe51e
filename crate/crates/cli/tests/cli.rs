use std::path::Path;
use std::process::{Command, Output};

fn tfmean(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tfmean")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn estimate_prints_the_arithmetic_mean() {
    let dir = tempfile::tempdir().unwrap();
    let input = write(dir.path(), "tri.csv", "0,0\n2,0\n1,3\n");
    let o = tfmean(&["estimate", "--space", "euclidean:2", "--transform", "power:2", "--input", &input]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "1,1\n");
}

#[test]
fn estimate_median_on_a_tree() {
    let dir = tempfile::tempdir().unwrap();
    // three points on distinct legs of a star: the median is the hub
    let input = write(dir.path(), "pts.csv", "# edge,offset\n0,1\n1,2\n2,3\n");
    let o = tfmean(&["estimate", "--space", "star:3", "--transform", "identity", "--input", &input]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let row = stdout(&o);
    let offset: f64 = row.trim().split(',').nth(1).unwrap().parse().unwrap();
    assert!(offset.abs() < 1e-6, "{row}");
}

#[test]
fn three_halfs_bound_value() {
    let o = tfmean(&[
        "bounds",
        "three-halfs",
        "--sigma-half",
        "1",
        "--sigma-one",
        "1",
        "--sigma-three-halfs",
        "1",
        "--n",
        "100",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "bound=6.3882\n");
}

#[test]
fn bounds_listings() {
    let o = tfmean(&["bounds", "median-tail", "--rho", "0.9", "--r", "1", "--n", "48"]);
    assert!(stdout(&o).starts_with("radius_multiplier=5.8\n"));
    let o = tfmean(&["bounds", "location", "--rho", "0.6666666666666666", "--delta", "2"]);
    assert!(stdout(&o).contains("median_closed_form=2.66666666667\n"), "{}", stdout(&o));
    let o = tfmean(&["bounds", "power", "--alpha", "1.5", "--moment", "0.5=1", "--moment", "1=1", "--n", "10"]);
    assert_eq!(o.status.code(), Some(3), "missing σ_{{3/2}}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("sigma_1.5"));
}

#[test]
fn quadruple_check_passes() {
    let o = tfmean(&["check", "quadruple", "--space", "spd:3", "--transform", "pseudo-huber:1", "--n", "100000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn exit_codes() {
    assert_eq!(tfmean(&["estimate", "--space", "nowhere:2", "--transform", "power:2", "--input", "x"]).status.code(), Some(2));
    assert_eq!(tfmean(&["rates", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(tfmean(&["rates", "--transform", "power:7"]).status.code(), Some(2));
    assert_eq!(tfmean(&["bounds", "location", "--rho", "0.3", "--delta", "1"]).status.code(), Some(3));
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let o = tfmean(&["estimate", "--space", "euclidean:1", "--transform", "identity", "--input", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    // identity has no rate bound in the rate experiment
    let o = tfmean(&["rates", "--transform", "identity", "--n-grid", "4", "--replications", "1"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn violated_mass_condition_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    // P(d > 0.5) = 1 leaves no mass inside the ball
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"distribution":"radial:pareto:2:1@euclidean:2","transform":"pseudo-huber:1","n_grid":[8],"replications":5,"r":0.5}"#,
    );
    let o = tfmean(&["--config", &cfg, "tails"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn output_is_deterministic_and_flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        r#"{"distribution":"radial:halfgauss:1@euclidean:3","transform":"power:2","n_grid":[4,8],"replications":50,"seed":11}"#,
    );
    let out = dir.path().join("run.csv");
    let args = ["--config", &cfg, "rates", "--replications", "7", "--output", out.to_str().unwrap()];
    let a = tfmean(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let records = std::fs::read_to_string(&out).unwrap();
    let b = tfmean(&[&args[..], &["--threads", "1"]].concat());
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(records, std::fs::read_to_string(&out).unwrap());
    assert!(records.starts_with("n,rep,seed,dist,loss,bound,aux1,aux2\n"));
    assert_eq!(records.lines().count(), 1 + 2 * 7);
    assert!(dir.path().join("run.agg.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("run.summary.json")).unwrap();
    assert!(summary.contains("\"seed\": 11"));
    // --seed beats the config file
    let c = tfmean(&[&args[..], &["--seed", "12"]].concat());
    assert_ne!(stdout(&a), stdout(&c));
}

#[test]
fn help_lists_units() {
    for sub in [
        &["estimate"][..],
        &["rates"],
        &["tails"],
        &["breakdown"],
        &["fast"],
        &["median"],
        &["stability"],
        &["check"],
        &["bounds", "three-halfs"],
        &["bounds", "tail"],
        &["bounds", "location"],
    ] {
        let o = tfmean(&[sub, &["--help"]].concat());
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        assert!(text.contains("--seed"), "{sub:?}");
        assert!(text.contains('['), "{sub:?} lists no units");
    }
}
