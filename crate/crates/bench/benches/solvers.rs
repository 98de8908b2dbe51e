use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;
use tfmean::sampling::{sample, Distribution, RadialLaw, RadialSymmetric, SpdSymmetric, StarSymmetric};
use tfmean::{estimate, SolverConfig, SolverMethod, Transform};

fn euclidean(c: &mut Criterion) {
    let dist = RadialSymmetric::centered(16, RadialLaw::pareto(1.8, 1.0).unwrap()).unwrap();
    let cfg = SolverConfig::default();
    let mut g = c.benchmark_group("weiszfeld_r16");
    for n in [64, 256, 1024] {
        let pts = sample(&dist, n, 1).unwrap();
        for spec in ["power:1.5", "pseudo-huber:1", "identity"] {
            let t: Transform = spec.parse().unwrap();
            g.bench_with_input(BenchmarkId::new(spec, n), &pts, |b, pts| {
                b.iter(|| estimate(dist.space(), &t, black_box(pts), &cfg).unwrap())
            });
        }
    }
    g.finish();
}

fn prox(c: &mut Criterion) {
    let t = Transform::power(1.5).unwrap();
    let mut g = c.benchmark_group("cyclic_prox");
    let star = StarSymmetric::new(5, RadialLaw::half_gaussian(1.0).unwrap(), 10.0).unwrap();
    let spd = SpdSymmetric::at_identity(3, 0.5).unwrap();
    let cfg = SolverConfig { method: SolverMethod::CyclicProx, ..SolverConfig::default() };
    for n in [32, 128] {
        let pts = sample(&star, n, 2).unwrap();
        g.bench_with_input(BenchmarkId::new("star5", n), &pts, |b, pts| {
            b.iter(|| estimate(star.space(), &t, black_box(pts), &cfg).unwrap())
        });
        let pts = sample(&spd, n, 3).unwrap();
        g.bench_with_input(BenchmarkId::new("spd3", n), &pts, |b, pts| {
            b.iter(|| estimate(spd.space(), &t, black_box(pts), &cfg).unwrap())
        });
    }
    g.finish();
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = euclidean, prox
}
criterion_main!(benches);
