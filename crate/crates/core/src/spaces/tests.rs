use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

fn v(xs: &[f64]) -> DVector<f64> {
    DVector::from_vec(xs.to_vec())
}

#[test]
fn euclidean_distance_example() {
    let s = Euclidean::new(2).unwrap();
    assert_eq!(s.distance(&v(&[0.0, 0.0]), &v(&[3.0, 4.0])).unwrap(), 5.0);
    assert!(matches!(s.distance(&v(&[0.0]), &v(&[3.0, 4.0])), Err(Error::Shape(_))));
}

#[test]
fn star_tree_distance_example() {
    let t = MetricTree::star(3, 10.0).unwrap();
    let a = TreePoint::new(0, 2.0);
    let b = TreePoint::new(1, 3.0);
    assert_eq!(t.distance(&a, &b).unwrap(), 5.0);
    assert_eq!(t.distance(&a, &TreePoint::new(0, 9.0)).unwrap(), 7.0);
}

#[test]
fn spd_distance_example() {
    let s = Spd::new(2).unwrap();
    let i = DMatrix::<f64>::identity(2, 2);
    let d = s.distance(&i, &(&i * 4.0)).unwrap();
    // oracle: √(Σ log² λᵢ) with λ = (4, 4)
    let oracle = (2.0 * 4f64.ln().powi(2)).sqrt();
    assert_relative_eq!(d, oracle, epsilon = 1e-14);
    assert_relative_eq!(d, 2f64.sqrt() * 4f64.ln(), epsilon = 1e-14);
}

#[test]
fn geodesic_examples() {
    let s = Euclidean::new(2).unwrap();
    let mid = s.geodesic_point(&v(&[0.0, 0.0]), &v(&[2.0, 2.0]), 0.5).unwrap();
    assert_eq!(mid, v(&[1.0, 1.0]));
    assert!(s.geodesic_point(&v(&[0.0, 0.0]), &v(&[2.0, 2.0]), 1.5).is_err());

    let spd = Spd::new(2).unwrap();
    let i = DMatrix::<f64>::identity(2, 2);
    let m = spd.geodesic_point(&i, &(&i * 4.0), 0.5).unwrap();
    assert!((m - &i * 2.0).amax() < 1e-14);

    let t = MetricTree::star(3, 10.0).unwrap();
    let m = t.geodesic_point(&TreePoint::new(0, 4.0), &TreePoint::new(1, 4.0), 0.5).unwrap();
    assert!(t.same_point(&m, &t.vertex(0)));
    assert_eq!(m, t.vertex(0));
}

#[test]
fn tree_geodesic_crosses_interior_vertices() {
    // path 0 - 1 - 2 - 3 with a branch 1 - 4
    let t = MetricTree::from_edges(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (1, 4, 5.0)]).unwrap();
    let a = TreePoint::new(3, 4.0); // on the branch, 4 from vertex 1
    let b = TreePoint::new(2, 1.5); // 1.5 past vertex 2
    let d = t.distance(&a, &b).unwrap();
    assert_relative_eq!(d, 4.0 + 2.0 + 1.5);
    for k in 0..=20 {
        let s = k as f64 / 20.0;
        let g = t.geodesic_point(&a, &b, s).unwrap();
        assert_relative_eq!(t.distance(&a, &g).unwrap(), s * d, epsilon = 1e-12);
        assert_relative_eq!(t.distance(&g, &b).unwrap(), (1.0 - s) * d, epsilon = 1e-12);
    }
}

#[test]
fn tree_parser_and_validation() {
    let t = MetricTree::parse_edge_list("# star\n10 20 1.5\n10 30 2\n\n10 40 0.5 # leg\n").unwrap();
    assert_eq!(t.vertex_count(), 4);
    assert_eq!(t.vertex_label(0), 10);
    assert_relative_eq!(t.distance(&TreePoint::new(0, 1.5), &TreePoint::new(1, 2.0)).unwrap(), 3.5);
    assert!(MetricTree::parse_edge_list("0 1 1\n1 2 1\n2 0 1\n").is_err());
    assert!(MetricTree::parse_edge_list("0 1 1\n2 3 1\n").is_err());
    assert!(MetricTree::parse_edge_list("0 1 -1\n").is_err());
    assert!(MetricTree::parse_edge_list("0 1\n").is_err());
    let star = MetricTree::star(3, 1.0).unwrap();
    assert!(star.check_point(&TreePoint::new(0, 1.5)).is_err());
    assert!(star.check_point(&TreePoint::new(5, 0.5)).is_err());
}

#[test]
fn tree_canonicalization_snaps_to_vertices() {
    let t = MetricTree::star(3, 10.0).unwrap();
    assert_eq!(t.canonicalize(TreePoint::new(2, 1e-13)), t.vertex(0));
    assert_eq!(t.canonicalize(TreePoint::new(2, 10.0)), TreePoint::new(2, 10.0));
    assert!(t.same_point(&TreePoint::new(1, 0.0), &TreePoint::new(2, 0.0)));
}

#[test]
fn directional_derivative_examples() {
    let s = Euclidean::new(2).unwrap();
    let q = v(&[0.0, 0.0]);
    let p = v(&[1.0, 0.0]);
    let d = |y: &[f64]| s.directional_derivative(&v(y), &q, &p, GeodesicEnd::Start).unwrap();
    assert_relative_eq!(d(&[2.0, 0.0]), -1.0);
    assert_relative_eq!(d(&[0.0, 1.0]), 0.0);
    let far = d(&[0.5, 10.0]);
    assert_relative_eq!(far, -0.5 / 100.25f64.sqrt(), epsilon = 1e-15);
    assert_relative_eq!(far, -0.04994, epsilon = 1e-5);
    assert!(s.directional_derivative(&q, &q, &p, GeodesicEnd::Start).is_err());
    assert!(s.directional_derivative(&v(&[2.0, 0.0]), &q, &q, GeodesicEnd::Start).is_err());
}

/// Finite-difference route through the trait's default implementation.
struct FiniteDifferenceEuclid(Euclidean);

impl HadamardSpace for FiniteDifferenceEuclid {
    type Point = DVector<f64>;
    fn describe(&self) -> String {
        "fd".into()
    }
    fn check_point(&self, p: &Self::Point) -> Result<()> {
        self.0.check_point(p)
    }
    fn distance(&self, q: &Self::Point, p: &Self::Point) -> Result<f64> {
        self.0.distance(q, p)
    }
    fn geodesic_unchecked(&self, q: &Self::Point, p: &Self::Point, t: f64) -> Result<Self::Point> {
        self.0.geodesic_unchecked(q, p, t)
    }
    fn random_point<R: rand::Rng + ?Sized>(&self, rng: &mut R, scale: f64) -> Self::Point {
        self.0.random_point(rng, scale)
    }
    fn parse_point(&self, fields: &[&str]) -> Result<Self::Point> {
        self.0.parse_point(fields)
    }
    fn format_point(&self, p: &Self::Point) -> Vec<String> {
        self.0.format_point(p)
    }
}

#[test]
fn finite_difference_matches_closed_form() {
    let e = Euclidean::new(3).unwrap();
    let fd = FiniteDifferenceEuclid(e);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let (y, q, p) = (e.random_point(&mut rng, 2.0), e.random_point(&mut rng, 2.0), e.random_point(&mut rng, 2.0));
        for end in [GeodesicEnd::Start, GeodesicEnd::Finish] {
            let exact = e.directional_derivative(&y, &q, &p, end).unwrap();
            let approx = fd.directional_derivative(&y, &q, &p, end).unwrap();
            assert!((exact - approx).abs() < 1e-5, "{exact} vs {approx}");
        }
    }
    // worked example through both routes
    let (y, q, p) = (v(&[0.5, 10.0, 0.0]), v(&[0.0, 0.0, 0.0]), v(&[1.0, 0.0, 0.0]));
    let a = fd.directional_derivative(&y, &q, &p, GeodesicEnd::Start).unwrap();
    assert!((a + 0.5 / 100.25f64.sqrt()).abs() < 1e-7);
}

#[test]
fn bowtie_examples() {
    let s = Euclidean::new(2).unwrap();
    let q = v(&[0.0, 0.0]);
    let p = v(&[1.0, 0.0]);
    assert!(bowtie_contains(&s, &q, &p, 0.0, &v(&[2.0, 0.0])).unwrap());
    assert!(!bowtie_contains(&s, &q, &p, 0.1, &v(&[0.5, 10.0])).unwrap());
    assert!(bowtie_contains(&s, &q, &q, 0.5, &q).unwrap());
    assert!(!bowtie_contains(&s, &q, &q, 0.5, &p).unwrap());
    assert!(bowtie_contains(&s, &q, &q, 1.0, &p).unwrap());
    assert!(bowtie_contains(&s, &q, &p, 0.0, &p).unwrap());
    assert!(bowtie_contains(&s, &q, &p, 1.5, &p).is_err());

    let t = MetricTree::star(3, 10.0).unwrap();
    // distances along a tree geodesic have slope ±1: every point lies in every bow tie
    assert!(bowtie_contains(&t, &TreePoint::new(0, 1.0), &TreePoint::new(1, 2.0), 0.0, &TreePoint::new(2, 3.0)).unwrap());
}

#[test]
fn quadruple_examples() {
    let s = Euclidean::new(1).unwrap();
    let t = crate::transforms::Transform::power(2.0).unwrap();
    let g = quadruple_gap(&s, &t, &v(&[0.0]), &v(&[1.0]), &v(&[5.0]), &v(&[0.0])).unwrap();
    // collinear with y, z on either side: equality
    assert_relative_eq!(g.gap, 0.0);
    let q = v(&[0.3]);
    let g = quadruple_gap(&s, &t, &q, &q, &v(&[5.0]), &v(&[-2.0])).unwrap();
    assert_eq!(g.gap, 0.0);
    let id = crate::transforms::Transform::identity();
    let g = quadruple_gap(&s, &id, &v(&[0.0]), &v(&[2.0]), &v(&[5.0]), &v(&[5.0])).unwrap();
    assert_relative_eq!(g.gap, -2.0 * 2.0 * 1.0);
    assert_relative_eq!(quadruple_constant(&crate::transforms::Transform::power(1.5).unwrap()), 2f64.sqrt());
}

#[test]
fn spd_congruence_invariance_and_symmetry() {
    let s = Spd::new(3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let a = s.random_point(&mut rng, 1.0);
        let b = s.random_point(&mut rng, 1.0);
        let m = DMatrix::from_fn(3, 3, |_, _| rand::Rng::random_range(&mut rng, -1.0..1.0))
            + DMatrix::<f64>::identity(3, 3) * 2.0;
        let d = s.distance(&a, &b).unwrap();
        assert_relative_eq!(d, s.distance(&b, &a).unwrap(), max_relative = 1e-8);
        let ma = m.transpose() * &a * &m;
        let mb = m.transpose() * &b * &m;
        let ma = (&ma + ma.transpose()) * 0.5;
        let mb = (&mb + mb.transpose()) * 0.5;
        assert_relative_eq!(d, s.distance(&ma, &mb).unwrap(), max_relative = 1e-8);
    }
}

#[test]
fn spd_rejects_invalid_points() {
    let s = Spd::new(2).unwrap();
    let mut a = DMatrix::<f64>::identity(2, 2);
    a[(0, 1)] = 0.5;
    assert!(s.check_point(&a).is_err());
    assert!(s.parse_point(&["1", "0", "0", "-1"]).is_err());
    assert!(s.parse_point(&["1", "0", "0"]).is_err());
    let ok = s.parse_point(&["2", "0.5", "0.5", "1"]).unwrap();
    assert_eq!(s.format_point(&ok), vec!["2", "0.5", "0.5", "1"]);
}

#[test]
fn tangent_average_of_power_two_weights_is_the_mean() {
    let e = Euclidean::new(2).unwrap();
    let pts = vec![v(&[0.0, 0.0]), v(&[2.0, 0.0]), v(&[1.0, 3.0])];
    let (m, step) = e.tangent_average(&v(&[0.0, 0.0]), &pts, &[1.0, 1.0, 1.0]).unwrap().unwrap();
    assert_eq!(m, v(&[1.0, 1.0]));
    assert_relative_eq!(step, 2f64.sqrt());

    let s = Spd::new(2).unwrap();
    let i = DMatrix::<f64>::identity(2, 2);
    let (m, _) = s.tangent_average(&i, &[&i * 4.0, i.clone()], &[1.0, 1.0]).unwrap().unwrap();
    assert!((m - &i * 2.0).amax() < 1e-13);
}

fn check_metric<S: HadamardSpace>(s: &S, seed: u64, scale: f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..50 {
        let a = s.random_point(&mut rng, scale);
        let b = s.random_point(&mut rng, scale);
        let c = s.random_point(&mut rng, scale);
        let ab = s.distance(&a, &b).unwrap();
        assert!((ab - s.distance(&b, &a).unwrap()).abs() <= 1e-9 * (1.0 + ab));
        assert!(ab <= s.distance(&a, &c).unwrap() + s.distance(&c, &b).unwrap() + 1e-9);
        assert!(midpoint_gap(s, &a, &b, &c).unwrap() <= 1e-9 * (1.0 + ab * ab));
        assert!(s.same_point(&s.geodesic_point(&a, &b, 0.0).unwrap(), &a));
        assert!(s.same_point(&s.geodesic_point(&a, &b, 1.0).unwrap(), &b));
        for (x, y) in [(0.1, 0.7), (0.25, 0.5), (0.9, 0.3)] {
            let gx = s.geodesic_point(&a, &b, x).unwrap();
            let gy = s.geodesic_point(&a, &b, y).unwrap();
            let d = s.distance(&gx, &gy).unwrap();
            assert!((d - (x - y).abs() * ab).abs() <= 1e-9 * (1.0 + ab), "{d} vs {}", (x - y).abs() * ab);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn metric_and_geodesic_axioms(seed in any::<u64>()) {
        check_metric(&Euclidean::new(4).unwrap(), seed, 3.0);
        check_metric(&Spd::new(3).unwrap(), seed, 0.8);
        check_metric(&MetricTree::star(5, 10.0).unwrap(), seed, 1.0);
        check_metric(&MetricTree::from_edges(&[(0, 1, 1.0), (1, 2, 2.0), (2, 3, 3.0), (1, 4, 5.0), (4, 5, 0.5)]).unwrap(), seed, 1.0);
    }

    #[test]
    fn bowtie_widening_is_monotone(seed in any::<u64>(), w1 in 0.0f64..1.0, dw in 0.0f64..1.0) {
        let w2 = (w1 + dw).min(1.0);
        let s = Euclidean::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..20 {
            let (q, p, y) = (s.random_point(&mut rng, 1.0), s.random_point(&mut rng, 1.0), s.random_point(&mut rng, 1.0));
            if bowtie_contains(&s, &q, &p, w1, &y).unwrap() {
                prop_assert!(bowtie_contains(&s, &q, &p, w2, &y).unwrap());
            }
        }
    }
}
