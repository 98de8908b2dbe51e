//! Brute-force minimizers for small instances, independent of the solvers.
//!
//! * ℝ¹: ternary search on `[min Y, max Y]`.
//! * Metric trees: ternary search along every edge, best edge wins.
//! * ℝ²: a 17 × 17 grid recentred on its best node and shrunk by 4 each
//!   round, started at the best of the sample points and pairwise midpoints.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::estimators::objective;
use crate::spaces::{Euclidean, MetricTree, TreePoint};
use crate::transforms::Transform;

/// Largest sample the oracle accepts.
pub const MAX_ORACLE_SAMPLE: usize = 16;

const GRID_HALF_WIDTH: i32 = 8;
const GRID_SHRINK: f64 = 4.0;
/// Rounds stop once the grid spacing falls below this fraction of the hull diameter.
const GRID_RESOLUTION: f64 = 1e-11;

fn check_size(n: usize) -> Result<()> {
    if n == 0 || n > MAX_ORACLE_SAMPLE {
        return Err(Error::UnsupportedOracle(format!(
            "sample of {n} points (need 1..={MAX_ORACLE_SAMPLE})"
        )));
    }
    Ok(())
}

/// Minimizer of a convex function on `[lo, hi]` by ternary search.
pub fn ternary<F: FnMut(f64) -> Result<f64>>(mut f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    while hi - lo > 1e-13 * (1.0 + lo.abs().max(hi.abs())) {
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if f(a)? <= f(b)? {
            hi = b;
        } else {
            lo = a;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Oracle for `euclidean:1` and `euclidean:2`.
pub fn minimize_euclidean(space: &Euclidean, t: &Transform, sample: &[DVector<f64>]) -> Result<DVector<f64>> {
    check_size(sample.len())?;
    let at = |v: Vec<f64>| DVector::from_vec(v);
    match space.dim() {
        1 => {
            let lo = sample.iter().map(|y| y[0]).fold(f64::INFINITY, f64::min);
            let hi = sample.iter().map(|y| y[0]).fold(f64::NEG_INFINITY, f64::max);
            let x = ternary(|x| objective(space, t, sample, &at(vec![x])), lo, hi)?;
            Ok(at(vec![x]))
        }
        2 => {
            let mut cands: Vec<DVector<f64>> = sample.to_vec();
            for i in 0..sample.len() {
                for j in i + 1..sample.len() {
                    cands.push((&sample[i] + &sample[j]) * 0.5);
                }
            }
            let mut best = cands[0].clone();
            let mut f_best = objective(space, t, sample, &best)?;
            for c in &cands[1..] {
                let v = objective(space, t, sample, c)?;
                if v < f_best {
                    best = c.clone();
                    f_best = v;
                }
            }
            let mut diam: f64 = 0.0;
            for a in sample {
                for b in sample {
                    diam = diam.max((a - b).norm());
                }
            }
            if diam == 0.0 {
                return Ok(best);
            }
            let mut h = diam / GRID_HALF_WIDTH as f64;
            while h > GRID_RESOLUTION * diam {
                let centre = best.clone();
                for i in -GRID_HALF_WIDTH..=GRID_HALF_WIDTH {
                    for j in -GRID_HALF_WIDTH..=GRID_HALF_WIDTH {
                        let p = at(vec![centre[0] + i as f64 * h, centre[1] + j as f64 * h]);
                        let v = objective(space, t, sample, &p)?;
                        if v < f_best {
                            best = p;
                            f_best = v;
                        }
                    }
                }
                h /= GRID_SHRINK;
            }
            Ok(best)
        }
        d => Err(Error::UnsupportedOracle(format!("euclidean:{d}"))),
    }
}

/// Oracle for metric trees: per-edge convex search.
pub fn minimize_tree(tree: &MetricTree, t: &Transform, sample: &[TreePoint]) -> Result<TreePoint> {
    check_size(sample.len())?;
    let mut best: Option<(TreePoint, f64)> = None;
    for e in 0..tree.edge_count() {
        let len = tree.edge_length(e);
        let s = ternary(|s| objective(tree, t, sample, &TreePoint::new(e, s)), 0.0, len)?;
        let p = tree.canonicalize(TreePoint::new(e, s));
        let v = objective(tree, t, sample, &p)?;
        if best.as_ref().is_none_or(|b| v < b.1) {
            best = Some((p, v));
        }
    }
    Ok(best.expect("a tree has at least one edge").0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spaces::HadamardSpace;

    fn pts1(xs: &[f64]) -> Vec<DVector<f64>> {
        xs.iter().map(|&x| DVector::from_vec(vec![x])).collect()
    }

    #[test]
    fn oracle_examples() {
        let e = Euclidean::new(1).unwrap();
        let m = minimize_euclidean(&e, &Transform::identity(), &pts1(&[0.0, 1.0, 10.0])).unwrap();
        assert!((m[0] - 1.0).abs() < 1e-9);
        let m = minimize_euclidean(&e, &Transform::power(1.5).unwrap(), &pts1(&[0.0, 1.0])).unwrap();
        assert!((m[0] - 0.5).abs() < 1e-9);

        let tree = MetricTree::star(3, 10.0).unwrap();
        let s = vec![TreePoint::new(0, 5.0), TreePoint::new(1, 5.0), TreePoint::new(2, 5.0)];
        let m = minimize_tree(&tree, &Transform::identity(), &s).unwrap();
        assert!(tree.distance(&m, &tree.vertex(0)).unwrap() < 1e-9);
    }

    #[test]
    fn two_dimensional_grid_finds_the_mean() {
        let e = Euclidean::new(2).unwrap();
        let s = vec![
            DVector::from_vec(vec![0.0, 0.0]),
            DVector::from_vec(vec![2.0, 0.0]),
            DVector::from_vec(vec![1.0, 3.0]),
        ];
        let m = minimize_euclidean(&e, &Transform::power(2.0).unwrap(), &s).unwrap();
        // the objective is flat to rounding within ~1e-8 of the minimizer
        assert!((m - DVector::from_vec(vec![1.0, 1.0])).amax() < 1e-6);
    }

    #[test]
    fn unsupported_configurations() {
        let e = Euclidean::new(3).unwrap();
        let s = vec![DVector::zeros(3)];
        assert!(matches!(minimize_euclidean(&e, &Transform::identity(), &s), Err(Error::UnsupportedOracle(_))));
        let e = Euclidean::new(1).unwrap();
        assert!(minimize_euclidean(&e, &Transform::identity(), &pts1(&[0.0; 17])).is_err());
    }
}
