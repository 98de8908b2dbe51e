//! Transformations `τ` of the class of strictly increasing, convex functions
//! with concave derivative and `τ(0) = 0`.
//!
//! Every transform exposes `τ`, the right-continuous derivative `τ'` (extended
//! to 0 by its right limit), the right second derivative `τ''₊`, the
//! generalized inverse of `τ'` and the slope supremum `D = lim τ'(x)`.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::ext::ExtReal;

/// Family and parameters of a transform. Parameters are dimensionless.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransformKind {
    /// `x^α` with `α ∈ (1, 2]`.
    Power { alpha: f64 },
    /// `x`; yields the Fréchet median.
    Identity,
    /// `x²` below the kink `k`, `2kx - k²` above it.
    Huber { kink: f64 },
    /// `c²(√(1 + (x/c)²) - 1)`, i.e. the pseudo-Huber loss shifted to vanish at 0.
    PseudoHuber { scale: f64 },
    /// `log cosh x`.
    LogCosh,
    /// `(x + 1) log(x + 1) - x`, whose derivative is `log(x + 1)`.
    Entropic,
}

/// Robustness class of a transform, decided by the slope supremum and the
/// positivity of the second derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// `D = ∞`: robust to heavy tails, breakdown point 0.
    TailRobust,
    /// `D < ∞` and `τ''₊ > 0` everywhere.
    ContaminationRobust,
    /// `τ(x) = x`.
    Median,
    /// `D < ∞` but `τ''₊` vanishes on a ray (Huber).
    BoundedSlopeFlatTail,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform {
    kind: TransformKind,
}

impl Transform {
    pub fn new(kind: TransformKind) -> Result<Self> {
        match kind {
            TransformKind::Power { alpha } => {
                if !(alpha > 1.0 && alpha <= 2.0) {
                    return Err(domain(format!("power exponent {alpha} outside (1, 2]")));
                }
            }
            TransformKind::Huber { kink } if !(kink > 0.0 && kink.is_finite()) => {
                return Err(domain(format!("huber kink {kink} must be positive")));
            }
            TransformKind::PseudoHuber { scale } if !(scale > 0.0 && scale.is_finite()) => {
                return Err(domain(format!("pseudo-huber scale {scale} must be positive")));
            }
            _ => {}
        }
        Ok(Self { kind })
    }

    pub fn power(alpha: f64) -> Result<Self> {
        Self::new(TransformKind::Power { alpha })
    }

    pub fn identity() -> Self {
        Self { kind: TransformKind::Identity }
    }

    pub fn huber(kink: f64) -> Result<Self> {
        Self::new(TransformKind::Huber { kink })
    }

    pub fn pseudo_huber(scale: f64) -> Result<Self> {
        Self::new(TransformKind::PseudoHuber { scale })
    }

    pub fn log_cosh() -> Self {
        Self { kind: TransformKind::LogCosh }
    }

    pub fn entropic() -> Self {
        Self { kind: TransformKind::Entropic }
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    /// Exponent if this is a power transform.
    pub fn power_exponent(&self) -> Option<f64> {
        match self.kind {
            TransformKind::Power { alpha } => Some(alpha),
            _ => None,
        }
    }

    pub fn tau(&self, x: f64) -> Result<f64> {
        check_nonnegative(x)?;
        Ok(self.tau_unchecked(x))
    }

    pub fn dtau(&self, x: f64) -> Result<f64> {
        check_nonnegative(x)?;
        Ok(self.dtau_unchecked(x))
    }

    pub fn ddtau_plus(&self, x: f64) -> Result<ExtReal> {
        if !(x > 0.0) || !x.is_finite() {
            return Err(domain(format!("second derivative requested at x = {x}, need x > 0")));
        }
        Ok(ExtReal::Finite(self.ddtau_unchecked(x)))
    }

    /// `lim_{x↘0} τ''₊(x)`.
    pub fn ddtau_plus_at_zero(&self) -> ExtReal {
        match self.kind {
            TransformKind::Power { alpha } if alpha < 2.0 => ExtReal::Infinite,
            TransformKind::Power { .. } | TransformKind::Huber { .. } => ExtReal::Finite(2.0),
            TransformKind::Identity => ExtReal::Finite(0.0),
            TransformKind::PseudoHuber { .. } | TransformKind::LogCosh | TransformKind::Entropic => {
                ExtReal::Finite(1.0)
            }
        }
    }

    /// `τ''₊` with `x = 0` mapped to the right limit.
    pub fn ddtau_plus_ext(&self, x: f64) -> ExtReal {
        if x > 0.0 {
            ExtReal::Finite(self.ddtau_unchecked(x))
        } else {
            self.ddtau_plus_at_zero()
        }
    }

    /// `D = lim_{x→∞} τ'(x)`.
    pub fn slope_sup(&self) -> ExtReal {
        match self.kind {
            TransformKind::Power { .. } | TransformKind::Entropic => ExtReal::Infinite,
            TransformKind::Identity | TransformKind::LogCosh => ExtReal::Finite(1.0),
            TransformKind::Huber { kink } => ExtReal::Finite(2.0 * kink),
            TransformKind::PseudoHuber { scale } => ExtReal::Finite(scale),
        }
    }

    pub fn classify(&self) -> Classification {
        match self.kind {
            TransformKind::Identity => Classification::Median,
            TransformKind::Huber { .. } => Classification::BoundedSlopeFlatTail,
            _ if self.slope_sup().is_infinite() => Classification::TailRobust,
            _ => Classification::ContaminationRobust,
        }
    }

    /// Generalized inverse `sup{x > 0 : τ'(x) ≤ z}` with `sup ∅ = 0`.
    pub fn inv_dtau(&self, z: f64) -> Result<f64> {
        check_nonnegative(z)?;
        if let ExtReal::Finite(sup) = self.slope_sup() {
            if z >= sup {
                return Err(Error::UnboundedInverse { z, sup });
            }
        }
        Ok(match self.kind {
            TransformKind::Power { alpha } => (z / alpha).powf(1.0 / (alpha - 1.0)),
            TransformKind::Entropic => z.exp_m1(),
            // τ' ≡ 1 > z: the set is empty.
            TransformKind::Identity => 0.0,
            TransformKind::Huber { .. } => z / 2.0,
            TransformKind::PseudoHuber { scale } => {
                let u = z / scale;
                z / (1.0 - u * u).sqrt()
            }
            TransformKind::LogCosh => z.atanh(),
        })
    }

    /// Extended-real version of [`Transform::inv_dtau`]: `z ≥ D` gives `+∞`.
    pub fn inv_dtau_ext(&self, z: f64) -> Result<ExtReal> {
        match self.inv_dtau(z) {
            Ok(v) => Ok(ExtReal::from_f64(v)),
            Err(Error::UnboundedInverse { .. }) => Ok(ExtReal::Infinite),
            Err(e) => Err(e),
        }
    }

    /// Bisection route to the generalized inverse: bracket `[0, 1]`, doubled
    /// until `τ'(hi) > z`, then bisected to a relative width of `1e-12`.
    pub fn inv_dtau_numeric(&self, z: f64) -> Result<f64> {
        check_nonnegative(z)?;
        if let ExtReal::Finite(sup) = self.slope_sup() {
            if z >= sup {
                return Err(Error::UnboundedInverse { z, sup });
            }
        }
        if self.dtau_unchecked(0.0) > z {
            return Ok(0.0);
        }
        let mut lo = 0.0;
        let mut hi = 1.0;
        while self.dtau_unchecked(hi) <= z {
            lo = hi;
            hi *= 2.0;
            if !hi.is_finite() {
                return Err(Error::Numeric(format!("inverse bracket overflow at z = {z}")));
            }
        }
        while hi - lo > 1e-12 * hi {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.dtau_unchecked(mid) <= z {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    #[inline]
    pub(crate) fn tau_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            TransformKind::Power { alpha } => {
                if alpha == 2.0 {
                    x * x
                } else if alpha == 1.5 {
                    x * x.sqrt()
                } else {
                    x.powf(alpha)
                }
            }
            TransformKind::Identity => x,
            TransformKind::Huber { kink } => {
                if x < kink {
                    x * x
                } else {
                    2.0 * kink * x - kink * kink
                }
            }
            TransformKind::PseudoHuber { scale } => {
                let u = x / scale;
                // c²(√(1+u²) - 1) without cancellation
                scale * scale * u * u / ((1.0 + u * u).sqrt() + 1.0)
            }
            TransformKind::LogCosh => {
                // log cosh x = x + log(1 + e^{-2x}) - log 2
                x + (-2.0 * x).exp().ln_1p() - std::f64::consts::LN_2
            }
            TransformKind::Entropic => {
                if x < 1e-4 {
                    let x2 = x * x;
                    x2 / 2.0 - x2 * x / 6.0 + x2 * x2 / 12.0
                } else {
                    (x + 1.0) * x.ln_1p() - x
                }
            }
        }
    }

    #[inline]
    pub(crate) fn dtau_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            TransformKind::Power { alpha } => {
                if alpha == 2.0 {
                    2.0 * x
                } else if alpha == 1.5 {
                    1.5 * x.sqrt()
                } else {
                    alpha * x.powf(alpha - 1.0)
                }
            }
            TransformKind::Identity => 1.0,
            TransformKind::Huber { kink } => {
                if x < kink {
                    2.0 * x
                } else {
                    2.0 * kink
                }
            }
            TransformKind::PseudoHuber { scale } => {
                let u = x / scale;
                x / (1.0 + u * u).sqrt()
            }
            TransformKind::LogCosh => x.tanh(),
            TransformKind::Entropic => x.ln_1p(),
        }
    }

    #[inline]
    pub(crate) fn ddtau_unchecked(&self, x: f64) -> f64 {
        match self.kind {
            TransformKind::Power { alpha } => {
                if alpha == 2.0 {
                    2.0
                } else {
                    alpha * (alpha - 1.0) * x.powf(alpha - 2.0)
                }
            }
            TransformKind::Identity => 0.0,
            // right derivative: the kink itself belongs to the flat part
            TransformKind::Huber { kink } => {
                if x < kink {
                    2.0
                } else {
                    0.0
                }
            }
            TransformKind::PseudoHuber { scale } => {
                let u = x / scale;
                (1.0 + u * u).powf(-1.5)
            }
            TransformKind::LogCosh => {
                let c = x.cosh();
                if c.is_finite() {
                    1.0 / (c * c)
                } else {
                    0.0
                }
            }
            TransformKind::Entropic => 1.0 / (1.0 + x),
        }
    }
}

fn check_nonnegative(x: f64) -> Result<()> {
    if x >= 0.0 && x.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("argument {x} must be a finite nonnegative real")))
    }
}

impl fmt::Display for Transform {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            TransformKind::Power { alpha } => write!(f, "power:{alpha}"),
            TransformKind::Identity => write!(f, "identity"),
            TransformKind::Huber { kink } => write!(f, "huber:{kink}"),
            TransformKind::PseudoHuber { scale } => write!(f, "pseudo-huber:{scale}"),
            TransformKind::LogCosh => write!(f, "log-cosh"),
            TransformKind::Entropic => write!(f, "entropic"),
        }
    }
}

impl FromStr for Transform {
    type Err = Error;

    /// Grammar: `power:<alpha>`, `identity`, `huber[:<kink>]`,
    /// `pseudo-huber[:<scale>]`, `log-cosh`, `entropic`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, arg) = match s.split_once(':') {
            Some((n, a)) => (n, Some(a)),
            None => (s, None),
        };
        let parse_arg = |default: Option<f64>| -> Result<f64> {
            match (arg, default) {
                (Some(a), _) => a
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad transform parameter `{a}` in `{s}`"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::Parse(format!("transform `{s}` needs a parameter"))),
            }
        };
        let no_arg = |t: Transform| -> Result<Transform> {
            match arg {
                None => Ok(t),
                Some(_) => Err(Error::Parse(format!("transform `{name}` takes no parameter"))),
            }
        };
        match name {
            "power" => Transform::power(parse_arg(None)?),
            "identity" | "median" => no_arg(Transform::identity()),
            "huber" => Transform::huber(parse_arg(Some(1.0))?),
            "pseudo-huber" => Transform::pseudo_huber(parse_arg(Some(1.0))?),
            "log-cosh" => no_arg(Transform::log_cosh()),
            "entropic" => no_arg(Transform::entropic()),
            _ => Err(Error::Parse(format!("unknown transform `{s}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn all() -> Vec<Transform> {
        vec![
            Transform::power(1.5).unwrap(),
            Transform::power(2.0).unwrap(),
            Transform::power(1.1).unwrap(),
            Transform::identity(),
            Transform::huber(1.0).unwrap(),
            Transform::pseudo_huber(1.0).unwrap(),
            Transform::pseudo_huber(3.0).unwrap(),
            Transform::log_cosh(),
            Transform::entropic(),
        ]
    }

    #[test]
    fn tau_examples() {
        assert_eq!(Transform::power(2.0).unwrap().tau(3.0).unwrap(), 9.0);
        assert_eq!(Transform::huber(1.0).unwrap().tau(2.0).unwrap(), 3.0);
        let e = std::f64::consts::E;
        assert_relative_eq!(Transform::entropic().tau(e - 1.0).unwrap(), 1.0, epsilon = 1e-14);
        for t in all() {
            assert_eq!(t.tau(0.0).unwrap(), 0.0, "{t}");
        }
    }

    #[test]
    fn pseudo_huber_is_shifted() {
        let t = Transform::pseudo_huber(1.0).unwrap();
        for x in [0.1, 1.0, 7.5] {
            assert_relative_eq!(t.tau(x).unwrap(), (1.0f64 + x * x).sqrt() - 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn dtau_examples() {
        assert_relative_eq!(Transform::power(1.5).unwrap().dtau(4.0).unwrap(), 3.0);
        assert_relative_eq!(
            Transform::pseudo_huber(1.0).unwrap().dtau(1.0).unwrap(),
            std::f64::consts::FRAC_1_SQRT_2,
            epsilon = 1e-15
        );
        assert_eq!(Transform::entropic().dtau(0.0).unwrap(), 0.0);
        assert_eq!(Transform::identity().dtau(0.0).unwrap(), 1.0);
        assert_eq!(Transform::log_cosh().dtau(0.0).unwrap(), 0.0);
    }

    #[test]
    fn ddtau_examples() {
        assert_eq!(Transform::power(2.0).unwrap().ddtau_plus(7.0).unwrap(), ExtReal::Finite(2.0));
        let ph = Transform::pseudo_huber(1.0).unwrap().ddtau_plus(1.0).unwrap().finite().unwrap();
        assert_relative_eq!(ph, 2f64.powf(-1.5), epsilon = 1e-15);
        let huber = Transform::huber(1.0).unwrap();
        assert_eq!(huber.ddtau_plus(3.0).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(huber.ddtau_plus(1.0).unwrap(), ExtReal::Finite(0.0));
        assert_eq!(huber.ddtau_plus(0.5).unwrap(), ExtReal::Finite(2.0));
        assert!(huber.ddtau_plus(0.0).is_err());
    }

    #[test]
    fn inverse_examples() {
        assert_relative_eq!(Transform::power(1.5).unwrap().inv_dtau(3.0).unwrap(), 4.0, epsilon = 1e-12);
        assert_relative_eq!(Transform::entropic().inv_dtau(2f64.ln()).unwrap(), 1.0, epsilon = 1e-14);
        assert_eq!(Transform::power(1.7).unwrap().inv_dtau(0.0).unwrap(), 0.0);
        assert!(matches!(
            Transform::pseudo_huber(1.0).unwrap().inv_dtau(1.0),
            Err(Error::UnboundedInverse { .. })
        ));
        assert_eq!(Transform::identity().inv_dtau(0.5).unwrap(), 0.0);
    }

    #[test]
    fn closed_form_inverse_matches_bisection() {
        for t in all() {
            let sup = t.slope_sup().to_f64();
            for z in [0.0, 0.01, 0.3, 0.9, 1.7, 5.0] {
                if z >= sup {
                    continue;
                }
                let a = t.inv_dtau(z).unwrap();
                let b = t.inv_dtau_numeric(z).unwrap();
                assert!((a - b).abs() <= 1e-9 * (1.0 + a), "{t} z={z}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn classification() {
        assert_eq!(Transform::power(1.5).unwrap().classify(), Classification::TailRobust);
        assert_eq!(Transform::entropic().classify(), Classification::TailRobust);
        assert_eq!(Transform::pseudo_huber(1.0).unwrap().classify(), Classification::ContaminationRobust);
        assert_eq!(Transform::log_cosh().classify(), Classification::ContaminationRobust);
        assert_eq!(Transform::huber(1.0).unwrap().classify(), Classification::BoundedSlopeFlatTail);
        assert_eq!(Transform::identity().classify(), Classification::Median);
    }

    #[test]
    fn domain_errors() {
        let t = Transform::power(1.5).unwrap();
        assert!(t.tau(-1.0).is_err());
        assert!(t.tau(f64::NAN).is_err());
        assert!(t.dtau(-0.1).is_err());
        assert!(Transform::power(1.0).is_err());
        assert!(Transform::power(2.5).is_err());
        assert!(Transform::huber(0.0).is_err());
    }

    #[test]
    fn parse_round_trip() {
        for s in ["power:1.5", "identity", "huber:2", "pseudo-huber:1", "log-cosh", "entropic"] {
            let t: Transform = s.parse().unwrap();
            assert_eq!(t.to_string().parse::<Transform>().unwrap(), t);
        }
        assert_eq!("huber".parse::<Transform>().unwrap(), Transform::huber(1.0).unwrap());
        assert!("power".parse::<Transform>().is_err());
        assert!("cubic:3".parse::<Transform>().is_err());
        assert!("entropic:2".parse::<Transform>().is_err());
    }

    fn rel_le(a: f64, b: f64) -> bool {
        a <= b + 1e-10 * (1.0 + a.abs().max(b.abs()))
    }

    proptest! {
        #[test]
        fn derivative_subadditivity(x in 0.0f64..1e3, y in 0.0f64..1e3) {
            for t in all() {
                let lhs = t.dtau(x + y).unwrap();
                let mid = t.dtau(x).unwrap() + t.dtau(y).unwrap();
                let rhs = 2.0 * t.dtau((x + y) / 2.0).unwrap();
                prop_assert!(rel_le(lhs, mid), "{} {} {}", t, x, y);
                prop_assert!(rel_le(mid, rhs), "{} {} {}", t, x, y);
            }
        }

        #[test]
        fn sandwich_and_doubling(x in 0.0f64..1e3, y in 0.0f64..1e3) {
            for t in all() {
                let tx = t.tau(x).unwrap();
                prop_assert!(rel_le(0.5 * x * t.dtau(x).unwrap(), tx));
                prop_assert!(rel_le(tx, x * t.dtau(x / 2.0).unwrap()));
                prop_assert!(rel_le(x * t.dtau(x / 2.0).unwrap(), 4.0 * t.tau(x / 2.0).unwrap()));
                prop_assert!(rel_le(t.tau(x + y).unwrap(), 2.0 * tx + 2.0 * t.tau(y).unwrap()));
            }
        }

        #[test]
        fn convexity_and_concave_derivative(x in 0.0f64..1e3, y in 0.0f64..1e3) {
            for t in all() {
                let m = (x + y) / 2.0;
                prop_assert!(rel_le(t.tau(m).unwrap(), (t.tau(x).unwrap() + t.tau(y).unwrap()) / 2.0));
                prop_assert!(rel_le((t.dtau(x).unwrap() + t.dtau(y).unwrap()) / 2.0, t.dtau(m).unwrap()));
                if x > 0.0 {
                    prop_assert!(t.dtau(x).unwrap() > 0.0);
                }
            }
        }

        #[test]
        fn second_derivative_monotone_and_curvature_bound(x in 1e-6f64..1e3, y in 1e-6f64..1e3) {
            for t in all() {
                let (lo, hi) = if x <= y { (x, y) } else { (y, x) };
                let a = t.ddtau_plus(lo).unwrap().finite().unwrap();
                let b = t.ddtau_plus(hi).unwrap().finite().unwrap();
                prop_assert!(b >= 0.0);
                prop_assert!(rel_le(b, a), "{} not nonincreasing at {} {}", t, lo, hi);
                prop_assert!(rel_le(0.5 * x * x * t.ddtau_plus(x).unwrap().finite().unwrap(), t.tau(x).unwrap()));
            }
        }

        #[test]
        fn derivative_scaling(x in 0.0f64..1e3, a in 0.0f64..1.0, b in 1.0f64..50.0) {
            for t in all() {
                prop_assert!(rel_le(a * t.dtau(x).unwrap(), t.dtau(a * x).unwrap()));
                prop_assert!(rel_le(t.dtau(b * x).unwrap(), b * t.dtau(x).unwrap()));
            }
        }

        #[test]
        fn power_function_identities(alpha in 1.0f64..=2.0, x in 0.0f64..1e3, y in 0.0f64..1e3) {
            let e = alpha - 1.0;
            let s = (x + y).powf(e);
            let mid = x.powf(e) + y.powf(e);
            prop_assert!(rel_le(s, mid));
            prop_assert!(rel_le(mid, 2f64.powf(2.0 - alpha) * s));
            let lhs = (x.powf(alpha) - y.powf(alpha)).abs();
            let rhs = 2f64.powf(1.0 - alpha) * alpha * (x - y).abs() * s;
            prop_assert!(lhs <= rhs + 1e-9 * (1.0 + rhs));
        }

        #[test]
        fn inverse_round_trip(log_x in -6.0f64..6.0, alpha in 1.05f64..=2.0) {
            let x = 10f64.powf(log_x);
            for t in [Transform::power(alpha).unwrap(), Transform::entropic()] {
                let back = t.inv_dtau(t.dtau(x).unwrap()).unwrap();
                prop_assert!((back - x).abs() <= 1e-8 * x, "{} x={} back={}", t, x, back);
            }
        }
    }
}
