use std::fmt;

/// A nonnegative extended real: either a finite value or `+∞`.
///
/// Bound calculators route infinite moments and slopes through this type so
/// that an infinite input produces an explicit infinite output rather than a
/// NaN from `∞ · 0` or `∞ - ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ExtReal {
    Finite(f64),
    Infinite,
}

impl ExtReal {
    pub fn finite(self) -> Option<f64> {
        match self {
            ExtReal::Finite(v) => Some(v),
            ExtReal::Infinite => None,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, ExtReal::Infinite)
    }

    /// Lossy conversion for display and CSV output.
    pub fn to_f64(self) -> f64 {
        match self {
            ExtReal::Finite(v) => v,
            ExtReal::Infinite => f64::INFINITY,
        }
    }

    /// Wraps an `f64`, mapping `+∞` and overflow to [`ExtReal::Infinite`].
    pub fn from_f64(v: f64) -> Self {
        if v == f64::INFINITY {
            ExtReal::Infinite
        } else {
            ExtReal::Finite(v)
        }
    }

    pub fn add(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a + b),
            _ => ExtReal::Infinite,
        }
    }

    /// Product with the measure-theoretic convention `0 · ∞ = 0`.
    pub fn mul(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::from_f64(a * b),
            (ExtReal::Finite(a), ExtReal::Infinite) | (ExtReal::Infinite, ExtReal::Finite(a)) => {
                if a == 0.0 {
                    ExtReal::Finite(0.0)
                } else {
                    ExtReal::Infinite
                }
            }
            (ExtReal::Infinite, ExtReal::Infinite) => ExtReal::Infinite,
        }
    }

    pub fn scale(self, factor: f64) -> ExtReal {
        self.mul(ExtReal::Finite(factor))
    }

    /// `1/x` with `1/0 = ∞` and `1/∞ = 0`.
    pub fn recip(self) -> ExtReal {
        match self {
            ExtReal::Finite(v) if v == 0.0 => ExtReal::Infinite,
            ExtReal::Finite(v) => ExtReal::from_f64(1.0 / v),
            ExtReal::Infinite => ExtReal::Finite(0.0),
        }
    }

    pub fn powf(self, p: f64) -> ExtReal {
        match self {
            ExtReal::Finite(v) => ExtReal::from_f64(v.powf(p)),
            ExtReal::Infinite if p > 0.0 => ExtReal::Infinite,
            ExtReal::Infinite if p == 0.0 => ExtReal::Finite(1.0),
            ExtReal::Infinite => ExtReal::Finite(0.0),
        }
    }

    pub fn min(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.min(b)),
            (ExtReal::Finite(a), ExtReal::Infinite) | (ExtReal::Infinite, ExtReal::Finite(a)) => {
                ExtReal::Finite(a)
            }
            (ExtReal::Infinite, ExtReal::Infinite) => ExtReal::Infinite,
        }
    }

    pub fn max(self, other: ExtReal) -> ExtReal {
        match (self, other) {
            (ExtReal::Finite(a), ExtReal::Finite(b)) => ExtReal::Finite(a.max(b)),
            _ => ExtReal::Infinite,
        }
    }
}

impl From<f64> for ExtReal {
    fn from(v: f64) -> Self {
        ExtReal::from_f64(v)
    }
}

impl fmt::Display for ExtReal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExtReal::Finite(v) => write!(f, "{v}"),
            ExtReal::Infinite => write!(f, "inf"),
        }
    }
}

/// Finite values serialize as numbers, `+∞` as the string `"inf"`.
impl serde::Serialize for ExtReal {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            ExtReal::Finite(v) => s.serialize_f64(*v),
            ExtReal::Infinite => s.serialize_str("inf"),
        }
    }
}
