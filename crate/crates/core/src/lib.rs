//! Transformed Fréchet means in Hadamard spaces.
//!
//! The crate is organized bottom-up:
//!
//! * [`transforms`]: the transformations `τ` and their derivatives,
//! * [`spaces`]: Euclidean, metric-tree and SPD-matrix geometries,
//! * [`sampling`]: seeded distributions with known population means,
//! * [`estimators`]: empirical τ-Fréchet means and a brute-force oracle,
//! * [`bounds`]: closed-form risk and deviation bounds,
//! * [`experiments`]: the Monte Carlo harness and property checks.

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod ext;
pub mod linalg;
pub mod oracle;
pub mod rng;
pub mod sampling;
pub mod spaces;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use estimators::{estimate, objective, EstimateResult, SolverConfig, SolverMethod};
pub use ext::ExtReal;
pub use spaces::{Euclidean, HadamardSpace, MetricTree, Spd, TreePoint};
pub use transforms::{Classification, Transform, TransformKind};
