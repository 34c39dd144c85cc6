//! Accelerated variance-reduced extra-point solvers for finite-sum monotone
//! variational inequalities.

pub mod baselines;
pub mod component;
pub mod constrained;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod oracle;
pub mod point;
pub mod problem;
pub mod problems;
pub mod report;
pub mod rng;
pub mod run;
pub mod savrep;
pub mod savrep_m;
pub mod sets;
pub mod verify;
pub mod zeroth_order;

pub use component::{Component, SharedComponent};
pub use error::{Result, VrviError};
pub use linalg::DenseMatrix;
pub use metrics::{q_gap, residual_norm, GapEvaluator, Monitor, TraceRecord};
pub use oracle::{ComponentFamily, NoiseModel, SnapshotCache};
pub use point::Point;
pub use problem::CompositeVIProblem;
pub use sets::ConstraintSet;
