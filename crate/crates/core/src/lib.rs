//! Robust qubit-initialization pulses for a three-level Lambda system designed
//! by Lewis-Riesenfeld invariant inverse engineering, plus the simulation and
//! sensitivity tools used to qualify them.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod dynamics;
pub mod error;
pub mod export;
pub mod metrics;
pub mod optimizer;
pub mod sweeps;

pub use ansatz::{AnsatzParams, BoundaryTolerance, ConstraintReport, GaussianTerm, Waveform};
pub use dynamics::{Drive, InvariantSpec, QState, SimSettings, Trajectory};
pub use error::{PulseError, Result};
pub use export::{load_params, save_params, ConventionCalibration, FrequencyConvention};
pub use metrics::SensitivityReport;
pub use optimizer::{ObjectiveValue, ObjectiveWeights, OptimizeOutcome};
pub use sweeps::{BeamModel, RingWeighting, SweepKind, SweepReport};
