//! Ramsey spectroscopy of an ensemble of two-level atoms coupled through a
//! lossy cavity: exact master-equation solvers (dense and permutation
//! symmetric), cumulant and mean-field approximations, conditional
//! homodyne trajectories, and fringe fitting.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod dense;
pub mod dicke;
pub mod error;
pub mod ode;
pub mod output;
pub mod params;
pub mod ramsey;
pub mod rotation;
pub mod semiclassical;
pub mod sparse;
pub mod spin;
pub mod trajectory;
pub mod validate;

pub use error::{Error, Result};
pub use params::{derive_rates, validate_regime, ModelParams, Rates, RegimeReport};
pub use rotation::Axis;
pub use ramsey::{
    fit_fringe, fit_fringe_with, run_ramsey, run_ramsey_with, sweep_lambda, sweep_lambda_with, Backend, FitOptions,
    FitResult, FringeSeries, RamseyOptions, RamseyRun, ReadoutMode, SweepAxis, SweepOptions, SweepRow,
};
pub use semiclassical::{lambda_semiclassical, KuramotoEnsemble};
pub use trajectory::{
    crossing_statistics, ensemble_run, ensemble_run_with, run_trajectory, CrossingReport, Ensemble, TrajectoryOptions,
    TrajectoryRecord,
};
pub use validate::{run_validation, ValidationOptions, ValidationReport};
