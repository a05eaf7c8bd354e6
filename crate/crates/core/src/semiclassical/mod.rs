//! Large-N reductions of the effective master equation: the cumulant
//! closure that fixes the steady-state inversion, the product-state
//! mean-field equation, and its phase-only Kuramoto limit.

pub mod cumulant;
pub mod kuramoto;
pub mod meanfield;

pub use cumulant::{
    cumulant_rhs, cumulant_steady_state, integrate_cumulant, lambda_from, lambda_semiclassical, semiclassical_csv,
    semiclassical_point, CumulantState, SemiclassicalPoint,
};
pub use kuramoto::{kuramoto_run, kuramoto_step, order_parameter, order_per_atom, KuramotoEnsemble};
pub use meanfield::{meanfield_rhs, meanfield_steady_state, MeanFieldSteadyState};
