//! Direct-coupling coherent observers for closed linear quantum plants.
//!
//! The pipeline is: check a plant `(Θ_p, R_p, C_p)` against the conditions
//! under which its outputs can be estimated ([`check_plant_conditions`]),
//! split it into oscillating and frozen variables ([`decompose_plant`]),
//! build a reduced-order observer coupled only to the frozen block
//! ([`synthesize_observer`]), and simulate the joint system to confirm that
//! the observer output converges to the plant output in time average
//! ([`propagate`], [`time_average_error`]).

pub mod analysis;
pub mod error;
pub mod expm;
pub mod linalg;
pub mod model;
pub mod oracle;
mod precise;
pub mod reference;
pub mod simulate;
pub mod synthesis;

pub use analysis::{
    controllability_span, decompose_plant, decompose_transformed, estimable_basis,
    isotropy_residual, transformed_condition_check, transformed_dynamics, ControllabilitySpan,
    DecomposedPlant, DecompositionResiduals, PlantBasis,
};
pub use error::{Error, Result};
pub use expm::matrix_exponential;
pub use linalg::{Mat, Vector};
pub use model::{
    check_plant_conditions, check_plant_conditions_with_tol, dynamics_from_hamiltonian,
    make_commutation_matrix, CommutationMatrix, ConditionReport, ConditionResiduals,
    QuantumLinearSystem, TOL_COND, TOL_SYM,
};
pub use oracle::{ode_oracle, rk4_series};
pub use simulate::{
    average_error_constant, commutation_residual, energy_residual, error_series,
    max_shared_deviation, propagate, propagator_at, propagator_series, time_average_error,
    uniform_grid, windowed_error, ConvergenceCriteria, ConvergenceReport, TrajectoryRecord,
};
pub use synthesis::{
    assemble_augmented, observer_order, predict_steady_state, synthesize_observer, AugmentedSystem,
    ObserverDesign, ObserverOptions,
};
