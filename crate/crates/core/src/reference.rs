//! The six-variable oscillator network with an all-ones Hamiltonian used as
//! the worked example throughout the crate, CLI and benches.

use crate::analysis::{decompose_transformed, estimable_basis, DecomposedPlant};
use crate::error::Result;
use crate::linalg::Mat;
use crate::model::{CommutationMatrix, QuantumLinearSystem};
use crate::synthesis::ObserverOptions;

/// `R_p`: 6×6, every entry one.
pub fn all_ones_hamiltonian() -> Mat {
    Mat::from_element(6, 6, 1.0)
}

/// The two estimated variables in transformed coordinates, `C̃_p2`.
pub fn transformed_output() -> Mat {
    Mat::from_row_slice(2, 4, &[1.0, 1.0, 1.0, 1.0, 1.0, 1.0, -1.0, -1.0])
}

/// The expected coupling `R̃_c` for `R_o = I`, `C_o = I`, `β = −I`.
pub fn expected_transformed_coupling() -> Mat {
    Mat::from_row_slice(4, 2, &[-1.0, -1.0, -1.0, -1.0, -1.0, 1.0, -1.0, 1.0])
}

/// Plant with `C_p = [0, C̃_p2] Pᵀ` for this crate's choice of `P`.
pub fn all_ones_plant() -> Result<QuantumLinearSystem> {
    let theta = CommutationMatrix::canonical(3)?;
    let r = all_ones_hamiltonian();
    let c = estimable_basis(&theta, &r)?.output_matrix(&transformed_output())?;
    QuantumLinearSystem::with_theta(theta, r, c)
}

/// Decomposition of [`all_ones_plant`] carrying the nominal `C̃_p2` exactly.
pub fn all_ones_decomposition() -> Result<DecomposedPlant> {
    let theta = CommutationMatrix::canonical(3)?;
    decompose_transformed(&theta, &all_ones_hamiltonian(), &transformed_output())
}

/// `R_o = I`, `C_o = I`, `β = −I`.
pub fn unit_observer_options() -> ObserverOptions {
    ObserverOptions {
        r_o: Some(Mat::identity(2, 2)),
        c_o: Some(Mat::identity(2, 2)),
        beta: Some(-Mat::identity(2, 2)),
        ..Default::default()
    }
}
