//! Matrix data model for closed linear quantum systems.
//!
//! A system with `n` canonical variables (`n/2` oscillator modes) is fixed by a
//! commutation matrix `Θ`, a symmetric Hamiltonian matrix `R` (`H = ½ xᵀRx`)
//! and an output matrix `C` selecting `z = Cx`. The drift `A = 2ΘR` is always
//! derived, never stored.

use serde::{Deserialize, Serialize};

use crate::analysis::controllability_span;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat};

/// Element-wise tolerance on the symmetry of Hamiltonian matrices.
pub const TOL_SYM: f64 = 1e-12;
/// Max-norm tolerance on the residuals of the plant conditions.
pub const TOL_COND: f64 = 1e-9;

/// The canonical commutation matrix `diag(J, …, J)` with `J = [[0, 1], [-1, 0]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommutationMatrix(Mat);

impl CommutationMatrix {
    pub fn canonical(n_modes: usize) -> Result<Self> {
        if n_modes == 0 {
            return Err(Error::ZeroModes);
        }
        let n = 2 * n_modes;
        let mut m = Mat::zeros(n, n);
        for k in 0..n_modes {
            m[(2 * k, 2 * k + 1)] = 1.0;
            m[(2 * k + 1, 2 * k)] = -1.0;
        }
        Ok(Self(m))
    }

    /// Canonical matrix for `n` variables; `n` must be even and positive.
    pub fn for_dimension(n: usize) -> Result<Self> {
        if !n.is_multiple_of(2) {
            return Err(Error::OddDimension(n));
        }
        Self::canonical(n / 2)
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn n_modes(&self) -> usize {
        self.dim() / 2
    }

    pub fn as_matrix(&self) -> &Mat {
        &self.0
    }

    pub fn into_matrix(self) -> Mat {
        self.0
    }

    /// `diag(self, other)`; the direct sum of canonical matrices is canonical.
    pub fn direct_sum(&self, other: &Self) -> Self {
        Self(linalg::block_diag(&self.0, &other.0))
    }
}

pub fn make_commutation_matrix(n_modes: usize) -> Result<CommutationMatrix> {
    CommutationMatrix::canonical(n_modes)
}

pub(crate) fn check_symmetric(name: &'static str, m: &Mat) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Dimension(format!(
            "`{name}` must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if !linalg::is_finite(m) {
        return Err(Error::NonFinite(name));
    }
    let asymmetry = linalg::asymmetry(m);
    if asymmetry > TOL_SYM {
        return Err(Error::Asymmetric { name, asymmetry });
    }
    Ok(())
}

/// `A = 2ΘR`.
pub fn dynamics_from_hamiltonian(theta: &CommutationMatrix, r: &Mat) -> Result<Mat> {
    if r.shape() != (theta.dim(), theta.dim()) {
        return Err(Error::Dimension(format!(
            "Hamiltonian is {}x{} but commutation matrix is {}x{}",
            r.nrows(),
            r.ncols(),
            theta.dim(),
            theta.dim()
        )));
    }
    check_symmetric("R", r)?;
    Ok(theta.as_matrix() * r * 2.0)
}

/// A closed plant `ẋ = 2ΘRx`, `z = Cx`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLinearSystem {
    theta: CommutationMatrix,
    r: Mat,
    c: Mat,
}

impl QuantumLinearSystem {
    /// Plant in canonical coordinates, `Θ = diag(J, …, J)`.
    pub fn new(r: Mat, c: Mat) -> Result<Self> {
        let theta = CommutationMatrix::for_dimension(r.nrows())?;
        Self::with_theta(theta, r, c)
    }

    pub fn with_theta(theta: CommutationMatrix, r: Mat, c: Mat) -> Result<Self> {
        let n = theta.dim();
        if r.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "R_p must be {n}x{n}, got {}x{}",
                r.nrows(),
                r.ncols()
            )));
        }
        check_symmetric("R_p", &r)?;
        if c.nrows() == 0 {
            return Err(Error::Dimension("C_p must have at least one row".into()));
        }
        if c.ncols() != n {
            return Err(Error::Dimension(format!(
                "C_p must have {n} columns, got {}",
                c.ncols()
            )));
        }
        if !linalg::is_finite(&c) {
            return Err(Error::NonFinite("C_p"));
        }
        Ok(Self { theta, r, c })
    }

    pub fn theta(&self) -> &CommutationMatrix {
        &self.theta
    }

    pub fn r(&self) -> &Mat {
        &self.r
    }

    pub fn c(&self) -> &Mat {
        &self.c
    }

    /// Number of system variables `n_p`.
    pub fn dim(&self) -> usize {
        self.theta.dim()
    }

    /// Number of outputs `m`.
    pub fn outputs(&self) -> usize {
        self.c.nrows()
    }

    pub fn a(&self) -> Mat {
        self.theta.as_matrix() * &self.r * 2.0
    }

    pub fn with_output(&self, c: Mat) -> Result<Self> {
        Self::with_theta(self.theta.clone(), self.r.clone(), c)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConditionResiduals {
    /// `‖C_p [R_p, Θ_p R_p]‖_max`, the finite form of `C_p(sI − Θ_p)⁻¹R_p ≡ 0`.
    pub transfer_function: f64,
    /// `‖C_p Θ_p C_pᵀ‖_max`.
    pub isotropy: f64,
    /// Smallest singular value of `C_p`.
    pub output_min_singular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub tf_cond_ok: bool,
    pub cjc_ok: bool,
    pub rank_ok: bool,
    pub bound_ok: bool,
    pub m: usize,
    pub rank_c: usize,
    pub rank_cr: usize,
    pub n_p2: usize,
    pub tolerance: f64,
    pub residuals: ConditionResiduals,
}

impl ConditionReport {
    pub fn all_ok(&self) -> bool {
        self.tf_cond_ok && self.cjc_ok && self.rank_ok && self.bound_ok
    }

    /// Human-readable list of the conditions that failed.
    pub fn failures(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !self.tf_cond_ok {
            out.push(format!(
                "C_p [R_p, Θ_p R_p] != 0 (residual {:e})",
                self.residuals.transfer_function
            ));
        }
        if !self.cjc_ok {
            out.push(format!(
                "C_p Θ_p C_pᵀ != 0 (residual {:e})",
                self.residuals.isotropy
            ));
        }
        if !self.rank_ok {
            out.push(format!("rank C_p = {} < m = {}", self.rank_c, self.m));
        }
        if !self.bound_ok {
            out.push(format!("m = {} exceeds n_p2/2 = {}/2", self.m, self.n_p2));
        }
        out
    }
}

pub fn check_plant_conditions(plant: &QuantumLinearSystem) -> ConditionReport {
    check_plant_conditions_with_tol(plant, TOL_COND)
}

pub fn check_plant_conditions_with_tol(plant: &QuantumLinearSystem, tol: f64) -> ConditionReport {
    let span = controllability_span(plant.theta(), plant.r())
        .expect("validated plant has consistent dimensions");
    let c = plant.c();
    let theta = plant.theta().as_matrix();

    let transfer_function = linalg::max_abs(&(c * &span.cr));
    let isotropy = linalg::max_abs(&(c * theta * c.transpose()));
    let rank_c = linalg::numerical_rank(c);
    let m = plant.outputs();
    let n_p2 = plant.dim() - span.rank;

    ConditionReport {
        tf_cond_ok: transfer_function <= tol,
        cjc_ok: isotropy <= tol,
        rank_ok: rank_c == m,
        bound_ok: 2 * m <= n_p2,
        m,
        rank_c,
        rank_cr: span.rank,
        n_p2,
        tolerance: tol,
        residuals: ConditionResiduals {
            transfer_function,
            isotropy,
            output_min_singular: linalg::singular_values(c).last().copied().unwrap_or(0.0),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j() -> Mat {
        Mat::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0])
    }

    #[test]
    fn single_mode_is_j() {
        assert_eq!(make_commutation_matrix(1).unwrap().as_matrix(), &j());
    }

    #[test]
    fn two_modes_block_diagonal() {
        let theta = make_commutation_matrix(2).unwrap();
        assert_eq!(theta.as_matrix(), &linalg::block_diag(&j(), &j()));
    }

    #[test]
    fn three_modes_square_to_minus_identity() {
        let theta = make_commutation_matrix(3).unwrap();
        let t = theta.as_matrix();
        assert_eq!(t * t, -Mat::identity(6, 6));
        assert_eq!(t.transpose(), -t);
    }

    #[test]
    fn zero_modes_rejected() {
        assert_eq!(make_commutation_matrix(0), Err(Error::ZeroModes));
        assert_eq!(
            CommutationMatrix::for_dimension(3),
            Err(Error::OddDimension(3))
        );
    }

    #[test]
    fn dynamics_examples() {
        let theta = make_commutation_matrix(1).unwrap();
        let a = dynamics_from_hamiltonian(&theta, &Mat::identity(2, 2)).unwrap();
        assert_eq!(a, j() * 2.0);

        let r = Mat::from_element(2, 2, 3.0);
        let a = dynamics_from_hamiltonian(&theta, &r).unwrap();
        assert_eq!(a, Mat::from_row_slice(2, 2, &[6.0, 6.0, -6.0, -6.0]));

        let a = dynamics_from_hamiltonian(&theta, &Mat::zeros(2, 2)).unwrap();
        assert_eq!(a, Mat::zeros(2, 2));
    }

    #[test]
    fn dynamics_rejects_bad_input() {
        let theta = make_commutation_matrix(1).unwrap();
        assert!(matches!(
            dynamics_from_hamiltonian(&theta, &Mat::identity(4, 4)),
            Err(Error::Dimension(_))
        ));
        let r = Mat::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            dynamics_from_hamiltonian(&theta, &r),
            Err(Error::Asymmetric { .. })
        ));
    }

    #[test]
    fn plant_validation() {
        assert!(matches!(
            QuantumLinearSystem::new(Mat::zeros(3, 3), Mat::zeros(1, 3)),
            Err(Error::OddDimension(3))
        ));
        assert!(matches!(
            QuantumLinearSystem::new(Mat::zeros(4, 4), Mat::zeros(1, 3)),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            QuantumLinearSystem::new(Mat::zeros(4, 4), Mat::zeros(0, 4)),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn zero_hamiltonian_plant_passes() {
        for n in [2, 4, 6] {
            let mut c = Mat::zeros(1, n);
            c[(0, 0)] = 1.0;
            let plant = QuantumLinearSystem::new(Mat::zeros(n, n), c).unwrap();
            let report = check_plant_conditions(&plant);
            assert!(report.tf_cond_ok);
            assert!(report.cjc_ok);
            assert!(report.rank_ok);
            assert_eq!(report.rank_cr, 0);
            assert_eq!(report.n_p2, n);
            assert!(report.all_ok());
        }
    }

    #[test]
    fn zero_output_fails_rank_only_on_rank() {
        let plant = QuantumLinearSystem::new(Mat::zeros(4, 4), Mat::zeros(1, 4)).unwrap();
        let report = check_plant_conditions(&plant);
        assert!(!report.rank_ok);
        assert!(report.tf_cond_ok && report.cjc_ok);
        assert_eq!(report.failures().len(), 1);
    }
}
