//! Controllable/uncontrollable split of a plant.
//!
//! Because `Θ_p² = −I`, the range of the full controllability matrix of
//! `(Θ_p, R_p)` equals the range of `[R_p, Θ_p R_p]`. The left singular
//! vectors of that matrix give an orthogonal `P` under which the plant splits
//! into an oscillating block `x̃_p1` and a block `x̃_p2` that the plant alone
//! never moves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{CommutationMatrix, QuantumLinearSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControllabilitySpan {
    /// `[R_p, Θ_p R_p]`, `n_p × 2n_p`.
    pub cr: Mat,
    pub rank: usize,
}

pub fn controllability_span(theta: &CommutationMatrix, r: &Mat) -> Result<ControllabilitySpan> {
    let n = theta.dim();
    if r.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "R_p must be {n}x{n}, got {}x{}",
            r.nrows(),
            r.ncols()
        )));
    }
    let mut cr = Mat::zeros(n, 2 * n);
    cr.view_mut((0, 0), (n, n)).copy_from(r);
    cr.view_mut((0, n), (n, n))
        .copy_from(&(theta.as_matrix() * r));
    let rank = linalg::numerical_rank(&cr);
    Ok(ControllabilitySpan { cr, rank })
}

/// Orthogonal change of basis `x̃_p = Pᵀx_p` for a given `(Θ_p, R_p)`.
///
/// The first `n_p1` columns are the left singular vectors of `[R_p, Θ_p R_p]`
/// for nonzero singular values (descending, sign-normalised). The remaining
/// columns span the left null space and are arranged so that `Θ22` comes out
/// as `diag(J, …, J)`; any orthonormal basis of that subspace is a valid set
/// of singular vectors for the zero singular value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantBasis {
    pub p: Mat,
    pub n_p1: usize,
    pub singular_values: Vec<f64>,
}

impl PlantBasis {
    pub fn n_p2(&self) -> usize {
        self.p.nrows() - self.n_p1
    }

    /// `C_p = [0, C̃_p2] Pᵀ` for an output given in transformed coordinates.
    pub fn output_matrix(&self, c_p2_tilde: &Mat) -> Result<Mat> {
        if c_p2_tilde.ncols() != self.n_p2() {
            return Err(Error::Dimension(format!(
                "transformed output must have n_p2 = {} columns, got {}",
                self.n_p2(),
                c_p2_tilde.ncols()
            )));
        }
        let n = self.p.nrows();
        let mut ct = Mat::zeros(c_p2_tilde.nrows(), n);
        ct.view_mut((0, self.n_p1), (c_p2_tilde.nrows(), self.n_p2()))
            .copy_from(c_p2_tilde);
        Ok(ct * self.p.transpose())
    }
}

pub fn estimable_basis(theta: &CommutationMatrix, r: &Mat) -> Result<PlantBasis> {
    let span = controllability_span(theta, r)?;
    let n = theta.dim();
    let n_p1 = span.rank;

    let (mut u, singular_values) = if n_p1 == 0 {
        (Mat::identity(n, n), vec![0.0; n])
    } else {
        let svd = span.cr.clone().svd(true, false);
        let u = svd.u.expect("left singular vectors requested");
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
        let mut sorted = Mat::zeros(n, n);
        for (dst, &src) in order.iter().enumerate() {
            sorted.set_column(dst, &u.column(src));
        }
        let sv = order.iter().map(|&i| svd.singular_values[i]).collect();
        (sorted, sv)
    };

    for j in 0..n_p1 {
        normalise_sign(&mut u, j);
    }

    let n_p2 = n - n_p1;
    if n_p2 > 0 {
        let u2 = u.columns(n_p1, n_p2).into_owned();
        let paired = canonical_pairing(&u2, theta.as_matrix());
        u.view_mut((0, n_p1), (n, n_p2)).copy_from(&paired);
    }

    Ok(PlantBasis {
        p: u,
        n_p1,
        singular_values,
    })
}

fn normalise_sign(u: &mut Mat, col: usize) {
    let c = u.column(col);
    let peak = c.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let pivot = c
        .iter()
        .find(|v| v.abs() >= peak - 1e-12)
        .copied()
        .unwrap_or(0.0);
    if pivot < 0.0 {
        u.column_mut(col).neg_mut();
    }
}

/// Orthonormal basis of the column space of `u2` (a `Θ`-invariant subspace)
/// ordered as pairs `(v, −Θv)`, so that the restriction of `Θ` reads
/// `diag(J, …, J)`. Each `v` is the projection of the first coordinate axis
/// with the largest remaining component, which makes the result depend on
/// the subspace only and not on the particular `u2`.
fn canonical_pairing(u2: &Mat, theta: &Mat) -> Mat {
    let (n, k) = u2.shape();
    let projector = u2 * u2.transpose();
    let mut basis: Vec<Vector> = Vec::with_capacity(k);
    while basis.len() + 1 < k {
        let mut best: Option<Vector> = None;
        for i in 0..n {
            let candidate = project_out(projector.column(i).into_owned(), &basis);
            if best
                .as_ref()
                .is_none_or(|b| candidate.norm() > b.norm() + 1e-12)
            {
                best = Some(candidate);
            }
        }
        let v = best.expect("n > 0").normalize();
        let w = project_out(&projector * -(theta * &v), &basis);
        let w = (&w - &v * v.dot(&w)).normalize();
        basis.push(v);
        basis.push(w);
    }
    Mat::from_columns(&basis)
}

fn project_out(mut v: Vector, basis: &[Vector]) -> Vector {
    // two passes keep the result orthogonal to working precision
    for _ in 0..2 {
        for b in basis {
            let d = b.dot(&v);
            v -= b * d;
        }
    }
    v
}

/// Max-norm residuals of the block structure produced by [`decompose_plant`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResiduals {
    /// `‖PᵀP − I‖_max`
    pub orthogonality: f64,
    /// Off-diagonal blocks of `PᵀΘ_pP`.
    pub theta_coupling: f64,
    /// `‖PᵀR_pP − diag(R_p11, 0)‖_max`
    pub hamiltonian_structure: f64,
    /// `‖C_pP‖_max` restricted to the first `n_p1` columns.
    pub output_structure: f64,
    pub theta11_min_singular: f64,
    pub theta22_min_singular: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecomposedPlant {
    pub p: Mat,
    pub theta11: Mat,
    pub theta22: Mat,
    pub r_p11: Mat,
    pub c_p2_tilde: Mat,
    pub n_p1: usize,
    pub n_p2: usize,
    /// `rank [R̃, Θ11 R̃] == n_p1` with `R̃` the top block of `PᵀR_p`.
    pub controllable: bool,
    pub residuals: DecompositionResiduals,
    pub source: QuantumLinearSystem,
}

impl DecomposedPlant {
    pub fn has_estimable_variables(&self) -> bool {
        self.n_p2 > 0
    }
}

pub fn decompose_plant(plant: &QuantumLinearSystem) -> Result<DecomposedPlant> {
    let basis = estimable_basis(plant.theta(), plant.r())?;
    let n = plant.dim();
    let (n_p1, n_p2) = (basis.n_p1, basis.n_p2());
    let p = basis.p;
    let pt = p.transpose();

    let theta_t = &pt * plant.theta().as_matrix() * &p;
    let r_t = &pt * plant.r() * &p;
    let c_t = plant.c() * &p;
    let m = plant.outputs();

    let theta11 = theta_t.view((0, 0), (n_p1, n_p1)).into_owned();
    let theta22 = theta_t.view((n_p1, n_p1), (n_p2, n_p2)).into_owned();
    let r_p11 = r_t.view((0, 0), (n_p1, n_p1)).into_owned();
    let c_p2_tilde = c_t.view((0, n_p1), (m, n_p2)).into_owned();

    let mut theta_rest = theta_t.clone();
    theta_rest.view_mut((0, 0), (n_p1, n_p1)).fill(0.0);
    theta_rest.view_mut((n_p1, n_p1), (n_p2, n_p2)).fill(0.0);
    let mut r_rest = r_t.clone();
    r_rest.view_mut((0, 0), (n_p1, n_p1)).fill(0.0);

    let r_top = (&pt * plant.r()).rows(0, n_p1).into_owned();
    let controllable = if n_p1 == 0 {
        true
    } else {
        let mut k = Mat::zeros(n_p1, 2 * n);
        k.view_mut((0, 0), (n_p1, n)).copy_from(&r_top);
        k.view_mut((0, n), (n_p1, n))
            .copy_from(&(&theta11 * &r_top));
        linalg::numerical_rank(&k) == n_p1
    };

    let residuals = DecompositionResiduals {
        orthogonality: linalg::max_abs(&(&pt * &p - Mat::identity(n, n))),
        theta_coupling: linalg::max_abs(&theta_rest),
        hamiltonian_structure: linalg::max_abs(&r_rest),
        output_structure: linalg::max_abs(&c_t.columns(0, n_p1).into_owned()),
        theta11_min_singular: linalg::min_singular_value(&theta11),
        theta22_min_singular: linalg::min_singular_value(&theta22),
    };

    Ok(DecomposedPlant {
        p,
        theta11,
        theta22,
        r_p11,
        c_p2_tilde,
        n_p1,
        n_p2,
        controllable,
        residuals,
        source: plant.clone(),
    })
}

/// Builds `C_p = [0, C̃_p2] Pᵀ` and decomposes the resulting plant, keeping
/// the supplied `C̃_p2` verbatim rather than recovering it as `C_p P`.
pub fn decompose_transformed(
    theta: &CommutationMatrix,
    r: &Mat,
    c_p2_tilde: &Mat,
) -> Result<DecomposedPlant> {
    let c = estimable_basis(theta, r)?.output_matrix(c_p2_tilde)?;
    let plant = QuantumLinearSystem::with_theta(theta.clone(), r.clone(), c)?;
    let mut dec = decompose_plant(&plant)?;
    dec.c_p2_tilde = c_p2_tilde.clone();
    Ok(dec)
}

/// `‖C Θ Cᵀ‖_max`.
pub fn isotropy_residual(c: &Mat, theta: &Mat) -> f64 {
    linalg::max_abs(&(c * theta * c.transpose()))
}

/// `‖C̃_p2 Θ22 C̃_p2ᵀ‖_max`.
pub fn transformed_condition_check(dec: &DecomposedPlant) -> f64 {
    isotropy_residual(&dec.c_p2_tilde, &dec.theta22)
}

/// `Pᵀ A_p P`; its last `n_p2` rows vanish.
pub fn transformed_dynamics(dec: &DecomposedPlant) -> Mat {
    dec.p.transpose() * dec.source.a() * &dec.p
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::check_plant_conditions;

    fn theta(n_modes: usize) -> CommutationMatrix {
        CommutationMatrix::canonical(n_modes).unwrap()
    }

    #[test]
    fn span_of_all_ones_hamiltonian() {
        let span = controllability_span(&theta(3), &Mat::from_element(6, 6, 1.0)).unwrap();
        assert_eq!(span.rank, 2);
        // rows alternate between all-ones and [1…1, −1…−1]
        for i in 0..6 {
            for j in 0..12 {
                let expected = if j >= 6 && i % 2 == 1 { -1.0 } else { 1.0 };
                assert_eq!(span.cr[(i, j)], expected, "entry ({i},{j})");
            }
        }
    }

    #[test]
    fn span_of_zero_and_identity() {
        let span = controllability_span(&theta(2), &Mat::zeros(4, 4)).unwrap();
        assert_eq!(span.rank, 0);
        assert_eq!(span.cr, Mat::zeros(4, 8));

        let span = controllability_span(&theta(2), &Mat::identity(4, 4)).unwrap();
        assert_eq!(span.rank, 4);
        assert_eq!(span.cr.columns(0, 4).into_owned(), Mat::identity(4, 4));
        assert_eq!(&span.cr.columns(4, 4).into_owned(), theta(2).as_matrix());
    }

    #[test]
    fn span_dimension_mismatch() {
        assert!(controllability_span(&theta(2), &Mat::zeros(6, 6)).is_err());
    }

    #[test]
    fn zero_hamiltonian_decomposes_trivially() {
        let mut c = Mat::zeros(1, 4);
        c[(0, 0)] = 1.0;
        let plant = QuantumLinearSystem::new(Mat::zeros(4, 4), c.clone()).unwrap();
        let dec = decompose_plant(&plant).unwrap();
        assert_eq!(dec.n_p1, 0);
        assert_eq!(dec.n_p2, 4);
        assert_eq!(dec.p, Mat::identity(4, 4));
        assert_eq!(&dec.theta22, plant.theta().as_matrix());
        assert_eq!(dec.c_p2_tilde, c);
    }

    #[test]
    fn full_rank_hamiltonian_leaves_nothing_estimable() {
        let r = Mat::from_row_slice(
            4,
            4,
            &[
                2.0, 0.3, -0.1, 0.4, 0.3, 1.5, 0.2, -0.6, -0.1, 0.2, 3.0, 0.1, 0.4, -0.6, 0.1, 2.2,
            ],
        );
        let plant =
            QuantumLinearSystem::new(r, Mat::identity(4, 4).rows(0, 1).into_owned()).unwrap();
        let dec = decompose_plant(&plant).unwrap();
        assert_eq!(dec.n_p1, 4);
        assert_eq!(dec.n_p2, 0);
        assert!(!dec.has_estimable_variables());
        assert!(!check_plant_conditions(&plant).bound_ok);
    }

    #[test]
    fn single_output_is_always_isotropic() {
        let t22 = linalg::block_diag(theta(1).as_matrix(), &-theta(1).into_matrix());
        let c = Mat::from_row_slice(1, 4, &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(isotropy_residual(&c, &t22), 0.0);
    }

    #[test]
    fn identity_output_violates_isotropy() {
        let t22 = linalg::block_diag(theta(1).as_matrix(), &-theta(1).into_matrix());
        assert_eq!(isotropy_residual(&Mat::identity(4, 4), &t22), 1.0);
    }

    #[test]
    fn canonical_pairing_produces_j_blocks() {
        // subspace spanned by the second and third modes of a 3-mode system
        let t = theta(3).into_matrix();
        let mut u2 = Mat::zeros(6, 4);
        u2[(3, 0)] = -1.0;
        u2[(2, 1)] = 1.0;
        u2[(5, 2)] = 1.0;
        u2[(4, 3)] = -1.0;
        let q = canonical_pairing(&u2, &t);
        let out = q.transpose() * &t * &q;
        assert!(linalg::max_abs(&(out - theta(2).into_matrix())) < 1e-14);
        assert!(linalg::max_abs(&(q.transpose() * &q - Mat::identity(4, 4))) < 1e-14);
        assert_eq!(q.column(0)[2], 1.0);
    }

    #[test]
    fn transformed_output_is_kept_verbatim() {
        let r = Mat::from_element(6, 6, 1.0);
        let c2 = Mat::from_row_slice(1, 4, &[0.1, 0.2, 0.3, 0.4]);
        let dec = decompose_transformed(&theta(3), &r, &c2).unwrap();
        assert_eq!(dec.c_p2_tilde, c2);
        let recovered = dec.source.c() * &dec.p;
        assert!(linalg::max_abs(&(recovered.columns(2, 4) - &c2)) < 1e-15);
        assert!(decompose_transformed(&theta(3), &r, &Mat::zeros(1, 3)).is_err());
    }
}
