//! Reduced-order direct-coupling observer construction and the augmented
//! plant–observer system.

use serde::{Deserialize, Serialize};

use crate::analysis::DecomposedPlant;
use crate::error::{Error, Result};
use crate::linalg::{self, Mat, Vector};
use crate::model::{
    check_plant_conditions_with_tol, check_symmetric, CommutationMatrix, QuantumLinearSystem,
    TOL_COND,
};

/// Tolerance on `‖−C_o R_o⁻¹ β − I‖_max` for accepted designs.
pub const TOL_OUTPUT_IDENTITY: f64 = 1e-10;

/// Free parameters of the observer. Anything left as `None` falls back to the
/// default parameterisation `R_o = ωI`, `C_o = [I, 0]`,
/// `β = −R_o C_oᵀ (C_o C_oᵀ)⁻¹`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverOptions {
    pub omega: f64,
    pub r_o: Option<Mat>,
    pub c_o: Option<Mat>,
    pub beta: Option<Mat>,
    /// Tolerance used when re-checking the plant conditions.
    pub tol_cond: f64,
}

impl Default for ObserverOptions {
    fn default() -> Self {
        Self {
            omega: 1.0,
            r_o: None,
            c_o: None,
            beta: None,
            tol_cond: TOL_COND,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    pub n_o: usize,
    pub r_o: Mat,
    pub beta: Mat,
    pub c_o: Mat,
    /// `C̃_p2ᵀ βᵀ`, coupling to the transformed plant variables.
    pub r_c_tilde: Mat,
    /// `P [0; R̃_c]`, coupling in the original plant coordinates.
    pub r_c: Mat,
    pub theta_o: CommutationMatrix,
}

impl ObserverDesign {
    /// `‖−C_o R_o⁻¹ β − I‖_max`.
    pub fn output_identity_residual(&self) -> f64 {
        output_identity_residual(&self.r_o, &self.c_o, &self.beta)
    }

    /// The same observer with the plant coupling switched off.
    pub fn without_coupling(&self) -> Self {
        Self {
            r_c_tilde: Mat::zeros(self.r_c_tilde.nrows(), self.r_c_tilde.ncols()),
            r_c: Mat::zeros(self.r_c.nrows(), self.r_c.ncols()),
            ..self.clone()
        }
    }
}

/// Observer order: `m` for even `m`, `m + 1` otherwise.
pub fn observer_order(m: usize) -> usize {
    m + m % 2
}

fn output_identity_residual(r_o: &Mat, c_o: &Mat, beta: &Mat) -> f64 {
    let Some(r_inv) = r_o.clone().try_inverse() else {
        return f64::INFINITY;
    };
    let m = c_o.nrows();
    linalg::max_abs(&(-(c_o * r_inv * beta) - Mat::identity(m, m)))
}

fn expect_shape(name: &str, m: &Mat, rows: usize, cols: usize) -> Result<()> {
    if m.shape() != (rows, cols) {
        return Err(Error::Dimension(format!(
            "`{name}` must be {rows}x{cols}, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn synthesize_observer(
    dec: &DecomposedPlant,
    options: &ObserverOptions,
) -> Result<ObserverDesign> {
    let report = check_plant_conditions_with_tol(&dec.source, options.tol_cond);
    if dec.n_p2 == 0 {
        return Err(Error::NothingEstimable);
    }
    if !report.all_ok() {
        return Err(Error::ConditionsFailed(report.failures().join("; ")));
    }

    let m = dec.source.outputs();
    let n_o = observer_order(m);

    let r_o = match &options.r_o {
        Some(r) => {
            expect_shape("R_o", r, n_o, n_o)?;
            check_symmetric("R_o", r)?;
            r.clone()
        }
        None => {
            if !(options.omega.is_finite() && options.omega > 0.0) {
                return Err(Error::NotPositiveDefinite(options.omega));
            }
            Mat::identity(n_o, n_o) * options.omega
        }
    };
    let min_eig = linalg::symmetric_eigenvalues(&r_o)[0];
    if min_eig <= 0.0 {
        return Err(Error::NotPositiveDefinite(min_eig));
    }

    let c_o = match &options.c_o {
        Some(c) => {
            expect_shape("C_o", c, m, n_o)?;
            c.clone()
        }
        None => Mat::identity(m, n_o),
    };

    let beta = match &options.beta {
        Some(b) => {
            expect_shape("beta", b, n_o, m)?;
            b.clone()
        }
        None => {
            let gram = (&c_o * c_o.transpose())
                .try_inverse()
                .ok_or_else(|| Error::Dimension("C_o must have full row rank".into()))?;
            -(&r_o * c_o.transpose() * gram)
        }
    };

    let beta_rank = linalg::numerical_rank(&beta);
    if beta_rank != m {
        return Err(Error::BetaRank {
            expected: m,
            actual: beta_rank,
        });
    }
    let residual = output_identity_residual(&r_o, &c_o, &beta);
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(residual <= TOL_OUTPUT_IDENTITY) {
        return Err(Error::OutputIdentity(residual));
    }

    let r_c_tilde = dec.c_p2_tilde.transpose() * beta.transpose();
    let mut lifted = Mat::zeros(dec.n_p1 + dec.n_p2, n_o);
    lifted
        .view_mut((dec.n_p1, 0), (dec.n_p2, n_o))
        .copy_from(&r_c_tilde);
    let r_c = &dec.p * lifted;

    Ok(ObserverDesign {
        n_o,
        r_o,
        beta,
        c_o,
        r_c_tilde,
        r_c,
        theta_o: CommutationMatrix::for_dimension(n_o)?,
    })
}

/// `x̄_o = −R_o⁻¹ β z_p`, the point the observer oscillates about.
pub fn predict_steady_state(obs: &ObserverDesign, zp0: &Vector) -> Result<Vector> {
    if zp0.len() != obs.beta.ncols() {
        return Err(Error::Dimension(format!(
            "z_p has {} entries, observer expects {}",
            zp0.len(),
            obs.beta.ncols()
        )));
    }
    let solved = obs
        .r_o
        .clone()
        .cholesky()
        .ok_or(Error::NotPositiveDefinite(f64::NAN))?
        .solve(&(&obs.beta * zp0));
    Ok(-solved)
}

/// Plant and observer as one closed system with `R_a = [[R_p, R_c], [R_cᵀ, R_o]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedSystem {
    pub theta_a: CommutationMatrix,
    pub r_a: Mat,
    pub a_a: Mat,
    /// `[C_p, 0]`
    pub zp_selector: Mat,
    /// `[0, C_o]`
    pub zo_selector: Mat,
    pub n_p: usize,
    pub n_o: usize,
}

impl AugmentedSystem {
    pub fn dim(&self) -> usize {
        self.n_p + self.n_o
    }

    /// The plant on its own; the observer output selector is empty.
    pub fn plant_only(plant: &QuantumLinearSystem) -> Self {
        let n_p = plant.dim();
        Self {
            theta_a: plant.theta().clone(),
            r_a: plant.r().clone(),
            a_a: plant.a(),
            zp_selector: plant.c().clone(),
            zo_selector: Mat::zeros(plant.outputs(), n_p),
            n_p,
            n_o: 0,
        }
    }

    /// `[C_p, 0]`, the value the observer's time average converges to.
    pub fn target(&self) -> &Mat {
        &self.zp_selector
    }
}

pub fn assemble_augmented(
    plant: &QuantumLinearSystem,
    obs: &ObserverDesign,
) -> Result<AugmentedSystem> {
    let n_p = plant.dim();
    let n_o = obs.n_o;
    let m = plant.outputs();
    expect_shape("R_c", &obs.r_c, n_p, n_o)?;
    expect_shape("R_o", &obs.r_o, n_o, n_o)?;
    expect_shape("C_o", &obs.c_o, m, n_o)?;

    let n = n_p + n_o;
    let mut r_a = Mat::zeros(n, n);
    r_a.view_mut((0, 0), (n_p, n_p)).copy_from(plant.r());
    r_a.view_mut((0, n_p), (n_p, n_o)).copy_from(&obs.r_c);
    r_a.view_mut((n_p, 0), (n_o, n_p))
        .copy_from(&obs.r_c.transpose());
    r_a.view_mut((n_p, n_p), (n_o, n_o)).copy_from(&obs.r_o);

    let theta_a = plant.theta().direct_sum(&obs.theta_o);
    let a_a = theta_a.as_matrix() * &r_a * 2.0;

    let mut zp_selector = Mat::zeros(m, n);
    zp_selector.view_mut((0, 0), (m, n_p)).copy_from(plant.c());
    let mut zo_selector = Mat::zeros(m, n);
    zo_selector.view_mut((0, n_p), (m, n_o)).copy_from(&obs.c_o);

    Ok(AugmentedSystem {
        theta_a,
        r_a,
        a_a,
        zp_selector,
        zo_selector,
        n_p,
        n_o,
    })
}
