//! Fixed-step classical Runge–Kutta integration of `Ẋ = A X`, `X(0) = I`.
//!
//! Shares no code with the exponential-based propagator and serves as its
//! cross-check.

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::simulate::{commutation_residual, uniform_grid, TrajectoryRecord};
use crate::synthesis::AugmentedSystem;

/// Steps between two checks of the commutation residual.
const MONITOR_EVERY: usize = 1000;
/// Residual (relative to `max(1, ‖X‖²_max)`) treated as divergence.
const DIVERGENCE_LIMIT: f64 = 1e-6;

fn rk4_step(a: &Mat, x: &Mat, dt: f64) -> Mat {
    let k1 = a * x;
    let k2 = a * (x + &k1 * (0.5 * dt));
    let k3 = a * (x + &k2 * (0.5 * dt));
    let k4 = a * (x + &k3 * dt);
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
}

fn check_divergence(x: &Mat, theta: &Mat, t: f64) -> Result<()> {
    let scale = linalg::max_abs(x).powi(2).max(1.0);
    let residual = commutation_residual(x, theta);
    // also catches NaN
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(residual <= DIVERGENCE_LIMIT * scale) {
        return Err(Error::StepTooLarge(residual, t));
    }
    Ok(())
}

/// Fundamental matrix at every grid point `k·dt ≤ t_end`.
pub fn rk4_series(a: &Mat, theta: &Mat, t_end: f64, dt: f64) -> Result<(Vec<f64>, Vec<Mat>)> {
    let times = uniform_grid(t_end, dt)?;
    let n = a.nrows();
    let mut x = Mat::identity(n, n);
    let mut out = Vec::with_capacity(times.len());
    out.push(x.clone());
    for (k, &t) in times.iter().enumerate().skip(1) {
        x = rk4_step(a, &x, dt);
        if k % MONITOR_EVERY == 0 || k + 1 == times.len() {
            check_divergence(&x, theta, t)?;
        }
        out.push(x.clone());
    }
    Ok((times, out))
}

pub fn ode_oracle(aug: &AugmentedSystem, t_end: f64, dt: f64) -> Result<TrajectoryRecord> {
    let (times, xs) = rk4_series(&aug.a_a, aug.theta_a.as_matrix(), t_end, dt)?;
    Ok(TrajectoryRecord::from_propagators(aug, times, &xs))
}
