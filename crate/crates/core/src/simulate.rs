//! Propagation of the augmented system and time-averaged convergence
//! diagnostics.
//!
//! Everything here works on coefficient matrices: row `i` of `[C_p, 0]Φ(t)`
//! expresses the `i`-th plant output at time `t` in terms of the initial
//! variables `x_a(0)`, and likewise for the observer with `[0, C_o]Φ(t)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Mat};
use crate::precise::{exp_scaled, DdMatrix};
use crate::synthesis::{AugmentedSystem, ObserverDesign};

pub const DEFAULT_DT: f64 = 0.01;
pub const DEFAULT_T_END: f64 = 100.0;

/// `[0, dt, 2dt, …, t_end]`. `t_end` must be a whole number of steps.
pub fn uniform_grid(t_end: f64, dt: f64) -> Result<Vec<f64>> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Grid(format!("step must be positive, got {dt}")));
    }
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(Error::Grid(format!(
            "horizon must be non-negative, got {t_end}"
        )));
    }
    let steps = (t_end / dt).round();
    if (steps * dt - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Grid(format!(
            "horizon {t_end} is not a whole number of steps of {dt}"
        )));
    }
    Ok((0..=steps as usize).map(|k| k as f64 * dt).collect())
}

fn validate_grid(times: &[f64]) -> Result<()> {
    match times.first() {
        None => return Err(Error::Grid("empty time grid".into())),
        Some(&t0) if t0 != 0.0 => {
            return Err(Error::Grid(format!("grid must start at 0, starts at {t0}")))
        }
        _ => {}
    }
    if let Some(w) = times
        .windows(2)
        .find(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater) || !w[1].is_finite())
    {
        return Err(Error::Grid(format!(
            "grid must be strictly increasing ({} then {})",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn is_uniform(times: &[f64]) -> bool {
    let Some(h) = times.get(1).map(|t| t - times[0]) else {
        return true;
    };
    times
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h.max(1e-300))
}

fn check_propagator_input(a: &Mat) -> Result<()> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "propagator needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !linalg::is_finite(a) {
        return Err(Error::NonFinite("A"));
    }
    Ok(())
}

/// `Φ(t_k) = e^{A t_k}` on the grid, rounded to `f64`.
///
/// A uniform grid uses a single step exponential raised to successive powers;
/// step and product are carried in double-double arithmetic.
pub fn propagator_series(a: &Mat, times: &[f64]) -> Result<Vec<Mat>> {
    validate_grid(times)?;
    check_propagator_input(a)?;
    let n = a.nrows();
    let mut out = Vec::with_capacity(times.len());
    let mut phi = DdMatrix::identity(n);
    out.push(phi.to_f64());
    let uniform_step = (times.len() > 1 && is_uniform(times)).then(|| exp_scaled(a, times[1]));
    for w in times.windows(2) {
        phi = match &uniform_step {
            Some(step) => step.mul(&phi),
            None => exp_scaled(a, w[1] - w[0]).mul(&phi),
        };
        out.push(phi.to_f64());
    }
    Ok(out)
}

/// `Φ(t) = e^{A_a t}` at a single time.
pub fn propagator_at(aug: &AugmentedSystem, t: f64) -> Result<Mat> {
    check_propagator_input(&aug.a_a)?;
    Ok(exp_scaled(&aug.a_a, t).to_f64())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    /// `[C_p, 0]Φ(t_k)`
    pub zp_coeffs: Vec<Mat>,
    /// `[0, C_o]Φ(t_k)`
    pub zo_coeffs: Vec<Mat>,
    /// `(1/T)∫₀ᵀ [0, C_o]Φ(t) dt` at `T = times[k + 1]`; empty for a
    /// single-point grid.
    pub zo_avg: Vec<Mat>,
}

impl TrajectoryRecord {
    pub(crate) fn from_propagators(aug: &AugmentedSystem, times: Vec<f64>, phis: &[Mat]) -> Self {
        let zp_coeffs: Vec<Mat> = phis.iter().map(|phi| &aug.zp_selector * phi).collect();
        let zo_coeffs: Vec<Mat> = phis.iter().map(|phi| &aug.zo_selector * phi).collect();
        let zo_avg = running_average(&times, &zo_coeffs);
        Self {
            times,
            zp_coeffs,
            zo_coeffs,
            zo_avg,
        }
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("records are never empty")
    }

    /// Times at which `zo_avg` is defined.
    pub fn average_times(&self) -> &[f64] {
        &self.times[1..]
    }

    /// Largest deviation of any `z_p` coefficient from its initial value.
    pub fn zp_drift(&self) -> f64 {
        let first = &self.zp_coeffs[0];
        self.zp_coeffs
            .iter()
            .map(|z| linalg::max_abs(&(z - first)))
            .fold(0.0, f64::max)
    }
}

/// Cumulative trapezoidal average `(1/t_k)∫₀^{t_k} f dt` for `k ≥ 1`.
fn running_average(times: &[f64], samples: &[Mat]) -> Vec<Mat> {
    let mut out = Vec::with_capacity(times.len().saturating_sub(1));
    let Some(first) = samples.first() else {
        return out;
    };
    let mut integral = Mat::zeros(first.nrows(), first.ncols());
    for k in 1..times.len() {
        let h = times[k] - times[k - 1];
        integral += (&samples[k - 1] + &samples[k]) * (0.5 * h);
        out.push(&integral / times[k]);
    }
    out
}

pub fn propagate(aug: &AugmentedSystem, times: &[f64]) -> Result<TrajectoryRecord> {
    let phis = propagator_series(&aug.a_a, times)?;
    Ok(TrajectoryRecord::from_propagators(
        aug,
        times.to_vec(),
        &phis,
    ))
}

/// `‖Φ Θ Φᵀ − Θ‖_max`; zero for a propagator that preserves the commutation relations.
pub fn commutation_residual(phi: &Mat, theta: &Mat) -> f64 {
    linalg::max_abs(&(phi * theta * phi.transpose() - theta))
}

/// `‖Φᵀ R Φ − R‖_max`; zero when the quadratic Hamiltonian is conserved.
pub fn energy_residual(phi: &Mat, r: &Mat) -> f64 {
    linalg::max_abs(&(phi.transpose() * r * phi - r))
}

/// Pass/fail thresholds for [`time_average_error`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceCriteria {
    pub max_zp_drift: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    /// Horizon below which no verdict is given.
    pub min_horizon: f64,
    /// Slope samples are taken at `T_end / 2^j` for `j = 0..=octaves`.
    pub octaves: u32,
    /// Accept a report whose slope could not be fitted.
    pub allow_missing_slope: bool,
}

impl Default for ConvergenceCriteria {
    fn default() -> Self {
        Self {
            max_zp_drift: 1e-6,
            slope_min: -1.3,
            slope_max: -0.7,
            min_horizon: 10.0,
            octaves: 5,
            allow_missing_slope: false,
        }
    }
}

/// Fewest samples for which a decay slope is reported.
pub const MIN_SLOPE_SAMPLES: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub zp_drift: f64,
    /// `‖zo_avg(T_end) − [C_p, 0]‖_F`
    pub final_error: f64,
    /// Least-squares slope of `log e(T)` against `log T` over the samples.
    pub decay_slope: Option<f64>,
    /// `(T, e(T))` pairs used for the fit, where `e(T)` is the windowed peak error.
    pub samples: Vec<(f64, f64)>,
    pub passed: bool,
}

/// `(T, ‖zo_avg(T) − target‖_F)` for every averaging time.
pub fn error_series(rec: &TrajectoryRecord, target: &Mat) -> Vec<(f64, f64)> {
    rec.average_times()
        .iter()
        .zip(&rec.zo_avg)
        .map(|(&t, avg)| (t, (avg - target).norm()))
        .collect()
}

/// Peak averaging error over the window `T/2 ≤ s ≤ T`.
///
/// The raw error of a time average of oscillations is `|sin|`-modulated and
/// can dip to zero at isolated `T`; its peak over a trailing window follows
/// the `1/T` envelope.
pub fn windowed_error(rec: &TrajectoryRecord, target: &Mat, t: f64) -> Option<f64> {
    let slack = 1e-9 * t.max(1.0);
    rec.average_times()
        .iter()
        .zip(&rec.zo_avg)
        .filter(|(&s, _)| s >= 0.5 * t - slack && s <= t + slack)
        .map(|(_, avg)| (avg - target).norm())
        .reduce(f64::max)
}

fn fit_slope(samples: &[(f64, f64)]) -> f64 {
    let n = samples.len() as f64;
    let (sx, sy) = samples
        .iter()
        .fold((0.0, 0.0), |(sx, sy), &(t, e)| (sx + t.ln(), sy + e.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(t, e) in samples {
        let dx = t.ln() - mx;
        sxy += dx * (e.ln() - my);
        sxx += dx * dx;
    }
    sxy / sxx
}

pub fn time_average_error(
    rec: &TrajectoryRecord,
    aug: &AugmentedSystem,
    criteria: &ConvergenceCriteria,
) -> Result<ConvergenceReport> {
    let t_end = rec.t_end();
    if t_end < criteria.min_horizon {
        return Err(Error::HorizonTooShort {
            required: criteria.min_horizon,
            actual: t_end,
        });
    }
    let target = aug.target();
    let zp_drift = rec.zp_drift();
    let final_error = (rec.zo_avg.last().expect("t_end > 0") - target).norm();

    let mut samples: Vec<(f64, f64)> = (0..=criteria.octaves)
        .rev()
        .map(|j| t_end / 2f64.powi(j as i32))
        .filter_map(|t| windowed_error(rec, target, t).map(|e| (t, e)))
        .filter(|&(_, e)| e > 0.0 && e.is_finite())
        .collect();
    samples.dedup_by(|a, b| a.0 == b.0);

    let decay_slope = (samples.len() >= MIN_SLOPE_SAMPLES).then(|| fit_slope(&samples));
    let slope_ok = match decay_slope {
        Some(s) => s >= criteria.slope_min && s <= criteria.slope_max,
        None => criteria.allow_missing_slope,
    };
    let passed = zp_drift <= criteria.max_zp_drift && slope_ok;

    Ok(ConvergenceReport {
        zp_drift,
        final_error,
        decay_slope,
        samples,
        passed,
    })
}

/// Constant `K` with `‖zo_avg(T) − [C_p, 0]‖_F ≤ K/T` (up to quadrature error):
/// `(½√(λmax/λmin) + ½)‖R_o⁻¹Θ_o⁻¹‖ ‖C_o‖ ‖[R_o⁻¹βC_p, I]‖_F`.
pub fn average_error_constant(plant_c: &Mat, obs: &ObserverDesign) -> f64 {
    let eig = linalg::symmetric_eigenvalues(&obs.r_o);
    let (lo, hi) = (eig[0], eig[eig.len() - 1]);
    let r_inv = obs.r_o.clone().try_inverse().expect("R_o > 0");
    let theta_inv = obs
        .theta_o
        .as_matrix()
        .clone()
        .try_inverse()
        .expect("Θ_o is orthogonal");
    let g = linalg::spectral_norm(&(&r_inv * theta_inv));
    let offset_plant = &r_inv * &obs.beta * plant_c;
    let offset_norm = (offset_plant.norm_squared() + obs.n_o as f64).sqrt();
    (0.5 * (hi / lo).sqrt() * g + 0.5 * g) * linalg::spectral_norm(&obs.c_o) * offset_norm
}

/// Largest max-norm difference between the coefficient matrices of two
/// records at the times they share.
pub fn max_shared_deviation(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Option<f64> {
    let mut worst: Option<f64> = None;
    let mut j = 0;
    for (i, &t) in a.times.iter().enumerate() {
        let tol = 1e-9 * t.max(1.0);
        while j < b.times.len() && b.times[j] < t - tol {
            j += 1;
        }
        if j < b.times.len() && (b.times[j] - t).abs() <= tol {
            let d = linalg::max_abs(&(&a.zp_coeffs[i] - &b.zp_coeffs[j]))
                .max(linalg::max_abs(&(&a.zo_coeffs[i] - &b.zo_coeffs[j])));
            worst = Some(worst.map_or(d, |w: f64| w.max(d)));
        }
    }
    worst
}
