//! Matrix exponential by scaling and squaring with diagonal Padé approximants
//! of degree 3 through 13, selected by the 1-norm of the input.

use crate::error::{Error, Result};
use crate::linalg::Mat;

// 1-norm bounds below which the degree-m approximant reaches unit roundoff.
#[allow(clippy::excessive_precision)]
mod bounds {
    pub const THETA_3: f64 = 1.495585217958292e-2;
    pub const THETA_5: f64 = 2.539398330063230e-1;
    pub const THETA_7: f64 = 9.504178996162932e-1;
    pub const THETA_9: f64 = 2.097847961257068e0;
    pub const THETA_13: f64 = 5.371920351148152e0;
}
use bounds::*;

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn one_norm(a: &Mat) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

pub fn matrix_exponential(a: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "matrix exponential needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("A"));
    }
    let n = a.nrows();
    if n == 0 {
        return Ok(Mat::zeros(0, 0));
    }

    let norm = one_norm(a);
    let ident = Mat::identity(n, n);

    for (theta, coeffs) in [
        (THETA_3, &B3[..]),
        (THETA_5, &B5[..]),
        (THETA_7, &B7[..]),
        (THETA_9, &B9[..]),
    ] {
        if norm <= theta {
            return Ok(pade_low(a, &ident, coeffs));
        }
    }

    let s = if norm > THETA_13 {
        (norm / THETA_13).log2().ceil().max(0.0) as i32
    } else {
        0
    };
    let scaled = a / 2f64.powi(s);
    let mut x = pade13(&scaled, &ident);
    for _ in 0..s {
        x = &x * &x;
    }
    Ok(x)
}

/// Odd/even split `U = A Σ b_{2k+1} A^{2k}`, `V = Σ b_{2k} A^{2k}`, then
/// `(V − U)⁻¹ (V + U)`.
fn pade_low(a: &Mat, ident: &Mat, b: &[f64]) -> Mat {
    let a2 = a * a;
    let mut power = ident.clone();
    let mut u = Mat::zeros(a.nrows(), a.ncols());
    let mut v = Mat::zeros(a.nrows(), a.ncols());
    for k in 0..b.len() / 2 {
        v += &power * b[2 * k];
        u += &power * b[2 * k + 1];
        power = &power * &a2;
    }
    let u = a * u;
    solve_pade(&u, &v)
}

fn pade13(a: &Mat, ident: &Mat) -> Mat {
    let b = &B13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + ident * b[1];
    let u = a * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + ident * b[0];
    solve_pade(&u, &v)
}

fn solve_pade(u: &Mat, v: &Mat) -> Mat {
    let lhs = v - u;
    let rhs = v + u;
    lhs.lu()
        .solve(&rhs)
        .expect("Padé denominator is nonsingular within the scaling bounds")
}
