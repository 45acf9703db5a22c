//! Double-double matrices for long-horizon propagation.
//!
//! Powering an `f64` step exponential ten thousand times leaves a
//! commutation residual `‖ΦΘΦᵀ − Θ‖` of order `k · ε · ‖Φ‖²`, which exceeds
//! `1e-8` once the frozen plant variables have drifted to `‖Φ‖ ~ 10²`.
//! Holding the step and the running product to ~32 digits keeps the rounded
//! `f64` propagator accurate to the last bit.

use twofloat::TwoFloat;

use crate::linalg::Mat;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DdMatrix {
    n: usize,
    data: Vec<TwoFloat>,
}

impl DdMatrix {
    pub fn identity(n: usize) -> Self {
        let mut data = vec![TwoFloat::from(0.0); n * n];
        for i in 0..n {
            data[i * n + i] = TwoFloat::from(1.0);
        }
        Self { n, data }
    }

    /// `a · scale`, with the scale applied in double-double.
    pub fn scaled_from(a: &Mat, scale: f64) -> Self {
        let n = a.nrows();
        let s = TwoFloat::from(scale);
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(TwoFloat::from(a[(i, j)]) * s);
            }
        }
        Self { n, data }
    }

    pub fn to_f64(&self) -> Mat {
        Mat::from_fn(self.n, self.n, |i, j| self.data[i * self.n + j].hi())
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut data = vec![TwoFloat::from(0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.hi() == 0.0 {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                let out = &mut data[i * n..(i + 1) * n];
                for (o, &b) in out.iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        Self { n, data }
    }

    fn add_assign(&mut self, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    fn div_scalar(&mut self, d: f64) {
        for a in &mut self.data {
            *a /= d;
        }
    }

    fn halve(&mut self, times: u32) {
        let f = 0.5f64.powi(times as i32);
        for a in &mut self.data {
            *a *= f;
        }
    }

    fn one_norm(&self) -> f64 {
        (0..self.n)
            .map(|j| {
                (0..self.n)
                    .map(|i| self.data[i * self.n + j].hi().abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.hi().abs()).fold(0.0, f64::max)
    }
}

/// `e^{A t}` in double-double: Taylor series on `A t / 2^s` with
/// `‖A t / 2^s‖₁ ≤ ½`, then `s` squarings.
pub(crate) fn exp_scaled(a: &Mat, t: f64) -> DdMatrix {
    let n = a.nrows();
    let mut b = DdMatrix::scaled_from(a, t);
    let norm = b.one_norm();
    let s = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    b.halve(s);

    let mut sum = DdMatrix::identity(n);
    let mut term = DdMatrix::identity(n);
    for k in 1..=60 {
        term = term.mul(&b);
        term.div_scalar(k as f64);
        sum.add_assign(&term);
        if term.max_abs() <= 1e-34 * sum.max_abs() {
            break;
        }
    }
    for _ in 0..s {
        sum = sum.mul(&sum);
    }
    sum
}
