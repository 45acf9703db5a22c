#![allow(dead_code)]

use qobserver_core::{
    assemble_augmented, decompose_plant, estimable_basis, synthesize_observer, AugmentedSystem,
    CommutationMatrix, Mat, ObserverDesign, ObserverOptions, QuantumLinearSystem, Vector,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
}

pub fn random_symmetric(rng: &mut impl Rng, n: usize) -> Mat {
    let m = uniform_matrix(rng, n, n);
    (&m + m.transpose()) * 0.5
}

/// Symmetric positive definite with eigenvalues in `[lo, hi]`.
pub fn random_spd(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Mat {
    let q = uniform_matrix(rng, n, n).qr().q();
    let d = Mat::from_diagonal(&Vector::from_fn(n, |_, _| rng.gen_range(lo..hi)));
    let r = &q * d * q.transpose();
    (&r + r.transpose()) * 0.5
}

/// `m` orthonormal rows spanning an isotropic subspace: `C Θ Cᵀ = 0`.
pub fn isotropic_rows(rng: &mut impl Rng, theta: &Mat, m: usize) -> Mat {
    let k = theta.nrows();
    let mut taken: Vec<Vector> = Vec::new();
    let mut rows: Vec<Vector> = Vec::new();
    while rows.len() < m {
        let mut v = Vector::from_fn(k, |_, _| rng.gen_range(-1.0..1.0));
        for _ in 0..2 {
            for b in &taken {
                v -= b * b.dot(&v);
            }
        }
        if v.norm() < 1e-3 {
            continue;
        }
        let v = v.normalize();
        let w = (theta * &v).normalize();
        taken.push(v.clone());
        taken.push(w);
        rows.push(v);
    }
    Mat::from_fn(m, k, |i, j| rows[i][j])
}

/// Plant with `n_p ≤ 8`, `m ≤ 2` satisfying every observer precondition.
///
/// `R_p = MMᵀ` (positive semidefinite). With `oscillatory`, `R_p` also gets
/// `ΘMMᵀΘᵀ` so its range is `Θ`-invariant and the plant block `2Θ11R_p11`
/// is diagonalisable with purely imaginary spectrum.
pub fn random_valid_plant(rng: &mut impl Rng, oscillatory: bool) -> QuantumLinearSystem {
    let n_modes = rng.gen_range(1..=4);
    let n = 2 * n_modes;
    let m = if n >= 4 { rng.gen_range(1..=2) } else { 1 };
    let k_max = (n - 2 * m) / 2;
    let k = rng.gen_range(0..=k_max);
    let theta = CommutationMatrix::canonical(n_modes).unwrap();
    let mm = uniform_matrix(rng, n, k);
    let mut r = &mm * mm.transpose();
    if oscillatory {
        let t = theta.as_matrix();
        r += t * &r * t.transpose();
    }
    let r = (&r + r.transpose()) * 0.5;

    let basis = estimable_basis(&theta, &r).unwrap();
    let u2 = basis.p.columns(basis.n_p1, basis.n_p2()).into_owned();
    let theta22 = u2.transpose() * theta.as_matrix() * &u2;
    let c2 = isotropic_rows(rng, &theta22, m);
    let c = basis.output_matrix(&c2).unwrap();
    QuantumLinearSystem::with_theta(theta, r, c).unwrap()
}

pub struct RandomSystem {
    pub plant: QuantumLinearSystem,
    pub obs: ObserverDesign,
    pub aug: AugmentedSystem,
}

/// Valid plant plus an observer with random `R_o ≻ 0` (eigenvalues in `[0.5, 2]`),
/// default `C_o = [I, 0]` and `β` chosen to satisfy the output identity.
pub fn random_valid_system(rng: &mut impl Rng) -> RandomSystem {
    let oscillatory = rng.gen_bool(0.5);
    let plant = random_valid_plant(rng, oscillatory);
    let dec = decompose_plant(&plant).unwrap();
    let n_o = qobserver_core::observer_order(plant.outputs());
    let opts = ObserverOptions {
        r_o: Some(random_spd(rng, n_o, 0.5, 2.0)),
        ..Default::default()
    };
    let obs = synthesize_observer(&dec, &opts).unwrap();
    let aug = assemble_augmented(&plant, &obs).unwrap();
    RandomSystem { plant, obs, aug }
}

/// Arbitrary plant: low-rank symmetric `R_p`, random `C_p`. Usually fails
/// the conditions.
pub fn random_plant(rng: &mut impl Rng) -> QuantumLinearSystem {
    let n = 2 * rng.gen_range(1..=4);
    let k = rng.gen_range(0..=n);
    let mm = uniform_matrix(rng, n, k);
    let r = &mm * mm.transpose();
    let r = (&r + r.transpose()) * 0.5;
    let m = rng.gen_range(1..=3);
    QuantumLinearSystem::new(r, uniform_matrix(rng, m, n)).unwrap()
}
