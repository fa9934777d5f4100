//! Seeded random instances: band-limited functions, operators in each class, symbols,
//! diffeomorphisms, level-set connections and unipotent gauges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agd::AgdFunctional;
use crate::circle::{CircleDiffeo, PeriodicFunction};
use crate::ds::{lambda, LevelSetElement, MatrixConnection, UnipotentGauge};
use crate::error::Result;
use crate::matrix::FunctionMatrix;
use crate::operator::{DifferentialOperator, GroupClass};

pub type InstanceRng = ChaCha8Rng;

pub fn rng(seed: u64) -> InstanceRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean and mode-k amplitudes `amp·U(-1, 1)/k²`.
pub fn periodic(rng: &mut InstanceRng, band: usize, amp: f64) -> PeriodicFunction {
    decaying(rng, band, amp, |k| 1.0 / (k * k) as f64)
}

/// Mode-k amplitudes `amp·U(-1, 1)·2^{-k}`.
pub fn smooth_periodic(rng: &mut InstanceRng, band: usize, amp: f64) -> PeriodicFunction {
    decaying(rng, band, amp, |k| 0.5f64.powi(k as i32))
}

fn decaying(rng: &mut InstanceRng, band: usize, amp: f64, weight: impl Fn(usize) -> f64) -> PeriodicFunction {
    let mut c = Vec::with_capacity(2 * band + 1);
    c.push(amp * rng.gen_range(-1.0..=1.0));
    for k in 1..=band {
        let w = amp * weight(k);
        c.push(w * rng.gen_range(-1.0..=1.0));
        c.push(w * rng.gen_range(-1.0..=1.0));
    }
    PeriodicFunction::from_coeffs(c).expect("odd length, finite")
}

/// Monic `D^n + a_{n-2}D^{n-2} + ... + a_0` with random coefficients, projected onto the
/// class by `(L ± L*)/2` for PSp/PSO.
pub fn operator(rng: &mut InstanceRng, n: usize, group: GroupClass, band: usize, amp: f64) -> Result<DifferentialOperator> {
    group.check_order(n)?;
    let mut lower: Vec<PeriodicFunction> = (0..n).map(|_| periodic(rng, band, amp)).collect();
    lower[n - 1] = PeriodicFunction::constant(0.0);
    let l = DifferentialOperator::monic(lower)?;
    match group {
        GroupClass::Psl => Ok(l),
        _ => {
            let weights = l.weights();
            let mut coeffs = group.project(&l)?.coeffs().to_vec();
            coeffs[n] = PeriodicFunction::constant(1.0);
            Ok(DifferentialOperator::monic(coeffs[..n].to_vec())?.with_weights(weights))
        }
    }
}

/// `[X_1, ..., X_n]` with smooth random coefficients.
pub fn functional(rng: &mut InstanceRng, n: usize, band: usize, amp: f64) -> AgdFunctional {
    let coeffs: Vec<PeriodicFunction> = (0..n).map(|_| smooth_periodic(rng, band, amp)).collect();
    AgdFunctional::from_coeffs(&coeffs)
}

/// Displacement with mode amplitudes `amp·U(-1, 1)·2^{-k}` and no mean, scaled down by
/// halves until `F' ≥ 0.1`.
pub fn diffeo(rng: &mut InstanceRng, band: usize, amp: f64) -> Result<CircleDiffeo> {
    let raw = smooth_periodic(rng, band, amp);
    let mut f = &raw - &PeriodicFunction::constant(raw.mean());
    while f.derivative().sup_norm() > 0.9 {
        f = f.scale(0.5);
    }
    CircleDiffeo::new(f)
}

/// `Λ` plus a random traceless upper-triangular part.
pub fn level_set_connection(rng: &mut InstanceRng, n: usize, band: usize, amp: f64) -> Result<LevelSetElement> {
    let mut m = lambda(n);
    let mut diag = PeriodicFunction::constant(0.0);
    for i in 0..n {
        for j in i..n {
            if i == n - 1 && j == n - 1 {
                continue;
            }
            let f = smooth_periodic(rng, band, amp);
            if i == j {
                diag += &f;
            }
            m.set(i, j, f);
        }
    }
    m.set(n - 1, n - 1, diag.scale(-1.0));
    LevelSetElement::new(MatrixConnection::new(m)?)
}

/// Random element of `N`.
pub fn unipotent(rng: &mut InstanceRng, n: usize, band: usize, amp: f64) -> Result<UnipotentGauge> {
    let mut m = FunctionMatrix::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            m.set(i, j, smooth_periodic(rng, band, amp));
        }
    }
    UnipotentGauge::new(m)
}

/// Random `n×n` matrix with determinant bounded away from zero.
pub fn invertible(rng: &mut InstanceRng, n: usize) -> nalgebra::DMatrix<f64> {
    loop {
        let m = nalgebra::DMatrix::<f64>::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 } + 0.5 * rng.gen_range(-1.0..=1.0));
        if m.determinant().abs() > 0.1 {
            return m;
        }
    }
}
