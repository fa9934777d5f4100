//! Floquet analysis of monic operators: the jet system, fundamental solutions, Wronskian,
//! Lagrange concomitant and group certificates for the monodromy.

mod curve;

pub use curve::{projective_distance, ProjectiveCurve, CurveSidecar};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};
use crate::matrix::{max_abs, FunctionMatrix};
use crate::operator::{binomial, DifferentialOperator, GroupClass};

pub const DEFAULT_STEPS: usize = 4096;
pub const MIN_STEPS: usize = 256;
/// Step-halving error estimates above this are flagged.
pub const ERROR_FLAG: f64 = 1e-6;

/// Companion matrix `C(θ)` of the jet system `Φ' = CΦ`: ones on the superdiagonal and
/// last row `(-a_0, ..., -a_{n-1})`.
pub fn jet_system(op: &DifferentialOperator) -> Result<FunctionMatrix> {
    op.require_monic(0.0)?;
    let n = op.order();
    let mut c = FunctionMatrix::zeros(n);
    for i in 0..n - 1 {
        c.set(i, i + 1, PeriodicFunction::constant(1.0));
    }
    for i in 0..n {
        c.set(n - 1, i, op.coeff(i).scale(-1.0));
    }
    Ok(c)
}

/// Normalised fundamental system on `[0, 1]`; column `j` holds the jet
/// `(u_j, u_j', ..., u_j^{(n-1)})` of the j-th solution.
#[derive(Clone, Debug)]
pub struct FundamentalSolution {
    n: usize,
    steps: usize,
    frames: Vec<DMatrix<f64>>,
    error_estimate: f64,
}

impl FundamentalSolution {
    pub fn order(&self) -> usize {
        self.n
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `Φ(m/M)` for `m = 0..=M`.
    pub fn frames(&self) -> &[DMatrix<f64>] {
        &self.frames
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.steps).map(|m| m as f64 / self.steps as f64).collect()
    }

    /// Step-halving estimate `‖Φ_M(1) - Φ_{M/2}(1)‖ / 15`.
    pub fn error_estimate(&self) -> f64 {
        self.error_estimate
    }

    pub fn flagged(&self) -> bool {
        !(self.error_estimate <= ERROR_FLAG)
    }

    /// `Φ(1)`.
    pub fn monodromy(&self) -> &DMatrix<f64> {
        self.frames.last().expect("at least two frames")
    }

    /// `det Φ(t)` at every sample.
    pub fn wronskian(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.determinant()).collect()
    }
}

/// Coefficients sampled at `k/(2M)`, `k = 0..=2M`.
fn half_step_samples(op: &DifferentialOperator, steps: usize) -> Vec<Vec<f64>> {
    op.coeffs()[..op.order()]
        .iter()
        .map(|a| {
            let mut s = a.sample(2 * steps);
            s.push(s[0]);
            s
        })
        .collect()
}

/// `C·X` for the companion matrix with lower coefficients `a`.
fn companion_mul(a: &[f64], x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let mut out = DMatrix::zeros(n, x.ncols());
    for r in 0..n - 1 {
        out.set_row(r, &x.row(r + 1));
    }
    for j in 0..x.ncols() {
        out[(n - 1, j)] = -(0..n).map(|i| a[i] * x[(i, j)]).sum::<f64>();
    }
    out
}

fn rk4(samples: &[Vec<f64>], steps: usize, stride: usize) -> Vec<DMatrix<f64>> {
    let n = samples.len();
    let h = 1.0 / steps as f64;
    let at = |k: usize| -> Vec<f64> { samples.iter().map(|s| s[k]).collect() };
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(phi.clone());
    for m in 0..steps {
        let (a0, a1, a2) = (at(2 * m * stride), at((2 * m + 1) * stride), at((2 * m + 2) * stride));
        let k1 = companion_mul(&a0, &phi);
        let k2 = companion_mul(&a1, &(&phi + &k1 * (0.5 * h)));
        let k3 = companion_mul(&a1, &(&phi + &k2 * (0.5 * h)));
        let k4 = companion_mul(&a2, &(&phi + &k3 * h));
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        frames.push(phi.clone());
    }
    frames
}

/// Fixed-step RK4 for `Φ' = CΦ`, `Φ(0) = I`, with a step-halving error estimate.
pub fn integrate_fundamental(op: &DifferentialOperator, steps: usize) -> Result<FundamentalSolution> {
    if steps < MIN_STEPS || steps % 2 != 0 {
        return Err(Error::InvalidInput(format!("step count must be even and at least {MIN_STEPS}, got {steps}")));
    }
    op.require_monic(0.0)?;
    let n = op.order();
    let samples = half_step_samples(op, steps);
    let frames = rk4(&samples, steps, 1);
    let coarse = rk4(&samples, steps / 2, 2);
    let error_estimate = max_abs(&(frames[steps].clone() - &coarse[steps / 2])) / 15.0;
    Ok(FundamentalSolution { n, steps, frames, error_estimate })
}

/// `Φ(1)` with the default step count.
pub fn monodromy(op: &DifferentialOperator) -> Result<DMatrix<f64>> {
    Ok(integrate_fundamental(op, DEFAULT_STEPS)?.monodromy().clone())
}

/// Monodromy in the transposed companion convention (subdiagonal ones, last column
/// `-a_i`): the antidiagonal transpose of the jet monodromy. Same spectrum.
pub fn display_monodromy(m: &DMatrix<f64>) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |i, j| m[(n - 1 - j, n - 1 - i)])
}

/// `max_t |W' + a_{n-1} W|` with fourth-order central differences of `det Φ` at interior
/// samples.
pub fn liouville_residual(op: &DifferentialOperator, phi: &FundamentalSolution) -> f64 {
    let w = phi.wronskian();
    let m = phi.steps();
    let h = 1.0 / m as f64;
    let a = op.coeff(op.order() - 1);
    (2..m - 1)
        .map(|k| {
            let dw = (w[k - 2] - 8.0 * w[k - 1] + 8.0 * w[k + 1] - w[k + 2]) / (12.0 * h);
            (dw + a.eval(k as f64 * h) * w[k]).abs()
        })
        .fold(0.0, f64::max)
}

/// Lagrange bilinear concomitant in jet coordinates,
/// `B[u, v] = Σ_i Σ_{k<i} (-1)^k u^{(i-1-k)} (a_i v)^{(k)}`.
#[derive(Clone, Debug)]
pub struct ConcomitantForm {
    entries: Vec<Vec<PeriodicFunction>>,
}

impl ConcomitantForm {
    pub fn new(op: &DifferentialOperator) -> Self {
        let n = op.order();
        let mut entries = vec![vec![PeriodicFunction::constant(0.0); n]; n];
        for i in 1..=n {
            let a = op.coeff(i);
            for k in 0..i {
                let p = i - 1 - k;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                for (q, entry) in entries[p].iter_mut().enumerate().take(k + 1) {
                    *entry += &a.nth_derivative(k - q).scale(sign * binomial(k, q));
                }
            }
        }
        Self { entries }
    }

    pub fn order(&self) -> usize {
        self.entries.len()
    }

    pub fn at(&self, t: f64) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |p, q| self.entries[p][q].eval(t))
    }

    fn derivative_at(&self, t: f64) -> DMatrix<f64> {
        let n = self.order();
        DMatrix::from_fn(n, n, |p, q| self.entries[p][q].eval_derivatives(t, 1)[1])
    }

    /// The form at `t = 0`.
    pub fn matrix(&self) -> DMatrix<f64> {
        self.at(0.0)
    }

    /// `max_t |d/dt (Φᵀ B Φ)|`, using `Φ' = CΦ` so the derivative is `Φᵀ(CᵀB + B' + BC)Φ`.
    pub fn constancy_residual(&self, jets: &FunctionMatrix, phi: &FundamentalSolution) -> f64 {
        phi.times()
            .iter()
            .zip(phi.frames())
            .map(|(&t, f)| {
                let c = jets.eval(t);
                let b = self.at(t);
                let inner = c.transpose() * &b + self.derivative_at(t) + &b * c;
                max_abs(&(f.transpose() * inner * f))
            })
            .fold(0.0, f64::max)
    }
}

/// Concomitant of a self- or skew-adjoint operator.
pub fn concomitant(op: &DifferentialOperator, tol: f64) -> Result<ConcomitantForm> {
    let scale = 1.0 + op.norm();
    let self_adj = op.distance(&op.formal_adjoint());
    let skew = op.add(&op.formal_adjoint()).norm();
    if self_adj.min(skew) > tol * scale {
        return Err(Error::ClassViolation(format!(
            "concomitant needs L* = ±L (self-adjoint defect {self_adj:e}, skew defect {skew:e})"
        )));
    }
    Ok(ConcomitantForm::new(op))
}

#[derive(Clone, Debug, Serialize)]
pub struct GroupCertificate {
    pub group: GroupClass,
    /// `|det M - 1|`, when the group asks for it.
    pub det_residual: Option<f64>,
    /// `‖MᵀBM - B‖`, when the group preserves a form.
    pub form_residual: Option<f64>,
    pub integration_error: f64,
    pub pass: bool,
}

impl GroupCertificate {
    pub fn residual(&self) -> f64 {
        self.det_residual.unwrap_or(0.0).max(self.form_residual.unwrap_or(0.0))
    }
}

/// Checks that the monodromy lies in the group the class predicts.
pub fn certify_group(op: &DifferentialOperator, group: GroupClass, steps: usize, tol: f64) -> Result<GroupCertificate> {
    let report = op.is_in_class(group, 1e-8 * (1.0 + op.norm()))?;
    if !report.member {
        return Err(Error::ClassViolation(format!(
            "operator is not in the {group} class (residual {:e})",
            report.residual
        )));
    }
    let phi = integrate_fundamental(op, steps)?;
    let m = phi.monodromy();
    let det_residual = matches!(group, GroupClass::Psl | GroupClass::Pso).then(|| (m.determinant() - 1.0).abs());
    let form_residual = match group {
        GroupClass::Psl => None,
        _ => {
            let b = ConcomitantForm::new(op).matrix();
            Some(max_abs(&(m.transpose() * &b * m - &b)))
        }
    };
    let mut cert = GroupCertificate { group, det_residual, form_residual, integration_error: phi.error_estimate(), pass: false };
    cert.pass = cert.residual() <= tol;
    Ok(cert)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::{spectrum, spectrum_distance};
    use nalgebra::Complex;
    use std::f64::consts::PI;

    fn op(lower: Vec<f64>) -> DifferentialOperator {
        DifferentialOperator::monic(lower.into_iter().map(PeriodicFunction::constant).collect()).unwrap()
    }

    #[test]
    fn jet_system_shape() {
        let c = jet_system(&op(vec![0.0, -1.0, 0.0])).unwrap();
        let at = c.eval(0.2);
        assert_eq!(at[(0, 1)], 1.0);
        assert_eq!(at[(2, 1)], 1.0);
        assert_eq!(at[(2, 0)], 0.0);
    }

    #[test]
    fn free_and_periodic_monodromies() {
        let m = monodromy(&op(vec![0.0, 0.0])).unwrap();
        assert!(max_abs(&(m - DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]))) < 1e-12);
        let m = monodromy(&op(vec![4.0 * PI * PI, 0.0])).unwrap();
        assert!(max_abs(&(m - DMatrix::identity(2, 2))) < 1e-8);
        let m = monodromy(&op(vec![PI * PI, 0.0])).unwrap();
        assert!(max_abs(&(m + DMatrix::identity(2, 2))) < 1e-8);
    }

    #[test]
    fn exponential_spectrum() {
        let m = monodromy(&op(vec![0.0, -1.0, 0.0])).unwrap();
        let e = std::f64::consts::E;
        let expect = [Complex::new(e, 0.0), Complex::new(1.0, 0.0), Complex::new(1.0 / e, 0.0)];
        assert!(spectrum_distance(&spectrum(&m), &expect) < 1e-8);
    }

    #[test]
    fn liouville_with_damping() {
        let l = op(vec![0.0, 0.8]);
        let phi = integrate_fundamental(&l, 4096).unwrap();
        assert!(liouville_residual(&l, &phi) < 1e-8);
        let w = phi.wronskian();
        assert!((w[4096] - (-0.8f64).exp()).abs() < 1e-10);
    }

    #[test]
    fn concomitant_examples() {
        let b = concomitant(&op(vec![0.3, 0.0]), 1e-10).unwrap().matrix();
        assert!(max_abs(&(b - DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))) < 1e-15);

        let b = concomitant(&op(vec![0.0, -1.0, 0.0]), 1e-10).unwrap().matrix();
        assert!(max_abs(&(&b - b.transpose())) < 1e-15);
        let eig = b.symmetric_eigenvalues();
        let pos = eig.iter().filter(|v| **v > 1e-12).count();
        let neg = eig.iter().filter(|v| **v < -1e-12).count();
        assert_eq!((pos, neg), (1, 2));

        let b = concomitant(&op(vec![1.0, 0.0, 0.0, 0.0]), 1e-10).unwrap().matrix();
        assert!(max_abs(&(&b + b.transpose())) < 1e-15);
        assert!(b.determinant().abs() > 0.5);

        assert!(concomitant(&op(vec![0.0, 1.0]), 1e-10).is_err());
    }

    #[test]
    fn certificates() {
        let hill = DifferentialOperator::monic(vec![PeriodicFunction::cos_mode(1, 1.0), PeriodicFunction::constant(0.0)]).unwrap();
        let c = certify_group(&hill, GroupClass::Psl, 4096, 1e-7).unwrap();
        assert!(c.pass, "{c:?}");
        let c = certify_group(&op(vec![0.0, -1.0, 0.0]), GroupClass::Pso, 4096, 1e-6).unwrap();
        assert!(c.pass, "{c:?}");
        assert!(certify_group(&op(vec![0.0, 1.0]), GroupClass::Psl, 4096, 1e-6).is_err());
    }

    #[test]
    fn display_convention_shares_spectrum() {
        let hill = DifferentialOperator::monic(vec![PeriodicFunction::cos_mode(1, 3.0), PeriodicFunction::constant(0.0)]).unwrap();
        let m = monodromy(&hill).unwrap();
        assert!(spectrum_distance(&spectrum(&m), &spectrum(&display_monodromy(&m))) < 1e-10);
    }
}
