//! sl(n) connections `d/dt - A(t)` on the trivial bundle over the circle, the unipotent gauge
//! action and the reduction of the level set `Ψ⁻¹(Λ)` to scalar operators.
//!
//! Conventions: horizontal sections solve `v' = Av`, the gauge action is
//! `A ↦ gAg⁻¹ + g'g⁻¹` (so `v ↦ gv`), and a path `β` defines `A = β'β⁻¹`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};
use crate::matrix::{max_abs, FunctionMatrix};
use crate::operator::{DensityWeights, DifferentialOperator};

/// Exactness tolerance for structural checks (trace, triangular shapes).
pub const SHAPE_TOL: f64 = 1e-12;
/// Default quasi-periodicity tolerance for sampled paths.
pub const PATH_TOL: f64 = 1e-8;
/// Samples stored beyond each end of `[0, 1]` for centred differences.
const PATH_PAD: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConnectionRecord", into = "ConnectionRecord")]
pub struct MatrixConnection {
    matrix: FunctionMatrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct ConnectionRecord {
    n: usize,
    entries: FunctionMatrix,
}

impl TryFrom<ConnectionRecord> for MatrixConnection {
    type Error = Error;

    fn try_from(rec: ConnectionRecord) -> Result<Self> {
        if rec.entries.dim() != rec.n {
            return Err(Error::InvalidInput(format!("connection declares n = {} but has {} rows", rec.n, rec.entries.dim())));
        }
        Self::new(rec.entries)
    }
}

impl From<MatrixConnection> for ConnectionRecord {
    fn from(a: MatrixConnection) -> Self {
        Self { n: a.matrix.dim(), entries: a.matrix }
    }
}

fn trace(m: &FunctionMatrix) -> PeriodicFunction {
    let mut t = PeriodicFunction::constant(0.0);
    for i in 0..m.dim() {
        t += m.get(i, i);
    }
    t
}

impl MatrixConnection {
    /// Accepts `A` with `‖tr A‖∞ <= 1e-12·(1 + ‖A‖)`.
    pub fn new(matrix: FunctionMatrix) -> Result<Self> {
        let defect = trace(&matrix).sup_norm();
        if defect > SHAPE_TOL * (1.0 + matrix.norm()) {
            return Err(Error::InvalidInput(format!("connection is not traceless (trace {defect:e})")));
        }
        Ok(Self { matrix })
    }

    /// Constant connection.
    pub fn constant(z: &DMatrix<f64>) -> Result<Self> {
        Self::new(FunctionMatrix::from_constant(z))
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn matrix(&self) -> &FunctionMatrix {
        &self.matrix
    }

    pub fn trace_defect(&self) -> f64 {
        trace(&self.matrix).sup_norm()
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.matrix.sub(&other.matrix).norm()
    }

    pub fn truncate(&self, band: usize) -> Self {
        Self { matrix: self.matrix.truncate(band) }
    }
}

/// Upper-triangular unipotent loop `g: S¹ → N`.
#[derive(Clone, Debug, PartialEq)]
pub struct UnipotentGauge {
    matrix: FunctionMatrix,
}

impl UnipotentGauge {
    pub fn new(matrix: FunctionMatrix) -> Result<Self> {
        let n = matrix.dim();
        for i in 0..n {
            for j in 0..=i {
                let expect = if i == j { 1.0 } else { 0.0 };
                let defect = (matrix.get(i, j) - &PeriodicFunction::constant(expect)).sup_norm();
                if defect > SHAPE_TOL {
                    return Err(Error::InvalidInput(format!("gauge entry ({i}, {j}) must be {expect}, defect {defect:e}")));
                }
            }
        }
        Ok(Self { matrix })
    }

    pub fn identity(n: usize) -> Self {
        Self { matrix: FunctionMatrix::identity(n) }
    }

    pub fn matrix(&self) -> &FunctionMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    /// `g⁻¹ = Σ_{k<n} (I - g)^k`.
    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let nil = FunctionMatrix::identity(n).sub(&self.matrix);
        let mut out = FunctionMatrix::identity(n);
        let mut power = FunctionMatrix::identity(n);
        for _ in 1..n {
            power = power.mul(&nil);
            out = out.add(&power);
        }
        Self { matrix: out }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { matrix: self.matrix.mul(&other.matrix) }
    }
}

/// `A ↦ gAg⁻¹ + g'g⁻¹`.
pub fn gauge_act(g: &UnipotentGauge, a: &MatrixConnection) -> Result<MatrixConnection> {
    if g.dim() != a.dim() {
        return Err(Error::InvalidInput(format!("gauge of size {} acting on connection of size {}", g.dim(), a.dim())));
    }
    let inv = g.inverse().matrix;
    let m = g.matrix.mul(&a.matrix).mul(&inv).add(&g.matrix.derivative().mul(&inv));
    Ok(MatrixConnection { matrix: m })
}

/// Strictly lower-triangular part of `A`.
pub fn psi_project(a: &MatrixConnection) -> FunctionMatrix {
    let n = a.dim();
    let mut out = FunctionMatrix::zeros(n);
    for i in 0..n {
        for j in 0..i {
            out.set(i, j, a.matrix.get(i, j).clone());
        }
    }
    out
}

/// `Λ`: ones on the subdiagonal.
pub fn lambda(n: usize) -> FunctionMatrix {
    let mut out = FunctionMatrix::zeros(n);
    for i in 1..n {
        out.set(i, i - 1, PeriodicFunction::constant(1.0));
    }
    out
}

/// A connection with `Ψ(A) = Λ`.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSetElement {
    connection: MatrixConnection,
}

impl LevelSetElement {
    pub fn new(connection: MatrixConnection) -> Result<Self> {
        let defect = psi_project(&connection).sub(&lambda(connection.dim())).norm();
        if defect > SHAPE_TOL {
            return Err(Error::NotInLevelSet(format!("strictly lower part differs from Λ by {defect:e}")));
        }
        Ok(Self { connection })
    }

    pub fn connection(&self) -> &MatrixConnection {
        &self.connection
    }

    pub fn into_connection(self) -> MatrixConnection {
        self.connection
    }
}

/// Operators `P_i` with `v_i = P_i(v_{n-1})` on horizontal sections, and the scalar operator.
fn eliminate(a: &FunctionMatrix) -> Result<(Vec<DifferentialOperator>, DifferentialOperator)> {
    let n = a.dim();
    let d = DifferentialOperator::general(vec![PeriodicFunction::constant(0.0), PeriodicFunction::constant(1.0)])?;
    let mut p: Vec<DifferentialOperator> = vec![DifferentialOperator::zero(); n];
    p[n - 1] = DifferentialOperator::multiplication(PeriodicFunction::constant(1.0));
    // row i of v' = Av: v_i' = v_{i-1} + Σ_{j>=i} A_ij v_j
    let row_rest = |i: usize, p: &[DifferentialOperator]| -> Result<DifferentialOperator> {
        let mut acc = DifferentialOperator::zero();
        for (j, pj) in p.iter().enumerate().skip(i) {
            let aij = a.get(i, j);
            if !aij.is_zero() {
                acc = acc.add(&DifferentialOperator::multiplication(aij.clone()).compose(pj)?);
            }
        }
        Ok(acc)
    };
    for i in (1..n).rev() {
        p[i - 1] = d.compose(&p[i])?.sub(&row_rest(i, &p)?);
    }
    let l = d.compose(&p[0])?.sub(&row_rest(0, &p)?);
    Ok((p, l.resize(n)))
}

/// Reduces `A ∈ Ψ⁻¹(Λ)` to the monic operator satisfied by the last component of its
/// horizontal sections.
pub fn ds_reduce(a: &LevelSetElement) -> Result<DifferentialOperator> {
    let (_, l) = eliminate(&a.connection.matrix)?;
    let n = l.order();
    let mut coeffs = l.coeffs().to_vec();
    coeffs[n] = PeriodicFunction::constant(1.0);
    Ok(DifferentialOperator::general(coeffs)?.with_weights(Some(DensityWeights::standard(n))))
}

/// Companion element of `Ψ⁻¹(Λ)` reducing to `L`: subdiagonal ones and last column `-b`,
/// where `D^n + Σ D^i∘b_i = L`. For constant coefficients (and for `n = 2`) `b = a`.
pub fn embed_iota(op: &DifferentialOperator) -> Result<LevelSetElement> {
    op.require_monic(0.0)?;
    let n = op.order();
    if n < 2 {
        return Err(Error::InvalidInput("companion embedding needs n >= 2".into()));
    }
    let top = op.coeff(n - 1).sup_norm();
    if top > SHAPE_TOL {
        return Err(Error::ClassViolation(format!("a_(n-1) must vanish, got sup-norm {top:e}")));
    }
    // b_k = a_k - [D^k] Σ_{i>k} D^i∘b_i, solved from the top
    let mut b = vec![PeriodicFunction::constant(0.0); n];
    for k in (0..n).rev() {
        let mut c = op.coeff(k);
        for (i, bi) in b.iter().enumerate().skip(k + 1) {
            if bi.is_zero() {
                continue;
            }
            // [D^k] D^i∘b = C(i, k) b^{(i-k)}
            c -= &bi.nth_derivative(i - k).scale(crate::operator::binomial(i, k));
        }
        b[k] = c;
    }
    let mut m = lambda(n);
    for (i, bi) in b.iter().enumerate() {
        m.set(i, n - 1, bi.scale(-1.0));
    }
    LevelSetElement::new(MatrixConnection::new(m)?)
}

/// `T` with `v = T·(y^{(n-1)}, ..., y', y)` for `y = v_{n-1}`; upper unipotent.
fn jet_transform(a: &FunctionMatrix) -> Result<UnipotentGauge> {
    let (p, _) = eliminate(a)?;
    let n = a.dim();
    let mut t = FunctionMatrix::zeros(n);
    for (i, pi) in p.iter().enumerate() {
        for c in i..n {
            t.set(i, c, pi.coeff(n - 1 - c));
        }
    }
    UnipotentGauge::new(t)
}

/// The unique `g ∈ N` with `gauge_act(g, A) = embed_iota(ds_reduce(A))`, assembled from the
/// elimination of both connections.
pub fn reduction_gauge(a: &LevelSetElement) -> Result<UnipotentGauge> {
    let target = embed_iota(&ds_reduce(a)?)?;
    let t = jet_transform(&a.connection.matrix)?;
    let t_target = jet_transform(&target.connection.matrix)?;
    Ok(t_target.compose(&t.inverse()))
}

/// Fundamental matrix of `v' = Av` at `m/M`, `m = 0..=M`, by RK4.
pub fn transport(a: &MatrixConnection, steps: usize) -> Result<Vec<DMatrix<f64>>> {
    if steps == 0 {
        return Err(Error::InvalidInput("step count must be positive".into()));
    }
    let n = a.dim();
    let grid: Vec<Vec<f64>> = a.matrix.rows().into_iter().flatten().map(|f| f.sample(2 * steps)).collect();
    let at = |k: usize| DMatrix::from_fn(n, n, |i, j| grid[i * n + j][k % (2 * steps)]);
    let h = 1.0 / steps as f64;
    let mut phi = DMatrix::<f64>::identity(n, n);
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(phi.clone());
    for m in 0..steps {
        let (a0, a1, a2) = (at(2 * m), at(2 * m + 1), at(2 * m + 2));
        let k1 = &a0 * &phi;
        let k2 = &a1 * (&phi + &k1 * (0.5 * h));
        let k3 = &a1 * (&phi + &k2 * (0.5 * h));
        let k4 = &a2 * (&phi + &k3 * h);
        phi += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        frames.push(phi.clone());
    }
    Ok(frames)
}

/// Transport of `v' = Av` once around the circle.
pub fn holonomy(a: &MatrixConnection, steps: usize) -> Result<DMatrix<f64>> {
    Ok(transport(a, steps)?.pop().expect("frames"))
}

/// Sampled path `β` on `t = m/M`, `m = -8..=M+8`, with `β(t + 1) = β(t)β(0)⁻¹β(1)`.
#[derive(Clone, Debug)]
pub struct MatrixPath {
    steps: usize,
    samples: Vec<DMatrix<f64>>,
}

impl MatrixPath {
    /// Samples a closed-form path.
    pub fn from_fn(steps: usize, f: impl Fn(f64) -> DMatrix<f64>) -> Self {
        let pad = PATH_PAD as i64;
        let samples = (-pad..=steps as i64 + pad).map(|m| f(m as f64 / steps as f64)).collect();
        Self { steps, samples }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// `β(m/M)` for `m` in `-8..=M+8`.
    pub fn at(&self, m: i64) -> &DMatrix<f64> {
        &self.samples[(m + PATH_PAD as i64) as usize]
    }

    /// Largest relative defect of `β(t + 1) = β(t)β(0)⁻¹β(1)` over the overlap samples.
    pub fn quasi_periodicity_residual(&self) -> f64 {
        let m = self.steps as i64;
        let Some(inv0) = self.at(0).clone().try_inverse() else {
            return f64::INFINITY;
        };
        let shift = inv0 * self.at(m);
        (-(PATH_PAD as i64)..=PATH_PAD as i64)
            .map(|k| {
                let expect = self.at(k) * &shift;
                max_abs(&(self.at(k + m) - &expect)) / (1.0 + max_abs(&expect))
            })
            .fold(0.0, f64::max)
    }

    pub fn check(&self, tol: f64) -> Result<()> {
        let residual = self.quasi_periodicity_residual();
        if !(residual <= tol) {
            return Err(Error::NotQuasiPeriodic { residual, tol });
        }
        Ok(())
    }
}

/// Horizontal path `β' = Aβ`, `β(0) = frame0`.
pub fn path_of_connection(a: &MatrixConnection, frame0: &DMatrix<f64>, steps: usize) -> Result<MatrixPath> {
    let frames = transport(a, steps)?;
    let one = frames[steps].clone();
    let one_inv = one.clone().try_inverse().ok_or_else(|| Error::Numerical("singular holonomy".into()))?;
    let pad = PATH_PAD as i64;
    let samples = (-pad..=steps as i64 + pad)
        .map(|m| {
            let base = if m < 0 {
                &frames[(m + steps as i64) as usize] * &one_inv
            } else if m > steps as i64 {
                &frames[(m - steps as i64) as usize] * &one
            } else {
                frames[m as usize].clone()
            };
            base * frame0
        })
        .collect();
    Ok(MatrixPath { steps, samples })
}

/// `A = β'β⁻¹`, with `β'` from eighth-order centred differences, projected to `band`.
pub fn connection_of_path(beta: &MatrixPath, band: usize, tol: f64) -> Result<MatrixConnection> {
    beta.check(tol)?;
    const W: [f64; 4] = [4.0 / 5.0, -1.0 / 5.0, 4.0 / 105.0, -1.0 / 280.0];
    let h = 1.0 / beta.steps as f64;
    let mut samples = Vec::with_capacity(beta.steps);
    for m in 0..beta.steps as i64 {
        let mut d = DMatrix::zeros(beta.at(m).nrows(), beta.at(m).ncols());
        for (k, w) in W.iter().enumerate() {
            let k = k as i64 + 1;
            d += (beta.at(m + k) - beta.at(m - k)) * *w;
        }
        d /= h;
        let inv = beta.at(m).clone().try_inverse().ok_or_else(|| Error::Numerical(format!("β singular at sample {m}")))?;
        samples.push(d * inv);
    }
    MatrixConnection::new(FunctionMatrix::from_samples(&samples, band)?).or_else(|_| {
        // projection leaves a rounding-level trace; remove it from the last diagonal entry
        let mut m = FunctionMatrix::from_samples(&samples, band)?;
        let n = m.dim();
        let t = trace(&m);
        let fixed = m.get(n - 1, n - 1) - &t;
        m.set(n - 1, n - 1, fixed);
        MatrixConnection::new(m)
    })
}

/// `h = β(1)β(0)⁻¹`.
pub fn monodromy_of_path(beta: &MatrixPath, tol: f64) -> Result<DMatrix<f64>> {
    beta.check(tol)?;
    let inv = beta.at(0).clone().try_inverse().ok_or_else(|| Error::Numerical("β(0) is singular".into()))?;
    Ok(beta.at(beta.steps as i64) * inv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pf(c: &[f64]) -> PeriodicFunction {
        PeriodicFunction::from_coeffs(c.to_vec()).unwrap()
    }

    fn two_by_two(a: &PeriodicFunction, b: &PeriodicFunction) -> LevelSetElement {
        let m = FunctionMatrix::from_rows(vec![
            vec![a.clone(), b.clone()],
            vec![PeriodicFunction::constant(1.0), a.scale(-1.0)],
        ])
        .unwrap();
        LevelSetElement::new(MatrixConnection::new(m).unwrap()).unwrap()
    }

    #[test]
    fn two_by_two_elimination() {
        let a = pf(&[0.1, 0.3, -0.2]);
        let b = pf(&[0.5, 0.0, 0.4]);
        let l = ds_reduce(&two_by_two(&a, &b)).unwrap();
        let expect = &(&a.derivative() - &a.multiply(&a)) - &b;
        assert!((&l.coeff(0) - &expect).sup_norm() < 1e-14);
        assert!(l.coeff(1).sup_norm() < 1e-15);
    }

    #[test]
    fn companion_round_trip() {
        let a0 = pf(&[0.4, 0.2, -0.1]);
        let hill = DifferentialOperator::monic(vec![a0.clone(), PeriodicFunction::constant(0.0)]).unwrap();
        let iota = embed_iota(&hill).unwrap();
        assert_eq!(iota.connection().matrix().get(0, 1), &a0.scale(-1.0));
        assert!(ds_reduce(&iota).unwrap().distance(&hill) < 1e-15);

        let l3 = DifferentialOperator::monic(vec![pf(&[0.1, 0.2, 0.3]), pf(&[-0.2, 0.5, 0.1]), PeriodicFunction::constant(0.0)]).unwrap();
        assert!(ds_reduce(&embed_iota(&l3).unwrap()).unwrap().distance(&l3) < 1e-13);
    }

    #[test]
    fn rejects_off_level_set() {
        let m = FunctionMatrix::from_rows(vec![
            vec![PeriodicFunction::constant(0.0), PeriodicFunction::constant(1.0)],
            vec![PeriodicFunction::constant(2.0), PeriodicFunction::constant(0.0)],
        ])
        .unwrap();
        assert!(matches!(LevelSetElement::new(MatrixConnection::new(m).unwrap()), Err(Error::NotInLevelSet(_))));
        let damped = DifferentialOperator::monic(vec![PeriodicFunction::constant(0.0), PeriodicFunction::constant(0.3)]).unwrap();
        assert!(embed_iota(&damped).is_err());
    }

    #[test]
    fn gauge_on_two_by_two_matches_hand_expansion() {
        let a0 = pf(&[0.4, 0.2, -0.1]);
        let mu = pf(&[0.0, 0.3, 0.1]);
        let hill = DifferentialOperator::monic(vec![a0.clone(), PeriodicFunction::constant(0.0)]).unwrap();
        let iota = embed_iota(&hill).unwrap();
        let g = UnipotentGauge::new(
            FunctionMatrix::from_rows(vec![
                vec![PeriodicFunction::constant(1.0), mu.clone()],
                vec![PeriodicFunction::constant(0.0), PeriodicFunction::constant(1.0)],
            ])
            .unwrap(),
        )
        .unwrap();
        let moved = gauge_act(&g, iota.connection()).unwrap();
        // [[1,m],[0,1]]·[[0,-a],[1,0]]·[[1,-m],[0,1]] + [[0,m'],[0,0]]
        let m = moved.matrix();
        assert!((m.get(0, 0) - &mu).sup_norm() < 1e-15);
        let expect01 = &(&a0.scale(-1.0) - &mu.multiply(&mu)) + &mu.derivative();
        assert!((m.get(0, 1) - &expect01).sup_norm() < 1e-14);
        assert!((m.get(1, 0) - &PeriodicFunction::constant(1.0)).sup_norm() < 1e-15);
        assert!((m.get(1, 1) + &mu).sup_norm() < 1e-15);
        let back = ds_reduce(&LevelSetElement::new(moved).unwrap()).unwrap();
        assert!(back.distance(&hill) < 1e-13);
    }

    #[test]
    fn recovered_gauge_reaches_companion() {
        let m = FunctionMatrix::from_rows(vec![
            vec![pf(&[0.1, 0.2, 0.0]), pf(&[0.3, 0.0, 0.1]), pf(&[-0.2, 0.1, 0.1])],
            vec![PeriodicFunction::constant(1.0), pf(&[0.0, -0.1, 0.2]), pf(&[0.4, 0.2, 0.0])],
            vec![PeriodicFunction::constant(0.0), PeriodicFunction::constant(1.0), pf(&[-0.1, -0.1, -0.2])],
        ])
        .unwrap();
        let a = LevelSetElement::new(MatrixConnection::new(m).unwrap()).unwrap();
        let g = reduction_gauge(&a).unwrap();
        let target = embed_iota(&ds_reduce(&a).unwrap()).unwrap();
        assert!(gauge_act(&g, a.connection()).unwrap().distance(target.connection()) < 1e-12);
    }

    #[test]
    fn constant_connection_holonomy_is_exponential() {
        let z = DMatrix::from_row_slice(2, 2, &[0.3, 1.0, -0.5, -0.3]);
        let a = MatrixConnection::constant(&z).unwrap();
        assert!(max_abs(&(holonomy(&a, 1024).unwrap() - z.clone().exp())) < 1e-10);
        let beta = MatrixPath::from_fn(1024, |t| (z.clone() * t).exp());
        let back = connection_of_path(&beta, 4, PATH_TOL).unwrap();
        assert!(back.distance(&a) < 1e-9);
        assert!(max_abs(&(monodromy_of_path(&beta, PATH_TOL).unwrap() - z.exp())) < 1e-12);
    }

    #[test]
    fn harmonic_companion_has_trivial_holonomy() {
        let k = 2.0 * PI;
        let l = DifferentialOperator::monic(vec![PeriodicFunction::constant(k * k), PeriodicFunction::constant(0.0)]).unwrap();
        let h = holonomy(embed_iota(&l).unwrap().connection(), 4096).unwrap();
        assert!(max_abs(&(h - DMatrix::identity(2, 2))) < 1e-8);
    }

    #[test]
    fn broken_path_is_rejected() {
        let beta = MatrixPath::from_fn(256, |t| DMatrix::from_row_slice(1, 1, &[1.0 + t * t]));
        assert!(matches!(monodromy_of_path(&beta, PATH_TOL), Err(Error::NotQuasiPeriodic { .. })));
    }

    #[test]
    fn connection_json_round_trip() {
        let a = embed_iota(&DifferentialOperator::monic(vec![pf(&[0.4, 0.2, -0.1]), PeriodicFunction::constant(0.0)]).unwrap())
            .unwrap()
            .into_connection();
        let json = serde_json::to_string(&a).unwrap();
        assert!(json.starts_with("{\"n\":2,\"entries\":[["));
        let back: MatrixConnection = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
    }
}
