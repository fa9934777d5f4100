//! Quasi-periodic non-degenerate curves `Γ: ℝ → ℝⁿ` with `Γ(t + 1) = hΓ(t)`, stored as
//! jets `Γ, Γ', ..., Γ^{(K)}` on a uniform grid of `[0, 1]`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{integrate_fundamental, FundamentalSolution};
use crate::circle::{CircleDiffeo, Jet, PeriodicFunction};
use crate::error::{Error, Result};
use crate::matrix::to_rows;
use crate::operator::{binomial, DensityWeights, DifferentialOperator};

#[derive(Clone, Debug)]
pub struct ProjectiveCurve {
    n: usize,
    /// Per sample a `(K+1)×n` matrix whose row `k` is `Γ^{(k)}`.
    jets: Vec<DMatrix<f64>>,
    monodromy: DMatrix<f64>,
    band: usize,
}

/// JSON sidecar of a CSV curve export.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CurveSidecar {
    pub n: usize,
    pub monodromy: Vec<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winding: Option<i64>,
}

/// Sine of the angle between two lines through the origin.
pub fn projective_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum();
    let nb: f64 = b.iter().map(|x| x * x).sum();
    (1.0 - dot * dot / (na * nb)).max(0.0).sqrt()
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

/// Taylor coefficients of `det[Γ; Γ'; ...; Γ^{(n-2)}; e_j]` at one sample, built as the
/// wedge product of the rows' Taylor series with Cauchy products.
fn dual_taylor(sample: &DMatrix<f64>, n: usize, depth: usize) -> Vec<Vec<f64>> {
    let full = (1usize << n) - 1;
    let mut wedge: Vec<Option<Vec<f64>>> = vec![None; 1 << n];
    let mut unit = vec![0.0; depth + 1];
    unit[0] = 1.0;
    wedge[0] = Some(unit);
    for r in 0..n - 1 {
        let mut next: Vec<Option<Vec<f64>>> = vec![None; 1 << n];
        for (set, w) in wedge.iter().enumerate() {
            let Some(w) = w else { continue };
            for j in (0..n).filter(|j| set & (1 << j) == 0) {
                let above = (set >> (j + 1)).count_ones();
                let sign = if above % 2 == 0 { 1.0 } else { -1.0 };
                let target = next[set | (1 << j)].get_or_insert_with(|| vec![0.0; depth + 1]);
                for p in 0..=depth {
                    let row = sample[(r + p, j)] / factorial(p);
                    for q in 0..=depth - p {
                        target[p + q] += sign * row * w[q];
                    }
                }
            }
        }
        wedge = next;
    }
    (0..n)
        .map(|j| {
            let sign = if (n - 1 - j) % 2 == 0 { 1.0 } else { -1.0 };
            let w = wedge[full & !(1 << j)].as_ref().expect("all (n-1)-subsets are reached");
            w.iter().map(|v| sign * v).collect()
        })
        .collect()
}

impl ProjectiveCurve {
    /// Builds a curve from sampled jets (`K >= n`), checking non-degeneracy at every sample.
    pub fn from_jets(jets: Vec<DMatrix<f64>>, monodromy: DMatrix<f64>, band: usize) -> Result<Self> {
        let n = monodromy.nrows();
        if jets.len() < 2 || jets.iter().any(|j| j.ncols() != n || j.nrows() <= n) {
            return Err(Error::InvalidInput(format!("curve jets must be (K+1)×{n} with K >= {n}")));
        }
        let curve = Self { n, jets, monodromy, band };
        curve.check_nondegenerate()?;
        Ok(curve)
    }

    /// `t ↦ (u_1(t), ..., u_n(t))` for the normalised fundamental system of `L`.
    pub fn of_operator(op: &DifferentialOperator, steps: usize) -> Result<Self> {
        let phi = integrate_fundamental(op, steps)?;
        Self::of_fundamental(op, &phi)
    }

    pub fn of_fundamental(op: &DifferentialOperator, phi: &FundamentalSolution) -> Result<Self> {
        let n = op.order();
        let depth = 3 * n;
        let times = phi.times();
        let mut jets = Vec::with_capacity(times.len());
        for (t, frame) in times.iter().zip(phi.frames()) {
            let mut rows = DMatrix::zeros(depth + 1, n);
            rows.rows_mut(0, n).copy_from(frame);
            let a: Vec<Vec<f64>> = (0..n).map(|i| op.coeff(i).eval_derivatives(*t, depth - n)).collect();
            for k in n..=depth {
                // Γ^{(k)} = -D^{k-n} Σ a_i Γ^{(i)}
                let mut row = nalgebra::RowDVector::zeros(n);
                for (i, ai) in a.iter().enumerate() {
                    for (m, aim) in ai.iter().enumerate().take(k - n + 1) {
                        row -= rows.row(i + k - n - m) * (binomial(k - n, m) * aim);
                    }
                }
                rows.set_row(k, &row);
            }
            jets.push(rows);
        }
        let monodromy = phi.monodromy().transpose();
        Self::from_jets(jets, monodromy, op.band().max(1))
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of grid intervals `M`.
    pub fn steps(&self) -> usize {
        self.jets.len() - 1
    }

    /// Highest stored derivative order `K`.
    pub fn depth(&self) -> usize {
        self.jets[0].nrows() - 1
    }

    pub fn band(&self) -> usize {
        self.band
    }

    pub fn with_band(mut self, band: usize) -> Self {
        self.band = band;
        self
    }

    pub fn times(&self) -> Vec<f64> {
        let m = self.steps();
        (0..=m).map(|k| k as f64 / m as f64).collect()
    }

    pub fn jets(&self) -> &[DMatrix<f64>] {
        &self.jets
    }

    pub fn monodromy(&self) -> &DMatrix<f64> {
        &self.monodromy
    }

    /// `Γ(t_m)`.
    pub fn lift(&self, m: usize) -> Vec<f64> {
        self.jets[m].row(0).iter().copied().collect()
    }

    /// `‖Γ(1) - hΓ(0)‖∞`.
    pub fn quasi_periodicity_residual(&self) -> f64 {
        let first = self.jets[0].row(0).transpose();
        let last = self.jets[self.steps()].row(0).transpose();
        (last - &self.monodromy * first).amax()
    }

    fn frame(&self, m: usize) -> DMatrix<f64> {
        self.jets[m].rows(0, self.n).into_owned()
    }

    fn check_nondegenerate(&self) -> Result<()> {
        for m in 0..self.jets.len() {
            let frame = self.frame(m);
            let scale: f64 = frame.row_iter().map(|r| r.norm()).product();
            let det = frame.determinant();
            if !(det.abs() > 1e-12 * scale) {
                return Err(Error::DegenerateCurve { sample: m, det });
            }
        }
        Ok(())
    }

    /// The monic operator annihilating a Wronskian-normalised lift of the curve.
    ///
    /// Solves `Γ^{(n)} + Σ c_i Γ^{(i)} = 0` at each sample, projects the `c_i` to the
    /// curve's band and conjugates `Σ c_i D^i` by `W^{1/n}`, i.e. substitutes
    /// `D ↦ D - c_{n-1}/n`.
    pub fn operator_of_curve(&self) -> Result<DifferentialOperator> {
        let n = self.n;
        let m = self.steps();
        let mut samples = vec![Vec::with_capacity(m); n];
        for k in 0..m {
            let frame = self.frame(k);
            let rhs = -self.jets[k].row(n).transpose();
            let c = frame
                .transpose()
                .lu()
                .solve(&rhs)
                .ok_or(Error::DegenerateCurve { sample: k, det: 0.0 })?;
            for (i, s) in samples.iter_mut().enumerate() {
                s.push(c[i]);
            }
        }
        let c = samples
            .iter()
            .map(|s| PeriodicFunction::from_samples(s, self.band))
            .collect::<Result<Vec<_>>>()?;
        let phi = c[n - 1].scale(-1.0 / n as f64);
        let shift = DifferentialOperator::general(vec![phi, PeriodicFunction::constant(1.0)])?;
        let mut power = DifferentialOperator::multiplication(PeriodicFunction::constant(1.0));
        let mut total = DifferentialOperator::zero();
        for i in 0..=n {
            let ci = if i == n { PeriodicFunction::constant(1.0) } else { c[i].clone() };
            let term = DifferentialOperator::multiplication(ci).compose(&power)?;
            total = total.add(&term);
            if i < n {
                power = shift.compose(&power)?;
            }
        }
        let mut coeffs: Vec<PeriodicFunction> = total.coeffs()[..n].iter().map(|a| a.truncate(self.band)).collect();
        coeffs[n - 1] = PeriodicFunction::constant(0.0);
        let residual = total.coeff(n - 1).sup_norm();
        if residual > 1e-8 * (1.0 + total.norm()) {
            return Err(Error::Numerical(format!("Wronskian normalisation left a D^(n-1) term {residual:e}")));
        }
        let op = DifferentialOperator::monic(coeffs)?;
        Ok(op.with_weights(Some(DensityWeights::standard(n))))
    }

    /// The dual curve `Γ*` with `Γ*·w = det[Γ; Γ'; ...; Γ^{(n-2)}; w]`, monodromy
    /// `det(h)·h^{-T}`.
    pub fn dual_curve(&self) -> Result<Self> {
        let n = self.n;
        if n < 2 {
            return Err(Error::Unsupported("dual curves need n >= 2".into()));
        }
        let depth = self.depth() - (n - 2);
        let mut jets = Vec::with_capacity(self.jets.len());
        for (m, sample) in self.jets.iter().enumerate() {
            let taylor = dual_taylor(sample, n, depth);
            let out = DMatrix::from_fn(depth + 1, n, |k, j| taylor[j][k] * factorial(k));
            if out.row(0).norm() == 0.0 {
                return Err(Error::DegenerateCurve { sample: m, det: 0.0 });
            }
            jets.push(out);
        }
        let h = &self.monodromy;
        let inv = h
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Numerical("curve monodromy is singular".into()))?;
        let dual_h = inv.transpose() * h.determinant();
        Self::from_jets(jets, dual_h, self.band)
    }

    /// Largest pointwise projective distance between `Γ*` and `SΓ`, with the constant
    /// matrix `S` fitted by least squares.
    pub fn self_duality_residual(&self) -> Result<f64> {
        let dual = self.dual_curve()?;
        let n = self.n;
        let mut cross = DMatrix::<f64>::zeros(n, n);
        let mut gram = DMatrix::<f64>::zeros(n, n);
        for m in 0..self.steps() {
            let g = self.jets[m].row(0).transpose();
            let d = dual.jets[m].row(0).transpose();
            cross += &d * g.transpose();
            gram += &g * g.transpose();
        }
        let s = cross * gram.try_inverse().ok_or_else(|| Error::Numerical("curve spans a proper subspace".into()))?;
        Ok((0..=self.steps())
            .map(|m| {
                let mapped: Vec<f64> = (&s * self.jets[m].row(0).transpose()).iter().copied().collect();
                projective_distance(&dual.lift(m), &mapped)
            })
            .fold(0.0, f64::max))
    }

    /// Largest pointwise projective distance to another curve on the same grid.
    pub fn projective_gap(&self, other: &Self) -> f64 {
        (0..=self.steps().min(other.steps()))
            .map(|m| projective_distance(&self.lift(m), &other.lift(m)))
            .fold(0.0, f64::max)
    }

    /// For `n = 2`: the monodromy and the number of half-turns of the planar lift over
    /// `[0, 1]`, which together fix the lift to the universal cover of SL(2, ℝ).
    pub fn winding_lift_n2(&self) -> Result<(DMatrix<f64>, i64)> {
        if self.n != 2 {
            return Err(Error::Unsupported(format!("winding lifts are implemented for n = 2 only, got n = {}", self.n)));
        }
        let mut total = 0.0;
        let mut prev = self.jets[0][(0, 1)].atan2(self.jets[0][(0, 0)]);
        for sample in &self.jets[1..] {
            let angle = sample[(0, 1)].atan2(sample[(0, 0)]);
            let mut step = angle - prev;
            step -= (step / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            total += step;
            prev = angle;
        }
        let winding = (total.abs() / std::f64::consts::PI + 1e-9).floor() as i64;
        Ok((self.monodromy.clone(), winding * total.signum() as i64))
    }

    /// `g·Γ`, with monodromy `g h g⁻¹`.
    pub fn act_group(&self, g: &DMatrix<f64>) -> Result<Self> {
        let inv = g
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("group element must be invertible".into()))?;
        let gt = g.transpose();
        let jets = self.jets.iter().map(|j| j * &gt).collect();
        let monodromy = g * &self.monodromy * inv;
        Self::from_jets(jets, monodromy, self.band)
    }

    /// `Γ(s)` jets for any real `s`, by quasi-periodicity and a Taylor shift from the nearest
    /// sample.
    fn jets_at(&self, s: f64, degree: usize) -> DMatrix<f64> {
        let m = self.steps();
        let period = s.floor();
        let local = s - period;
        let j = (local * m as f64).round() as usize;
        let delta = local - j as f64 / m as f64;
        let source = &self.jets[j.min(m)];
        let depth = self.depth();
        let mut out = DMatrix::zeros(degree + 1, self.n);
        for k in 0..=degree {
            let mut term = 1.0;
            for l in 0..=(depth - k) {
                if l > 0 {
                    term *= delta / l as f64;
                }
                for c in 0..self.n {
                    out[(k, c)] += source[(k + l, c)] * term;
                }
            }
        }
        let q = period as i32;
        if q != 0 {
            let step = if q > 0 {
                self.monodromy.clone()
            } else {
                self.monodromy.clone().try_inverse().expect("monodromy is invertible")
            };
            for _ in 0..q.unsigned_abs() {
                out = &out * step.transpose();
            }
        }
        out
    }

    /// `(F·Γ)(x) = Γ(F⁻¹(x))`; the monodromy is unchanged and `n` jet orders are given up
    /// to the Taylor shift.
    pub fn act_diffeo(&self, f: &CircleDiffeo) -> Result<Self> {
        let degree = self.depth() - self.n;
        let times = self.times();
        let mut jets = Vec::with_capacity(times.len());
        for &x in &times {
            let g = f.inverse_jet(x, degree)?;
            let source = self.jets_at(g.value(), degree);
            let mut out = DMatrix::zeros(degree + 1, self.n);
            for c in 0..self.n {
                let column: Vec<f64> = source.column(c).iter().copied().collect();
                let composed = Jet::from_derivatives(&column).compose(&g);
                for k in 0..=degree {
                    out[(k, c)] = composed.derivative_value(k);
                }
            }
            jets.push(out);
        }
        Self::from_jets(jets, self.monodromy.clone(), self.band.max(f.resolution()))
    }

    /// CSV with columns `t, g1, ..., gn`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for c in 1..=self.n {
            out.push_str(&format!(",g{c}"));
        }
        out.push('\n');
        for (t, jet) in self.times().iter().zip(&self.jets) {
            out.push_str(&format!("{t}"));
            for c in 0..self.n {
                out.push_str(&format!(",{:e}", jet[(0, c)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn sidecar(&self) -> CurveSidecar {
        let winding = self.winding_lift_n2().ok().map(|(_, w)| w);
        CurveSidecar { n: self.n, monodromy: to_rows(&self.monodromy), winding }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn op(lower: Vec<f64>) -> DifferentialOperator {
        DifferentialOperator::monic(lower.into_iter().map(PeriodicFunction::constant).collect()).unwrap()
    }

    #[test]
    fn circle_curve_recovers_harmonic_oscillator() {
        let k = 2.0 * PI;
        // cos, sin/(2π) has Wronskian 1
        let m = 2048;
        let jets = (0..=m)
            .map(|i| {
                let t = i as f64 / m as f64;
                DMatrix::from_fn(7, 2, |d, c| {
                    let phase = k * t + c as f64 * -PI / 2.0 + d as f64 * PI / 2.0;
                    k.powi(d as i32) * phase.cos() / if c == 1 { k } else { 1.0 }
                })
            })
            .collect();
        let curve = ProjectiveCurve::from_jets(jets, DMatrix::identity(2, 2), 2).unwrap();
        let l = curve.operator_of_curve().unwrap();
        assert!((l.coeff(0).mean() - k * k).abs() < 1e-9);
        assert!(l.coeff(0).max_coeff() - k * k < 1e-9);
    }

    #[test]
    fn round_trip_skew_operator() {
        let l = op(vec![0.0, -1.0, 0.0]);
        let back = ProjectiveCurve::of_operator(&l, 2048).unwrap().operator_of_curve().unwrap();
        assert!(back.distance(&l) < 1e-6, "{}", back.distance(&l));
    }

    #[test]
    fn dual_of_circle_and_double_dual() {
        let curve = ProjectiveCurve::of_operator(&op(vec![4.0 * PI * PI, 0.0]), 1024).unwrap();
        let dual = curve.dual_curve().unwrap();
        for m in [0, 100, 700] {
            let g = curve.lift(m);
            assert!(projective_distance(&dual.lift(m), &[-g[1], g[0]]) < 1e-12);
        }
        let again = dual.dual_curve().unwrap();
        assert!(again.projective_gap(&curve) < 1e-12);
    }

    #[test]
    fn windings() {
        for (a0, expect) in [(4.0 * PI * PI, 2), (16.0 * PI * PI, 4), (0.0, 0), (PI * PI, 1)] {
            let (_, w) = ProjectiveCurve::of_operator(&op(vec![a0, 0.0]), 4096).unwrap().winding_lift_n2().unwrap();
            assert_eq!(w, expect, "a0 = {a0}");
        }
        let c3 = ProjectiveCurve::of_operator(&op(vec![0.0, -1.0, 0.0]), 512).unwrap();
        assert!(matches!(c3.winding_lift_n2(), Err(Error::Unsupported(_))));
    }

    #[test]
    fn degenerate_curve_is_rejected() {
        let jets = vec![DMatrix::from_row_slice(3, 2, &[1.0, 2.0, 2.0, 4.0, 0.0, 0.0]); 3];
        let err = ProjectiveCurve::from_jets(jets, DMatrix::identity(2, 2), 1).unwrap_err();
        assert!(matches!(err, Error::DegenerateCurve { sample: 0, .. }));
    }

    #[test]
    fn csv_export_shape() {
        let curve = ProjectiveCurve::of_operator(&op(vec![PI * PI, 0.0]), 256).unwrap();
        let csv = curve.to_csv();
        assert!(csv.starts_with("t,g1,g2\n"));
        assert_eq!(csv.lines().count(), 258);
        assert_eq!(curve.sidecar().winding, Some(1));
    }
}
