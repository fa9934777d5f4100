//! Scalar differential operators `L = Σ a_i(θ) D^i` between density bundles on the circle.
//!
//! Coefficients sit to the left of the derivatives. An order-n operator in the main class
//! maps `(1-n)/2`-densities to `(1+n)/2`-densities and has leading coefficient 1; the
//! weights are carried as metadata and only matter for composition typing, the formal
//! adjoint, and the diffeomorphism action.

mod action;
mod class;

pub use action::{diffeo_act, diffeo_act_chain, pullback_conjugate};
pub use class::{ClassReport, GroupClass, DEFAULT_CLASS_TOL};

use serde::{Deserialize, Serialize};

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};

/// Input and output density weights `(r₁, r₂)` of an operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityWeights {
    pub input: f64,
    pub output: f64,
}

impl DensityWeights {
    /// `((1-n)/2, (1+n)/2)`, the weights that make the principal symbol scalar and put
    /// `L` and `L*` on the same bundles.
    pub fn standard(order: usize) -> Self {
        let n = order as f64;
        Self { input: 0.5 * (1.0 - n), output: 0.5 * (1.0 + n) }
    }

    pub fn adjoint(self) -> Self {
        Self { input: 1.0 - self.output, output: 1.0 - self.input }
    }
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DifferentialOperator {
    coeffs: Vec<PeriodicFunction>,
    weights: Option<DensityWeights>,
}

impl DifferentialOperator {
    /// Monic operator `D^n + a_{n-1}D^{n-1} + ... + a_0` on the standard density weights;
    /// `lower` lists `a_0..a_{n-1}`.
    pub fn monic(lower: Vec<PeriodicFunction>) -> Result<Self> {
        if lower.is_empty() {
            return Err(Error::InvalidInput("a monic operator needs order n >= 1".into()));
        }
        let order = lower.len();
        let mut coeffs = lower;
        coeffs.push(PeriodicFunction::constant(1.0));
        Ok(Self { coeffs, weights: Some(DensityWeights::standard(order)) })
    }

    /// General operator with coefficients `a_0..a_n`, not tied to any density weights.
    pub fn general(coeffs: Vec<PeriodicFunction>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidInput("an operator needs at least one coefficient".into()));
        }
        Ok(Self { coeffs, weights: None })
    }

    /// Multiplication operator `u ↦ a·u`.
    pub fn multiplication(a: PeriodicFunction) -> Self {
        Self { coeffs: vec![a], weights: None }
    }

    /// `D^n` on the standard weights.
    pub fn power_of_d(order: usize) -> Self {
        let mut coeffs = vec![PeriodicFunction::constant(0.0); order + 1];
        coeffs[order] = PeriodicFunction::constant(1.0);
        Self { coeffs, weights: Some(DensityWeights::standard(order)) }
    }

    pub fn zero() -> Self {
        Self::multiplication(PeriodicFunction::constant(0.0))
    }

    pub fn with_weights(mut self, weights: Option<DensityWeights>) -> Self {
        self.weights = weights;
        self
    }

    /// Drops the density-weight metadata.
    pub fn weight_agnostic(self) -> Self {
        self.with_weights(None)
    }

    pub fn weights(&self) -> Option<DensityWeights> {
        self.weights
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[PeriodicFunction] {
        &self.coeffs
    }

    /// `a_i`, zero above the order.
    pub fn coeff(&self, i: usize) -> PeriodicFunction {
        self.coeffs.get(i).cloned().unwrap_or_default()
    }

    pub fn leading(&self) -> &PeriodicFunction {
        self.coeffs.last().expect("operators have at least one coefficient")
    }

    /// Largest band limit among the coefficients.
    pub fn band(&self) -> usize {
        self.coeffs.iter().map(PeriodicFunction::band).max().unwrap_or(0)
    }

    pub fn monic_deviation(&self) -> f64 {
        (self.leading() - &PeriodicFunction::constant(1.0)).sup_norm()
    }

    pub fn require_monic(&self, tol: f64) -> Result<()> {
        let deviation = self.monic_deviation();
        if deviation > tol {
            return Err(Error::NotMonic { deviation });
        }
        Ok(())
    }

    /// `Σ a_i u^{(i)}` with exact Fourier derivatives.
    pub fn apply(&self, u: &PeriodicFunction) -> PeriodicFunction {
        let mut out = PeriodicFunction::constant(0.0);
        let mut du = u.clone();
        for a in &self.coeffs {
            out += &a.multiply(&du);
            du = du.derivative();
        }
        out
    }

    /// `self ∘ rhs` by the Leibniz rule `(aD^i)∘(bD^j) = Σ_k C(i,k) a b^{(k)} D^{i+j-k}`.
    pub fn compose(&self, rhs: &Self) -> Result<Self> {
        let weights = match (self.weights, rhs.weights) {
            (Some(left), Some(right)) => {
                if (right.output - left.input).abs() > 1e-12 {
                    return Err(Error::WeightMismatch { output: right.output, input: left.input });
                }
                Some(DensityWeights { input: right.input, output: left.output })
            }
            (None, None) => None,
            (Some(left), None) => {
                return Err(Error::WeightMismatch { output: f64::NAN, input: left.input })
            }
            (None, Some(right)) => {
                return Err(Error::WeightMismatch { output: right.output, input: f64::NAN })
            }
        };
        Ok(compose_coeffs(&self.coeffs, &rhs.coeffs).with_weights(weights))
    }

    /// Formal adjoint `L* = Σ (-1)^i D^i ∘ a_i`.
    pub fn formal_adjoint(&self) -> Self {
        let n = self.order();
        let mut out = vec![PeriodicFunction::constant(0.0); n + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
            let mut da = a.clone();
            // D^i ∘ a = Σ_k C(i,k) a^{(i-k)} D^k; walk the derivative order i-k upwards
            for m in 0..=i {
                let k = i - m;
                out[k] += &da.scale(sign * binomial(i, k));
                da = da.derivative();
            }
        }
        Self { coeffs: out, weights: self.weights.map(DensityWeights::adjoint) }
    }

    /// `σ^sub(L)`: the `D^{n-1}` coefficient of `(L - (-1)^n L*)/2`.
    pub fn subprincipal_symbol(&self) -> PeriodicFunction {
        let n = self.order();
        if n == 0 {
            return PeriodicFunction::constant(0.0);
        }
        let adjoint = self.formal_adjoint();
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        (&self.coeff(n - 1) - &adjoint.coeff(n - 1).scale(sign)).scale(0.5)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a.scale(c)).collect(), weights: self.weights }
    }

    /// Sup-norm of the coefficient-wise difference, maximised over coefficients.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).coeffs.iter().map(PeriodicFunction::sup_norm).fold(0.0, f64::max)
    }

    /// Largest coefficient sup-norm.
    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(PeriodicFunction::sup_norm).fold(0.0, f64::max)
    }

    /// Truncates every coefficient to `band`.
    pub fn truncate(&self, band: usize) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a.truncate(band)).collect(), weights: self.weights }
    }

    /// Reinterprets the operator with order `order`, dropping (or zero-padding) higher
    /// coefficients. The weights become the standard ones for monic results.
    pub fn resize(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, PeriodicFunction::constant(0.0));
        Self { coeffs, weights: self.weights }
    }

    fn zip(&self, other: &Self, op: impl Fn(&PeriodicFunction, &PeriodicFunction) -> PeriodicFunction) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len).map(|i| op(&self.coeff(i), &other.coeff(i))).collect();
        let weights = if self.weights == other.weights { self.weights } else { None };
        Self { coeffs, weights }
    }
}

/// Leibniz composition of two coefficient lists, weight-agnostic.
pub(crate) fn compose_coeffs(left: &[PeriodicFunction], right: &[PeriodicFunction]) -> DifferentialOperator {
    let order = left.len() + right.len() - 2;
    let max_i = left.len() - 1;
    let mut out = vec![PeriodicFunction::constant(0.0); order + 1];
    for (j, b) in right.iter().enumerate() {
        let mut db = b.clone();
        for k in 0..=max_i {
            for (i, a) in left.iter().enumerate().skip(k) {
                if a.is_zero() {
                    continue;
                }
                out[i + j - k] += &a.multiply(&db).scale(binomial(i, k));
            }
            db = db.derivative();
        }
    }
    DifferentialOperator { coeffs: out, weights: None }
}

/// JSON form `{"n": int, "group": "PSL|PSp|PSO|none", "coeffs": [a_0, ...]}`; `a_n` is
/// omitted when the operator is monic.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OperatorRecord {
    pub n: usize,
    #[serde(default = "none_group")]
    pub group: String,
    pub coeffs: Vec<PeriodicFunction>,
}

fn none_group() -> String {
    "none".into()
}

impl OperatorRecord {
    pub fn new(op: &DifferentialOperator, group: Option<GroupClass>) -> Self {
        let n = op.order();
        let monic = op.monic_deviation() == 0.0 && n > 0;
        let coeffs = if monic { op.coeffs[..n].to_vec() } else { op.coeffs.clone() };
        let group = group.map_or_else(none_group, |g| g.name().to_string());
        Self { n, group, coeffs }
    }

    pub fn group(&self) -> Result<Option<GroupClass>> {
        match self.group.as_str() {
            "none" => Ok(None),
            other => GroupClass::parse(other).map(Some),
        }
    }

    pub fn to_operator(&self) -> Result<DifferentialOperator> {
        if self.coeffs.len() == self.n && self.n > 0 {
            DifferentialOperator::monic(self.coeffs.clone())
        } else if self.coeffs.len() == self.n + 1 {
            Ok(DifferentialOperator::general(self.coeffs.clone())?
                .with_weights(Some(DensityWeights::standard(self.n))))
        } else {
            Err(Error::InvalidInput(format!(
                "operator of order {} needs {} (monic) or {} coefficients, got {}",
                self.n,
                self.n,
                self.n + 1,
                self.coeffs.len()
            )))
        }
    }
}
