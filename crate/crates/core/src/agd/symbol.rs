use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};
use crate::operator::DifferentialOperator;

/// Formal symbol `Σ_m c_m(θ) D^m` with finitely many integer orders, coefficients on the left.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PseudoDifferentialSymbol {
    terms: BTreeMap<i32, PeriodicFunction>,
}

/// `C(m, j)` for integer `m` of either sign.
pub(crate) fn general_binomial(m: i32, j: usize) -> f64 {
    (0..j).fold(1.0, |acc, t| acc * (m as f64 - t as f64) / (t + 1) as f64)
}

impl PseudoDifferentialSymbol {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (i32, PeriodicFunction)>) -> Self {
        let mut s = Self::new();
        for (m, c) in terms {
            s.add_term(m, &c);
        }
        s
    }

    pub fn from_operator(op: &DifferentialOperator) -> Self {
        Self::from_terms(op.coeffs().iter().enumerate().map(|(i, a)| (i as i32, a.clone())))
    }

    pub fn terms(&self) -> &BTreeMap<i32, PeriodicFunction> {
        &self.terms
    }

    pub fn term(&self, m: i32) -> PeriodicFunction {
        self.terms.get(&m).cloned().unwrap_or_default()
    }

    pub fn add_term(&mut self, m: i32, c: &PeriodicFunction) {
        if c.is_zero() {
            return;
        }
        *self.terms.entry(m).or_default() += c;
    }

    pub fn max_order(&self) -> Option<i32> {
        self.terms.keys().next_back().copied()
    }

    pub fn min_order(&self) -> Option<i32> {
        self.terms.keys().next().copied()
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(*m, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|(m, c)| (*m, c.scale(s))).collect() }
    }

    /// Product `self ∘ other`, keeping orders `>= floor`.
    ///
    /// `(aD^m)∘(bD^k) = Σ_j C(m,j) a b^{(j)} D^{m+k-j}`, finite when `m >= 0`.
    pub fn multiply(&self, other: &Self, floor: i32) -> Self {
        let mut out = Self::new();
        let max_j = self
            .terms
            .keys()
            .flat_map(|m| other.terms.keys().map(move |k| m + k - floor))
            .max()
            .unwrap_or(-1);
        if max_j < 0 {
            return out;
        }
        for (k, b) in &other.terms {
            let mut db = b.clone();
            for j in 0..=max_j as usize {
                for (m, a) in &self.terms {
                    let order = m + k - j as i32;
                    if order < floor || (*m >= 0 && j as i32 > *m) {
                        continue;
                    }
                    out.add_term(order, &a.multiply(&db).scale(general_binomial(*m, j)));
                }
                db = db.derivative();
            }
        }
        out
    }

    /// Differential part `(·)_+`, as a weight-agnostic operator (zero if there is none).
    pub fn plus_part(&self) -> DifferentialOperator {
        let top = self.max_order().unwrap_or(0).max(0) as usize;
        let coeffs = (0..=top).map(|i| self.term(i as i32)).collect();
        DifferentialOperator::general(coeffs).expect("nonempty")
    }

    /// Wodzicki residue density, the `D^{-1}` coefficient.
    pub fn residue(&self) -> PeriodicFunction {
        self.term(-1)
    }
}

/// JSON form `{"orders": {"-1": [...], "-2": [...]}}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SymbolRecord {
    pub orders: BTreeMap<String, PeriodicFunction>,
}

impl From<&PseudoDifferentialSymbol> for SymbolRecord {
    fn from(s: &PseudoDifferentialSymbol) -> Self {
        Self { orders: s.terms.iter().map(|(m, c)| (m.to_string(), c.clone())).collect() }
    }
}

impl TryFrom<SymbolRecord> for PseudoDifferentialSymbol {
    type Error = Error;

    fn try_from(rec: SymbolRecord) -> Result<Self> {
        let mut terms = Vec::new();
        for (k, c) in rec.orders {
            let m = k.trim().parse::<i32>().map_err(|_| Error::InvalidInput(format!("bad order key {k:?}")))?;
            terms.push((m, c));
        }
        Ok(Self::from_terms(terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(c: &[f64]) -> PeriodicFunction {
        PeriodicFunction::from_coeffs(c.to_vec()).unwrap()
    }

    #[test]
    fn inverse_of_d() {
        let d = PseudoDifferentialSymbol::from_terms([(1, PeriodicFunction::constant(1.0))]);
        let dinv = PseudoDifferentialSymbol::from_terms([(-1, PeriodicFunction::constant(1.0))]);
        let p = d.multiply(&dinv, -6);
        assert_eq!(p.terms().len(), 1);
        assert!((p.term(0).mean() - 1.0).abs() < 1e-15);
        let q = dinv.multiply(&d, -6);
        assert!((&q.term(0) - &PeriodicFunction::constant(1.0)).max_coeff() < 1e-15);
    }

    #[test]
    fn dinv_times_function() {
        // D⁻¹∘f = f D⁻¹ - f' D⁻² + f'' D⁻³ - ...
        let f = pf(&[0.3, 0.5, -0.2]);
        let dinv = PseudoDifferentialSymbol::from_terms([(-1, PeriodicFunction::constant(1.0))]);
        let p = dinv.multiply(&PseudoDifferentialSymbol::from_terms([(0, f.clone())]), -4);
        assert!((&p.term(-1) - &f).max_coeff() < 1e-14);
        assert!((&p.term(-2) + &f.derivative()).max_coeff() < 1e-12);
        assert!((&p.term(-3) - &f.nth_derivative(2)).max_coeff() < 1e-10);
        assert!(p.term(-5).is_zero());
    }

    #[test]
    fn associativity_on_truncations() {
        let a = PseudoDifferentialSymbol::from_terms([(1, PeriodicFunction::constant(1.0)), (-1, pf(&[0.1, 0.2, 0.3]))]);
        let b = PseudoDifferentialSymbol::from_terms([(0, pf(&[0.4, -0.1, 0.2])), (-2, pf(&[0.0, 0.5, 0.0]))]);
        let c = PseudoDifferentialSymbol::from_terms([(-1, pf(&[1.0, 0.0, 0.1]))]);
        let floor = -5;
        let left = a.multiply(&b, floor).multiply(&c, floor);
        let right = a.multiply(&b.multiply(&c, floor), floor);
        for m in (floor + 1)..=1 {
            let scale = 1.0 + left.term(m).max_coeff();
            assert!((&left.term(m) - &right.term(m)).max_coeff() < 1e-9 * scale, "order {m}");
        }
    }

    #[test]
    fn record_round_trip() {
        let s = PseudoDifferentialSymbol::from_terms([(-1, pf(&[0.1, 0.2, 0.3])), (-2, PeriodicFunction::constant(2.0))]);
        let json = serde_json::to_string(&SymbolRecord::from(&s)).unwrap();
        assert!(json.contains("\"-1\""));
        let back = PseudoDifferentialSymbol::try_from(serde_json::from_str::<SymbolRecord>(&json).unwrap()).unwrap();
        assert_eq!(back, s);
    }
}
