//! Pseudodifferential symbols and the Adler–Gelfand–Dikii Poisson structure on monic
//! operators `D^n + a_{n-2}D^{n-2} + ... + a_0`.

mod symbol;

pub use symbol::{PseudoDifferentialSymbol, SymbolRecord};

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};
use crate::operator::{ClassReport, DifferentialOperator, GroupClass};

/// Tolerance of the order contract on `V_X(L)`.
pub const ORDER_CONTRACT_TOL: f64 = 1e-10;

/// Linear functional `ℓ_X(L) = ∫ res(X∘L)` given by a symbol with orders in `[-n, -1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct AgdFunctional {
    symbol: PseudoDifferentialSymbol,
}

impl AgdFunctional {
    pub fn new(symbol: PseudoDifferentialSymbol) -> Self {
        Self { symbol }
    }

    /// `Σ_{j=1}^n X_j D^{-j}` from `[X_1, ..., X_n]`.
    pub fn from_coeffs(coeffs: &[PeriodicFunction]) -> Self {
        Self::new(PseudoDifferentialSymbol::from_terms(
            coeffs.iter().enumerate().map(|(j, c)| (-(j as i32) - 1, c.clone())),
        ))
    }

    pub fn symbol(&self) -> &PseudoDifferentialSymbol {
        &self.symbol
    }

    /// Checks that every order lies in `[-n, -1]`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.symbol.min_order(), self.symbol.max_order()) {
            if lo < -(n as i32) || hi > -1 {
                return Err(Error::InvalidInput(format!(
                    "functional orders [{lo}, {hi}] fall outside [-{n}, -1]"
                )));
            }
        }
        Ok(())
    }

    pub fn eval(&self, op: &DifferentialOperator) -> f64 {
        ell_eval(&self.symbol, op)
    }
}

/// `ℓ_X(L) = ∫₀¹ res(X∘L) dθ`; the product is only expanded down to order -1.
pub fn ell_eval(x: &PseudoDifferentialSymbol, op: &DifferentialOperator) -> f64 {
    x.multiply(&PseudoDifferentialSymbol::from_operator(op), -1).residue().integrate()
}

fn raw_field(x: &PseudoDifferentialSymbol, l: &PseudoDifferentialSymbol) -> DifferentialOperator {
    let xl = x.multiply(l, 0).plus_part();
    let lx = l.multiply(x, 0).plus_part();
    let left = PseudoDifferentialSymbol::from_operator(&xl);
    let right = PseudoDifferentialSymbol::from_operator(&lx);
    let v = l.multiply(&left, 0).sub(&right.multiply(l, 0));
    v.plus_part()
}

/// `V_X(L) = L(XL)₊ - (LX)₊L`, returned as an operator of order `n-2`.
///
/// The `D^{-n}` part of `X` is defined only up to the gauge `X ↦ X + hD^{-n}`, which
/// leaves `ℓ_X` unchanged on monic operators without a `D^{n-1}` term but shifts the
/// `D^{n-1}` coefficient of `V_X` by `n h'`. That gauge is fixed so the field is tangent.
pub fn hamiltonian_field(x: &PseudoDifferentialSymbol, op: &DifferentialOperator) -> Result<DifferentialOperator> {
    let n = op.order();
    let (v, residual, scale) = full_field(x, op)?;
    if residual > ORDER_CONTRACT_TOL * scale {
        return Err(Error::Numerical(format!("V_X(L) violates the order contract by {residual:e}")));
    }
    Ok(v.resize(n - 2))
}

/// Largest sup-norm of the `D^n`, `D^{n-1}` coefficients of `V_X(L)` before truncation.
pub fn order_contract_residual(x: &PseudoDifferentialSymbol, op: &DifferentialOperator) -> Result<f64> {
    Ok(full_field(x, op)?.1)
}

fn full_field(x: &PseudoDifferentialSymbol, op: &DifferentialOperator) -> Result<(DifferentialOperator, f64, f64)> {
    let n = op.order();
    if n < 2 {
        return Err(Error::InvalidInput("the bracket needs operators of order n >= 2".into()));
    }
    op.require_monic(0.0)?;
    AgdFunctional::new(x.clone()).validate(n)?;
    let l = PseudoDifferentialSymbol::from_operator(op);
    let c = raw_field(x, &l).coeff(n - 1);
    let size = x.terms().values().map(PeriodicFunction::sup_norm).fold(0.0, f64::max);
    let scale = 1.0 + op.norm() * (1.0 + size);
    if c.mean().abs() > ORDER_CONTRACT_TOL * scale {
        return Err(Error::Numerical(format!("D^(n-1) coefficient of V_X has nonzero mean {:e}", c.mean())));
    }
    let mut gauge = x.clone();
    gauge.add_term(-(n as i32), &c.antiderivative().scale(-1.0 / n as f64));
    let v = raw_field(&gauge, &l);
    let residual = v.coeff(n).sup_norm().max(v.coeff(n - 1).sup_norm());
    Ok((v, residual, scale))
}

/// `{ℓ_X, ℓ_Y}(L) = ℓ_Y(V_X(L))`.
pub fn poisson_bracket(x: &AgdFunctional, y: &AgdFunctional, op: &DifferentialOperator) -> Result<f64> {
    let v = hamiltonian_field(x.symbol(), op)?;
    y.validate(op.order())?;
    Ok(ell_eval(y.symbol(), &v))
}

/// Class membership of `D^n + V_X(L)`.
pub fn class_tangency_check(
    x: &PseudoDifferentialSymbol,
    op: &DifferentialOperator,
    group: GroupClass,
    tol: f64,
) -> Result<ClassReport> {
    let n = op.order();
    group.check_order(n)?;
    let v = hamiltonian_field(x, op)?;
    let moved = DifferentialOperator::power_of_d(n).add(&v.resize(n)).with_weights(op.weights());
    moved.is_in_class(group, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pf(c: &[f64]) -> PeriodicFunction {
        PeriodicFunction::from_coeffs(c.to_vec()).unwrap()
    }

    fn hill(u: &PeriodicFunction) -> DifferentialOperator {
        DifferentialOperator::monic(vec![u.clone(), PeriodicFunction::constant(0.0)]).unwrap()
    }

    #[test]
    fn ell_examples() {
        let f = pf(&[0.3, 0.5, -0.2]);
        let x = PseudoDifferentialSymbol::from_terms([(-1, f.clone())]);
        assert_eq!(ell_eval(&x, &DifferentialOperator::power_of_d(3)), 0.0);
        let a0 = pf(&[1.0, 0.0, 0.4]);
        let expect = f.multiply(&a0).integrate();
        assert!((ell_eval(&x, &DifferentialOperator::multiplication(a0)) - expect).abs() < 1e-15);
        let x2 = PseudoDifferentialSymbol::from_terms([(-2, f.clone())]);
        assert!((ell_eval(&x2, &DifferentialOperator::power_of_d(1)) - f.integrate()).abs() < 1e-15);
    }

    #[test]
    fn hill_field_closed_form() {
        let u = pf(&[0.2, 0.3, -0.1, 0.05, 0.02]);
        let f = pf(&[0.1, -0.4, 0.2]);
        let x = PseudoDifferentialSymbol::from_terms([(-1, f.clone())]);
        let v = hamiltonian_field(&x, &hill(&u)).unwrap();
        assert_eq!(v.order(), 0);
        // -½f''' - 2uf' - u'f
        let expect = &(&f.nth_derivative(3).scale(-0.5) - &u.multiply(&f.derivative()).scale(2.0))
            - &u.derivative().multiply(&f);
        assert!((&v.coeff(0) - &expect).sup_norm() < 1e-10);
    }

    #[test]
    fn zero_symbol_gives_zero_field() {
        let v = hamiltonian_field(&PseudoDifferentialSymbol::new(), &hill(&pf(&[0.2, 0.3, 0.0]))).unwrap();
        assert!(v.norm() == 0.0);
    }

    #[test]
    fn rejects_out_of_range_orders() {
        let x = PseudoDifferentialSymbol::from_terms([(-3, PeriodicFunction::constant(1.0))]);
        assert!(hamiltonian_field(&x, &hill(&PeriodicFunction::constant(0.0))).is_err());
    }

    #[test]
    fn bracket_is_antisymmetric_for_third_order() {
        let l = DifferentialOperator::monic(vec![
            pf(&[0.1, 0.3, -0.2, 0.05, 0.1]),
            pf(&[-0.2, 0.1, 0.4, 0.0, -0.05]),
            PeriodicFunction::constant(0.0),
        ])
        .unwrap();
        let x = AgdFunctional::from_coeffs(&[pf(&[0.2, 0.1, -0.3]), pf(&[0.0, 0.4, 0.1]), pf(&[0.3, -0.1, 0.2])]);
        let y = AgdFunctional::from_coeffs(&[pf(&[-0.1, 0.2, 0.2]), pf(&[0.5, 0.0, -0.2]), pf(&[0.1, 0.3, 0.0])]);
        let xy = poisson_bracket(&x, &y, &l).unwrap();
        let yx = poisson_bracket(&y, &x, &l).unwrap();
        assert!((xy + yx).abs() < 1e-9, "{xy} vs {yx}");
        assert!(poisson_bracket(&x, &x, &l).unwrap().abs() < 1e-9);
        assert!(order_contract_residual(x.symbol(), &l).unwrap() < 1e-10);
    }
}
