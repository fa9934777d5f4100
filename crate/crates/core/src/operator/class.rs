use serde::{Deserialize, Serialize};

use super::DifferentialOperator;
use crate::error::{Error, Result};

/// Tolerance for class membership, measured as a grid sup-norm.
pub const DEFAULT_CLASS_TOL: f64 = 1e-10;

/// The projective groups whose opers are modelled by the three operator classes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub enum GroupClass {
    /// Vanishing subprincipal symbol, any order.
    #[serde(rename = "PSL")]
    Psl,
    /// `L* = L`, even order.
    #[serde(rename = "PSp")]
    Psp,
    /// `L* = -L`, odd order.
    #[serde(rename = "PSO")]
    Pso,
}

impl GroupClass {
    pub const ALL: [GroupClass; 3] = [GroupClass::Psl, GroupClass::Psp, GroupClass::Pso];

    pub fn name(self) -> &'static str {
        match self {
            GroupClass::Psl => "PSL",
            GroupClass::Psp => "PSp",
            GroupClass::Pso => "PSO",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "psl" | "sl" => Ok(GroupClass::Psl),
            "psp" | "sp" => Ok(GroupClass::Psp),
            "pso" | "so" => Ok(GroupClass::Pso),
            _ => Err(Error::InvalidInput(format!("unknown group {s:?}, expected PSL, PSp or PSO"))),
        }
    }

    /// Whether order `n` is allowed for this class.
    pub fn admits(self, n: usize) -> bool {
        match self {
            GroupClass::Psl => n >= 1,
            GroupClass::Psp => n >= 2 && n % 2 == 0,
            GroupClass::Pso => n % 2 == 1,
        }
    }

    pub fn check_order(self, n: usize) -> Result<()> {
        if self.admits(n) {
            return Ok(());
        }
        let parity = match self {
            GroupClass::Psp => "even",
            GroupClass::Pso => "odd",
            GroupClass::Psl => "positive",
        };
        Err(Error::ParityMismatch { group: self.name(), parity, n })
    }

    /// Weight-agnostic projection of `L` onto the class (keeps the leading term).
    pub fn project(self, op: &DifferentialOperator) -> Result<DifferentialOperator> {
        let n = op.order();
        self.check_order(n)?;
        let weights = op.weights();
        let projected = match self {
            GroupClass::Psl => {
                if n == 0 {
                    return Ok(op.clone());
                }
                let mut coeffs = op.coeffs().to_vec();
                let sub = op.subprincipal_symbol();
                coeffs[n - 1] -= &sub;
                DifferentialOperator::general(coeffs)?
            }
            GroupClass::Psp => op.add(&op.formal_adjoint()).scale(0.5),
            GroupClass::Pso => op.sub(&op.formal_adjoint()).scale(0.5),
        };
        Ok(projected.with_weights(weights))
    }
}

impl<'de> Deserialize<'de> for GroupClass {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Self::parse(&s).map_err(serde::de::Error::custom)
    }
}

impl std::fmt::Display for GroupClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for GroupClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ClassReport {
    pub member: bool,
    pub residual: f64,
}

impl DifferentialOperator {
    /// Defect from the class: `‖σ^sub‖`, `‖L - L*‖` or `‖L + L*‖`.
    pub fn class_residual(&self, group: GroupClass) -> Result<f64> {
        let n = self.order();
        group.check_order(n)?;
        Ok(match group {
            GroupClass::Psl => self.subprincipal_symbol().sup_norm(),
            GroupClass::Psp => self.distance(&self.formal_adjoint()),
            GroupClass::Pso => self.add(&self.formal_adjoint()).norm(),
        })
    }

    /// Class membership with the residual that decided it.
    pub fn is_in_class(&self, group: GroupClass, tol: f64) -> Result<ClassReport> {
        let residual = self.class_residual(group)?;
        Ok(ClassReport { member: residual <= tol, residual })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circle::PeriodicFunction;

    #[test]
    fn parity_is_enforced() {
        let l = DifferentialOperator::power_of_d(3);
        assert!(matches!(l.is_in_class(GroupClass::Psp, 1e-10), Err(Error::ParityMismatch { .. })));
        let l2 = DifferentialOperator::power_of_d(2);
        assert!(matches!(l2.is_in_class(GroupClass::Pso, 1e-10), Err(Error::ParityMismatch { .. })));
    }

    #[test]
    fn hill_is_in_psl_and_psp() {
        let a0 = PeriodicFunction::from_coeffs(vec![0.1, 0.3, -0.2]).unwrap();
        let hill = DifferentialOperator::monic(vec![a0, PeriodicFunction::constant(0.0)]).unwrap();
        assert!(hill.is_in_class(GroupClass::Psl, DEFAULT_CLASS_TOL).unwrap().member);
        assert!(hill.is_in_class(GroupClass::Psp, DEFAULT_CLASS_TOL).unwrap().member);
    }

    #[test]
    fn projection_lands_in_class() {
        let c = |v: &[f64]| PeriodicFunction::from_coeffs(v.to_vec()).unwrap();
        let l = DifferentialOperator::monic(vec![c(&[0.1, 0.3, -0.2]), c(&[0.0, 0.5, 0.1]), c(&[0.2, 0.1, 0.4])]).unwrap();
        for g in [GroupClass::Psl, GroupClass::Pso] {
            let p = g.project(&l).unwrap();
            assert!(p.is_in_class(g, DEFAULT_CLASS_TOL).unwrap().member, "{g}");
            assert!(p.monic_deviation() < 1e-15);
        }
        assert!(!l.is_in_class(GroupClass::Psl, DEFAULT_CLASS_TOL).unwrap().member);
    }

    #[test]
    fn group_names_round_trip() {
        for g in GroupClass::ALL {
            assert_eq!(GroupClass::parse(g.name()).unwrap(), g);
            assert_eq!(serde_json::to_string(&g).unwrap(), format!("\"{}\"", g.name()));
        }
        assert!(GroupClass::parse("GL").is_err());
    }
}
