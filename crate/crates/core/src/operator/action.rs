//! Change of coordinates for operators between density bundles.
//!
//! With old coordinate `x = Φ(y)`, an `r₁`-density `u` becomes `ũ = (u∘Φ)(Φ')^{r₁}` and
//! the conjugated operator is `L̃ũ = ((Lu)∘Φ)(Φ')^{r₂}`. Coefficients of `L̃` are read off
//! pointwise: at each grid point `L̃` is applied to `n+1` trigonometric probes through
//! Taylor jets of `Φ` and its local inverse, and the resulting linear system for
//! `b_0..b_n` is solved exactly.

use nalgebra::{DMatrix, DVector};

use super::{DensityWeights, DifferentialOperator};
use crate::circle::{uniform_grid, CircleDiffeo, Jet, PeriodicFunction};
use crate::error::{Error, Result};

/// `F^* ∘ L ∘ (F^*)^{-1}`, whose coefficients involve `a_i ∘ F`.
pub fn pullback_conjugate(f: &CircleDiffeo, op: &DifferentialOperator) -> Result<DifferentialOperator> {
    let degree = op.order() + 1;
    conjugate(op, resolution(f, op), |y| Ok(f.jet(y, degree)))
}

/// The left action `F·L = F_* ∘ L ∘ F^*`, so that `(F∘G)·L = F·(G·L)`.
pub fn diffeo_act(f: &CircleDiffeo, op: &DifferentialOperator) -> Result<DifferentialOperator> {
    let degree = op.order() + 1;
    conjugate(op, resolution(f, op), |y| f.inverse_jet(y, degree))
}

/// Action of the composite `maps[0] ∘ maps[1] ∘ ...`, chaining inverse jets pointwise
/// instead of re-projecting the composed map.
pub fn diffeo_act_chain(maps: &[&CircleDiffeo], op: &DifferentialOperator) -> Result<DifferentialOperator> {
    let degree = op.order() + 1;
    let band = maps.iter().map(|f| resolution(f, op)).max().unwrap_or(4 * op.band());
    conjugate(op, band, |x| {
        let mut jet = Jet::constant(x, degree).add(&Jet::variable(degree));
        for f in maps {
            jet = f.inverse_jet(jet.value(), degree)?.compose(&jet);
        }
        Ok(jet)
    })
}

fn resolution(f: &CircleDiffeo, op: &DifferentialOperator) -> usize {
    f.resolution().max(4 * op.band())
}

fn probes(n: usize) -> Vec<PeriodicFunction> {
    let mut out = Vec::with_capacity(n + 1);
    if n % 2 == 0 {
        out.push(PeriodicFunction::constant(1.0));
    }
    let mut k = 1;
    while out.len() < n + 1 {
        out.push(PeriodicFunction::cos_mode(k, 1.0));
        out.push(PeriodicFunction::sin_mode(k, 1.0));
        k += 1;
    }
    out
}

fn conjugate(
    op: &DifferentialOperator,
    band: usize,
    coordinate: impl Fn(f64) -> Result<Jet>,
) -> Result<DifferentialOperator> {
    let n = op.order();
    let weights = op.weights().unwrap_or_else(|| DensityWeights::standard(n));
    let probes = probes(n);
    let grid = uniform_grid(8 * band);
    let mut samples = vec![Vec::with_capacity(grid.len()); n + 1];

    for &y0 in &grid {
        let phi = coordinate(y0)?;
        let slope = phi.differentiate();
        let x0 = phi.value();
        // offset in x ↦ y0 + offset in y
        let mut local_inverse = phi.truncate(n).revert();
        let mut c = local_inverse.coeffs().to_vec();
        c[0] = y0;
        local_inverse = Jet::new(c);
        let density_factor = slope.compose(&local_inverse).powf(-weights.input);
        let out_factor = slope.value().powf(weights.output);
        let a: Vec<f64> = op.coeffs().iter().map(|a| a.eval(x0)).collect();

        let mut matrix = DMatrix::<f64>::zeros(n + 1, n + 1);
        let mut rhs = DVector::<f64>::zeros(n + 1);
        for (j, probe) in probes.iter().enumerate() {
            let derivs = probe.eval_derivatives(y0, n);
            for (i, d) in derivs.iter().enumerate() {
                matrix[(j, i)] = *d;
            }
            let u = Jet::from_derivatives(&derivs).compose(&local_inverse).mul(&density_factor);
            rhs[j] = out_factor * a.iter().enumerate().map(|(i, ai)| ai * u.derivative_value(i)).sum::<f64>();
        }
        let b = matrix
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Numerical(format!("singular probe system at y = {y0}")))?;
        for (i, s) in samples.iter_mut().enumerate() {
            s.push(b[i]);
        }
    }

    let mut coeffs = samples
        .iter()
        .map(|s| PeriodicFunction::from_samples(s, band))
        .collect::<Result<Vec<_>>>()?;
    if op.monic_deviation() == 0.0 && (weights.output - weights.input - n as f64).abs() < 1e-12 {
        let deviation = (&coeffs[n] - &PeriodicFunction::constant(1.0)).sup_norm();
        if deviation > 1e-8 {
            return Err(Error::Numerical(format!("conjugated operator lost monicity ({deviation:e})")));
        }
        coeffs[n] = PeriodicFunction::constant(1.0);
    }
    Ok(DifferentialOperator::general(coeffs)?.with_weights(op.weights()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diffeo() -> CircleDiffeo {
        CircleDiffeo::new(PeriodicFunction::from_coeffs(vec![0.0, 0.02, 0.04, 0.0, 0.01]).unwrap()).unwrap()
    }

    fn hill(a0: &PeriodicFunction) -> DifferentialOperator {
        DifferentialOperator::monic(vec![a0.clone(), PeriodicFunction::constant(0.0)]).unwrap()
    }

    #[test]
    fn identity_and_rotation_act_trivially() {
        let a0 = PeriodicFunction::from_coeffs(vec![0.4, 0.2, -0.1]).unwrap();
        let l = hill(&a0);
        let same = diffeo_act(&CircleDiffeo::identity(), &l).unwrap();
        assert!(same.distance(&l) < 1e-12);
        let rotated = pullback_conjugate(&CircleDiffeo::rotation(0.25), &l).unwrap();
        assert!((&rotated.coeff(0) - &a0.shift(0.25)).sup_norm() < 1e-12);
    }

    #[test]
    fn hill_rule_with_half_schwarzian() {
        let f = diffeo();
        let a0 = PeriodicFunction::from_coeffs(vec![0.4, 0.2, -0.1]).unwrap();
        let l = pullback_conjugate(&f, &hill(&a0)).unwrap();
        let expect = &f.pullback_density(&a0, 2.0).unwrap() + &f.schwarzian().unwrap().scale(0.5);
        assert!((&l.coeff(0) - &expect).sup_norm() < 1e-9);
        assert!(l.coeff(1).sup_norm() < 1e-9);
    }

    #[test]
    fn left_action_composes() {
        let f = diffeo().with_resolution(64);
        let g = CircleDiffeo::new(PeriodicFunction::cos_mode(2, 0.01)).unwrap().with_resolution(64);
        let a0 = PeriodicFunction::from_coeffs(vec![0.4, 0.2, -0.1]).unwrap();
        let l = hill(&a0);
        let fg = f.compose(&g).unwrap();
        let lhs = diffeo_act(&fg, &l).unwrap();
        let rhs = diffeo_act(&f, &diffeo_act(&g, &l).unwrap()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-8, "{:e}", lhs.distance(&rhs));
        let back = pullback_conjugate(&f, &diffeo_act(&f, &l).unwrap()).unwrap();
        assert!(back.distance(&l) < 1e-8, "{:e}", back.distance(&l));
    }
}
