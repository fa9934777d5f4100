//! Lifted orientation-preserving circle diffeomorphisms `F(x) = x + f(x)` with `f` periodic,
//! so that `F(x + 1) = F(x) + 1`.

use super::jet::Jet;
use super::periodic::{uniform_grid, PeriodicFunction};
use crate::error::{Error, Result};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const CHOP: f64 = 1e-16;

#[derive(Clone, Debug)]
pub struct CircleDiffeo {
    displacement: PeriodicFunction,
    min_derivative: f64,
    resolution: usize,
}

impl CircleDiffeo {
    /// Validates the orientation certificate `min(1 + f') > 0` on a grid of at least
    /// `8·N` points. Outputs that leave the band-limited class (compositions, pullbacks,
    /// Schwarzians) are re-projected at `resolution = max(4N, 32)` unless overridden.
    pub fn new(displacement: PeriodicFunction) -> Result<Self> {
        let band = displacement.band();
        let points = (8 * band).max(64);
        let slope = displacement.derivative().sample(points);
        let min_derivative = slope.iter().fold(f64::INFINITY, |m, v| m.min(1.0 + v));
        if min_derivative.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(Error::NotOrientationPreserving { min_derivative });
        }
        Ok(Self { displacement, min_derivative, resolution: (4 * band).max(32) })
    }

    pub fn identity() -> Self {
        Self::new(PeriodicFunction::constant(0.0)).expect("identity is a diffeomorphism")
    }

    /// Rigid rotation `x ↦ x + c`.
    pub fn rotation(c: f64) -> Self {
        Self::new(PeriodicFunction::constant(c)).expect("rotations are diffeomorphisms")
    }

    pub fn with_resolution(mut self, resolution: usize) -> Self {
        self.resolution = resolution.max(1);
        self
    }

    pub fn displacement(&self) -> &PeriodicFunction {
        &self.displacement
    }

    pub fn min_derivative(&self) -> f64 {
        self.min_derivative
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    /// Grid size used when re-projecting at the configured resolution.
    pub fn grid_points(&self) -> usize {
        8 * self.resolution
    }

    pub fn eval(&self, x: f64) -> f64 {
        x + self.displacement.eval(x)
    }

    /// `F(x), F'(x), ..., F^{(order)}(x)`.
    pub fn eval_derivatives(&self, x: f64, order: usize) -> Vec<f64> {
        let mut d = self.displacement.eval_derivatives(x, order);
        d[0] += x;
        if order >= 1 {
            d[1] += 1.0;
        }
        d
    }

    /// Taylor jet of `F` around `x`.
    pub fn jet(&self, x: f64, degree: usize) -> Jet {
        Jet::from_derivatives(&self.eval_derivatives(x, degree))
    }

    /// Solves `F(y) = x` by Newton iteration (tolerance 1e-12, at most 50 steps).
    pub fn inverse_point(&self, x: f64) -> Result<f64> {
        let mut y = x - self.displacement.eval(x);
        for _ in 0..NEWTON_MAX_ITER {
            let d = self.eval_derivatives(y, 1);
            let step = (d[0] - x) / d[1];
            y -= step;
            if step.abs() <= NEWTON_TOL {
                return Ok(y);
            }
        }
        Err(Error::Numerical(format!("Newton inversion of F did not converge at x = {x}")))
    }

    /// Taylor jet of `F⁻¹` around `x`.
    pub fn inverse_jet(&self, x: f64, degree: usize) -> Result<Jet> {
        let y = self.inverse_point(x)?;
        let mut g = self.jet(y, degree).revert();
        g = g.truncate(degree);
        let mut c = g.coeffs().to_vec();
        c[0] = y;
        Ok(Jet::new(c))
    }

    /// `F⁻¹`, with displacement re-projected at this map's resolution.
    pub fn inverse(&self) -> Result<Self> {
        let grid = uniform_grid(self.grid_points());
        let mut values = Vec::with_capacity(grid.len());
        for &x in &grid {
            values.push(self.inverse_point(x)? - x);
        }
        let h = PeriodicFunction::from_samples(&values, self.resolution)?;
        Ok(Self::new(h)?.with_resolution(self.resolution))
    }

    /// `self ∘ inner`, re-projected at the larger of the two resolutions.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        let resolution = self.resolution.max(inner.resolution);
        let g = &inner.displacement;
        let h = PeriodicFunction::project(
            |x| {
                let gx = g.eval(x);
                gx + self.displacement.eval(x + gx)
            },
            resolution,
            8 * resolution,
        )?
        .chop(CHOP);
        Ok(Self::new(h)?.with_resolution(resolution))
    }

    /// Pullback of an r-density, `(F')^r · (φ ∘ F)`, re-projected on `8·R` points.
    pub fn pullback_density(&self, f: &PeriodicFunction, r: f64) -> Result<PeriodicFunction> {
        let resolution = self.resolution.max(f.band());
        PeriodicFunction::project(
            |x| {
                let d = self.eval_derivatives(x, 1);
                d[1].powf(r) * f.eval(d[0])
            },
            resolution,
            8 * resolution,
        )
    }

    /// `𝒮(F)(x) = F'''/F' - (3/2)(F''/F')²` at a single point.
    pub fn schwarzian_at(&self, x: f64) -> f64 {
        self.jet(x, 3).schwarzian()
    }

    /// The Schwarzian derivative as a periodic function, re-projected on `8·R` points.
    pub fn schwarzian(&self) -> Result<PeriodicFunction> {
        PeriodicFunction::project(|x| self.schwarzian_at(x), self.resolution, self.grid_points())
    }
}
