//! Truncated real Fourier series on the unit circle (period 1).
//!
//! A function of band limit `N` is stored as the flat list
//! `[mean, c_1, s_1, ..., c_N, s_N]` and represents
//!
//! ```text
//! f(θ) = mean + Σ_k c_k cos(2πkθ) + s_k sin(2πkθ)
//! ```
//!
//! Differentiation and multiplication are exact on this representation; band growth from
//! products is kept, and truncation only happens through [`PeriodicFunction::truncate`].

use std::cell::RefCell;
use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn fft_inplace(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        let fft = if inverse {
            planner.plan_fft_inverse(buf.len())
        } else {
            planner.plan_fft_forward(buf.len())
        };
        fft.process(buf);
    });
}

/// Equispaced grid `θ_m = m / points` on `[0, 1)`.
pub fn uniform_grid(points: usize) -> Vec<f64> {
    (0..points).map(|m| m as f64 / points as f64).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicFunction {
    coeffs: Vec<f64>,
}

impl PeriodicFunction {
    pub fn zero(band: usize) -> Self {
        Self { coeffs: vec![0.0; 2 * band + 1] }
    }

    pub fn constant(c: f64) -> Self {
        Self { coeffs: vec![c] }
    }

    /// `amp · cos(2πkθ)`.
    pub fn cos_mode(k: usize, amp: f64) -> Self {
        let mut f = Self::zero(k);
        if k == 0 {
            f.coeffs[0] = amp;
        } else {
            f.coeffs[2 * k - 1] = amp;
        }
        f
    }

    /// `amp · sin(2πkθ)`.
    pub fn sin_mode(k: usize, amp: f64) -> Self {
        let mut f = Self::zero(k);
        if k > 0 {
            f.coeffs[2 * k] = amp;
        }
        f
    }

    /// Builds a function from the flat `[mean, c_1, s_1, ...]` list.
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "Fourier coefficient list must have odd length 2N+1, got {}",
                coeffs.len()
            )));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite Fourier coefficient {bad}")));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn band(&self) -> usize {
        (self.coeffs.len() - 1) / 2
    }

    pub fn mean(&self) -> f64 {
        self.coeffs[0]
    }

    pub fn cos_coef(&self, k: usize) -> f64 {
        match k {
            0 => self.coeffs[0],
            _ if k <= self.band() => self.coeffs[2 * k - 1],
            _ => 0.0,
        }
    }

    pub fn sin_coef(&self, k: usize) -> f64 {
        if k == 0 || k > self.band() {
            0.0
        } else {
            self.coeffs[2 * k]
        }
    }

    /// Integral over one period. Oscillatory modes integrate to zero, so this is the mean.
    pub fn integrate(&self) -> f64 {
        self.mean()
    }

    /// Complex coefficient `f̂_k`, `k ≥ 0`; `f̂_{-k}` is its conjugate.
    fn hat(&self, k: usize) -> Complex64 {
        if k == 0 {
            Complex64::new(self.coeffs[0], 0.0)
        } else {
            Complex64::new(0.5 * self.cos_coef(k), -0.5 * self.sin_coef(k))
        }
    }

    fn from_hats(hats: &[Complex64]) -> Self {
        let band = hats.len() - 1;
        let mut coeffs = vec![0.0; 2 * band + 1];
        coeffs[0] = hats[0].re;
        for k in 1..=band {
            coeffs[2 * k - 1] = 2.0 * hats[k].re;
            coeffs[2 * k] = -2.0 * hats[k].im;
        }
        Self { coeffs }
    }

    pub fn eval(&self, theta: f64) -> f64 {
        let (s1, c1) = (TWO_PI * theta).sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        let mut acc = self.coeffs[0];
        for k in 1..=self.band() {
            (ck, sk) = (ck * c1 - sk * s1, sk * c1 + ck * s1);
            acc += self.coeffs[2 * k - 1] * ck + self.coeffs[2 * k] * sk;
        }
        acc
    }

    /// Values `f(θ), f'(θ), ..., f^{(order)}(θ)` at a single point.
    pub fn eval_derivatives(&self, theta: f64, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        out[0] = self.coeffs[0];
        let (s1, c1) = (TWO_PI * theta).sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        for k in 1..=self.band() {
            (ck, sk) = (ck * c1 - sk * s1, sk * c1 + ck * s1);
            let (a, b) = (self.coeffs[2 * k - 1], self.coeffs[2 * k]);
            let value = a * ck + b * sk;
            // d/dθ of value, divided by ω
            let quad = -a * sk + b * ck;
            let omega = TWO_PI * k as f64;
            let mut scale = 1.0;
            for (m, slot) in out.iter_mut().enumerate() {
                let v = match m % 4 {
                    0 => value,
                    1 => quad,
                    2 => -value,
                    _ => -quad,
                };
                *slot += scale * v;
                scale *= omega;
            }
        }
        out
    }

    /// Values on the uniform grid `m / points`, `m = 0..points`.
    ///
    /// When `points <= 2N` the higher modes alias onto the grid, which is exactly what
    /// sampling the function there produces.
    pub fn sample(&self, points: usize) -> Vec<f64> {
        assert!(points > 0, "sample grid must be non-empty");
        let mut buf = vec![Complex64::new(0.0, 0.0); points];
        for k in 0..=self.band() {
            let h = self.hat(k);
            buf[k % points] += h;
            if k > 0 {
                buf[(points - k % points) % points] += h.conj();
            }
        }
        fft_inplace(&mut buf, true);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Least-squares projection of uniform-grid samples onto band `band`.
    ///
    /// Requires `samples.len() > 2 * band` so that every retained mode is resolved.
    pub fn from_samples(samples: &[f64], band: usize) -> Result<Self> {
        let points = samples.len();
        if points <= 2 * band {
            return Err(Error::InvalidInput(format!(
                "{points} samples cannot resolve band {band}"
            )));
        }
        let mut buf: Vec<Complex64> = samples.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        fft_inplace(&mut buf, false);
        let scale = 1.0 / points as f64;
        let hats: Vec<Complex64> = buf[..=band].iter().map(|z| z * scale).collect();
        Ok(Self::from_hats(&hats))
    }

    /// Samples `g` on an oversampled grid and projects onto band `band`.
    pub fn project<G: Fn(f64) -> f64>(g: G, band: usize, points: usize) -> Result<Self> {
        let values: Vec<f64> = uniform_grid(points).into_iter().map(g).collect();
        Self::from_samples(&values, band)
    }

    pub fn derivative(&self) -> Self {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for k in 1..=self.band() {
            let omega = TWO_PI * k as f64;
            let (c, s) = (self.coeffs[2 * k - 1], self.coeffs[2 * k]);
            coeffs[2 * k - 1] = omega * s;
            coeffs[2 * k] = -omega * c;
        }
        Self { coeffs }
    }

    pub fn nth_derivative(&self, order: usize) -> Self {
        (0..order).fold(self.clone(), |f, _| f.derivative())
    }

    /// The zero-mean periodic antiderivative. The mean of `self` is ignored; callers that
    /// need a genuine antiderivative should check it vanishes.
    pub fn antiderivative(&self) -> Self {
        let mut coeffs = vec![0.0; self.coeffs.len()];
        for k in 1..=self.band() {
            let omega = TWO_PI * k as f64;
            let (c, s) = (self.coeffs[2 * k - 1], self.coeffs[2 * k]);
            coeffs[2 * k - 1] = -s / omega;
            coeffs[2 * k] = c / omega;
        }
        Self { coeffs }
    }

    /// Exact product; the band limit of the result is the sum of the band limits.
    pub fn multiply(&self, other: &Self) -> Self {
        let (n1, n2) = (self.band(), other.band());
        let band = n1 + n2;
        // two-sided spectra indexed by k + band
        let two_sided = |f: &Self, n: usize| -> Vec<Complex64> {
            let mut v = vec![Complex64::new(0.0, 0.0); 2 * n + 1];
            for k in 0..=n {
                let h = f.hat(k);
                v[n + k] = h;
                v[n - k] = h.conj();
            }
            v
        };
        let a = two_sided(self, n1);
        let b = two_sided(other, n2);
        let mut hats = vec![Complex64::new(0.0, 0.0); band + 1];
        for (i, ai) in a.iter().enumerate() {
            if ai.norm_sqr() == 0.0 {
                continue;
            }
            let ki = i as isize - n1 as isize;
            for (j, bj) in b.iter().enumerate() {
                let k = ki + j as isize - n2 as isize;
                if k >= 0 {
                    hats[k as usize] += ai * bj;
                }
            }
        }
        Self::from_hats(&hats)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|v| v * c).collect() }
    }

    /// Drops every mode above `band` (or zero-pads up to it).
    pub fn truncate(&self, band: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(2 * band + 1, 0.0);
        Self { coeffs }
    }

    /// Drops the trailing modes whose amplitudes all stay below `rel · max_coeff`.
    pub fn chop(&self, rel: f64) -> Self {
        let floor = rel * self.max_coeff();
        let keep = (1..=self.band())
            .rev()
            .find(|&k| self.coeffs[2 * k - 1].abs() > floor || self.coeffs[2 * k].abs() > floor)
            .unwrap_or(0);
        self.truncate(keep)
    }

    /// `f(θ + shift)`, exact.
    pub fn shift(&self, shift: f64) -> Self {
        let mut coeffs = self.coeffs.clone();
        for k in 1..=self.band() {
            let (s, c) = (TWO_PI * k as f64 * shift).sin_cos();
            let (a, b) = (self.coeffs[2 * k - 1], self.coeffs[2 * k]);
            // a cos(ω(θ+h)) + b sin(ω(θ+h))
            coeffs[2 * k - 1] = a * c + b * s;
            coeffs[2 * k] = b * c - a * s;
        }
        Self { coeffs }
    }

    /// Maximum of `|f|` over a grid of `16·max(N, 4)` points.
    pub fn sup_norm(&self) -> f64 {
        let points = 16 * self.band().max(4);
        self.sample(points).into_iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest coefficient magnitude; bounds `sup_norm` up to a factor `2N+1`.
    pub fn max_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn zip_with(&self, other: &Self, op: impl Fn(f64, f64) -> f64) -> Self {
        let len = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..len)
            .map(|i| {
                op(
                    self.coeffs.get(i).copied().unwrap_or(0.0),
                    other.coeffs.get(i).copied().unwrap_or(0.0),
                )
            })
            .collect();
        Self { coeffs }
    }
}

impl Default for PeriodicFunction {
    fn default() -> Self {
        Self::constant(0.0)
    }
}

impl Add for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn add(self, rhs: Self) -> PeriodicFunction {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn sub(self, rhs: Self) -> PeriodicFunction {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn mul(self, rhs: Self) -> PeriodicFunction {
        self.multiply(rhs)
    }
}

impl Mul<f64> for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn mul(self, rhs: f64) -> PeriodicFunction {
        self.scale(rhs)
    }
}

impl Neg for &PeriodicFunction {
    type Output = PeriodicFunction;
    fn neg(self) -> PeriodicFunction {
        self.scale(-1.0)
    }
}

impl AddAssign<&PeriodicFunction> for PeriodicFunction {
    fn add_assign(&mut self, rhs: &PeriodicFunction) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&PeriodicFunction> for PeriodicFunction {
    fn sub_assign(&mut self, rhs: &PeriodicFunction) {
        *self = &*self - rhs;
    }
}

impl Serialize for PeriodicFunction {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coeffs.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for PeriodicFunction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let coeffs = Vec::<f64>::deserialize(deserializer)?;
        Self::from_coeffs(coeffs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &PeriodicFunction, b: &PeriodicFunction, tol: f64) -> bool {
        (a - b).max_coeff() <= tol
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        assert!(PeriodicFunction::constant(3.5).derivative().is_zero());
    }

    #[test]
    fn derivative_rotates_modes() {
        let d = PeriodicFunction::sin_mode(1, 1.0).derivative();
        assert!(close(&d, &PeriodicFunction::cos_mode(1, TWO_PI), 1e-15));
        let d = PeriodicFunction::cos_mode(2, 1.0).derivative();
        assert!(close(&d, &PeriodicFunction::sin_mode(2, -2.0 * TWO_PI), 1e-14));
    }

    #[test]
    fn product_identities() {
        let one = PeriodicFunction::constant(1.0);
        let c = PeriodicFunction::cos_mode(1, 1.0);
        let p = (&one + &c).multiply(&(&one - &c));
        let expect = &PeriodicFunction::constant(0.5) - &PeriodicFunction::cos_mode(2, 0.5);
        assert!(close(&p, &expect, 1e-15));
        assert_eq!(p.band(), 2);

        let s = PeriodicFunction::sin_mode(1, 1.0);
        assert!(close(&s.multiply(&c), &PeriodicFunction::sin_mode(2, 0.5), 1e-15));
        assert!(close(&s.multiply(&one), &s, 0.0));
    }

    #[test]
    fn integrals() {
        let f = &PeriodicFunction::constant(2.0) + &PeriodicFunction::cos_mode(1, 1.0);
        assert_eq!(f.integrate(), 2.0);
        assert_eq!(PeriodicFunction::sin_mode(1, 1.0).integrate(), 0.0);
        let s = PeriodicFunction::sin_mode(1, 1.0);
        assert!((s.multiply(&s).integrate() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sampling_round_trip() {
        let f = PeriodicFunction::from_coeffs(vec![0.3, 1.0, -0.5, 0.25, 0.125]).unwrap();
        let samples = f.sample(32);
        for (m, v) in samples.iter().enumerate() {
            assert!((v - f.eval(m as f64 / 32.0)).abs() < 1e-14);
        }
        let back = PeriodicFunction::from_samples(&samples, 2).unwrap();
        assert!(close(&back, &f, 1e-14));
        assert!(PeriodicFunction::from_samples(&samples[..4], 2).is_err());
    }

    #[test]
    fn pointwise_derivatives_match_fourier_derivatives() {
        let f = PeriodicFunction::from_coeffs(vec![0.3, 1.0, -0.5, 0.25, 0.125, -0.1, 0.07]).unwrap();
        let vals = f.eval_derivatives(0.37, 4);
        for (m, v) in vals.iter().enumerate() {
            let exact = f.nth_derivative(m).eval(0.37);
            assert!((v - exact).abs() <= 1e-12 * exact.abs().max(1.0), "order {m}");
        }
    }

    #[test]
    fn shift_is_translation() {
        let f = PeriodicFunction::from_coeffs(vec![0.1, 0.4, -0.2, 0.3, 0.05]).unwrap();
        let g = f.shift(0.21);
        for t in [0.0, 0.3, 0.77] {
            assert!((g.eval(t) - f.eval(t + 0.21)).abs() < 1e-14);
        }
    }

    #[test]
    fn antiderivative_inverts_derivative() {
        let f = PeriodicFunction::from_coeffs(vec![0.0, 0.4, -0.2, 0.3, 0.05]).unwrap();
        assert!(close(&f.antiderivative().derivative(), &f, 1e-15));
    }

    #[test]
    fn rejects_even_length() {
        assert!(PeriodicFunction::from_coeffs(vec![1.0, 2.0]).is_err());
        assert!(serde_json::from_str::<PeriodicFunction>("[1.0, 2.0]").is_err());
        let f: PeriodicFunction = serde_json::from_str("[1.0, 2.0, 3.0]").unwrap();
        assert_eq!(f.sin_coef(1), 3.0);
    }
}
