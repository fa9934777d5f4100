//! Square matrices with periodic-function entries, and small dense-matrix helpers.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::circle::PeriodicFunction;
use crate::error::{Error, Result};

/// `n×n` matrix of periodic functions, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FunctionMatrix {
    n: usize,
    entries: Vec<PeriodicFunction>,
}

impl FunctionMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, entries: vec![PeriodicFunction::constant(0.0); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, PeriodicFunction::constant(1.0));
        }
        m
    }

    pub fn from_constant(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.set(i, j, PeriodicFunction::constant(m[(i, j)]));
            }
        }
        out
    }

    pub fn from_rows(rows: Vec<Vec<PeriodicFunction>>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidInput("matrix rows must form a nonempty square".into()));
        }
        Ok(Self { n, entries: rows.into_iter().flatten().collect() })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &PeriodicFunction {
        &self.entries[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, f: PeriodicFunction) {
        self.entries[i * self.n + j] = f;
    }

    pub fn rows(&self) -> Vec<Vec<PeriodicFunction>> {
        self.entries.chunks(self.n).map(<[PeriodicFunction]>::to_vec).collect()
    }

    pub fn eval(&self, t: f64) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n, |i, j| self.get(i, j).eval(t))
    }

    pub fn map(&self, f: impl Fn(&PeriodicFunction) -> PeriodicFunction) -> Self {
        Self { n: self.n, entries: self.entries.iter().map(f).collect() }
    }

    pub fn derivative(&self) -> Self {
        self.map(PeriodicFunction::derivative)
    }

    pub fn truncate(&self, band: usize) -> Self {
        self.map(|f| f.truncate(band))
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.n);
        for i in 0..self.n {
            for j in 0..self.n {
                out.set(j, i, self.get(i, j).clone());
            }
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { n: self.n, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { n: self.n, entries: self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect() }
    }

    /// Exact product (bands add).
    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = PeriodicFunction::constant(0.0);
                for k in 0..n {
                    let (a, b) = (self.get(i, k), other.get(k, j));
                    if !a.is_zero() && !b.is_zero() {
                        acc += &a.multiply(b);
                    }
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    pub fn band(&self) -> usize {
        self.entries.iter().map(PeriodicFunction::band).max().unwrap_or(0)
    }

    /// Largest entry sup-norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().map(PeriodicFunction::sup_norm).fold(0.0, f64::max)
    }

    /// Projects a sampled matrix function (`samples[m]` at `m/len`) to `band`.
    pub fn from_samples(samples: &[DMatrix<f64>], band: usize) -> Result<Self> {
        let n = samples.first().map_or(0, DMatrix::nrows);
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                let values: Vec<f64> = samples.iter().map(|m| m[(i, j)]).collect();
                out.set(i, j, PeriodicFunction::from_samples(&values, band)?);
            }
        }
        Ok(out)
    }
}

impl Serialize for FunctionMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for FunctionMatrix {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows = Vec::<Vec<PeriodicFunction>>::deserialize(d)?;
        Self::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Eigenvalues of a real square matrix, after Parlett-Reinsch balancing.
pub fn spectrum(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    let mut balanced = m.clone();
    nalgebra::linalg::balancing::balance_parlett_reinsch(&mut balanced);
    balanced.complex_eigenvalues().iter().copied().collect()
}

/// Best multiset matching of two spectra; the residual is
/// `max |λ - μ| / max(1, |λ|)` over matched pairs.
pub fn spectrum_distance(a: &[Complex<f64>], b: &[Complex<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    let mut used = vec![false; b.len()];
    best_matching(a, b, &mut used, 0)
}

fn best_matching(a: &[Complex<f64>], b: &[Complex<f64>], used: &mut [bool], i: usize) -> f64 {
    if i == a.len() {
        return 0.0;
    }
    let mut best = f64::INFINITY;
    for j in 0..b.len() {
        if used[j] {
            continue;
        }
        let here = (a[i] - b[j]).norm() / a[i].norm().max(1.0);
        if here >= best {
            continue;
        }
        used[j] = true;
        best = best.min(here.max(best_matching(a, b, used, i + 1)));
        used[j] = false;
    }
    best
}

/// Matrix to nested rows, for JSON output.
pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

pub fn from_rows(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::InvalidInput("matrix rows must be nonempty and of equal length".into()));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spectra_match_up_to_order() {
        let a = [Complex::new(1.0, 0.0), Complex::new(2.0, 1.0), Complex::new(2.0, -1.0)];
        let b = [Complex::new(2.0, -1.0), Complex::new(1.0, 0.0), Complex::new(2.0, 1.0)];
        assert_eq!(spectrum_distance(&a, &b), 0.0);
        let c = [Complex::new(1.0, 0.0), Complex::new(1.0, 0.0), Complex::new(2.0, 1.0)];
        assert!(spectrum_distance(&a, &c) > 0.5);
    }

    #[test]
    fn product_and_eval_agree() {
        let a = FunctionMatrix::from_rows(vec![
            vec![PeriodicFunction::cos_mode(1, 1.0), PeriodicFunction::constant(2.0)],
            vec![PeriodicFunction::constant(0.0), PeriodicFunction::sin_mode(2, 0.5)],
        ])
        .unwrap();
        let p = a.mul(&a.transpose());
        let t = 0.3;
        assert!(max_abs(&(p.eval(t) - a.eval(t) * a.eval(t).transpose())) < 1e-14);
    }
}
