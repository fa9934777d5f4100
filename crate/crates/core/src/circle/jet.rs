//! Truncated Taylor series in a local offset variable `δ`.
//!
//! `Jet { c }` stands for `c[0] + c[1] δ + ... + c[d] δ^d`; coefficients are Taylor
//! coefficients, so the k-th derivative at the expansion point is `k! · c[k]`.

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<f64>,
}

fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Jet {
    pub fn new(coeffs: Vec<f64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least a constant term");
        Self { c: coeffs }
    }

    /// Builds a jet from derivative values `f, f', f'', ...`.
    pub fn from_derivatives(values: &[f64]) -> Self {
        Self::new(values.iter().enumerate().map(|(k, v)| v / factorial(k)).collect())
    }

    pub fn constant(value: f64, degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        c[0] = value;
        Self { c }
    }

    /// The identity offset `δ`.
    pub fn variable(degree: usize) -> Self {
        let mut c = vec![0.0; degree + 1];
        if degree >= 1 {
            c[1] = 1.0;
        }
        Self { c }
    }

    pub fn degree(&self) -> usize {
        self.c.len() - 1
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    /// `k!·c[k]`, the k-th derivative at the expansion point.
    pub fn derivative_value(&self, k: usize) -> f64 {
        self.c.get(k).map_or(0.0, |v| v * factorial(k))
    }

    pub fn truncate(&self, degree: usize) -> Self {
        let mut c = self.c.clone();
        c.resize(degree + 1, 0.0);
        Self { c }
    }

    pub fn add(&self, other: &Self) -> Self {
        let d = self.degree().min(other.degree());
        Self { c: (0..=d).map(|k| self.c[k] + other.c[k]).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let d = self.degree().min(other.degree());
        Self { c: (0..=d).map(|k| self.c[k] - other.c[k]).collect() }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { c: self.c.iter().map(|v| v * s).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        let d = self.degree().min(other.degree());
        let mut c = vec![0.0; d + 1];
        for (i, a) in self.c.iter().enumerate().take(d + 1) {
            for (j, b) in other.c.iter().enumerate().take(d + 1 - i) {
                c[i + j] += a * b;
            }
        }
        Self { c }
    }

    /// Derivative with respect to `δ`; the degree drops by one.
    pub fn differentiate(&self) -> Self {
        if self.degree() == 0 {
            return Self::constant(0.0, 0);
        }
        Self { c: (1..self.c.len()).map(|k| k as f64 * self.c[k]).collect() }
    }

    /// `f'''/f' - (3/2)(f''/f')²` at the expansion point; needs degree 3.
    pub fn schwarzian(&self) -> f64 {
        let (d1, d2, d3) = (self.derivative_value(1), self.derivative_value(2), self.derivative_value(3));
        let q = d2 / d1;
        d3 / d1 - 1.5 * q * q
    }

    /// `self ∘ inner`, where `self` is expanded around `inner.value()`.
    ///
    /// Only the offset part `inner - inner.value()` enters the Horner evaluation.
    pub fn compose(&self, inner: &Self) -> Self {
        let d = inner.degree();
        let mut offset = inner.clone();
        offset.c[0] = 0.0;
        let mut acc = Self::constant(*self.c.last().unwrap(), d);
        for k in (0..self.c.len() - 1).rev() {
            acc = acc.mul(&offset);
            acc.c[0] += self.c[k];
        }
        acc.truncate(d)
    }

    /// Real power `self^p`; requires a positive constant term.
    pub fn powf(&self, p: f64) -> Self {
        let c0 = self.c[0];
        assert!(c0 > 0.0, "powf needs a positive constant term, got {c0}");
        let d = self.degree();
        let mut t = self.scale(1.0 / c0);
        t.c[0] = 0.0;
        // (1 + t)^p = Σ binom(p, k) t^k, t has no constant term
        let mut out = Self::constant(1.0, d);
        let mut power = Self::constant(1.0, d);
        let mut binom = 1.0;
        for k in 1..=d {
            power = power.mul(&t);
            binom *= (p - (k - 1) as f64) / k as f64;
            out = out.add(&power.scale(binom));
        }
        out.scale(c0.powf(p))
    }

    /// Inverse series of the offset map `δ ↦ self(δ) - self(0)`.
    ///
    /// The result `g` satisfies `self(g(s)) - self(0) = s`, has zero constant term and needs
    /// a nonzero linear coefficient.
    pub fn revert(&self) -> Self {
        let d = self.degree();
        let slope = self.c.get(1).copied().unwrap_or(0.0);
        assert!(slope != 0.0, "series reversion needs a nonzero linear term");
        let mut offset = self.clone();
        offset.c[0] = 0.0;
        let mut g = Self::variable(d).scale(1.0 / slope);
        for m in 2..=d {
            let err = offset.compose(&g).c[m];
            g.c[m] -= err / slope;
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_jet(x0: f64, d: usize) -> Jet {
        Jet::from_derivatives(&vec![x0.exp(); d + 1])
    }

    #[test]
    fn composition_matches_chain_rule() {
        // exp(sin(x)) around x = 0.3
        let d = 5;
        let x0: f64 = 0.3;
        let sin_jet = Jet::from_derivatives(&[x0.sin(), x0.cos(), -x0.sin(), -x0.cos(), x0.sin(), x0.cos()]);
        let outer = exp_jet(x0.sin(), d);
        let h = outer.compose(&sin_jet);
        // (e^{sin})' = cos e^{sin}, (e^{sin})'' = (cos² - sin) e^{sin}
        let e = x0.sin().exp();
        assert!((h.derivative_value(1) - x0.cos() * e).abs() < 1e-14);
        assert!((h.derivative_value(2) - (x0.cos().powi(2) - x0.sin()) * e).abs() < 1e-14);
    }

    #[test]
    fn reversion_inverts() {
        let f = Jet::new(vec![1.0, 2.0, 0.5, -0.3, 0.1]);
        let g = f.revert();
        let mut id = f.compose(&g);
        id.c[0] -= 1.0;
        for (k, v) in id.coeffs().iter().enumerate() {
            let expect = if k == 1 { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-14, "degree {k}: {v}");
        }
    }

    #[test]
    fn powf_matches_direct_expansion() {
        // (2 + δ)^{1.5}
        let j = Jet::new(vec![2.0, 1.0, 0.0, 0.0]).powf(1.5);
        let d1 = 1.5 * 2f64.powf(0.5);
        let d2 = 1.5 * 0.5 * 2f64.powf(-0.5);
        let d3 = 1.5 * 0.5 * -0.5 * 2f64.powf(-1.5);
        assert!((j.derivative_value(1) - d1).abs() < 1e-14);
        assert!((j.derivative_value(2) - d2).abs() < 1e-14);
        assert!((j.derivative_value(3) - d3).abs() < 1e-14);
    }
}
