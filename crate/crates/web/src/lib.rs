//! Browser demo bindings. Each export returns a JSON string for the page to draw.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use circle_opers::ds::{ds_reduce, holonomy};
use circle_opers::matrix::{spectrum, to_rows};
use circle_opers::monodromy::ProjectiveCurve;
use circle_opers::{random, CircleDiffeo, DifferentialOperator, Error, PeriodicFunction};

const STEPS: usize = 1024;
const PLOT_POINTS: usize = 256;

fn complex_list(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(spectrum(m).iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

/// Curve of `D² + q0 + eps·cos(2πkx)` in RP¹, as an unwrapped angle over one period.
pub fn hill_curve_json(q0: f64, eps: f64, k: usize) -> Result<Value, Error> {
    let q = &PeriodicFunction::constant(q0) + &PeriodicFunction::cos_mode(k, eps);
    let l = DifferentialOperator::monic(vec![q, PeriodicFunction::constant(0.0)])?;
    let curve = ProjectiveCurve::of_operator(&l, STEPS)?;
    let (m, winding) = curve.winding_lift_n2()?;
    let stride = STEPS / PLOT_POINTS;
    let mut angle = Vec::with_capacity(PLOT_POINTS + 1);
    let mut t = Vec::with_capacity(PLOT_POINTS + 1);
    let mut prev = 0.0;
    let mut acc = 0.0;
    for (i, jet) in curve.jets().iter().enumerate() {
        let a = jet[(0, 1)].atan2(jet[(0, 0)]);
        if i > 0 {
            let mut step = a - prev;
            step -= (step / std::f64::consts::TAU).round() * std::f64::consts::TAU;
            acc += step;
        }
        prev = a;
        if i % stride == 0 {
            t.push(i as f64 / STEPS as f64);
            angle.push(acc);
        }
    }
    Ok(json!({
        "t": t,
        "angle": angle,
        "monodromy": to_rows(&m),
        "trace": m.trace(),
        "spectrum": complex_list(&m),
        "winding": winding,
    }))
}

/// `F(x) = x + amp·sin(2πkx)/(2πk)` and its Schwarzian.
pub fn schwarzian_profile_json(amp: f64, k: usize) -> Result<Value, Error> {
    if k == 0 {
        return Err(Error::InvalidInput("mode must be positive".into()));
    }
    let f = CircleDiffeo::new(PeriodicFunction::sin_mode(k, amp / (std::f64::consts::TAU * k as f64)))?;
    let xs: Vec<f64> = (0..=PLOT_POINTS).map(|i| i as f64 / PLOT_POINTS as f64).collect();
    let s: Vec<f64> = xs.iter().map(|&x| f.schwarzian_at(x)).collect();
    let total: f64 = s[..PLOT_POINTS].iter().sum::<f64>() / PLOT_POINTS as f64;
    Ok(json!({
        "x": xs,
        "F": xs.iter().map(|&x| f.eval(x)).collect::<Vec<_>>(),
        "schwarzian": s,
        "min_derivative": f.min_derivative(),
        "mean_schwarzian": total,
    }))
}

/// Reduces a seeded random level-set connection and compares spectra.
pub fn ds_reduce_json(n: usize, seed: u64, amp: f64) -> Result<Value, Error> {
    if !(2..=5).contains(&n) {
        return Err(Error::InvalidInput("n must be between 2 and 5".into()));
    }
    let a = random::level_set_connection(&mut random::rng(seed), n, 4, amp)?;
    let l = ds_reduce(&a)?;
    let hol = holonomy(a.connection(), STEPS)?;
    let mono = circle_opers::monodromy::monodromy(&l)?;
    let coeffs: Vec<Vec<f64>> = (0..n - 1).map(|j| l.coeff(j).sample(PLOT_POINTS)).collect();
    Ok(json!({
        "n": n,
        "coefficients": coeffs,
        "holonomy_spectrum": complex_list(&hol),
        "monodromy_spectrum": complex_list(&mono),
    }))
}

fn export(v: Result<Value, Error>) -> Result<String, JsValue> {
    v.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen]
pub fn hill_curve(q0: f64, eps: f64, k: usize) -> Result<String, JsValue> {
    export(hill_curve_json(q0, eps, k))
}

#[wasm_bindgen]
pub fn schwarzian_profile(amp: f64, k: usize) -> Result<String, JsValue> {
    export(schwarzian_profile_json(amp, k))
}

#[wasm_bindgen]
pub fn ds_reduce_demo(n: usize, seed: u64, amp: f64) -> Result<String, JsValue> {
    export(ds_reduce_json(n, seed, amp))
}
