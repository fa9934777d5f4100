//! Run configuration, verification suites and reports for the command-line front end.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agd::{ell_eval, hamiltonian_field, order_contract_residual, poisson_bracket, AgdFunctional, PseudoDifferentialSymbol};
use crate::circle::{uniform_grid, CircleDiffeo, PeriodicFunction};
use crate::ds::{ds_reduce, embed_iota, gauge_act, holonomy, reduction_gauge, LevelSetElement};
use crate::error::{Error, Result};
use crate::matrix::{max_abs, spectrum, spectrum_distance};
use crate::monodromy::{certify_group, integrate_fundamental, jet_system, liouville_residual, ConcomitantForm, ProjectiveCurve, ERROR_FLAG, MIN_STEPS};
use crate::operator::{diffeo_act, diffeo_act_chain, pullback_conjugate, DifferentialOperator, GroupClass};
use crate::random;

/// Displacement amplitude for the coordinate-change checks.
pub const DIFFEO_AMPLITUDE: f64 = 0.05;
/// Central-difference step for the Jacobi check.
pub const JACOBI_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub membership: f64,
    pub integration: f64,
    pub certification: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { membership: 1e-10, integration: 1e-7, certification: 1e-6 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    pub group: GroupClass,
    pub band: usize,
    pub steps: usize,
    pub seed: u64,
    pub amplitude: f64,
    pub instances: usize,
    pub tolerances: Tolerances,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 2,
            group: GroupClass::Psl,
            band: 16,
            steps: 4096,
            seed: 0,
            amplitude: 1.0,
            instances: 100,
            tolerances: Tolerances::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return bad(format!("n must be at least 2, got {}", self.n));
        }
        if self.band == 0 {
            return bad("band must be positive".into());
        }
        if self.steps < MIN_STEPS || !self.steps.is_power_of_two() {
            return bad(format!("steps must be a power of two >= {MIN_STEPS}, got {}", self.steps));
        }
        if !(self.amplitude >= 0.0 && self.amplitude.is_finite()) {
            return bad(format!("amplitude must be finite and non-negative, got {}", self.amplitude));
        }
        if self.instances == 0 {
            return bad("instances must be positive".into());
        }
        let t = &self.tolerances;
        for (name, v) in [("membership", t.membership), ("integration", t.integration), ("certification", t.certification)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("tolerance {name} must be positive, got {v}"));
            }
        }
        self.group.check_order(self.n).map_err(|e| Error::Config(e.to_string()))
    }

    /// Generator for instance `i`, independent of evaluation order.
    pub fn instance_rng(&self, i: usize) -> random::InstanceRng {
        random::rng(self.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(i as u64))
    }
}

/// Monic order-n operator of the configured class with seeded random coefficients.
pub fn generate_operator(config: &RunConfig) -> Result<DifferentialOperator> {
    config.validate()?;
    random::operator(&mut random::rng(config.seed), config.n, config.group, config.band, config.amplitude)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tol: f64,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub suite: String,
    pub config: RunConfig,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.pass {
            0
        } else {
            1
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// Worst case per check name, in first-seen order.
#[derive(Default)]
struct Checks {
    list: Vec<Check>,
}

impl Checks {
    fn slot(&mut self, name: &str, tol: f64) -> &mut Check {
        let idx = match self.list.iter().position(|c| c.name == name) {
            Some(i) => i,
            None => {
                self.list.push(Check { name: name.into(), residual: 0.0, tol, pass: true, error: None });
                self.list.len() - 1
            }
        };
        &mut self.list[idx]
    }

    fn record(&mut self, name: &str, residual: f64, tol: f64) {
        let c = self.slot(name, tol);
        if residual.is_nan() || residual > c.residual {
            c.residual = residual;
        }
        c.pass = c.residual <= c.tol;
    }

    fn attempt(&mut self, name: &str, tol: f64, f: impl FnOnce() -> Result<f64>) {
        match f() {
            Ok(r) => self.record(name, r, tol),
            Err(e) => self.fail(name, tol, e),
        }
    }

    fn fail(&mut self, name: &str, tol: f64, e: Error) {
        let c = self.slot(name, tol);
        c.residual = f64::INFINITY;
        c.pass = false;
        c.error.get_or_insert_with(|| e.to_string());
    }

    fn into_report(self, suite: &str, config: &RunConfig) -> Report {
        let pass = self.list.iter().all(|c| c.pass);
        Report { suite: suite.into(), config: config.clone(), checks: self.list, pass }
    }
}

pub const SUITES: [&str; 6] = ["adjoint", "schwarzian", "agd", "monodromy", "curves", "ds"];

pub fn run_suite(name: &str, config: &RunConfig) -> Result<Report> {
    config.validate()?;
    let mut checks = Checks::default();
    for i in 0..config.instances {
        let mut rng = config.instance_rng(i);
        let outcome = match name {
            "adjoint" => adjoint_instance(&mut checks, &mut rng, config),
            "schwarzian" => schwarzian_instance(&mut checks, &mut rng, config),
            "agd" => agd_instance(&mut checks, &mut rng, config),
            "monodromy" => monodromy_instance(&mut checks, &mut rng, config),
            "curves" => curves_instance(&mut checks, &mut rng, config),
            "ds" => ds_instance(&mut checks, &mut rng, config),
            _ => return Err(Error::Config(format!("unknown suite {name:?}, expected one of {}", SUITES.join(", ")))),
        };
        if let Err(e) = outcome {
            checks.fail("instance", 0.0, e);
        }
    }
    Ok(checks.into_report(name, config))
}

fn gen_op(rng: &mut random::InstanceRng, c: &RunConfig) -> Result<DifferentialOperator> {
    random::operator(rng, c.n, c.group, c.band, c.amplitude)
}

fn adjoint_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let l1 = gen_op(rng, c)?;
    let l2 = gen_op(rng, c)?;
    let n = c.n;
    let adj = l1.formal_adjoint();
    checks.record("class_membership", l1.class_residual(c.group)?, c.tolerances.membership);
    checks.record("involution", adj.formal_adjoint().distance(&l1), 1e-12);
    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
    checks.record("leading_sign", (adj.leading() - &PeriodicFunction::constant(sign)).sup_norm(), 0.0);
    checks.attempt("composition_reversal", 1e-12, || {
        let (a, b) = (l1.clone().weight_agnostic(), l2.clone().weight_agnostic());
        let lhs = a.compose(&b)?.formal_adjoint();
        let rhs = b.formal_adjoint().compose(&a.formal_adjoint())?;
        Ok(lhs.distance(&rhs) / lhs.norm().max(1.0))
    });
    let symmetric = if n % 2 == 0 { GroupClass::Psp } else { GroupClass::Pso };
    let raw = random::operator(rng, n, GroupClass::Psl, c.band, c.amplitude)?;
    let mut lower = raw.coeffs()[..n].to_vec();
    lower[n - 1] = random::periodic(rng, c.band, c.amplitude);
    let projected = symmetric.project(&DifferentialOperator::monic(lower)?)?;
    checks.record("symmetric_subprincipal", projected.subprincipal_symbol().sup_norm(), 1e-12);
    Ok(())
}

/// `max |S(F∘G) - (S(F)∘G)(G')² - S(G)|` on the grid, with `F∘G` formed pointwise from
/// 3-jets rather than re-projected.
pub fn schwarzian_cocycle_residual(f: &CircleDiffeo, g: &CircleDiffeo) -> Result<f64> {
    let points = 8 * f.resolution().max(g.resolution());
    Ok(uniform_grid(points)
        .into_iter()
        .map(|x| {
            let gj = g.jet(x, 3);
            let fg = f.jet(gj.value(), 3).compose(&gj);
            let dg = gj.derivative_value(1);
            (fg.schwarzian() - f.schwarzian_at(gj.value()) * dg * dg - g.schwarzian_at(x)).abs()
        })
        .fold(0.0, f64::max))
}

/// Residuals of the two order-3 transformation rules against direct conjugation.
pub fn order3_rule_residuals(f: &CircleDiffeo, op: &DifferentialOperator) -> Result<(f64, f64)> {
    let moved = pullback_conjugate(f, op)?;
    let s = f.schwarzian()?;
    let dd = f.displacement().nth_derivative(2);
    let a1 = &f.pullback_density(&op.coeff(1), 2.0)? + &s.scale(2.0);
    let a0 = &(&f.pullback_density(&op.coeff(0), 3.0)? + &f.pullback_density(&op.coeff(1), 1.0)?.multiply(&dd)) + &s.derivative();
    Ok(((&moved.coeff(1) - &a1).sup_norm(), (&moved.coeff(0) - &a0).sup_norm()))
}

/// Residual of the order-2 rule `ã₀ = F′²a₀∘F + c·S(F)` against direct conjugation.
pub fn hill_rule_residual(f: &CircleDiffeo, op: &DifferentialOperator, c: f64) -> Result<f64> {
    let moved = pullback_conjugate(f, op)?;
    let expect = &f.pullback_density(&op.coeff(0), 2.0)? + &f.schwarzian()?.scale(c);
    Ok((&moved.coeff(0) - &expect).sup_norm().max(moved.coeff(1).sup_norm()))
}

fn schwarzian_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let f = random::diffeo(rng, c.band, DIFFEO_AMPLITUDE)?;
    let g = random::diffeo(rng, c.band, DIFFEO_AMPLITUDE)?;
    checks.attempt("schwarzian_cocycle", 1e-8, || schwarzian_cocycle_residual(&f, &g));
    let a = random::periodic(rng, c.band, c.amplitude);
    checks.attempt("pullback_identity", 1e-13, || {
        Ok((&CircleDiffeo::identity().pullback_density(&a, 0.5)? - &a).sup_norm())
    });
    let hill = random::operator(rng, 2, GroupClass::Psl, c.band, c.amplitude)?;
    checks.attempt("hill_rule", 1e-6, || hill_rule_residual(&f, &hill, 0.5));
    let third = random::operator(rng, 3, GroupClass::Psl, c.band, c.amplitude)?;
    match order3_rule_residuals(&f, &third) {
        Ok((r1, r0)) => {
            checks.record("order3_rule_a1", r1, 1e-6);
            checks.record("order3_rule_a0", r0, 1e-6);
        }
        Err(e) => checks.fail("order3_rules", 1e-6, e),
    }
    let l = gen_op(rng, c)?;
    checks.attempt("action_composes", 1e-8, || action_composition_residual(&f, &g, &l, 16 * c.band));
    Ok(())
}

/// `‖(F∘G)·L - F·(G·L)‖ / (1 + ‖(F∘G)·L‖)`, with outputs re-projected at `resolution`.
pub fn action_composition_residual(f: &CircleDiffeo, g: &CircleDiffeo, op: &DifferentialOperator, resolution: usize) -> Result<f64> {
    let (f, g) = (f.clone().with_resolution(resolution), g.clone().with_resolution(resolution));
    let lhs = diffeo_act_chain(&[&f, &g], op)?;
    let rhs = diffeo_act(&f, &diffeo_act(&g, op)?)?;
    Ok(lhs.distance(&rhs) / (1.0 + lhs.norm()))
}

/// The three terms `{ℓ_X, {ℓ_Y, ℓ_Z}}(L)` of the cyclic Jacobi sum, each differentiating
/// the inner bracket along `V_X(L)` with central differences of step `eps`.
pub fn jacobi_terms(x: &AgdFunctional, y: &AgdFunctional, z: &AgdFunctional, op: &DifferentialOperator, eps: f64) -> Result<[f64; 3]> {
    let n = op.order();
    let mut terms = [0.0; 3];
    for (t, (a, b, c)) in terms.iter_mut().zip([(x, y, z), (y, z, x), (z, x, y)]) {
        let v = hamiltonian_field(a.symbol(), op)?.resize(n);
        let plus = op.add(&v.scale(eps));
        let minus = op.sub(&v.scale(eps));
        *t = (poisson_bracket(b, c, &plus)? - poisson_bracket(b, c, &minus)?) / (2.0 * eps);
    }
    Ok(terms)
}

/// Difference between residues computed at the minimal depth and one order deeper.
pub fn residue_depth_gap(x: &PseudoDifferentialSymbol, op: &DifferentialOperator) -> f64 {
    let l = PseudoDifferentialSymbol::from_operator(op);
    let shallow = x.multiply(&l, -1).residue();
    let deep = x.multiply(&l, -(op.order() as i32) - 1).residue();
    (&shallow - &deep).max_coeff()
}

fn agd_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let n = c.n;
    let l = random::operator(rng, n, GroupClass::Psl, c.band, c.amplitude)?;
    let x = random::functional(rng, n, c.band, 1.0);
    let y = random::functional(rng, n, c.band, 1.0);
    let z = random::functional(rng, n, c.band, 1.0);
    checks.attempt("order_contract", 1e-10, || order_contract_residual(x.symbol(), &l));
    checks.attempt("antisymmetry", 1e-9, || {
        let xy = poisson_bracket(&x, &y, &l)?;
        Ok((xy + poisson_bracket(&y, &x, &l)?).abs() / xy.abs().max(1.0))
    });
    let sum = AgdFunctional::new(x.symbol().add(y.symbol()));
    let lin = (sum.eval(&l) - x.eval(&l) - y.eval(&l)).abs().max((ell_eval(&x.symbol().scale(2.5), &l) - 2.5 * x.eval(&l)).abs());
    checks.record("linearity", lin, 1e-12);
    checks.record("residue_depth", residue_depth_gap(x.symbol(), &l), 0.0);
    checks.attempt("jacobi", 1e-5, || {
        let t = jacobi_terms(&x, &y, &z, &l, JACOBI_STEP)?;
        let scale = t.iter().map(|v| v.abs()).sum::<f64>().max(1.0);
        Ok(t.iter().sum::<f64>().abs() / scale)
    });
    Ok(())
}

fn monodromy_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let l = gen_op(rng, c)?;
    let tol = c.tolerances.integration;
    let phi = integrate_fundamental(&l, c.steps)?;
    let w = phi.wronskian().iter().map(|w| (w - 1.0).abs()).fold(0.0, f64::max);
    checks.record("wronskian", w, tol);
    checks.record("det_monodromy", (phi.monodromy().determinant() - 1.0).abs(), tol);
    checks.record("liouville", liouville_residual(&l, &phi), 1e-6);
    checks.record("integration_error", phi.error_estimate(), ERROR_FLAG);
    checks.attempt("step_halving_ratio", 1.0 / 12.0, || step_halving_inverse_ratio(&l, MIN_STEPS));
    let cert = certify_group(&l, c.group, c.steps, c.tolerances.certification)?;
    checks.record("certify_group", cert.residual(), c.tolerances.certification);
    if c.group != GroupClass::Psl {
        let jets = jet_system(&l)?;
        checks.record("concomitant_constancy", ConcomitantForm::new(&l).constancy_residual(&jets, &phi), 1e-6);
    }
    Ok(())
}

/// `|Φ_{2M}(1) - Φ_{4M}(1)| / |Φ_M(1) - Φ_{2M}(1)|`; fourth order gives about 1/16.
pub fn step_halving_inverse_ratio(op: &DifferentialOperator, steps: usize) -> Result<f64> {
    let coarse = integrate_fundamental(op, 2 * steps)?;
    let fine = integrate_fundamental(op, 4 * steps)?;
    let first = coarse.error_estimate();
    let second = fine.error_estimate();
    if first == 0.0 {
        return Err(Error::Numerical("step-halving change vanished at the coarse level".into()));
    }
    Ok(second / first)
}

fn curves_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let l = gen_op(rng, c)?;
    let n = c.n;
    let curve = ProjectiveCurve::of_operator(&l, c.steps)?;
    checks.record("quasi_periodicity", curve.quasi_periodicity_residual(), 1e-9 * (1.0 + max_abs(curve.monodromy())));
    checks.attempt("round_trip", 1e-6, || Ok(curve.operator_of_curve()?.distance(&l)));
    checks.attempt("dual_law", 1e-5, || {
        let back = curve.dual_curve()?.operator_of_curve()?;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        Ok(back.distance(&l.formal_adjoint().scale(sign)))
    });
    checks.attempt("double_dual", 1e-6, || Ok(curve.dual_curve()?.dual_curve()?.projective_gap(&curve)));
    let g = random::invertible(rng, n);
    checks.attempt("group_conjugation", 1e-6, || {
        let moved = curve.act_group(&g)?;
        let expect = &g * curve.monodromy() * g.clone().try_inverse().expect("invertible");
        Ok(max_abs(&(moved.monodromy() - expect)) + spectrum_distance(&spectrum(moved.monodromy()), &spectrum(curve.monodromy())))
    });
    let f = random::diffeo(rng, c.band, DIFFEO_AMPLITUDE)?.with_resolution(16 * c.band);
    match curve.act_diffeo(&f) {
        Ok(moved) => {
            checks.attempt("diffeo_spectrum", 1e-6, || {
                let back = moved.operator_of_curve()?;
                let m = integrate_fundamental(&back, 4 * c.steps)?;
                Ok(spectrum_distance(&spectrum(m.monodromy()), &spectrum(curve.monodromy())))
            });
            checks.attempt("operator_equivariance", 1e-6, || {
                let rhs = diffeo_act(&f, &l)?;
                Ok(moved.operator_of_curve()?.distance(&rhs) / rhs.norm().max(1.0))
            });
        }
        Err(e) => checks.fail("act_diffeo", 1e-6, e),
    }
    Ok(())
}

fn ds_instance(checks: &mut Checks, rng: &mut random::InstanceRng, c: &RunConfig) -> Result<()> {
    let n = c.n;
    let a = random::level_set_connection(rng, n, c.band, c.amplitude)?;
    let l = ds_reduce(&a)?;
    checks.record("trace_argument", l.coeff(n - 1).sup_norm(), 1e-9);
    let hol = holonomy(a.connection(), c.steps)?;
    let mono = integrate_fundamental(&l, c.steps)?;
    checks.record("spectrum_preservation", spectrum_distance(&spectrum(&hol), &spectrum(mono.monodromy())), 1e-6);

    let g1 = random::unipotent(rng, n, c.band, c.amplitude)?;
    let g2 = random::unipotent(rng, n, c.band, c.amplitude)?;
    checks.attempt("gauge_invariance", 1e-6, || {
        let moved = LevelSetElement::new(gauge_act(&g1, a.connection())?)?;
        Ok(ds_reduce(&moved)?.distance(&l))
    });
    checks.attempt("gauge_composition", 1e-9, || {
        let twice = gauge_act(&g1, &gauge_act(&g2, a.connection())?)?;
        let once = gauge_act(&g1.compose(&g2), a.connection())?;
        Ok(twice.distance(&once))
    });
    checks.attempt("holonomy_conjugation", 1e-7, || {
        let moved = holonomy(&gauge_act(&g1, a.connection())?, c.steps)?;
        let g0 = g1.matrix().eval(0.0);
        let expect = &g0 * &hol * g0.clone().try_inverse().expect("unipotent");
        Ok(max_abs(&(moved - expect)))
    });
    checks.attempt("reduction_gauge", 1e-9, || {
        let g = reduction_gauge(&a)?;
        let reached = gauge_act(&g, a.connection())?;
        Ok(reached.distance(embed_iota(&l)?.connection()))
    });

    let op = gen_op(rng, &RunConfig { group: GroupClass::Psl, ..c.clone() })?;
    let iota = embed_iota(&op)?;
    checks.record("iota_round_trip", ds_reduce(&iota)?.distance(&op), 1e-10);
    let hol = holonomy(iota.connection(), c.steps)?;
    let mono = integrate_fundamental(&op, c.steps)?;
    checks.record("iota_spectrum", spectrum_distance(&spectrum(&hol), &spectrum(mono.monodromy())), 1e-7);
    if n == 2 {
        checks.record("two_by_two_closed_form", two_by_two_residual(&a)?, 1e-10);
    }
    Ok(())
}

/// For `A = [[a, b], [1, -a]]`: distance of the reduced `a₀` from `a' - a² - b`.
pub fn two_by_two_residual(a: &LevelSetElement) -> Result<f64> {
    let m = a.connection().matrix();
    let (diag, top) = (m.get(0, 0), m.get(0, 1));
    let expect = &(&diag.derivative() - &diag.multiply(diag)) - top;
    Ok((&ds_reduce(a)?.coeff(0) - &expect).sup_norm())
}

/// Writes `path` (CSV of the lift) and the JSON sidecar next to it.
pub fn export_curve(op: &DifferentialOperator, steps: usize, path: &Path) -> Result<(PathBuf, PathBuf)> {
    let curve = ProjectiveCurve::of_operator(op, steps)?;
    let sidecar = path.with_extension("json");
    std::fs::write(path, curve.to_csv())?;
    std::fs::write(&sidecar, serde_json::to_string_pretty(&curve.sidecar())?)?;
    Ok((path.to_path_buf(), sidecar))
}
