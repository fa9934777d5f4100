use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use circle_opers::agd::{hamiltonian_field, poisson_bracket, SymbolRecord};
use circle_opers::ds::{ds_reduce, embed_iota, gauge_act, holonomy, reduction_gauge, LevelSetElement, MatrixConnection};
use circle_opers::harness::{export_curve, generate_operator, run_suite, RunConfig, SUITES};
use circle_opers::matrix::{spectrum, to_rows};
use circle_opers::monodromy::{certify_group, display_monodromy, integrate_fundamental, ProjectiveCurve};
use circle_opers::operator::OperatorRecord;
use circle_opers::{random, DifferentialOperator, Error, GroupClass};

#[derive(Parser)]
#[command(name = "circle-opers", version, about = "Differential operators on the circle")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    flags: Flags,
}

#[derive(Args)]
struct Flags {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    n: Option<usize>,
    /// psl, psp or pso.
    #[arg(long, global = true)]
    group: Option<GroupClass>,
    #[arg(long, global = true)]
    band: Option<usize>,
    /// RK4 steps over one period (power of two, at least 256).
    #[arg(long, global = true)]
    steps: Option<usize>,
    /// Certification tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output file (for `export`, the CSV path; the sidecar gets a .json extension).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Read the operator (or, for ds-reduce, the connection) from a JSON file instead of
    /// generating one.
    #[arg(long, global = true)]
    input: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Formal adjoint and class residuals of an operator.
    Adjoint,
    /// AGD bracket of two seeded linear functionals at an operator.
    Bracket,
    /// Monodromy, its spectrum and the group certificate.
    Monodromy,
    /// Projective curve summary: monodromy, quasi-periodicity and (n = 2) winding.
    Curve,
    /// Operator of the dual curve against (-1)^n L*.
    Dual,
    /// Drinfeld-Sokolov reduction of a level-set connection.
    DsReduce,
    /// Run a verification suite and emit its JSON report.
    Verify {
        /// adjoint, schwarzian, agd, monodromy, curves or ds.
        suite: String,
    },
    /// Write the curve CSV and JSON sidecar.
    Export,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::ParityMismatch { .. } | Error::Json(_) => 2,
        Error::Io(_) => 3,
        _ => 1,
    }
}

fn config(flags: &Flags) -> Result<RunConfig, Error> {
    let mut c = match &flags.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(v) = flags.seed {
        c.seed = v;
    }
    if let Some(v) = flags.n {
        c.n = v;
    }
    if let Some(v) = flags.group {
        c.group = v;
    }
    if let Some(v) = flags.band {
        c.band = v;
    }
    if let Some(v) = flags.steps {
        c.steps = v;
    }
    if let Some(v) = flags.tol {
        c.tolerances.certification = v;
    }
    c.validate()?;
    Ok(c)
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn operator(flags: &Flags, c: &RunConfig) -> Result<(DifferentialOperator, Option<GroupClass>), Error> {
    match &flags.input {
        Some(path) => {
            let rec: OperatorRecord = read_json(path)?;
            let group = rec.group().map_err(|e| Error::Config(e.to_string()))?;
            Ok((rec.to_operator().map_err(|e| Error::Config(e.to_string()))?, group))
        }
        None => Ok((generate_operator(c)?, Some(c.group))),
    }
}

fn emit(value: &Value, out: Option<&Path>) -> Result<(), Error> {
    let text = serde_json::to_string_pretty(value)?;
    match out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn complex_list(m: &nalgebra::DMatrix<f64>) -> Value {
    json!(spectrum(m).iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())
}

fn run(cli: Cli) -> Result<u8, Error> {
    let flags = &cli.flags;
    let c = config(flags)?;
    let out = flags.out.as_deref();
    match &cli.command {
        Command::Adjoint => {
            let (l, group) = operator(flags, &c)?;
            let adj = l.formal_adjoint();
            let residuals: serde_json::Map<String, Value> = GroupClass::ALL
                .iter()
                .filter_map(|g| l.class_residual(*g).ok().map(|r| (g.name().to_string(), json!(r))))
                .collect();
            emit(
                &json!({
                    "operator": OperatorRecord::new(&l, group),
                    "adjoint": OperatorRecord::new(&adj, None),
                    "subprincipal_sup": l.subprincipal_symbol().sup_norm(),
                    "class_residuals": residuals,
                }),
                out,
            )?;
        }
        Command::Bracket => {
            let (l, group) = operator(flags, &c)?;
            let mut rng = c.instance_rng(1);
            let x = random::functional(&mut rng, l.order(), c.band, 1.0);
            let y = random::functional(&mut rng, l.order(), c.band, 1.0);
            let xy = poisson_bracket(&x, &y, &l)?;
            let yx = poisson_bracket(&y, &x, &l)?;
            let field = hamiltonian_field(x.symbol(), &l)?;
            emit(
                &json!({
                    "operator": OperatorRecord::new(&l, group),
                    "x": SymbolRecord::from(x.symbol()),
                    "y": SymbolRecord::from(y.symbol()),
                    "bracket_xy": xy,
                    "bracket_yx": yx,
                    "antisymmetry_residual": (xy + yx).abs(),
                    "field_x": OperatorRecord::new(&field, None),
                }),
                out,
            )?;
        }
        Command::Monodromy => {
            let (l, group) = operator(flags, &c)?;
            let phi = integrate_fundamental(&l, c.steps)?;
            let m = phi.monodromy();
            let certificate = match group {
                Some(g) => Some(certify_group(&l, g, c.steps, c.tolerances.certification)?),
                None => None,
            };
            emit(
                &json!({
                    "n": l.order(),
                    "monodromy": to_rows(m),
                    "companion_display": to_rows(&display_monodromy(m)),
                    "spectrum": complex_list(m),
                    "det": m.determinant(),
                    "error_estimate": phi.error_estimate(),
                    "flagged": phi.flagged(),
                    "certificate": certificate,
                }),
                out,
            )?;
            if certificate.is_some_and(|cert| !cert.pass) {
                return Ok(1);
            }
        }
        Command::Curve => {
            let (l, _) = operator(flags, &c)?;
            let curve = ProjectiveCurve::of_operator(&l, c.steps)?;
            emit(
                &json!({
                    "sidecar": curve.sidecar(),
                    "spectrum": complex_list(curve.monodromy()),
                    "quasi_periodicity_residual": curve.quasi_periodicity_residual(),
                    "samples": curve.steps() + 1,
                }),
                out,
            )?;
        }
        Command::Dual => {
            let (l, _) = operator(flags, &c)?;
            let curve = ProjectiveCurve::of_operator(&l, c.steps)?;
            let dual = curve.dual_curve()?;
            let back = dual.operator_of_curve()?;
            let sign = if l.order() % 2 == 0 { 1.0 } else { -1.0 };
            let expect = l.formal_adjoint().scale(sign);
            emit(
                &json!({
                    "dual_operator": OperatorRecord::new(&back, None),
                    "dual_law_residual": back.distance(&expect),
                    "double_dual_gap": dual.dual_curve()?.projective_gap(&curve),
                    "dual_monodromy": to_rows(dual.monodromy()),
                }),
                out,
            )?;
        }
        Command::DsReduce => {
            let a = match &flags.input {
                Some(path) => {
                    let conn: MatrixConnection = read_json(path)?;
                    LevelSetElement::new(conn).map_err(|e| Error::Config(e.to_string()))?
                }
                None => random::level_set_connection(&mut random::rng(c.seed), c.n, c.band, c.amplitude)?,
            };
            let l = ds_reduce(&a)?;
            let companion = embed_iota(&l)?;
            let gauged = gauge_act(&reduction_gauge(&a)?, a.connection())?;
            let hol = holonomy(a.connection(), c.steps)?;
            let mono = integrate_fundamental(&l, c.steps)?;
            emit(
                &json!({
                    "connection": a.connection(),
                    "operator": OperatorRecord::new(&l, None),
                    "companion": companion.connection(),
                    "gauge_residual": gauged.distance(companion.connection()),
                    "holonomy_spectrum": complex_list(&hol),
                    "monodromy_spectrum": complex_list(mono.monodromy()),
                }),
                out,
            )?;
        }
        Command::Verify { suite } => {
            if !SUITES.contains(&suite.as_str()) {
                return Err(Error::Config(format!("unknown suite {suite:?}, expected one of {}", SUITES.join(", "))));
            }
            let report = run_suite(suite, &c)?;
            for check in report.failures() {
                eprintln!("FAIL {}: residual {:e} > tol {:e}", check.name, check.residual, check.tol);
            }
            let text = report.to_json();
            match out {
                Some(path) => std::fs::write(path, text + "\n")?,
                None => println!("{text}"),
            }
            return Ok(report.exit_code() as u8);
        }
        Command::Export => {
            let path = out.ok_or_else(|| Error::Config("export needs --out PATH".into()))?;
            let (l, _) = operator(flags, &c)?;
            let (csv, sidecar) = export_curve(&l, c.steps, path)?;
            eprintln!("wrote {} and {}", csv.display(), sidecar.display());
        }
    }
    Ok(0)
}
