//! Command-line front end: `solve`, `table`, `eval` and `verify`.
//!
//! Exit codes: 0 success, 1 I/O or internal failure, 2 invalid input
//! (including an untagged point on a cut), 3 solver did not converge,
//! 4 point at a branch point, 5 verification or table comparison failed.

use std::ffi::OsString;
use std::io::Write;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use trisheet::maps::MapError;
use trisheet::surface::fmt_f64;
use trisheet::verify::{perturbed, reproduce_table1, run_invariant_suite, table1, TABLE1_TOL};
use trisheet::*;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INTERNAL: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NO_CONVERGENCE: i32 = 3;
pub const EXIT_BRANCH_POINT: i32 = 4;
pub const EXIT_CHECK_FAILED: i32 = 5;

#[derive(Parser, Debug)]
#[command(
    name = "trisheet",
    version,
    about = "Conformal maps of the three-sheeted surface over two real slits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve for the critical points and map coefficients.
    Solve(SolveArgs),
    /// Recompute the tabulated critical points and compare.
    Table(TableArgs),
    /// Evaluate psi1 or psi2 at surface points.
    Eval(EvalArgs),
    /// Run the invariant suite on a solved surface.
    Verify(VerifyArgs),
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Pretty,
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct Geometry {
    /// Right slit is [1, lambda].
    #[arg(
        long,
        allow_hyphen_values = true,
        requires = "mu",
        conflicts_with = "intervals"
    )]
    lambda: Option<f64>,
    /// Left slit is [-mu, -1].
    #[arg(long, allow_hyphen_values = true, requires = "lambda")]
    mu: Option<f64>,
    /// Two ordered intervals `l1,r1,l2,r2`, mapped affinely onto canonical form.
    #[arg(long, allow_hyphen_values = true, value_name = "L1,R1,L2,R2")]
    intervals: Option<String>,
}

#[derive(Args, Debug)]
struct SolverArgs {
    /// Continuation steps.
    #[arg(long, default_value_t = 32)]
    steps: usize,
    /// Newton tolerance.
    #[arg(long, default_value_t = 1e-12)]
    sigma: f64,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        SolverConfig {
            n_steps: self.steps,
            sigma: self.sigma,
            ..SolverConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    #[command(flatten)]
    geometry: Geometry,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Print the traced branch curves as CSV (`curve,index,re,im`) instead of
    /// the solution.
    #[arg(long)]
    trace_curves: bool,
    /// Samples per arc for --trace-curves.
    #[arg(long, default_value_t = trisheet::maps::DEFAULT_RESOLUTION)]
    resolution: usize,
}

#[derive(Args, Debug)]
struct TableArgs {
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_enum, default_value_t = Format::Pretty)]
    format: Format,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BankArg {
    Upper,
    Lower,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    geometry: Geometry,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    psi: u8,
    #[arg(long, value_parser = clap::value_parser!(u8).range(0..=2))]
    sheet: u8,
    /// `re`, `re,im` or `inf`, in the same coordinates as the intervals.
    /// Repeatable.
    #[arg(long = "point", required = true, allow_hyphen_values = true, value_parser = parse_point)]
    points: Vec<Option<Complex64>>,
    /// Bank for real points on a cut of the chosen sheet.
    #[arg(long, value_enum)]
    bank: Option<BankArg>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    #[command(flatten)]
    geometry: Geometry,
    #[command(flatten)]
    solver: SolverArgs,
    /// Verify every tabulated (lambda, mu).
    #[arg(long, conflicts_with_all = ["lambda", "mu", "intervals"])]
    all_table1: bool,
    /// Shift `a` by this amount before verifying (negative test).
    #[arg(long, allow_hyphen_values = true)]
    perturb: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

/// Parses `inf`, `re` or `re,im`; `None` is the point at infinity.
fn parse_point(s: &str) -> Result<Option<Complex64>, String> {
    let t = s.trim();
    if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "∞") {
        return Ok(None);
    }
    let parts: Vec<&str> = t.split(',').collect();
    let num = |x: &str| -> Result<f64, String> {
        let v: f64 = x
            .trim()
            .parse()
            .map_err(|_| format!("not a number: {x:?}"))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("use `inf` for the point at infinity, not {x:?}"))
        }
    };
    match parts.as_slice() {
        [re] => Ok(Some(Complex64::new(num(re)?, 0.0))),
        [re, im] => Ok(Some(Complex64::new(num(re)?, num(im)?))),
        _ => Err(format!("expected `re`, `re,im` or `inf`, got {s:?}")),
    }
}

/// A failure with its exit code.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        // A closed downstream pipe (`| head`) is not an error worth reporting.
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            return Failure::new(EXIT_OK, "");
        }
        Failure::new(EXIT_INTERNAL, format!("output error: {e}"))
    }
}

fn solver_failure(e: SolverError) -> Failure {
    let code = match e {
        SolverError::NoConvergence { .. }
        | SolverError::LeftDomain { .. }
        | SolverError::SingularJacobian { .. } => EXIT_NO_CONVERGENCE,
        _ => EXIT_USAGE,
    };
    Failure::new(code, e.to_string())
}

fn map_failure(e: MapError) -> Failure {
    let code = match e {
        MapError::OnCutWithoutBank { .. } => EXIT_USAGE,
        MapError::NearBranchPoint { .. } => EXIT_BRANCH_POINT,
        _ => EXIT_INTERNAL,
    };
    Failure::new(code, e.to_string())
}

/// Runs the CLI on `args` (including the program name) and returns the exit
/// code. Never panics on malformed input.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                err.write_all(text.as_bytes())
            } else {
                out.write_all(text.as_bytes())
            };
            return code;
        }
    };
    let result = match cli.command {
        Command::Solve(a) => cmd_solve(a, out),
        Command::Table(a) => cmd_table(a, out),
        Command::Eval(a) => cmd_eval(a, out),
        Command::Verify(a) => cmd_verify(a, out),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            if !f.message.is_empty() {
                let _ = writeln!(err, "error: {}", f.message);
            }
            f.code
        }
    }
}

fn resolve_geometry(g: &Geometry) -> Result<(IntervalPair, AffineChart), Failure> {
    if let Some(text) = &g.intervals {
        let v: Vec<f64> = text
            .split(',')
            .map(|x| x.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| {
                Failure::new(
                    EXIT_USAGE,
                    format!("--intervals: not four numbers: {text:?}"),
                )
            })?;
        let [l1, r1, l2, r2] = v[..] else {
            return Err(Failure::new(
                EXIT_USAGE,
                format!("--intervals needs exactly four numbers, got {}", v.len()),
            ));
        };
        return normalize_intervals(l1, r1, l2, r2)
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string()));
    }
    match (g.lambda, g.mu) {
        (Some(l), Some(m)) => IntervalPair::new(l, m)
            .map(|p| (p, AffineChart::IDENTITY))
            .map_err(|e| Failure::new(EXIT_USAGE, e.to_string())),
        _ => Err(Failure::new(
            EXIT_USAGE,
            "give --lambda and --mu, or --intervals",
        )),
    }
}

fn solve_geometry(g: &Geometry, s: &SolverArgs) -> Result<SurfaceSolution, Failure> {
    let (pair, chart) = resolve_geometry(g)?;
    continuation_solve_with_chart(&pair, chart, &s.config()).map_err(solver_failure)
}

fn cmd_solve(a: SolveArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let sol = solve_geometry(&a.geometry, &a.solver)?;
    if a.trace_curves {
        let r = trisheet::maps::trace_branch_curves(&sol, a.resolution).map_err(map_failure)?;
        writeln!(out, "curve,index,re,im")?;
        for (name, poly) in [("0", &r.curve0), ("2", &r.curve2)] {
            for (i, z) in poly.iter().enumerate() {
                writeln!(out, "{name},{i},{},{}", fmt_f64(z.re), fmt_f64(z.im))?;
            }
        }
        return Ok(EXIT_OK);
    }
    match a.format {
        Format::Json => writeln!(out, "{}", sol.to_json())?,
        Format::Csv => {
            let v = sol.named_values();
            let header: Vec<&str> = v.iter().map(|(k, _)| *k).collect();
            let row: Vec<String> = v.iter().map(|(_, x)| fmt_f64(*x)).collect();
            writeln!(out, "{}", header.join(","))?;
            writeln!(out, "{}", row.join(","))?;
        }
        Format::Pretty => {
            for (k, x) in sol.named_values() {
                writeln!(out, "{k:>8} = {x:.15}")?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_table(a: TableArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = a.solver.config();
    let rows = match a.jobs {
        Some(0) => return Err(Failure::new(EXIT_USAGE, "--jobs must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Failure::new(EXIT_INTERNAL, e.to_string()))?
            .install(|| reproduce_table1(&cfg)),
        None => reproduce_table1(&cfg),
    }
    .map_err(|e| Failure::new(EXIT_NO_CONVERGENCE, e.to_string()))?;

    let devs: Vec<f64> = rows.iter().map(|(g, c)| g.max_abs_deviation(c)).collect();
    let worst = devs.iter().cloned().fold(0.0, f64::max);
    match a.format {
        Format::Csv => {
            writeln!(out, "lambda,mu,beta,alpha,a,b,max_dev")?;
            for ((_, c), d) in rows.iter().zip(&devs) {
                let cells = [c.lambda, c.mu, c.beta, c.alpha, c.a, c.b, *d].map(fmt_f64);
                writeln!(out, "{}", cells.join(","))?;
            }
        }
        Format::Json => {
            let list: Vec<Value> = rows
                .iter()
                .zip(&devs)
                .map(|((_, c), d)| {
                    json!({"lambda": c.lambda, "mu": c.mu, "beta": c.beta, "alpha": c.alpha,
                           "a": c.a, "b": c.b, "max_dev": d})
                })
                .collect();
            let doc = json!({"rows": list, "max_deviation": worst, "tolerance": TABLE1_TOL,
                             "passed": worst <= TABLE1_TOL});
            writeln!(out, "{doc}")?;
        }
        Format::Pretty => {
            writeln!(
                out,
                "{:>7} {:>7} {:>12} {:>12} {:>12} {:>12} {:>9}",
                "lambda", "mu", "beta", "alpha", "a", "b", "max_dev"
            )?;
            for ((_, c), d) in rows.iter().zip(&devs) {
                writeln!(
                    out,
                    "{:>7.2} {:>7.2} {:>12.8} {:>12.8} {:>12.8} {:>12.8} {:>9.1e}",
                    c.lambda, c.mu, c.beta, c.alpha, c.a, c.b, d
                )?;
            }
            writeln!(out, "max deviation {worst:.2e} (tolerance {TABLE1_TOL:e})")?;
        }
    }
    Ok(if worst <= TABLE1_TOL {
        EXIT_OK
    } else {
        EXIT_CHECK_FAILED
    })
}

fn complex_json(z: Complex64) -> Value {
    json!([z.re, z.im])
}

fn extended_json(v: Extended) -> Value {
    match v {
        Extended::Finite(z) => complex_json(z),
        Extended::Infinity => json!("inf"),
    }
}

fn cmd_eval(a: EvalArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let sol = solve_geometry(&a.geometry, &a.solver)?;
    let maps = SurfaceMaps::new(sol);
    let sheet = Sheet::from_index(a.sheet as usize).expect("range-checked by the parser");
    let which = if a.psi == 1 { Psi::One } else { Psi::Two };
    let bank = a.bank.map(|b| match b {
        BankArg::Upper => Bank::Upper,
        BankArg::Lower => Bank::Lower,
    });

    let mut records = Vec::with_capacity(a.points.len());
    for p in &a.points {
        let user = p.map_or(Extended::Infinity, Extended::Finite);
        let w = match p {
            None => Extended::Infinity,
            Some(z) => Extended::Finite((z - sol.chart.shift) / sol.chart.scale),
        };
        let point = SurfacePoint { w, sheet, bank };
        let value = maps.psi(which, point).map_err(|e| {
            let f = map_failure(e);
            Failure::new(f.code, format!("at point {user}: {}", f.message))
        })?;
        records.push((user, value));
    }

    let bank_name = match a.bank {
        Some(BankArg::Upper) => "upper",
        Some(BankArg::Lower) => "lower",
        None => "",
    };
    match a.format {
        Format::Json => {
            let list: Vec<Value> = records
                .iter()
                .map(|(w, v)| {
                    json!({"w": extended_json(*w), "sheet": a.sheet,
                           "bank": a.bank.map(|_| bank_name), "psi": a.psi,
                           "psi_value": extended_json(*v)})
                })
                .collect();
            writeln!(out, "{}", Value::Array(list))?;
        }
        Format::Csv => {
            writeln!(out, "w_re,w_im,sheet,bank,psi_re,psi_im")?;
            let parts = |v: &Extended| match v {
                Extended::Finite(z) => (fmt_f64(z.re), fmt_f64(z.im)),
                Extended::Infinity => ("inf".to_string(), "inf".to_string()),
            };
            for (w, v) in &records {
                let (wr, wi) = parts(w);
                let (pr, pi) = parts(v);
                writeln!(out, "{wr},{wi},{},{bank_name},{pr},{pi}", a.sheet)?;
            }
        }
        Format::Pretty => {
            for (w, v) in &records {
                writeln!(out, "psi{}({w} on sheet {}) = {v}", a.psi, a.sheet)?;
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_verify(a: VerifyArgs, out: &mut dyn Write) -> Result<i32, Failure> {
    let cfg = a.solver.config();
    let targets: Vec<(IntervalPair, AffineChart)> = if a.all_table1 {
        table1()
            .iter()
            .map(|r| {
                (
                    IntervalPair {
                        lambda: r.lambda,
                        mu: r.mu,
                    },
                    AffineChart::IDENTITY,
                )
            })
            .collect()
    } else {
        vec![resolve_geometry(&a.geometry)?]
    };
    let reports: Vec<Result<(IntervalPair, VerificationReport), Failure>> = targets
        .iter()
        .map(|(pair, chart)| {
            let mut sol =
                continuation_solve_with_chart(pair, *chart, &cfg).map_err(solver_failure)?;
            if let Some(delta) = a.perturb {
                sol =
                    perturbed(&sol, delta).map_err(|e| Failure::new(EXIT_USAGE, e.to_string()))?;
            }
            Ok((*pair, run_invariant_suite(&sol)))
        })
        .collect();
    let reports: Vec<(IntervalPair, VerificationReport)> =
        reports.into_iter().collect::<Result<_, _>>()?;
    let all = reports.iter().all(|(_, r)| r.all_passed());

    match a.format {
        Format::Json => {
            if a.all_table1 {
                let list: Vec<Value> = reports
                    .iter()
                    .map(|(p, r)| {
                        let rep: Value =
                            serde_json::from_str(&r.to_json()).expect("valid report JSON");
                        json!({"lambda": p.lambda, "mu": p.mu, "report": rep})
                    })
                    .collect();
                writeln!(out, "{}", Value::Array(list))?;
            } else {
                writeln!(out, "{}", reports[0].1.to_json())?;
            }
        }
        Format::Csv => {
            writeln!(out, "lambda,mu,name,passed,worst_residual,tolerance")?;
            for (p, r) in &reports {
                for c in &r.checks {
                    writeln!(
                        out,
                        "{},{},{},{},{},{}",
                        fmt_f64(p.lambda),
                        fmt_f64(p.mu),
                        c.name,
                        c.passed,
                        fmt_f64(c.worst_residual),
                        fmt_f64(c.tolerance)
                    )?;
                }
            }
        }
        Format::Pretty => {
            for (p, r) in &reports {
                let failed = r.checks.iter().filter(|c| !c.passed).count();
                writeln!(
                    out,
                    "lambda={} mu={}: {}/{} checks passed",
                    p.lambda,
                    p.mu,
                    r.checks.len() - failed,
                    r.checks.len()
                )?;
                for c in &r.checks {
                    let tag = if c.passed { "ok  " } else { "FAIL" };
                    writeln!(
                        out,
                        "  {tag} {:<26} {:>10.2e} <= {:.0e}",
                        c.name, c.worst_residual, c.tolerance
                    )?;
                }
            }
        }
    }
    Ok(if all { EXIT_OK } else { EXIT_CHECK_FAILED })
}
