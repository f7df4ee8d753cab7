//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 for usage and validation errors, 3 for
//! numerical failures such as rank or definiteness violations.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use aduals_core::bspline::BsplineError;
use aduals_core::experiments::{build_case, CaseName, ExperimentError, DEFAULT_LEVELS};
use aduals_core::gram_dual::GramDualError;
use aduals_core::projection::l2_error;
use aduals_core::{
    ApproxDual, EnhancedDual, EnhancedError, KnotError, KnotVector, ProjectionError, Projector, ProjectorKind,
    RightInverseMethod, SparseMatrix,
};
use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::io::{self, convergence_csv, fmt_f64, triplets_csv, IoError};
use crate::ladder::{run_ladders, slope_table};
use crate::selftest::{self, SelftestConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub const TOL_ENV: &str = "ADUALS_TOL";

/// Samples in the `project` output.
pub const GRID_POINTS: usize = 1000;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<KnotError> for CliError {
    fn from(e: KnotError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BsplineError> for CliError {
    fn from(e: BsplineError) -> Self {
        match e {
            BsplineError::SingularSystem | BsplineError::ResidualTooLarge { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

impl From<GramDualError> for CliError {
    fn from(e: GramDualError) -> Self {
        match e {
            GramDualError::TooFewArguments { .. } | GramDualError::ScaleCount { .. } => CliError::Usage(e.to_string()),
            GramDualError::Bspline(b) => b.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EnhancedError> for CliError {
    fn from(e: EnhancedError) -> Self {
        match e {
            EnhancedError::InvalidSelection { .. } => CliError::Usage(e.to_string()),
            EnhancedError::Bspline(b) => b.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ProjectionError> for CliError {
    fn from(e: ProjectionError) -> Self {
        match e {
            ProjectionError::Bspline(b) => b.into(),
            ProjectionError::Linalg(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::InvalidOrder(_) | ExperimentError::InvalidLevels => CliError::Usage(e.to_string()),
            ExperimentError::Knot(k) => k.into(),
            ExperimentError::Bspline(b) => b.into(),
            ExperimentError::GramDual(g) => g.into(),
            ExperimentError::Enhanced(x) => x.into(),
            ExperimentError::Projection(p) => p.into(),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "aduals", version, about = "Approximate duals of B-splines and their quasi-projections")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Mp,
    A0,
}

impl From<Method> for RightInverseMethod {
    fn from(m: Method) -> Self {
        match m {
            Method::Mp => RightInverseMethod::MoorePenrose,
            Method::A0 => RightInverseMethod::SelectedColumns,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build matrices from a knot file and write them as CSV triplets.
    Matrix {
        #[arg(long, value_name = "FILE")]
        knots: PathBuf,
        /// Coarse selection, needed for A, B, Um and SL.
        #[arg(long, value_name = "FILE")]
        select: Option<PathBuf>,
        /// Expected order; must match the knot file.
        #[arg(long, value_name = "M")]
        order: Option<usize>,
        #[arg(long, value_enum, default_value = "a0")]
        method: Method,
        /// Comma-separated subset of gram, S, A, B, Um, SL.
        #[arg(long, value_name = "LIST", default_value = "gram,S")]
        emit: String,
        /// Directory receiving one `<name>.csv` per matrix; stdout if absent.
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
    },
    /// Run refinement ladders and write the convergence table.
    Convergence {
        #[arg(long, value_name = "u_hat|g_hat")]
        case: String,
        /// Orders as `a..b` (inclusive) or a comma-separated list.
        #[arg(long, value_name = "RANGE", default_value = "3..6")]
        orders: String,
        /// Comma-separated subset of K, L, ortho.
        #[arg(long, value_name = "LIST", default_value = "K,L,ortho")]
        kernels: String,
        /// Comma-separated increasing values of N.
        #[arg(long, value_name = "LIST")]
        levels: Option<String>,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Project a built-in function and sample it on a uniform grid.
    Project {
        /// One of x, x^p, tp:θ:ν, u_hat, g_hat.
        #[arg(long, value_name = "NAME")]
        function: String,
        #[arg(long, value_name = "FILE")]
        knots: PathBuf,
        #[arg(long, value_name = "FILE")]
        select: Option<PathBuf>,
        #[arg(long, value_name = "M")]
        order: Option<usize>,
        #[arg(long, value_enum, default_value = "a0")]
        method: Method,
        /// A single kernel: K, L or ortho.
        #[arg(long, value_name = "KERNEL", default_value = "K")]
        kernels: String,
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Run the randomized invariant suite; ADUALS_TOL scales its tolerances.
    Selftest {
        #[arg(long, default_value_t = selftest::DEFAULT_SEED)]
        seed: u64,
        /// Random knot vectors per order.
        #[arg(long, default_value_t = 6)]
        cases: usize,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the exit code. Data goes to `out`, diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK { out.write_all(text.as_bytes()) } else { err.write_all(text.as_bytes()) };
            return code;
        }
    };
    let tol = std::env::var(TOL_ENV).ok();
    match execute(cli.command, tol.as_deref(), out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command, tol: Option<&str>, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, CliError> {
    match cmd {
        Command::Matrix { knots, select, order, method, emit, out: dir } => {
            cmd_matrix(&knots, select.as_deref(), order, method.into(), &emit, dir.as_deref(), out, err)
        }
        Command::Convergence { case, orders, kernels, levels, out: file } => {
            cmd_convergence(&case, &orders, &kernels, levels.as_deref(), file.as_deref(), out, err)
        }
        Command::Project { function, knots, select, order, method, kernels, out: file } => {
            cmd_project(&function, &knots, select.as_deref(), order, method.into(), &kernels, file.as_deref(), out, err)
        }
        Command::Selftest { seed, cases } => cmd_selftest(seed, cases, tol, out),
    }
}

fn emit_failure(e: std::io::Error) -> CliError {
    CliError::Usage(format!("cannot write output: {e}"))
}

fn load_knots(path: &Path, order: Option<usize>) -> Result<KnotVector, CliError> {
    let kv = io::read_knots(path)?;
    match order {
        Some(m) if m != kv.order() => {
            Err(CliError::Usage(format!("--order {m} disagrees with the knot file, which has order {}", kv.order())))
        }
        _ => Ok(kv),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixName {
    Gram,
    S,
    A,
    B,
    Um,
    Sl,
}

impl MatrixName {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "gram" => MatrixName::Gram,
            "S" => MatrixName::S,
            "A" => MatrixName::A,
            "B" => MatrixName::B,
            "Um" => MatrixName::Um,
            "SL" => MatrixName::Sl,
            _ => return None,
        })
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MatrixName::Gram => "gram",
            MatrixName::S => "S",
            MatrixName::A => "A",
            MatrixName::B => "B",
            MatrixName::Um => "Um",
            MatrixName::Sl => "SL",
        }
    }

    fn needs_selection(self) -> bool {
        !matches!(self, MatrixName::Gram | MatrixName::S)
    }
}

fn parse_list<T>(list: &str, what: &str, parse: impl Fn(&str) -> Option<T>) -> Result<Vec<T>, CliError> {
    let items: Vec<T> = list
        .split(',')
        .map(str::trim)
        .map(|s| parse(s).ok_or_else(|| CliError::Usage(format!("unknown {what} '{s}'"))))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(CliError::Usage(format!("empty {what} list")));
    }
    Ok(items)
}

#[allow(clippy::too_many_arguments)]
fn cmd_matrix(
    knots: &Path,
    select: Option<&Path>,
    order: Option<usize>,
    method: RightInverseMethod,
    emit: &str,
    dir: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let names = parse_list(emit, "matrix", MatrixName::parse)?;
    let kv = load_knots(knots, order)?;
    let enhanced_needed = names.iter().any(|n| n.needs_selection());
    let sel = match (select, enhanced_needed) {
        (Some(p), _) => Some(io::read_selection(p, &kv)?),
        (None, true) => {
            return Err(CliError::Usage("emitting A, B, Um or SL requires --select".into()));
        }
        (None, false) => None,
    };
    if let Some(d) = dir {
        if !d.is_dir() {
            return Err(CliError::Usage(format!("{} is not a directory", d.display())));
        }
    }

    let dual = ApproxDual::new(&kv)?;
    let enhanced = match (enhanced_needed, sel) {
        (true, Some(sel)) => Some(EnhancedDual::new(dual.clone(), sel, method)?),
        _ => None,
    };
    let _ = writeln!(err, "order m = {}, dimension n = {}", kv.order(), kv.dim());
    let mut blocks = Vec::new();
    for name in &names {
        let matrix: SparseMatrix = match (name, &enhanced) {
            (MatrixName::Gram, _) => dual.gram().to_sparse(),
            (MatrixName::S, _) => dual.s().to_sparse(),
            (MatrixName::A, Some(e)) => e.a().clone(),
            (MatrixName::B, Some(e)) => e.b().clone(),
            (MatrixName::Um, Some(e)) => e.um().clone(),
            (MatrixName::Sl, Some(e)) => e.sl().clone(),
            _ => unreachable!("enhanced dual is built whenever it is needed"),
        };
        let _ = writeln!(
            err,
            "{}: {} x {}, {} nonzeros, bandwidth {}",
            name.as_str(),
            matrix.rows(),
            matrix.cols(),
            matrix.nnz(),
            matrix.bandwidth()
        );
        blocks.push((*name, matrix));
    }
    if let Some(c) = enhanced.as_ref().and_then(EnhancedDual::condition) {
        let _ = writeln!(err, "condition estimate of the scaled A0: {}", fmt_f64(c));
    }

    match dir {
        Some(d) => {
            for (name, m) in &blocks {
                io::write_file(&d.join(format!("{}.csv", name.as_str())), &triplets_csv(m))?;
            }
        }
        None if blocks.len() == 1 => out.write_all(triplets_csv(&blocks[0].1).as_bytes()).map_err(emit_failure)?,
        None => {
            for (name, m) in &blocks {
                writeln!(out, "# {} {}x{}", name.as_str(), m.rows(), m.cols()).map_err(emit_failure)?;
                out.write_all(triplets_csv(m).as_bytes()).map_err(emit_failure)?;
            }
        }
    }
    Ok(EXIT_OK)
}

pub fn parse_kernel(s: &str) -> Option<ProjectorKind> {
    match s {
        "K" => Some(ProjectorKind::K),
        "L" => Some(ProjectorKind::L),
        "ortho" => Some(ProjectorKind::Orthogonal),
        _ => None,
    }
}

/// `a..b` (inclusive), a single order, or a comma-separated list.
pub fn parse_orders(s: &str) -> Result<Vec<usize>, CliError> {
    let bad = || CliError::Usage(format!("invalid order range '{s}'"));
    let orders: Vec<usize> = match s.split_once("..") {
        Some((a, b)) => {
            let a: usize = a.trim().parse().map_err(|_| bad())?;
            let b: usize = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
            (a..=b).collect()
        }
        None => parse_list(s, "order", |t| t.parse().ok())?,
    };
    if orders.is_empty() || orders.iter().any(|m| !(3..=6).contains(m)) {
        return Err(CliError::Usage(format!("orders must lie in 3..=6, got '{s}'")));
    }
    Ok(orders)
}

fn cmd_convergence(
    case: &str,
    orders: &str,
    kernels: &str,
    levels: Option<&str>,
    file: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let case = CaseName::parse(case).ok_or_else(|| CliError::Usage(format!("unknown case '{case}'")))?;
    let orders = parse_orders(orders)?;
    let kernels = parse_list(kernels, "kernel", parse_kernel)?;
    let levels = match levels {
        Some(l) => parse_list(l, "level", |t| t.parse::<usize>().ok())?,
        None => DEFAULT_LEVELS.to_vec(),
    };
    let records = run_ladders(case, &orders, &kernels, &levels)?;
    let csv = convergence_csv(&records);
    match file {
        Some(f) => io::write_file(f, &csv)?,
        None => out.write_all(csv.as_bytes()).map_err(emit_failure)?,
    }
    let _ = err.write_all(slope_table(case, &records, &kernels).as_bytes());
    Ok(EXIT_OK)
}

/// A function from the built-in registry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Builtin {
    /// `x^p`; `x` is `p = 1`.
    Monomial(u32),
    /// `(θ - x)_+^{m-1-ν}`.
    TruncatedPower {
        theta: f64,
        nu: usize,
    },
    Pullback(CaseName),
}

impl Builtin {
    pub fn parse(s: &str) -> Option<Self> {
        if s == "x" {
            return Some(Builtin::Monomial(1));
        }
        if let Some(p) = s.strip_prefix("x^") {
            return p.parse().ok().map(Builtin::Monomial);
        }
        if let Some(rest) = s.strip_prefix("tp:") {
            let (theta, nu) = rest.split_once(':')?;
            let theta: f64 = theta.parse().ok().filter(|t: &f64| t.is_finite())?;
            return Some(Builtin::TruncatedPower { theta, nu: nu.parse().ok()? });
        }
        CaseName::parse(s).map(Builtin::Pullback)
    }

    /// Points besides the knots where the function may lose smoothness.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            Builtin::Monomial(_) => Vec::new(),
            Builtin::TruncatedPower { theta, .. } => vec![theta],
            Builtin::Pullback(_) => vec![aduals_core::experiments::JOINT],
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_project(
    function: &str,
    knots: &Path,
    select: Option<&Path>,
    order: Option<usize>,
    method: RightInverseMethod,
    kernel: &str,
    file: Option<&Path>,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32, CliError> {
    let builtin = Builtin::parse(function).ok_or_else(|| CliError::Usage(format!("unknown function '{function}'")))?;
    let kind = parse_kernel(kernel).ok_or_else(|| CliError::Usage(format!("unknown kernel '{kernel}'")))?;
    let kv = load_knots(knots, order)?;
    let m = kv.order();

    let case = match builtin {
        Builtin::Pullback(name) => {
            if kv.a() != 0.0 || kv.b() != 1.0 {
                return Err(CliError::Usage(format!("{} is defined on [0, 1]", name.as_str())));
            }
            Some(build_case(name, m)?)
        }
        Builtin::TruncatedPower { nu, .. } if nu >= m => {
            return Err(CliError::Usage(format!("tp needs ν ≤ {} for order {m}", m - 1)));
        }
        _ => None,
    };
    let f = |x: f64| -> f64 {
        match builtin {
            Builtin::Monomial(p) => x.powi(p as i32),
            Builtin::TruncatedPower { theta, nu } => {
                if x < theta {
                    (theta - x).powi((m - 1 - nu) as i32)
                } else {
                    0.0
                }
            }
            Builtin::Pullback(_) => case.as_ref().map_or(f64::NAN, |c| c.pullback(x)),
        }
    };

    let projector = match kind {
        ProjectorKind::K => Projector::k(&ApproxDual::new(&kv)?),
        ProjectorKind::Orthogonal => Projector::orthogonal(&kv)?,
        ProjectorKind::L => {
            let path = select.ok_or_else(|| CliError::Usage("kernel L requires --select".into()))?;
            let sel = io::read_selection(path, &kv)?;
            Projector::l(&EnhancedDual::new(ApproxDual::new(&kv)?, sel, method)?)
        }
    };
    let extra = builtin.breakpoints();
    let s = projector.project(f, &extra)?;

    let mut csv = String::from("x,f,s,residual\n");
    let mut worst = 0.0_f64;
    for i in 0..GRID_POINTS {
        let x = if i + 1 == GRID_POINTS {
            kv.b()
        } else {
            kv.a() + (kv.b() - kv.a()) * i as f64 / (GRID_POINTS - 1) as f64
        };
        let fx = f(x);
        let sx = s.eval(x, 0)?;
        let r = fx - sx;
        worst = worst.max(r.abs());
        csv.push_str(&format!("{},{},{},{}\n", fmt_f64(x), fmt_f64(fx), fmt_f64(sx), fmt_f64(r)));
    }
    match file {
        Some(p) => io::write_file(p, &csv)?,
        None => out.write_all(csv.as_bytes()).map_err(emit_failure)?,
    }
    let l2 = l2_error(f, &s, &extra)?;
    let _ = writeln!(err, "max |residual| = {}", fmt_f64(worst));
    let _ = writeln!(err, "L2 error = {}", fmt_f64(l2));
    Ok(EXIT_OK)
}

fn cmd_selftest(seed: u64, cases: usize, tol: Option<&str>, out: &mut dyn Write) -> Result<i32, CliError> {
    let tol_scale = match tol {
        None => 1.0,
        Some(t) => t
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|s| s.is_finite() && *s > 0.0)
            .ok_or_else(|| CliError::Usage(format!("{TOL_ENV} must be a positive number, got '{t}'")))?,
    };
    if cases == 0 {
        return Err(CliError::Usage("--cases must be positive".into()));
    }
    let outcomes = selftest::run(&SelftestConfig { seed, tol_scale, knot_vectors_per_order: cases });
    for o in &outcomes {
        writeln!(out, "{}", o.line()).map_err(emit_failure)?;
    }
    Ok(if outcomes.iter().all(|o| o.passed()) { EXIT_OK } else { EXIT_NUMERICAL })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_parses_builtins() {
        assert_eq!(Builtin::parse("x"), Some(Builtin::Monomial(1)));
        assert_eq!(Builtin::parse("x^3"), Some(Builtin::Monomial(3)));
        assert_eq!(Builtin::parse("tp:0.5:1"), Some(Builtin::TruncatedPower { theta: 0.5, nu: 1 }));
        assert_eq!(Builtin::parse("g_hat"), Some(Builtin::Pullback(CaseName::GHat)));
        for bad in ["sin", "x^", "tp:0.5", "tp:inf:0", "tp:a:0", ""] {
            assert_eq!(Builtin::parse(bad), None, "{bad}");
        }
    }

    #[test]
    fn order_ranges() {
        assert_eq!(parse_orders("3..6").unwrap(), vec![3, 4, 5, 6]);
        assert_eq!(parse_orders("3..=4").unwrap(), vec![3, 4]);
        assert_eq!(parse_orders("5").unwrap(), vec![5]);
        assert_eq!(parse_orders("3,5").unwrap(), vec![3, 5]);
        for bad in ["2..4", "6..3", "x", "3..7"] {
            assert_eq!(parse_orders(bad).unwrap_err().exit_code(), EXIT_USAGE, "{bad}");
        }
    }

    #[test]
    fn numerical_errors_map_to_exit_three() {
        let e: CliError = GramDualError::InconsistentReproductionSystem { residual: 1.0 }.into();
        assert_eq!(e.exit_code(), EXIT_NUMERICAL);
        let e: CliError = EnhancedError::InvalidSelection { index: 0, value: 0.0 }.into();
        assert_eq!(e.exit_code(), EXIT_USAGE);
        let e: CliError = ExperimentError::InvalidLevels.into();
        assert_eq!(e.exit_code(), EXIT_USAGE);
    }
}
