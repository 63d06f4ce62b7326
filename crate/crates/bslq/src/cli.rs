//! Command-line front end.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use bslq_core::oracle::{self, QpMode, VerifyOptions, DEFAULT_QP_CAP};
use bslq_core::solver::{FeedbackSolution, Route, SolveOptions, ValueVariant};
use bslq_core::tree::DEFAULT_PATH_CAP;
use bslq_core::{Error as CoreError, TreeProblem};
use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::json::{self, g6};
use crate::problem_file::{load_spec, LoadError};
use crate::report::{closest_variant, OracleReport, SolutionReport, VerifyReport};
use crate::trajectories::{solution_rows, write_rows};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "bslq", version, about = "Backward stochastic LQ control on a binary tree")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Solve a problem and write the feedback solution report.
    Solve(SolveArgs),
    /// Solve, then check the solution against the brute-force oracle.
    Verify(VerifyArgs),
    /// Assemble and solve the brute-force quadratic program only.
    Oracle(OracleArgs),
    /// Print the bundled example problem.
    Example(OutputArgs),
    /// Print the JSON schema of problem files.
    Schema(OutputArgs),
}

#[derive(Args, Debug)]
pub struct OutputArgs {
    /// Write here instead of stdout.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    /// The variant closest to the exact cost of the returned control.
    #[default]
    Auto,
    Decoupled,
    Theorem,
    Derivation,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum RouteArg {
    #[default]
    Decoupled,
    Transformed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Tamper {
    /// Zero every offset `b_k`.
    B,
}

#[derive(Args, Debug)]
pub struct ProblemArgs {
    /// Problem file (JSON).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Largest accepted horizon.
    #[arg(long, env = "BSLQ_MAX_DEPTH", default_value_t = DEFAULT_PATH_CAP)]
    pub max_depth: usize,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t)]
    pub route: RouteArg,
    #[arg(long, value_enum, default_value_t)]
    pub value_variant: VariantArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write y, u, x, φ per atom as CSV.
    #[arg(long)]
    pub dump_trajectories: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub solve: SolveArgs,
    /// Run the QP cross-check regardless of its size.
    #[arg(long, conflicts_with = "no_qp")]
    pub qp: bool,
    /// Skip the QP cross-check.
    #[arg(long)]
    pub no_qp: bool,
    /// Largest stacked control dimension for the automatic QP check.
    #[arg(long, default_value_t = DEFAULT_QP_CAP)]
    pub qp_cap: usize,
    /// Override a tolerance, e.g. `--tol stationarity=1e-8`.
    #[arg(long = "tol", value_name = "KEY=VAL")]
    pub tolerances: Vec<String>,
    /// Corrupt the solution before checking it.
    #[arg(long, value_enum)]
    pub tamper: Option<Tamper>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, default_value_t = DEFAULT_QP_CAP)]
    pub qp_cap: usize,
}

/// Failure with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl Failure {
    fn io(path: &Path, e: io::Error) -> Self {
        Self {
            code: EXIT_IO,
            message: format!("{}: {e}", path.display()),
        }
    }

    fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<CoreError> for Failure {
    fn from(e: CoreError) -> Self {
        Self {
            code: if e.is_input_error() { EXIT_INPUT } else { EXIT_NUMERICAL },
            message: e.to_string(),
        }
    }
}

impl From<LoadError> for Failure {
    fn from(e: LoadError) -> Self {
        match e {
            LoadError::Structure(core) => core.into(),
            other => Self::input(other.to_string()),
        }
    }
}

fn load(args: &ProblemArgs) -> Result<TreeProblem, Failure> {
    let text = fs::read_to_string(&args.input).map_err(|e| Failure::io(&args.input, e))?;
    let spec = load_spec(&text).map_err(|e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", args.input.display(), f.message);
        f
    })?;
    Ok(TreeProblem::with_cap(&spec, args.max_depth)?)
}

fn emit(output: Option<&Path>, text: &str) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::io(Path::new("<stdout>"), e)),
    }
}

fn emit_json<T: serde::Serialize>(output: Option<&Path>, value: &T) -> Result<(), Failure> {
    let text = json::to_string(value).map_err(|e| Failure {
        code: EXIT_NUMERICAL,
        message: format!("cannot serialize report: {e}"),
    })?;
    emit(output, &text)
}

/// Solves and fixes the reported value variant; `auto` picks the
/// expression closest to the exact cost of the returned control.
pub fn solve_with(problem: &TreeProblem, route: RouteArg, variant: VariantArg) -> Result<FeedbackSolution, Failure> {
    let route = match route {
        RouteArg::Decoupled => Route::Decoupled,
        RouteArg::Transformed => Route::Transformed,
    };
    let fixed = match variant {
        VariantArg::Auto => None,
        VariantArg::Decoupled => Some(ValueVariant::Decoupled),
        VariantArg::Theorem => Some(ValueVariant::Theorem),
        VariantArg::Derivation => Some(ValueVariant::Derivation),
    };
    let mut sol = bslq_core::solve(
        problem,
        SolveOptions {
            route,
            value_variant: fixed.unwrap_or_default(),
        },
    )?;
    if fixed.is_none() {
        let v = closest_variant(&sol.values, oracle::cost(problem, &sol.u_star)?);
        sol.value_variant = v;
        sol.value = sol.values.get(v);
    }
    Ok(sol)
}

fn dump(path: Option<&Path>, sol: &FeedbackSolution) -> Result<(), Failure> {
    let Some(path) = path else { return Ok(()) };
    let file = fs::File::create(path).map_err(|e| Failure::io(path, e))?;
    write_rows(io::BufWriter::new(file), &solution_rows(sol)).map_err(|e| Failure {
        code: EXIT_IO,
        message: format!("{}: {e}", path.display()),
    })
}

fn summarize(err: &mut dyn Write, sol: &FeedbackSolution, oracle_cost: f64, notes: &[String]) {
    let v = &sol.values;
    let _ = writeln!(
        err,
        "route {}, value ({}) {}, exact cost {}",
        sol.route.name(),
        sol.value_variant.name(),
        g6(sol.value),
        g6(oracle_cost)
    );
    let _ = writeln!(
        err,
        "values: decoupled {}, theorem {}, derivation {}",
        g6(v.decoupled),
        g6(v.theorem),
        g6(v.derivation)
    );
    for n in notes {
        let _ = writeln!(err, "note: {n}");
    }
}

fn solve_cmd(args: &SolveArgs, err: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load(&args.problem)?;
    let sol = solve_with(&problem, args.route, args.value_variant)?;
    let report = SolutionReport::new(&problem, &sol, args.seed)?;
    emit_json(args.problem.output.as_deref(), &report)?;
    dump(args.dump_trajectories.as_deref(), &sol)?;
    summarize(err, &sol, report.oracle_cost(), report.notes());
    Ok(EXIT_OK)
}

/// Verification options from the command line.
pub fn verify_options(args: &VerifyArgs) -> Result<VerifyOptions, Failure> {
    let mut options = VerifyOptions {
        seed: args.solve.seed,
        qp: if args.qp {
            QpMode::Always
        } else if args.no_qp {
            QpMode::Never
        } else {
            QpMode::Auto
        },
        qp_cap: args.qp_cap,
        ..VerifyOptions::default()
    };
    for item in &args.tolerances {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| Failure::input(format!("--tol expects KEY=VAL, got `{item}`")))?;
        let value: f64 = value
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| Failure::input(format!("--tol {key}: `{value}` is not a nonnegative number")))?;
        options.tolerances.set(key, value).ok_or_else(|| {
            Failure::input(format!(
                "--tol: unknown key `{key}` (expected one of {})",
                bslq_core::oracle::Tolerances::KEYS.join(", ")
            ))
        })?;
    }
    Ok(options)
}

fn verify_cmd(args: &VerifyArgs, err: &mut dyn Write) -> Result<i32, Failure> {
    let options = verify_options(args)?;
    let problem = load(&args.solve.problem)?;
    let mut sol = solve_with(&problem, args.solve.route, args.solve.value_variant)?;
    if args.tamper == Some(Tamper::B) {
        sol = sol.with_zero_offsets();
    }
    let result = oracle::verify(&problem, &sol, &options)?;
    let report = VerifyReport::new(&problem, &sol, &result);
    emit_json(args.solve.problem.output.as_deref(), &report)?;
    dump(args.solve.dump_trajectories.as_deref(), &sol)?;
    summarize(err, &sol, result.oracle_cost, &[]);
    for c in &result.checks {
        let _ = writeln!(
            err,
            "{} {:<24} {} (threshold {}){}",
            if c.pass { "ok  " } else { "FAIL" },
            c.name,
            g6(c.value),
            g6(c.threshold),
            if c.detail.is_empty() { String::new() } else { format!(": {}", c.detail) }
        );
    }
    let _ = writeln!(err, "verification {}", if result.pass { "passed" } else { "FAILED" });
    Ok(if result.pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn oracle_cmd(args: &OracleArgs, err: &mut dyn Write) -> Result<i32, Failure> {
    let problem = load(&args.problem)?;
    let qp = oracle::assemble_qp(&problem, args.qp_cap)?;
    let report = OracleReport::new(&problem, &qp)?;
    emit_json(args.problem.output.as_deref(), &report)?;
    let min_eig = bslq_core::linalg::min_eigenvalue(&qp.hessian);
    let _ = writeln!(
        err,
        "QP dimension {}, min Hessian eigenvalue {}",
        qp.gradient.len(),
        g6(min_eig)
    );
    if report.is_convex() {
        Ok(EXIT_OK)
    } else {
        Err(Failure {
            code: EXIT_NUMERICAL,
            message: format!("QP Hessian is not positive definite (min eigenvalue {})", g6(min_eig)),
        })
    }
}

/// Runs a parsed command; summaries and errors go to `err`.
pub fn run(cli: &Cli, err: &mut dyn Write) -> i32 {
    let result = match &cli.command {
        Command::Solve(a) => solve_cmd(a, err),
        Command::Verify(a) => verify_cmd(a, err),
        Command::Oracle(a) => oracle_cmd(a, err),
        Command::Example(a) => emit(a.output.as_deref(), crate::EXAMPLE_JSON).map(|_| EXIT_OK),
        Command::Schema(a) => emit(a.output.as_deref(), crate::SCHEMA_JSON).map(|_| EXIT_OK),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("bslq").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn defaults() {
        let cli = parse(&["solve", "--input", "p.json", "--max-depth", "22"]);
        let Command::Solve(a) = cli.command else { panic!() };
        assert_eq!(a.route, RouteArg::Decoupled);
        assert_eq!(a.value_variant, VariantArg::Auto);
        assert_eq!(a.seed, 0);
    }

    #[test]
    fn tolerance_overrides() {
        let cli = parse(&["verify", "--input", "p.json", "--tol", "stationarity=1e-6", "--qp"]);
        let Command::Verify(a) = cli.command else { panic!() };
        let o = verify_options(&a).unwrap();
        assert_eq!(o.tolerances.stationarity, 1e-6);
        assert_eq!(o.qp, QpMode::Always);

        for bad in ["nope=1", "stationarity", "stationarity=-1"] {
            let cli = parse(&["verify", "--input", "p.json", "--tol", bad]);
            let Command::Verify(a) = cli.command else { panic!() };
            assert_eq!(verify_options(&a).unwrap_err().code, EXIT_INPUT, "{bad}");
        }
    }

    #[test]
    fn qp_flags_conflict() {
        assert!(Cli::try_parse_from(["bslq", "verify", "--input", "p", "--qp", "--no-qp"]).is_err());
    }
}
