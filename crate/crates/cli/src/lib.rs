//! Command-line front end for `spocb`.
//!
//! Subcommands read a JSON problem file (see [`config`]), run one stage of
//! the bound pipeline and print a human-readable summary. Machine-readable
//! output is CSV with 15 significant digits, written under `--out`.
//!
//! Exit codes: 0 success, 1 invalid input or failed assumption, 2 numeric
//! failure.

pub mod config;
pub mod sweep;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use spocb::duality::{format_float, CSV_HEADER};
use spocb::oracle::reference;
use spocb::{bounds_report, fixtures, solve_reduced, validate_assumptions, Problem, SolveOptions};
use thiserror::Error;

pub use config::{load_instance, load_problem_file, parse_problem, Instance, LoadError, RunOptions};
pub use sweep::{fit_slope, sweep, SlopeFit, SweepError, SweepResult, SweepRow};

#[derive(Parser, Debug)]
#[command(name = "spocb", version, about = "Certified bounds for singularly perturbed LQ control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Check the standing assumptions and print the report
    Validate(RunArgs),
    /// Solve the full problem by a Riccati sweep and export the optimal trajectory
    Solve(RunArgs),
    /// Compute upper and lower bounds at one ε
    Bounds(RunArgs),
    /// Compute bounds over a decreasing ε grid and fit the gap's order
    Sweep(RunArgs),
    /// Write a built-in problem file
    Example {
        name: ExampleName,
        /// ε for the clustered surrogate (default 0.25)
        #[arg(long)]
        eps: Option<f64>,
        /// Directory for `<name>.json`; stdout when absent
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(clap::Args, Debug)]
pub struct RunArgs {
    /// Problem file (JSON)
    pub file: PathBuf,
    /// ε override; a comma-separated list for `sweep`
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub eps: Vec<f64>,
    /// Expansion order (only 0 is implemented)
    #[arg(long)]
    pub order: Option<usize>,
    /// Integrator tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Minimum steps per boundary layer [default: 32]
    #[arg(long)]
    pub grid_min: Option<usize>,
    /// Output directory for CSV files
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Skip the full Riccati reference solve
    #[arg(long)]
    pub no_oracle: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ExampleName {
    F8Aircraft,
    Network20Reduced,
    ScalarToy,
    ClusteredSurrogate,
}

impl ExampleName {
    pub fn file_stem(self) -> &'static str {
        match self {
            Self::F8Aircraft => "f8-aircraft",
            Self::Network20Reduced => "network20-reduced",
            Self::ScalarToy => "scalar-toy",
            Self::ClusteredSurrogate => "clustered-surrogate",
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Load(#[from] LoadError),
    #[error("{0}")]
    Invalid(String),
    #[error("assumptions violated: {0}")]
    Assumptions(String),
    #[error(transparent)]
    Sweep(#[from] SweepError),
    #[error("{stage}: {source}")]
    Numeric {
        stage: &'static str,
        #[source]
        source: spocb::Error,
    },
    #[error("{stage}: {message}")]
    Partial { stage: &'static str, message: String },
    #[error("cannot write {}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Load(_) | Self::Invalid(_) | Self::Assumptions(_) | Self::Sweep(_) => 1,
            Self::Numeric { .. } | Self::Partial { .. } | Self::Output { .. } => 2,
        }
    }

    fn stage(&self) -> &'static str {
        match self {
            Self::Load(_) => "load",
            Self::Invalid(_) => "options",
            Self::Assumptions(_) => "validate",
            Self::Sweep(_) => "sweep",
            Self::Numeric { .. } | Self::Partial { .. } => "solve",
            Self::Output { .. } => "output",
        }
    }
}

fn numeric(stage: &'static str) -> impl FnOnce(spocb::Error) -> CliError {
    move |source| CliError::Numeric { stage, source }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to stderr.
pub fn run_command<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("spocb: {}: {e}", e.stage());
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Validate(args) => validate(&args),
        Command::Solve(args) => solve(&args),
        Command::Bounds(args) => bounds(&args),
        Command::Sweep(args) => run_sweep(&args),
        Command::Example { name, eps, out } => example(name, eps, out.as_deref()),
    }
}

fn solve_options(args: &RunArgs, run: &RunOptions) -> Result<SolveOptions, CliError> {
    let opts = SolveOptions {
        tol: args.tol.or(run.tol).unwrap_or(1e-8),
        layer_points: args.grid_min.or(run.grid_min).unwrap_or(32),
        oracle: !args.no_oracle && run.oracle.unwrap_or(true),
        order: args.order.or(run.order).unwrap_or(0),
    };
    if !(opts.tol > 0.0 && opts.tol < 1.0) {
        return Err(CliError::Invalid(format!("--tol must lie in (0, 1), got {}", opts.tol)));
    }
    if opts.layer_points == 0 {
        return Err(CliError::Invalid("--grid-min must be positive".into()));
    }
    if opts.order != 0 {
        return Err(CliError::Invalid(format!("expansion order {} is not implemented (only 0)", opts.order)));
    }
    Ok(opts)
}

fn out_dir(args: &RunArgs, run: &RunOptions) -> Option<PathBuf> {
    args.out.clone().or_else(|| run.out.clone())
}

/// Applies a single-value ε override.
fn at_epsilon(p: Problem, args: &RunArgs, run: &RunOptions) -> Result<Problem, CliError> {
    let eps = match args.eps.as_slice() {
        [] => run.eps,
        [e] => Some(*e),
        more => {
            return Err(CliError::Invalid(format!(
                "expected one --eps value, got {}; use `sweep` for a list",
                more.len()
            )))
        }
    };
    match eps {
        None => Ok(p),
        Some(e) => p.with_epsilon(e).map_err(|err| CliError::Assumptions(err.to_string())),
    }
}

fn full_problem(args: &RunArgs, what: &str) -> Result<(Problem, RunOptions), CliError> {
    match load_instance(&args.file)? {
        (Instance::Full(p), run) => {
            let p = at_epsilon(p, args, &run)?;
            require_assumptions(&p)?;
            Ok((p, run))
        }
        (Instance::Reduced(_), _) => Err(CliError::Invalid(format!(
            "{} holds a reduced problem (n = 0); {what} needs a fast subsystem",
            args.file.display()
        ))),
    }
}

fn require_assumptions(p: &Problem) -> Result<(), CliError> {
    let report = validate_assumptions(p);
    if report.all_passed() {
        return Ok(());
    }
    let tags: Vec<String> = report
        .failures()
        .map(|c| format!("({}) {}", c.tag, c.description))
        .collect();
    Err(CliError::Assumptions(tags.join("; ")))
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    let output = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Output { path, source }
    };
    fs::create_dir_all(dir).map_err(output(dir))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(output(&path))?;
    Ok(path)
}

fn validate(args: &RunArgs) -> Result<(), CliError> {
    let (instance, run) = load_instance(&args.file)?;
    match instance {
        Instance::Full(p) => {
            let p = at_epsilon(p, args, &run)?;
            let report = validate_assumptions(&p);
            print!("{report}");
            require_assumptions(&p)?;
            let warnings = report.warnings().count();
            println!("all required assumptions hold ({warnings} advisory warning(s))");
        }
        Instance::Reduced(rp) => {
            println!(
                "reduced problem: m = {}, k = {}, horizon {}; weights valid",
                rp.m(),
                rp.k(),
                rp.horizon
            );
        }
    }
    Ok(())
}

fn csv_header(t: &str, groups: &[(&str, usize)]) -> String {
    let mut cols = vec![t.to_string()];
    for &(name, count) in groups {
        cols.extend((1..=count).map(|i| format!("{name}_{i}")));
    }
    cols.join(",")
}

fn csv_line(t: f64, parts: &[&DVector<f64>]) -> String {
    let mut cols = vec![format_float(t)];
    for v in parts {
        cols.extend(v.iter().map(|&x| format_float(x)));
    }
    cols.join(",")
}

/// Trajectory CSV: `t, z_1..z_{m+n}, u_1..u_k, chi_1..chi_{m+n}`.
pub fn trajectory_csv(p: &Problem, traj: &spocb::Path) -> String {
    let d = p.state_dim();
    let mut s = csv_header("t", &[("z", d), ("u", p.k), ("chi", d)]);
    s.push('\n');
    let empty = DVector::zeros(0);
    for i in 0..traj.len() {
        let chi = traj.chi.as_ref().map_or(&empty, |c| &c[i]);
        s.push_str(&csv_line(traj.grid[i], &[&traj.z[i], &traj.u[i], chi]));
        s.push('\n');
    }
    s
}

fn solve(args: &RunArgs) -> Result<(), CliError> {
    let (instance, run) = load_instance(&args.file)?;
    let opts = solve_options(args, &run)?;
    let (value, csv) = match instance {
        Instance::Full(p) => {
            let p = at_epsilon(p, args, &run)?;
            require_assumptions(&p)?;
            let (value, _, traj) = reference(&p, &opts).map_err(numeric("oracle"))?;
            (value, trajectory_csv(&p, &traj))
        }
        Instance::Reduced(rp) => {
            let sol = solve_reduced(&rp, &opts).map_err(numeric("reduced"))?;
            let mut s = csv_header("t", &[("x", rp.m()), ("u", rp.k()), ("chi", rp.m())]);
            s.push('\n');
            for (t, x, chi, u) in sol.samples() {
                s.push_str(&csv_line(t, &[&x, &u, &chi]));
                s.push('\n');
            }
            (sol.value, s)
        }
    };
    println!("optimal value  {value:.12}");
    match out_dir(args, &run) {
        Some(dir) => {
            let path = write_file(&dir, "trajectory.csv", &csv)?;
            println!("trajectory     {}", path.display());
        }
        None => println!("trajectory     (pass --out to export)"),
    }
    Ok(())
}

fn bounds(args: &RunArgs) -> Result<(), CliError> {
    let (p, run) = full_problem(args, "bounds")?;
    let opts = solve_options(args, &run)?;
    let report = bounds_report(&p, &opts).map_err(numeric("bounds"))?;
    print!("{report}");
    if let Some(dir) = out_dir(args, &run) {
        let path = write_file(&dir, "bounds.csv", &format!("{CSV_HEADER}\n{}\n", report.csv_row()))?;
        println!("written          {}", path.display());
    }
    Ok(())
}

fn run_sweep(args: &RunArgs) -> Result<(), CliError> {
    let (instance, run) = load_instance(&args.file)?;
    let Instance::Full(p) = instance else {
        return Err(CliError::Invalid(format!(
            "{} holds a reduced problem (n = 0); sweep needs a fast subsystem",
            args.file.display()
        )));
    };
    require_assumptions(&p)?;
    let opts = solve_options(args, &run)?;
    let eps = if args.eps.is_empty() {
        run.sweep.clone().unwrap_or_default()
    } else {
        args.eps.clone()
    };
    let result = sweep(&p, &eps, &opts)?;
    match out_dir(args, &run) {
        Some(dir) => {
            let rows = write_file(&dir, "sweep.csv", &result.rows_csv())?;
            let fit = write_file(&dir, "sweep_fit.csv", &result.fit_csv())?;
            println!("written {} and {}", rows.display(), fit.display());
        }
        None => print!("{}\n{}", result.rows_csv(), result.fit_csv()),
    }
    match result.fit {
        Some(f) => eprintln!(
            "gap slope {:.4} ± {:.4} over ε ∈ [{}, {}] ({} points)",
            f.slope, f.stderr, f.eps_min, f.eps_max, f.points
        ),
        None => eprintln!("gap slope unavailable (fewer than 3 usable points)"),
    }
    match result.failures() {
        0 => Ok(()),
        n => Err(CliError::Partial {
            stage: "sweep",
            message: format!("{n} of {} epsilon values failed; partial results kept", result.rows.len()),
        }),
    }
}

/// Problem-file JSON for a built-in instance.
pub fn example_json(name: ExampleName, eps: Option<f64>) -> Result<String, CliError> {
    let cfg = match name {
        ExampleName::F8Aircraft => fixtures::f8_aircraft(),
        ExampleName::ScalarToy => fixtures::scalar_toy(),
        ExampleName::Network20Reduced => {
            fixtures::network20_reduced::<f64>().to_config(Some("network20-reduced".into()))
        }
        ExampleName::ClusteredSurrogate => {
            let e = eps.unwrap_or(0.25);
            if !(e > 0.0 && e.is_finite()) {
                return Err(CliError::Invalid(format!("--eps must be positive, got {e}")));
            }
            fixtures::clustered_surrogate(e)
        }
    };
    if eps.is_some() && name != ExampleName::ClusteredSurrogate {
        return Err(CliError::Invalid("--eps only applies to clustered-surrogate".into()));
    }
    Ok(config::export_config(&cfg))
}

fn example(name: ExampleName, eps: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let json = example_json(name, eps)?;
    match out {
        Some(dir) => {
            let path = write_file(dir, &format!("{}.json", name.file_stem()), &json)?;
            println!("{}", path.display());
        }
        None => print!("{json}"),
    }
    Ok(())
}
