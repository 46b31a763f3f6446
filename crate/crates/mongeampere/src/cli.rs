//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 on usage, parse or IO errors, 2 when the
//! nonlinear solver fails (the trace is still written).

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mongeampere_core::fd_oracle::{compare_to_spline, fd_march};
use mongeampere_core::iterate::{self, Clock, IterateConfig, Method};
use mongeampere_core::mesh::{build_disk_mesh, build_square_mesh, Triangulation};
use mongeampere_core::problems::{builtin, convergence_study, error_norms, level_mesh, Domain, ProblemSpec};
use mongeampere_core::spline_space::SplineSpace;
use mongeampere_core::Error;
use thiserror::Error as ThisError;

use crate::io::{format_coefficients, read_mesh, write_text, write_trace, IoError};
use crate::surface::{export_surface, DEFAULT_SUBDIVISION};
use crate::WallClock;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "mongeampere", version, about = "C1 spline solvers for det D2u = f, u = g")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one problem and write the trace and coefficients.
    Solve(RunConfig),
    /// Convergence study over refinement levels 1..=L.
    Study(RunConfig),
    /// Run every method on the same mesh.
    Compare(RunConfig),
    /// Solve and write a triangulated surface with its diagonal section.
    ExportSurface {
        #[command(flatten)]
        run: RunConfig,
        /// Subdivisions per triangle edge.
        #[arg(long, default_value_t = DEFAULT_SUBDIVISION)]
        subdivision: usize,
    },
    /// Compare against finite-difference marching on the unit square.
    FdCheck {
        #[command(flatten)]
        run: RunConfig,
        /// Grid points per side.
        #[arg(long, default_value_t = 65)]
        grid: usize,
        /// Finite-difference marching parameter.
        #[arg(long, default_value_t = 50.0)]
        fd_nu: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Builtin problem (test1, test3, test4, test5, test6, quadratic).
    #[arg(long)]
    pub problem: Option<String>,
    /// Mesh file; the problem defaults to `quadratic`.
    #[arg(long)]
    pub mesh: Option<PathBuf>,
    #[arg(long, default_value = "newton", value_parser = parse_method)]
    pub method: Method,
    /// Defaults to 0 for newton, 1 for ptc, 50 for march.
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long, default_value_t = 5)]
    pub degree: usize,
    /// Mesh size: `round(1/h)` squares per side or rings on the disk.
    #[arg(long, conflicts_with = "levels")]
    pub h: Option<f64>,
    /// Refinement level (`study`: number of levels).
    #[arg(long)]
    pub levels: Option<u32>,
    #[arg(long, default_value_t = 1e-10)]
    pub tol: f64,
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
    /// Seek the concave solution.
    #[arg(long)]
    pub concave: bool,
    /// Recorded in the summary; no solver path is randomized.
    #[arg(long)]
    pub seed: Option<u64>,
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| {
        let names: Vec<&str> = Method::ALL.iter().map(|m| m.name()).collect();
        format!("unknown method '{s}' (expected one of {})", names.join(", "))
    })
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("solver failed: {0}")]
    Solver(Error),
    #[error("{0}")]
    Failed(String),
    #[error(transparent)]
    Core(Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Solver(_) | CliError::Failed(_) => EXIT_SOLVER,
            _ => EXIT_USAGE,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidConfig(m) | Error::UnknownProblem(m) => CliError::Usage(m),
            e @ (Error::NonConvergence { .. }
            | Error::DivergenceDetected { .. }
            | Error::StepFailed { .. }
            | Error::Linalg(_)) => CliError::Solver(e),
            e => CliError::Core(e),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

impl RunConfig {
    pub fn problem(&self) -> CliResult<ProblemSpec> {
        let name = self.problem.as_deref().unwrap_or(if self.mesh.is_some() { "quadratic" } else { "test1" });
        let mut p = builtin(name)?;
        if self.mesh.is_some() {
            p.domain = Domain::External;
        }
        Ok(p)
    }

    pub fn iterate_config(&self) -> CliResult<IterateConfig> {
        let mut cfg = IterateConfig::new(self.method).with_tol(self.tol).with_max_iter(self.max_iter);
        if let Some(nu) = self.nu {
            cfg = cfg.with_nu(nu);
        }
        if self.concave {
            cfg = cfg.concave();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn check(&self) -> CliResult<()> {
        if self.degree < 3 {
            return Err(CliError::Usage(format!("degree must be at least 3 (got {})", self.degree)));
        }
        if self.threads == 0 {
            return Err(CliError::Usage("threads must be at least 1".into()));
        }
        if let Some(h) = self.h {
            if !(h > 0.0 && h <= 1.0) {
                return Err(CliError::Usage(format!("h must lie in (0, 1] (got {h})")));
            }
        }
        Ok(())
    }

    /// Mesh for single-mesh commands; defaults to level 2 (`h = 1/4`).
    pub fn mesh(&self, problem: &ProblemSpec) -> CliResult<Triangulation> {
        if let Some(path) = &self.mesh {
            return Ok(read_mesh(path)?);
        }
        match (self.h, problem.domain) {
            (Some(h), Domain::Square) => Ok(build_square_mesh((1.0 / h).round().max(1.0) as usize)),
            (Some(h), Domain::Disk) => Ok(build_disk_mesh((1.0 / h).round().max(1.0) as usize)),
            _ => Ok(level_mesh(problem.domain, self.levels.unwrap_or(2))?),
        }
    }

    fn label(&self, problem: &ProblemSpec, cfg: &IterateConfig) -> String {
        let mut s = format!("{}: {} d = {}", problem.name, iterate::describe(cfg), self.degree);
        if let Some(seed) = self.seed {
            let _ = write!(s, " seed = {seed}");
        }
        s
    }
}

fn out_path(run: &RunConfig, name: &str) -> PathBuf {
    run.out.join(name)
}

fn solve_cmd(run: &RunConfig) -> CliResult<()> {
    let problem = run.problem()?;
    let cfg = run.iterate_config()?;
    let space = SplineSpace::new(run.mesh(&problem)?, run.degree)?;
    let out = iterate::run(&space, &*problem.f, &*problem.g, &cfg, &WallClock::new());
    write_trace(&out_path(run, "trace.csv"), &out.trace)?;
    println!("{}", run.label(&problem, &cfg));
    println!("dof = {}, steps = {}, residual = {:.3e}", space.dof_count(), out.trace.steps(), out.trace.last_residual());
    if let Some(e) = out.error {
        return Err(e.into());
    }
    write_text(&out_path(run, "coeffs.txt"), &format_coefficients(out.solution.coeffs()))?;
    if let Some(ex) = &problem.exact {
        let e = error_norms(&out.solution, ex)?;
        println!("l2 = {:.4e}, h1 = {:.4e}, h2 = {:.4e}", e.l2, e.h1, e.h2);
    }
    Ok(())
}

fn study_cmd(run: &RunConfig) -> CliResult<()> {
    let problem = run.problem()?;
    let cfg = run.iterate_config()?;
    let meshes = match (&run.mesh, run.h) {
        (Some(_), _) | (None, Some(_)) => vec![run.mesh(&problem)?],
        (None, None) => {
            let levels = run.levels.unwrap_or(3);
            (1..=levels).map(|l| level_mesh(problem.domain, l)).collect::<Result<_, _>>()?
        }
    };
    let table = convergence_study(&problem, &cfg, run.degree, meshes, &WallClock::new())?;
    let csv = table.to_csv();
    write_text(&out_path(run, "study.csv"), &csv)?;
    println!("{}", run.label(&problem, &cfg));
    print!("{csv}");
    match table.rows.iter().find_map(|r| r.failure.clone()) {
        Some(msg) => Err(CliError::Failed(msg)),
        None => Ok(()),
    }
}

fn compare_cmd(run: &RunConfig) -> CliResult<()> {
    let problem = run.problem()?;
    let space = SplineSpace::new(run.mesh(&problem)?, run.degree)?;
    let clock = WallClock::new();
    let mut csv = String::from("method,nu,converged,n_it,residual,l2,h1,h2,max_coeff_diff,time_s\n");
    let mut reference: Option<Vec<f64>> = None;
    let mut failed = false;
    for method in Method::ALL {
        let mut cfg = IterateConfig::new(method).with_tol(run.tol).with_max_iter(run.max_iter);
        if let (Some(nu), false) = (run.nu, method == Method::Newton) {
            cfg = cfg.with_nu(nu);
        }
        if run.concave {
            cfg = cfg.concave();
        }
        let start = clock.seconds();
        let out = iterate::run(&space, &*problem.f, &*problem.g, &cfg, &clock);
        let time_s = clock.seconds() - start;
        let ok = out.error.is_none();
        failed |= !ok;
        let e = match (&problem.exact, ok) {
            (Some(ex), true) => Some(error_norms(&out.solution, ex)?),
            _ => None,
        };
        let diff = match (&reference, ok) {
            (Some(r), true) => r.iter().zip(out.solution.coeffs()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
            (None, true) => {
                reference = Some(out.solution.coeffs().to_vec());
                0.0
            }
            _ => f64::NAN,
        };
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| format!("{v:.5e}"));
        let _ = writeln!(
            csv,
            "{},{},{},{},{:.5e},{},{},{},{:.5e},{:.5e}",
            method,
            cfg.nu,
            ok,
            out.trace.steps(),
            out.trace.last_residual(),
            opt(e.map(|e| e.l2)),
            opt(e.map(|e| e.h1)),
            opt(e.map(|e| e.h2)),
            diff,
            time_s
        );
    }
    write_text(&out_path(run, "compare.csv"), &csv)?;
    print!("{csv}");
    if failed {
        return Err(CliError::Failed("at least one method failed".into()));
    }
    Ok(())
}

fn export_cmd(run: &RunConfig, subdivision: usize) -> CliResult<()> {
    let problem = run.problem()?;
    let cfg = run.iterate_config()?;
    let space = SplineSpace::new(run.mesh(&problem)?, run.degree)?;
    let out = iterate::run(&space, &*problem.f, &*problem.g, &cfg, &WallClock::new());
    write_trace(&out_path(run, "trace.csv"), &out.trace)?;
    if let Some(e) = out.error {
        return Err(e.into());
    }
    let path = out_path(run, "surface.txt");
    let section = export_surface(&out.solution, &path, subdivision)?;
    println!("wrote {} and {}", path.display(), section.display());
    Ok(())
}

fn fd_check_cmd(run: &RunConfig, grid: usize, fd_nu: f64) -> CliResult<()> {
    let problem = run.problem()?;
    if problem.domain != Domain::Square {
        return Err(CliError::Usage("fd-check needs a problem on the unit square".into()));
    }
    let cfg = run.iterate_config()?;
    let space = SplineSpace::new(run.mesh(&problem)?, run.degree)?;
    let (u, _) = iterate::solve(&space, &*problem.f, &*problem.g, &cfg)?;
    let fd = fd_march(&*problem.f, &*problem.g, grid, fd_nu, 1e-12, 100_000).map_err(CliError::Solver)?;
    let diff = compare_to_spline(&fd, &u);
    let fd_err = problem.exact.as_ref().map_or(f64::NAN, |ex| fd.max_error(&*ex.u));
    let csv = format!("grid,fd_nu,max_diff,fd_max_error\n{grid},{fd_nu},{diff:.5e},{fd_err:.5e}\n");
    write_text(&out_path(run, "fd_check.csv"), &csv)?;
    print!("{csv}");
    Ok(())
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let run = match &cli.command {
        Command::Solve(r) | Command::Study(r) | Command::Compare(r) => r,
        Command::ExportSurface { run, .. } | Command::FdCheck { run, .. } => run,
    };
    run.check()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.threads)
        .build()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Solve(r) => solve_cmd(r),
        Command::Study(r) => study_cmd(r),
        Command::Compare(r) => compare_cmd(r),
        Command::ExportSurface { run, subdivision } => export_cmd(run, *subdivision),
        Command::FdCheck { run, grid, fd_nu } => fd_check_cmd(run, *grid, *fd_nu),
    })
}

/// Parses `argv` (including the program name), runs the command and
/// returns the exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
