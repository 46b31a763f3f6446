//! Nonlinear iterations for the discrete problem
//!
//! ```text
//! −½ ∫ (cof D²u) Du · Dψ = ∫ f ψ   for all ψ in V₀,   u = g_h on ∂Ω.
//! ```
//!
//! With `r(u)_j = −½∫ (cof D²u) Du · Dφ_j − ∫ f φ_j` and, on `V₀`,
//! `r(u)·ψ = ∫ (det D²u − f) ψ`, the derivative of `r` is `−K_cof(u)`. Every
//! method solves for the increment `θ = u_{k+1} − u_k` with homogeneous
//! constraints:
//!
//! | method          | system                   |
//! |-----------------|--------------------------|
//! | `newton`        | `K_cof θ = r`            |
//! | `ptc-laplace`   | `(ν K_lap + K_cof) θ = r` |
//! | `ptc-identity`  | `(ν M + K_cof) θ = r`     |
//! | `march-laplace` | `ν K_lap θ = r`           |
//! | `march-mass`    | `ν M θ = r`               |
//!
//! All matrices are positive definite on the constrained space when `u_k`
//! is convex. The concave orientation solves the same problem for `−u`
//! with data `−g`: the cofactor term and the right-hand side change sign
//! and the initial guess solves `Δu₀ = −2√f`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly::Assembler;
use crate::error::{Error, Result};
use crate::linalg::{ALConfig, AugmentedLagrangian, CsrMatrix, KktSolver, LinalgError};
use crate::spline_space::{KernelProjector, SplineFunction, SplineSpace};
use crate::ScalarField;

/// Monotone time source in seconds.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Newton,
    PtcLaplace,
    PtcIdentity,
    MarchLaplace,
    MarchMass,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Newton,
        Method::PtcLaplace,
        Method::PtcIdentity,
        Method::MarchLaplace,
        Method::MarchMass,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Newton => "newton",
            Method::PtcLaplace => "ptc-laplace",
            Method::PtcIdentity => "ptc-identity",
            Method::MarchLaplace => "march-laplace",
            Method::MarchMass => "march-mass",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// `0` for Newton, `1` for pseudo-transient continuation, `50` for
    /// time marching.
    pub fn default_nu(self) -> f64 {
        match self {
            Method::Newton => 0.0,
            Method::PtcLaplace | Method::PtcIdentity => 1.0,
            Method::MarchLaplace | Method::MarchMass => 50.0,
        }
    }

    pub fn is_march(self) -> bool {
        matches!(self, Method::MarchLaplace | Method::MarchMass)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    #[default]
    Convex,
    Concave,
}

impl Orientation {
    fn sign(self) -> f64 {
        match self {
            Orientation::Convex => 1.0,
            Orientation::Concave => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum InnerSolver {
    #[default]
    Kkt,
    AugmentedLagrangian(ALConfig),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateConfig {
    pub method: Method,
    pub nu: f64,
    /// Stop when the constrained residual norm is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    pub monitor_convexity: bool,
    pub orientation: Orientation,
    pub inner: InnerSolver,
    /// Stop with [`Error::DivergenceDetected`] once the residual exceeds
    /// this multiple of its running minimum.
    pub divergence_factor: f64,
}

impl IterateConfig {
    pub fn new(method: Method) -> Self {
        Self {
            method,
            nu: method.default_nu(),
            tol: 1e-10,
            max_iter: 500,
            monitor_convexity: true,
            orientation: Orientation::Convex,
            inner: InnerSolver::Kkt,
            divergence_factor: 1e3,
        }
    }

    pub fn with_nu(mut self, nu: f64) -> Self {
        self.nu = nu;
        self
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn concave(mut self) -> Self {
        self.orientation = Orientation::Concave;
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.method {
            Method::Newton if self.nu != 0.0 => Err(Error::InvalidConfig(alloc::format!(
                "newton requires nu = 0 (got {})",
                self.nu
            ))),
            Method::Newton => Ok(()),
            m if !(self.nu > 0.0 && self.nu.is_finite()) => Err(Error::InvalidConfig(alloc::format!(
                "{m} requires nu > 0 (got {})",
                self.nu
            ))),
            _ if !(self.tol > 0.0) => Err(Error::InvalidConfig("tol must be positive".into())),
            _ => Ok(()),
        }
    }
}

/// Extremes of the Hessian over all assembly quadrature points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvexityReport {
    pub min_eig: f64,
    pub max_eig: f64,
    pub min_lap: f64,
    pub max_lap: f64,
    /// Fraction of points with `λ₁ < 0`.
    pub negative_fraction: f64,
}

impl ConvexityReport {
    fn from_assembler(a: &Assembler<'_>, coeffs: &[f64]) -> Self {
        let hs = a.hessians(coeffs);
        let mut r = ConvexityReport {
            min_eig: f64::INFINITY,
            max_eig: f64::NEG_INFINITY,
            min_lap: f64::INFINITY,
            max_lap: f64::NEG_INFINITY,
            negative_fraction: 0.0,
        };
        let mut negative = 0usize;
        for h in &hs {
            let (l1, l2) = h.eigenvalues();
            r.min_eig = r.min_eig.min(l1);
            r.max_eig = r.max_eig.max(l2);
            r.min_lap = r.min_lap.min(h.trace());
            r.max_lap = r.max_lap.max(h.trace());
            if l1 < 0.0 {
                negative += 1;
            }
        }
        r.negative_fraction = negative as f64 / hs.len().max(1) as f64;
        r
    }
}

/// Hessian eigenvalue and Laplacian extremes of `v` over the assembly
/// quadrature points.
pub fn convexity_monitor(v: &SplineFunction<'_>) -> Result<ConvexityReport> {
    let a = Assembler::new(v.space())?;
    Ok(ConvexityReport::from_assembler(&a, v.coeffs()))
}

/// One row of an [`IterationTrace`], describing iterate `u_k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub k: usize,
    /// Constrained residual norm of `u_k`.
    pub residual: f64,
    /// `|u_k − u_{k−1}|₁` (zero for `k = 0`).
    pub increment_h1: f64,
    pub convexity: Option<ConvexityReport>,
    /// Seconds since the start of the solve.
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub rows: Vec<TraceRow>,
}

impl IterationTrace {
    pub fn residuals(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.residual).collect()
    }

    /// Number of steps taken.
    pub fn steps(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    pub fn last_residual(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.residual)
    }
}

/// Result of [`run`]: the last iterate and trace are kept even on failure.
#[derive(Debug, Clone)]
pub struct IterationOutcome<'s> {
    pub solution: SplineFunction<'s>,
    pub trace: IterationTrace,
    pub error: Option<Error>,
}

fn check_source(a: &Assembler<'_>, f: &ScalarField) -> Result<()> {
    for t in 0..a.space().mesh().n_triangles() {
        for p in a.points(t) {
            let v = f(p[0], p[1]);
            if v < -1e-12 || v.is_nan() {
                return Err(Error::NegativeSource { x: p[0], y: p[1], value: v });
            }
        }
    }
    Ok(())
}

fn constraint_rhs(space: &SplineSpace, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut rhs = vec![0.0; space.smoothness_rows().nrows()];
    rhs.extend(space.boundary_values(g));
    rhs
}

/// Discrete Poisson initial guess: `∫ Du₀ · Dψ = −∫ 2√f ψ` (convex) or
/// `+∫ 2√f ψ` (concave) with `u₀ = g_h` on the boundary.
pub fn initial_guess<'s>(
    space: &'s SplineSpace,
    f: &ScalarField,
    g: &dyn Fn(f64, f64) -> f64,
    orientation: Orientation,
) -> Result<SplineFunction<'s>> {
    let a = Assembler::new(space)?;
    check_source(&a, f)?;
    let (k_lap, _) = a.laplace_and_mass();
    initial_guess_with(&a, &k_lap, f, g, orientation)
}

fn initial_guess_with<'s>(
    a: &Assembler<'s>,
    k_lap: &CsrMatrix,
    f: &ScalarField,
    g: &dyn Fn(f64, f64) -> f64,
    orientation: Orientation,
) -> Result<SplineFunction<'s>> {
    let space = a.space();
    let sigma = orientation.sign();
    let b = a.load(&|x, y| 2.0 * f(x, y).max(0.0).sqrt());
    let rhs: Vec<f64> = b.iter().map(|v| -sigma * v).collect();
    let solver = KktSolver::new(k_lap, &space.all_rows(), Some(space.domain_points()))?;
    let sol = solver.solve(&rhs, &constraint_rhs(space, g))?;
    Ok(space.function(sol.c))
}

enum Factored {
    Kkt(KktSolver),
    Al(AugmentedLagrangian),
}

impl Factored {
    fn new(k: &CsrMatrix, space: &SplineSpace, rows: &CsrMatrix, inner: InnerSolver) -> core::result::Result<Self, LinalgError> {
        Ok(match inner {
            InnerSolver::Kkt => Factored::Kkt(KktSolver::new(k, rows, Some(space.domain_points()))?),
            InnerSolver::AugmentedLagrangian(cfg) => {
                Factored::Al(AugmentedLagrangian::new(k, rows, Some(space.domain_points()), cfg)?)
            }
        })
    }

    fn solve(&self, rhs: &[f64], zero: &[f64]) -> core::result::Result<Vec<f64>, LinalgError> {
        match self {
            Factored::Kkt(s) => Ok(s.solve(rhs, zero)?.c),
            Factored::Al(s) => Ok(s.solve(rhs, zero)?.c),
        }
    }
}

/// The matrix of one step at an iterate with cofactor stiffness `k_cof`
/// (ignored by marching methods), already multiplied by the orientation
/// sign so that it is positive definite for admissible iterates.
pub fn step_matrix(
    method: Method,
    nu: f64,
    orientation: Orientation,
    k_cof: Option<&CsrMatrix>,
    k_lap: &CsrMatrix,
    mass: &CsrMatrix,
) -> CsrMatrix {
    let sigma = orientation.sign();
    let cof = || k_cof.expect("cofactor stiffness required");
    match method {
        Method::Newton => cof().scale(sigma),
        Method::PtcLaplace => k_lap.add_scaled(nu, cof(), sigma),
        Method::PtcIdentity => mass.add_scaled(nu, cof(), sigma),
        Method::MarchLaplace => k_lap.scale(nu),
        Method::MarchMass => mass.scale(nu),
    }
}

/// Reusable per-space state of an iteration.
struct Stepper<'s> {
    assembler: Assembler<'s>,
    k_lap: CsrMatrix,
    mass: CsrMatrix,
    rows: CsrMatrix,
    zero: Vec<f64>,
    cfg: IterateConfig,
    march: Option<Factored>,
}

impl<'s> Stepper<'s> {
    fn new(space: &'s SplineSpace, cfg: &IterateConfig) -> Result<Self> {
        let assembler = Assembler::new(space)?;
        let (k_lap, mass) = assembler.laplace_and_mass();
        let rows = space.all_rows();
        let zero = vec![0.0; rows.nrows()];
        Ok(Self {
            assembler,
            k_lap,
            mass,
            rows,
            zero,
            cfg: *cfg,
            march: None,
        })
    }

    fn space(&self) -> &'s SplineSpace {
        self.assembler.space()
    }

    fn residual(&self, u: &[f64], f: &ScalarField) -> Vec<f64> {
        self.assembler.residual(u, f)
    }

    /// Increment for the iterate `u` with residual `r`.
    fn increment(&mut self, u: &[f64], r: &[f64]) -> core::result::Result<Vec<f64>, LinalgError> {
        let sigma = self.cfg.orientation.sign();
        let rhs: Vec<f64> = r.iter().map(|v| sigma * v).collect();
        if self.cfg.method.is_march() {
            if self.march.is_none() {
                let k = step_matrix(self.cfg.method, self.cfg.nu, self.cfg.orientation, None, &self.k_lap, &self.mass);
                self.march = Some(Factored::new(&k, self.space(), &self.rows, self.cfg.inner)?);
            }
            return self.march.as_ref().unwrap().solve(&rhs, &self.zero);
        }
        let k_cof = self.assembler.cof_stiffness(u);
        let k = step_matrix(
            self.cfg.method,
            self.cfg.nu,
            self.cfg.orientation,
            Some(&k_cof),
            &self.k_lap,
            &self.mass,
        );
        Factored::new(&k, self.space(), &self.rows, self.cfg.inner)?.solve(&rhs, &self.zero)
    }
}

fn add(u: &[f64], theta: &[f64]) -> Vec<f64> {
    u.iter().zip(theta).map(|(a, b)| a + b).collect()
}

fn single_step<'s>(space: &'s SplineSpace, u: &SplineFunction<'s>, f: &ScalarField, cfg: IterateConfig) -> Result<SplineFunction<'s>> {
    cfg.validate()?;
    let mut s = Stepper::new(space, &cfg)?;
    let r = s.residual(u.coeffs(), f);
    let theta = s.increment(u.coeffs(), &r).map_err(|source| Error::StepFailed {
        step: 0,
        source,
        min_eig: f64::NAN,
        min_lap: f64::NAN,
    })?;
    Ok(space.function(add(u.coeffs(), &theta)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PtcVariant {
    Laplace,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MarchVariant {
    Laplace,
    Mass,
}

/// One pseudo-transient continuation step; `nu = 0` is a Newton step.
pub fn step_ptc<'s>(
    space: &'s SplineSpace,
    u: &SplineFunction<'s>,
    f: &ScalarField,
    nu: f64,
    variant: PtcVariant,
) -> Result<SplineFunction<'s>> {
    let method = match variant {
        _ if nu == 0.0 => Method::Newton,
        PtcVariant::Laplace => Method::PtcLaplace,
        PtcVariant::Identity => Method::PtcIdentity,
    };
    single_step(space, u, f, IterateConfig::new(method).with_nu(nu))
}

/// One pseudo-time marching step.
pub fn step_march<'s>(
    space: &'s SplineSpace,
    u: &SplineFunction<'s>,
    f: &ScalarField,
    nu: f64,
    variant: MarchVariant,
) -> Result<SplineFunction<'s>> {
    let method = match variant {
        MarchVariant::Laplace => Method::MarchLaplace,
        MarchVariant::Mass => Method::MarchMass,
    };
    single_step(space, u, f, IterateConfig::new(method).with_nu(nu))
}

/// Runs the configured iteration from the Poisson initial guess. The
/// returned outcome always carries the last iterate and the trace.
pub fn run<'s>(
    space: &'s SplineSpace,
    f: &ScalarField,
    g: &dyn Fn(f64, f64) -> f64,
    cfg: &IterateConfig,
    clock: &dyn Clock,
) -> IterationOutcome<'s> {
    let start = clock.seconds();
    let mut trace = IterationTrace::default();
    let fail = |trace: IterationTrace, u: SplineFunction<'s>, e: Error| IterationOutcome {
        solution: u,
        trace,
        error: Some(e),
    };
    if let Err(e) = cfg.validate() {
        return fail(trace, space.zero(), e);
    }
    let setup = (|| -> Result<(Stepper<'s>, KernelProjector, SplineFunction<'s>)> {
        let stepper = Stepper::new(space, cfg)?;
        check_source(&stepper.assembler, f)?;
        let u0 = initial_guess_with(&stepper.assembler, &stepper.k_lap, f, g, cfg.orientation)?;
        let projector = KernelProjector::new(space)?;
        Ok((stepper, projector, u0))
    })();
    let (mut stepper, projector, u0) = match setup {
        Ok(s) => s,
        Err(e) => return fail(trace, space.zero(), e),
    };

    let mut u = u0.into_coeffs();
    let mut increment = 0.0;
    let mut best = f64::INFINITY;
    for k in 0..=cfg.max_iter {
        let r = stepper.residual(&u, f);
        let res = match projector.norm(&r) {
            Ok(v) => v,
            Err(e) => return fail(trace, space.function(u), e),
        };
        let convexity = cfg
            .monitor_convexity
            .then(|| ConvexityReport::from_assembler(&stepper.assembler, &u));
        trace.rows.push(TraceRow {
            k,
            residual: res,
            increment_h1: increment,
            convexity,
            time_s: clock.seconds() - start,
        });
        if res <= cfg.tol {
            return IterationOutcome {
                solution: space.function(u),
                trace,
                error: None,
            };
        }
        best = best.min(res);
        if !res.is_finite() || res > cfg.divergence_factor * best {
            let history = trace.residuals();
            return fail(
                trace,
                space.function(u),
                Error::DivergenceDetected {
                    step: k,
                    residual: res,
                    minimum: best,
                    history,
                },
            );
        }
        if k == cfg.max_iter {
            break;
        }
        let theta = match stepper.increment(&u, &r) {
            Ok(t) => t,
            Err(source) => {
                let (min_eig, min_lap) = convexity.map_or((f64::NAN, f64::NAN), |c| (c.min_eig, c.min_lap));
                return fail(
                    trace,
                    space.function(u),
                    Error::StepFailed {
                        step: k + 1,
                        source,
                        min_eig,
                        min_lap,
                    },
                );
            }
        };
        increment = stepper.k_lap.bilinear(&theta, &theta).max(0.0).sqrt();
        u = add(&u, &theta);
    }
    let history = trace.residuals();
    let last = trace.last_residual();
    fail(
        trace,
        space.function(u),
        Error::NonConvergence {
            iterations: cfg.max_iter,
            last,
            history,
        },
    )
}

/// Runs the configured iteration and returns the converged iterate.
pub fn solve<'s>(
    space: &'s SplineSpace,
    f: &ScalarField,
    g: &dyn Fn(f64, f64) -> f64,
    cfg: &IterateConfig,
) -> Result<(SplineFunction<'s>, IterationTrace)> {
    let out = run(space, f, g, cfg, &NoClock);
    match out.error {
        None => Ok((out.solution, out.trace)),
        Some(e) => Err(e),
    }
}

/// Short description of a configuration, e.g. `march-laplace (nu = 50)`.
pub fn describe(cfg: &IterateConfig) -> String {
    alloc::format!("{} (nu = {})", cfg.method, cfg.nu)
}
