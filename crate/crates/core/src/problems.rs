//! Builtin test problems, error norms and convergence studies.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::bform::{quadrature_for, BasisTable, Sym2};
use crate::error::{Error, Result};
use crate::iterate::{self, Clock, IterateConfig};
use crate::mesh::{build_disk_mesh, build_square_mesh, Triangulation};
use crate::spline_space::{SplineFunction, SplineSpace};
use crate::ScalarField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    /// The unit square `[0, 1]²`.
    Square,
    /// The unit disk.
    Disk,
    /// A user-supplied mesh.
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    Convex,
    Concave,
    Degenerate,
}

/// An exact solution with its first and second derivatives.
pub struct ExactSolution {
    pub u: Box<ScalarField<'static>>,
    pub grad: Box<dyn Fn(f64, f64) -> [f64; 2] + Send + Sync>,
    pub hess: Box<dyn Fn(f64, f64) -> Sym2 + Send + Sync>,
}

pub struct ProblemSpec {
    pub name: String,
    pub domain: Domain,
    pub f: Box<ScalarField<'static>>,
    pub g: Box<ScalarField<'static>>,
    pub exact: Option<ExactSolution>,
    pub convexity: Convexity,
}

impl core::fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("exact", &self.exact.is_some())
            .field("convexity", &self.convexity)
            .finish()
    }
}

/// Names accepted by [`builtin`].
pub const BUILTIN_NAMES: [&str; 6] = ["test1", "test3", "test4", "test5", "test6", "quadratic"];

/// A builtin problem:
///
/// - `test1`: `u = e^{(x²+y²)/2}`, `f = (1+x²+y²)e^{x²+y²}` on the square.
/// - `test3`: `f = 1`, `g = 0` on the square (no closed form).
/// - `test4`: `u = −√(2−x²−y²)`, `f = 2/(2−x²−y²)²` on the square.
/// - `test5`: `u = x²+y²−1`, `f = 4` on the unit disk; `g = u` vanishes on the circle.
/// - `test6`: `f = 0`, `g = |x−½|` on the square (degenerate).
/// - `quadratic`: `u = x²+y²`, `f = 4` on the square.
pub fn builtin(name: &str) -> Result<ProblemSpec> {
    let spec = match name {
        "test1" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Square,
            f: Box::new(|x, y| {
                let r2 = x * x + y * y;
                (1.0 + r2) * r2.exp()
            }),
            g: Box::new(|x, y| (0.5 * (x * x + y * y)).exp()),
            exact: Some(ExactSolution {
                u: Box::new(|x, y| (0.5 * (x * x + y * y)).exp()),
                grad: Box::new(|x, y| {
                    let u = (0.5 * (x * x + y * y)).exp();
                    [x * u, y * u]
                }),
                hess: Box::new(|x, y| {
                    let u = (0.5 * (x * x + y * y)).exp();
                    Sym2::new(u * (1.0 + x * x), u * x * y, u * (1.0 + y * y))
                }),
            }),
            convexity: Convexity::Convex,
        },
        "test3" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Square,
            f: Box::new(|_, _| 1.0),
            g: Box::new(|_, _| 0.0),
            exact: None,
            convexity: Convexity::Convex,
        },
        "test4" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Square,
            f: Box::new(|x, y| {
                let s = 2.0 - x * x - y * y;
                2.0 / (s * s)
            }),
            g: Box::new(|x, y| -(2.0 - x * x - y * y).sqrt()),
            exact: Some(ExactSolution {
                u: Box::new(|x, y| -(2.0 - x * x - y * y).sqrt()),
                grad: Box::new(|x, y| {
                    let r = (2.0 - x * x - y * y).sqrt();
                    [x / r, y / r]
                }),
                hess: Box::new(|x, y| {
                    let s = 2.0 - x * x - y * y;
                    let s32 = s * s.sqrt();
                    Sym2::new((s + x * x) / s32, x * y / s32, (s + y * y) / s32)
                }),
            }),
            convexity: Convexity::Convex,
        },
        "test5" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Disk,
            f: Box::new(|_, _| 4.0),
            g: Box::new(|x, y| x * x + y * y - 1.0),
            exact: Some(ExactSolution {
                u: Box::new(|x, y| x * x + y * y - 1.0),
                grad: Box::new(|x, y| [2.0 * x, 2.0 * y]),
                hess: Box::new(|_, _| Sym2::new(2.0, 0.0, 2.0)),
            }),
            convexity: Convexity::Convex,
        },
        "test6" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Square,
            f: Box::new(|_, _| 0.0),
            g: Box::new(|x, _| (x - 0.5).abs()),
            exact: None,
            convexity: Convexity::Degenerate,
        },
        "quadratic" => ProblemSpec {
            name: name.to_string(),
            domain: Domain::Square,
            f: Box::new(|_, _| 4.0),
            g: Box::new(|x, y| x * x + y * y),
            exact: Some(ExactSolution {
                u: Box::new(|x, y| x * x + y * y),
                grad: Box::new(|x, y| [2.0 * x, 2.0 * y]),
                hess: Box::new(|_, _| Sym2::new(2.0, 0.0, 2.0)),
            }),
            convexity: Convexity::Convex,
        },
        other => return Err(Error::UnknownProblem(other.to_string())),
    };
    Ok(spec)
}

/// Mesh of refinement level `level` for a builtin domain: `2^level`
/// squares per side on the square, `2^level` rings on the disk.
pub fn level_mesh(domain: Domain, level: u32) -> Result<Triangulation> {
    let k = 1usize << level;
    match domain {
        Domain::Square => Ok(build_square_mesh(k)),
        Domain::Disk => Ok(build_disk_mesh(k)),
        Domain::External => Err(Error::InvalidConfig("external domains have no builtin mesh".into())),
    }
}

/// Nominal mesh size: the leg `1/m` on structured square meshes, the
/// longest edge otherwise.
pub fn nominal_h(domain: Domain, mesh: &Triangulation) -> f64 {
    match domain {
        Domain::Square => mesh.h_max() / core::f64::consts::SQRT_2,
        _ => mesh.h_max(),
    }
}

/// Errors measured in full norms; the H² norm uses elementwise second
/// derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
}

/// `u_h − u` in L², H¹ and broken H², with a rule of exactness `2d + 2`.
pub fn error_norms(u_h: &SplineFunction<'_>, exact: &ExactSolution) -> Result<ErrorNorms> {
    let space = u_h.space();
    let d = space.degree();
    let rule = quadrature_for((2 * d + 2).min(crate::bform::MAX_QUADRATURE_DEGREE))?;
    let table = BasisTable::new(d, rule);
    let n = table.n_basis();
    let (mut e0, mut e1, mut e2) = (0.0, 0.0, 0.0);
    for t in 0..space.mesh().n_triangles() {
        let geom = space.geometry(t);
        let c = &u_h.coeffs()[space.local_range(t)];
        for (q, (p, w)) in table.rule.points.iter().zip(&table.rule.weights).enumerate() {
            let x = geom.to_cartesian(p.0);
            let (mut v, mut d1, mut d2) = (0.0, [0.0; 3], [0.0; 6]);
            for j in 0..n {
                v += c[j] * table.values[q * n + j];
                for m in 0..3 {
                    d1[m] += c[j] * table.d1[q * n + j][m];
                }
                for m in 0..6 {
                    d2[m] += c[j] * table.d2[q * n + j][m];
                }
            }
            let g = geom.map_grad(&d1);
            let h = geom.map_hess(&d2);
            let ge = (exact.grad)(x[0], x[1]);
            let he = (exact.hess)(x[0], x[1]);
            let wa = w * geom.area;
            e0 += wa * (v - (exact.u)(x[0], x[1])).powi(2);
            e1 += wa * ((g[0] - ge[0]).powi(2) + (g[1] - ge[1]).powi(2));
            e2 += wa * ((h.xx - he.xx).powi(2) + 2.0 * (h.xy - he.xy).powi(2) + (h.yy - he.yy).powi(2));
        }
    }
    Ok(ErrorNorms {
        l2: e0.sqrt(),
        h1: (e0 + e1).sqrt(),
        h2: (e0 + e1 + e2).sqrt(),
    })
}

/// `log(e_prev / e) / log(h_prev / h)`.
pub fn rate(e_prev: f64, e: f64, h_prev: f64, h: f64) -> f64 {
    (e_prev / e).ln() / (h_prev / h).ln()
}

/// One level of a convergence study.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub h: f64,
    pub dof: usize,
    pub n_it: usize,
    /// `None` when the problem has no exact solution.
    pub errors: Option<ErrorNorms>,
    /// Rates against the previous successful level.
    pub rates: Option<ErrorNorms>,
    pub final_residual: f64,
    pub time_s: f64,
    /// Solver failure at this level, if any.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct StudyTable {
    pub rows: Vec<ErrorReport>,
}

pub const STUDY_HEADER: &str = "h,dof,n_it,l2,rate_l2,h1,rate_h1,h2,rate_h2,time_s";

impl StudyTable {
    /// CSV with [`STUDY_HEADER`]; unavailable values are written as `nan`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(STUDY_HEADER);
        out.push('\n');
        let sci = |v: f64| format!("{v:.5e}");
        let opt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), sci);
        for r in &self.rows {
            let e = r.errors;
            let k = r.rates;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                sci(r.h),
                r.dof,
                r.n_it,
                opt(e.map(|e| e.l2)),
                opt(k.map(|k| k.l2)),
                opt(e.map(|e| e.h1)),
                opt(k.map(|k| k.h1)),
                opt(e.map(|e| e.h2)),
                opt(k.map(|k| k.h2)),
                sci(r.time_s),
            ));
        }
        out
    }
}

/// Solves `problem` on each mesh and tabulates errors and rates. A level
/// that fails is recorded and the study moves on.
pub fn convergence_study(
    problem: &ProblemSpec,
    cfg: &IterateConfig,
    degree: usize,
    meshes: Vec<Triangulation>,
    clock: &dyn Clock,
) -> Result<StudyTable> {
    let mut table = StudyTable::default();
    let mut last: Option<(f64, ErrorNorms)> = None;
    for mesh in meshes {
        let h = nominal_h(problem.domain, &mesh);
        let space = SplineSpace::new(mesh, degree)?;
        let start = clock.seconds();
        let outcome = iterate::run(&space, &*problem.f, &*problem.g, cfg, clock);
        let time_s = clock.seconds() - start;
        let n_it = outcome.trace.steps();
        let final_residual = outcome.trace.last_residual();
        let failure = outcome.error.as_ref().map(|e| e.to_string());
        let errors = match (&problem.exact, &failure) {
            (Some(ex), None) => Some(error_norms(&outcome.solution, ex)?),
            _ => None,
        };
        let rates = match (last, errors) {
            (Some((hp, ep)), Some(e)) => Some(ErrorNorms {
                l2: rate(ep.l2, e.l2, hp, h),
                h1: rate(ep.h1, e.h1, hp, h),
                h2: rate(ep.h2, e.h2, hp, h),
            }),
            _ => None,
        };
        if let Some(e) = errors {
            last = Some((h, e));
        }
        table.rows.push(ErrorReport {
            h,
            dof: space.dof_count(),
            n_it,
            errors,
            rates,
            final_residual,
            time_s,
            failure,
        });
    }
    Ok(table)
}
