//! Constrained linear solvers for systems of the form
//!
//! ```text
//! [ K  Rᵀ ] [ c ]   [ F ]
//! [ R  0  ] [ λ ] = [ G ]
//! ```
//!
//! The direct solver factors the regularized quasi-definite matrix
//! `[K + γRᵀR, Rᵀ; R, −δI]` with a sparse LDLᵀ under a nested-dissection
//! order and then refines against the unregularized system. The `γRᵀR` term
//! leaves the primal solution unchanged; `δ` absorbs redundant constraint
//! rows. The augmented-Lagrangian solver iterates on `K + μ⁻¹RᵀR` instead.

pub mod dense;
pub mod ldl;
pub mod ordering;
pub mod sparse;

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;
use thiserror::Error;

pub use dense::DenseLu;
pub use ldl::LdlFactor;
pub use ordering::nested_dissection;
pub use sparse::{dot, norm2, norm_inf, CsrMatrix, TripletMatrix};

use crate::Point2;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinalgError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error(
        "zero pivot ({pivot:e}) at unknown {index}: the system is singular; \
         the operator may have lost coercivity (non-convex iterate), \
         or try the augmented Lagrangian solver"
    )]
    ZeroPivot { index: usize, pivot: f64 },

    #[error("iterative refinement stalled at relative residual {residual:e}")]
    Inaccurate { residual: f64 },

    #[error("augmented Lagrangian stopped after {iterations} iterations with constraint residual {residual:e}")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("invalid penalty parameter {0}")]
    InvalidPenalty(f64),
}

type LResult<T> = core::result::Result<T, LinalgError>;

/// Target relative residual for refined solves.
pub const REFINE_TARGET: f64 = 1e-13;
/// Largest relative residual accepted from a solve.
pub const ACCEPT_TOL: f64 = 1e-10;
const MAX_REFINE: usize = 10;

/// A saddle-point system `Kc + Rᵀλ = F`, `Rc = G`.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    pub k: CsrMatrix,
    pub f: Vec<f64>,
    pub r: CsrMatrix,
    pub g: Vec<f64>,
    /// Planar position of each primal unknown, used for ordering.
    pub coords: Option<Vec<Point2>>,
}

impl SaddleProblem {
    pub fn new(k: CsrMatrix, f: Vec<f64>, r: CsrMatrix, g: Vec<f64>) -> LResult<Self> {
        let n = k.nrows();
        if k.ncols() != n || f.len() != n || r.ncols() != n || g.len() != r.nrows() {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "K {}x{}, F {}, R {}x{}, G {}",
                k.nrows(),
                k.ncols(),
                f.len(),
                r.nrows(),
                r.ncols(),
                g.len()
            )));
        }
        Ok(Self {
            k,
            f,
            r,
            g,
            coords: None,
        })
    }

    pub fn with_coords(mut self, coords: Vec<Point2>) -> Self {
        assert_eq!(coords.len(), self.k.nrows());
        self.coords = Some(coords);
        self
    }

    /// Relative block residuals `(‖Kc + Rᵀλ − F‖, ‖Rc − G‖)`, scaled by
    /// `‖F‖ + ‖|K||c| + |R|ᵀ|λ|‖` and `‖G‖ + ‖|R||c|‖` respectively.
    pub fn residuals(&self, c: &[f64], lambda: &[f64]) -> (f64, f64) {
        kkt_residuals(&self.k, &self.r, &self.f, &self.g, c, lambda).1
    }
}

#[allow(clippy::type_complexity)]
fn kkt_residuals(
    k: &CsrMatrix,
    r: &CsrMatrix,
    f: &[f64],
    g: &[f64],
    c: &[f64],
    lambda: &[f64],
) -> ((Vec<f64>, Vec<f64>), (f64, f64)) {
    let kc = k.matvec(c);
    let rtl = r.transpose_matvec(lambda);
    let r1: Vec<f64> = (0..f.len()).map(|i| f[i] - kc[i] - rtl[i]).collect();
    let rc = r.matvec(c);
    let r2: Vec<f64> = (0..g.len()).map(|i| g[i] - rc[i]).collect();
    let rel = |res: &[f64], scale: f64| {
        let n = norm2(res);
        if scale > 0.0 {
            n / scale
        } else {
            n
        }
    };
    let s1: Vec<f64> = k
        .abs_matvec(c)
        .iter()
        .zip(r.abs_transpose_matvec(lambda))
        .map(|(a, b)| a + b)
        .collect();
    let e1 = rel(&r1, norm2(f) + norm2(&s1));
    let e2 = rel(&r2, norm2(g) + norm2(&r.abs_matvec(c)));
    ((r1, r2), (e1, e2))
}

fn max_abs_diag(a: &CsrMatrix) -> f64 {
    a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Elimination order for a symmetric matrix whose first `n` unknowns sit at
/// `coords` and whose remaining unknowns are constraint rows of `r`, placed
/// at the mean position of the unknowns they involve.
fn saddle_order(a: &CsrMatrix, r: Option<&CsrMatrix>, coords: Option<&[Point2]>) -> Vec<usize> {
    let total = a.nrows();
    let Some(coords) = coords else {
        return (0..total).collect();
    };
    let mut all: Vec<Point2> = coords.to_vec();
    if let Some(r) = r {
        for i in 0..r.nrows() {
            let (cols, _) = r.row(i);
            let mut p = [0.0, 0.0];
            for &j in cols {
                p[0] += coords[j][0];
                p[1] += coords[j][1];
            }
            let w = cols.len().max(1) as f64;
            all.push([p[0] / w, p[1] / w]);
        }
    }
    nested_dissection(a, &all)
}

/// A factored saddle-point operator, reusable for many right-hand sides.
#[derive(Debug, Clone)]
pub struct KktSolver {
    k: CsrMatrix,
    r: CsrMatrix,
    gamma: f64,
    factor: LdlFactor,
}

/// Primal and dual solution of a saddle-point solve.
#[derive(Debug, Clone)]
pub struct KktSolution {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    /// Relative residuals of the two block equations.
    pub residuals: (f64, f64),
    pub refinement_steps: usize,
}

impl KktSolver {
    pub fn new(k: &CsrMatrix, r: &CsrMatrix, coords: Option<&[Point2]>) -> LResult<Self> {
        let n = k.nrows();
        let m = r.nrows();
        if k.ncols() != n || r.ncols() != n {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "K {}x{}, R {}x{}",
                k.nrows(),
                k.ncols(),
                m,
                r.ncols()
            )));
        }
        let s_k = max_abs_diag(k).max(f64::MIN_POSITIVE);
        let rtr = r.gram();
        let s_r = max_abs_diag(&rtr);
        let (gamma, delta) = if s_r > 0.0 {
            (s_k / s_r, 1e-10 * s_r / s_k)
        } else {
            (0.0, 0.0)
        };

        let mut t = TripletMatrix::with_capacity(n + m, n + m, k.nnz() + rtr.nnz() + 2 * r.nnz() + m);
        for (i, j, v) in k.iter() {
            t.push(i, j, v);
        }
        for (i, j, v) in rtr.iter() {
            t.push(i, j, gamma * v);
        }
        for (i, j, v) in r.iter() {
            t.push(n + i, j, v);
            t.push(j, n + i, v);
        }
        for i in 0..m {
            t.push(n + i, n + i, -delta);
        }
        let a = t.to_csr();
        let order = saddle_order(&a, Some(r), coords);
        let primal_tol = 1e-14 * s_k;
        let dual_tol = 1e-3 * delta;
        let factor = LdlFactor::factor(&a, order, |i| if i < n { primal_tol } else { dual_tol })?;
        Ok(Self {
            k: k.clone(),
            r: r.clone(),
            gamma,
            factor,
        })
    }

    pub fn n(&self) -> usize {
        self.k.nrows()
    }

    pub fn m(&self) -> usize {
        self.r.nrows()
    }

    /// True when every primal pivot is positive, i.e. `K` is positive
    /// definite on the kernel of `R`.
    pub fn coercive(&self) -> bool {
        let n = self.n();
        self.factor.indexed_pivots().all(|(i, d)| i >= n || d > 0.0)
    }

    fn raw_solve(&self, r1: &[f64], r2: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n();
        let mut rhs = Vec::with_capacity(n + self.m());
        rhs.extend_from_slice(r1);
        rhs.extend_from_slice(r2);
        let mut x = self.factor.solve(&rhs);
        let mu = x.split_off(n);
        // Undo the γRᵀR shift: λ = μ + γ R c.
        let rc = self.r.matvec(&x);
        let lambda = mu.iter().zip(&rc).map(|(m, v)| m + self.gamma * v).collect();
        (x, lambda)
    }

    /// Solves `Kc + Rᵀλ = F`, `Rc = G` with iterative refinement.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> LResult<KktSolution> {
        if f.len() != self.n() || g.len() != self.m() {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "right-hand side lengths {} and {}, expected {} and {}",
                f.len(),
                g.len(),
                self.n(),
                self.m()
            )));
        }
        let (mut c, mut lambda) = self.raw_solve(f, g);
        let ((mut r1, mut r2), mut err) = kkt_residuals(&self.k, &self.r, f, g, &c, &lambda);
        let mut steps = 0;
        while err.0.max(err.1) > REFINE_TARGET && steps < MAX_REFINE {
            let (dc, dl) = self.raw_solve(&r1, &r2);
            let c_new: Vec<f64> = c.iter().zip(&dc).map(|(a, b)| a + b).collect();
            let l_new: Vec<f64> = lambda.iter().zip(&dl).map(|(a, b)| a + b).collect();
            let (res, e) = kkt_residuals(&self.k, &self.r, f, g, &c_new, &l_new);
            steps += 1;
            if e.0.max(e.1) >= err.0.max(err.1) {
                break;
            }
            c = c_new;
            lambda = l_new;
            (r1, r2) = res;
            err = e;
        }
        if !(err.0.max(err.1) <= ACCEPT_TOL) {
            return Err(LinalgError::Inaccurate {
                residual: err.0.max(err.1),
            });
        }
        Ok(KktSolution {
            c,
            lambda,
            residuals: err,
            refinement_steps: steps,
        })
    }
}

/// Direct solve of a saddle-point problem, returning `(c, λ)`.
pub fn solve_kkt(p: &SaddleProblem) -> LResult<(Vec<f64>, Vec<f64>)> {
    let s = KktSolver::new(&p.k, &p.r, p.coords.as_deref())?;
    let sol = s.solve(&p.f, &p.g)?;
    Ok((sol.c, sol.lambda))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ALConfig {
    /// Penalty `μ`; the penalized operator is `K + μ⁻¹RᵀR`.
    pub mu: f64,
    pub tol: f64,
    pub max_outer: usize,
}

impl Default for ALConfig {
    fn default() -> Self {
        Self {
            mu: 1e-6,
            tol: 1e-12,
            max_outer: 200,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ALSolution {
    pub c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iterations: usize,
    /// `‖Rc − G‖` after each outer iteration.
    pub constraint_residuals: Vec<f64>,
}

/// A factored `K + μ⁻¹RᵀR`, reusable across right-hand sides.
#[derive(Debug, Clone)]
pub struct AugmentedLagrangian {
    k: CsrMatrix,
    r: CsrMatrix,
    penalized: CsrMatrix,
    factor: LdlFactor,
    cfg: ALConfig,
}

impl AugmentedLagrangian {
    pub fn new(k: &CsrMatrix, r: &CsrMatrix, coords: Option<&[Point2]>, cfg: ALConfig) -> LResult<Self> {
        if !(cfg.mu > 0.0) {
            return Err(LinalgError::InvalidPenalty(cfg.mu));
        }
        if k.nrows() != k.ncols() || r.ncols() != k.nrows() {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "K {}x{}, R {}x{}",
                k.nrows(),
                k.ncols(),
                r.nrows(),
                r.ncols()
            )));
        }
        let penalized = k.add_scaled(1.0, &r.gram(), 1.0 / cfg.mu);
        let order = saddle_order(&penalized, None, coords);
        let tol = 1e-14 * max_abs_diag(&penalized);
        let factor = LdlFactor::factor(&penalized, order, |_| tol)?;
        Ok(Self {
            k: k.clone(),
            r: r.clone(),
            penalized,
            factor,
            cfg,
        })
    }

    /// Solves `penalized · x = b` with a few steps of refinement.
    fn inner_solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = self.factor.solve(b);
        let bn = norm2(b);
        for _ in 0..3 {
            let ax = self.penalized.matvec(&x);
            let res: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
            if norm2(&res) <= 1e-15 * bn {
                break;
            }
            let dx = self.factor.solve(&res);
            x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
        }
        x
    }

    pub fn solve(&self, f: &[f64], g: &[f64]) -> LResult<ALSolution> {
        let n = self.k.nrows();
        let m = self.r.nrows();
        if f.len() != n || g.len() != m {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "right-hand side lengths {} and {}, expected {} and {}",
                f.len(),
                g.len(),
                n,
                m
            )));
        }
        let inv_mu = 1.0 / self.cfg.mu;
        let rtg = self.r.transpose_matvec(g);
        let stop = self.cfg.tol * (1.0 + norm2(g));
        let mut lambda = vec![0.0; m];
        let mut history = Vec::new();
        let mut c = vec![0.0; n];
        for it in 1..=self.cfg.max_outer {
            let rtl = self.r.transpose_matvec(&lambda);
            let rhs: Vec<f64> = (0..n).map(|i| f[i] - rtl[i] + inv_mu * rtg[i]).collect();
            c = self.inner_solve(&rhs);
            let rc = self.r.matvec(&c);
            let viol: Vec<f64> = rc.iter().zip(g).map(|(a, b)| a - b).collect();
            let res = norm2(&viol);
            history.push(res);
            if res <= stop {
                return Ok(ALSolution {
                    c,
                    lambda,
                    iterations: it,
                    constraint_residuals: history,
                });
            }
            lambda.iter_mut().zip(&viol).for_each(|(l, v)| *l += inv_mu * v);
        }
        let _ = c;
        Err(LinalgError::NoConvergence {
            iterations: self.cfg.max_outer,
            residual: history.last().copied().unwrap_or(f64::NAN),
        })
    }
}

/// Augmented-Lagrangian solve of a saddle-point problem.
pub fn solve_augmented_lagrangian(p: &SaddleProblem, cfg: ALConfig) -> LResult<ALSolution> {
    AugmentedLagrangian::new(&p.k, &p.r, p.coords.as_deref(), cfg)?.solve(&p.f, &p.g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(seed: u64, n: usize, m: usize) -> SaddleProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut b = TripletMatrix::new(n, n);
        for i in 0..n {
            for _ in 0..3 {
                b.push(i, rng.gen_range(0..n), rng.gen_range(-1.0..1.0));
            }
        }
        let b = b.to_csr();
        let k = b.gram().add_scaled(1.0, &CsrMatrix::identity(n), 0.5);
        let mut r = TripletMatrix::new(m, n);
        for i in 0..m {
            r.push(i, i, 1.0 + rng.gen_range(0.0..1.0));
            for _ in 0..2 {
                r.push(i, rng.gen_range(m..n), rng.gen_range(-1.0..1.0));
            }
        }
        let f = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let g = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        SaddleProblem::new(k, f, r.to_csr(), g).unwrap()
    }

    #[test]
    fn unconstrained_is_plain_solve() {
        let k = CsrMatrix::from_dense(&[vec![4.0, 1.0], vec![1.0, 3.0]]);
        let p = SaddleProblem::new(k, vec![1.0, 2.0], CsrMatrix::zeros(0, 2), vec![]).unwrap();
        let (c, l) = solve_kkt(&p).unwrap();
        assert!(l.is_empty());
        assert!((c[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((c[1] - 7.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn pinned_first_unknown() {
        let n = 5;
        let r = CsrMatrix::from_dense(&[vec![1.0, 0.0, 0.0, 0.0, 0.0]]);
        let p = SaddleProblem::new(CsrMatrix::identity(n), vec![0.0; n], r, vec![5.0]).unwrap();
        let (c, l) = solve_kkt(&p).unwrap();
        assert!((c[0] - 5.0).abs() < 1e-12);
        assert!(c[1..].iter().all(|v| v.abs() < 1e-12));
        assert!((l[0] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn random_spd_residuals() {
        for seed in 0..5 {
            let p = random_instance(seed, 60, 15);
            let (c, l) = solve_kkt(&p).unwrap();
            let (e1, e2) = p.residuals(&c, &l);
            assert!(e1 <= 1e-10 && e2 <= 1e-10, "seed {seed}: {e1:e} {e2:e}");
        }
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let mut p = random_instance(7, 40, 10);
        let dup = p.r.vstack(&p.r);
        let mut g = p.g.clone();
        g.extend_from_slice(&p.g.clone());
        p.r = dup;
        p.g = g;
        let (c, l) = solve_kkt(&p).unwrap();
        let (e1, e2) = p.residuals(&c, &l);
        assert!(e1 <= 1e-10 && e2 <= 1e-10, "{e1:e} {e2:e}");
    }

    #[test]
    fn augmented_lagrangian_matches_direct() {
        let p = random_instance(3, 60, 15);
        let (c, _) = solve_kkt(&p).unwrap();
        let al = solve_augmented_lagrangian(&p, ALConfig::default()).unwrap();
        let diff: Vec<f64> = c.iter().zip(&al.c).map(|(a, b)| a - b).collect();
        assert!(norm2(&diff) <= 1e-8 * norm2(&c));
        for w in al.constraint_residuals.windows(2) {
            assert!(w[1] < w[0]);
        }
    }

    #[test]
    fn augmented_lagrangian_zero_data() {
        let p = random_instance(4, 20, 5);
        let p = SaddleProblem::new(p.k, vec![0.0; 20], p.r, vec![0.0; 5]).unwrap();
        let al = solve_augmented_lagrangian(&p, ALConfig::default()).unwrap();
        assert_eq!(al.iterations, 1);
        assert!(al.c.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn penalty_must_be_positive() {
        let p = random_instance(4, 10, 2);
        let cfg = ALConfig {
            mu: 0.0,
            ..ALConfig::default()
        };
        assert!(matches!(
            solve_augmented_lagrangian(&p, cfg),
            Err(LinalgError::InvalidPenalty(_))
        ));
    }

    #[test]
    fn nested_dissection_order_gives_same_answer() {
        let p = random_instance(9, 80, 20);
        let coords: Vec<Point2> = (0..80).map(|i| [(i % 9) as f64, (i / 9) as f64]).collect();
        let (c0, _) = solve_kkt(&p).unwrap();
        let (c1, _) = solve_kkt(&p.clone().with_coords(coords)).unwrap();
        for (a, b) in c0.iter().zip(&c1) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }
}
