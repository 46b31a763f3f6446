//! Finite-difference time marching on uniform grids of the unit square.
//!
//! Each step solves `−ν Δ_h u_{k+1} = −ν Δ_h u_k + (u_xx u_yy − u_xy²)_h − f`
//! with the 5-point Laplacian and central second differences. This module
//! shares no discretization code with the spline solver.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::spline_space::SplineFunction;

/// Nodal values on the `n × n` grid of `[0, 1]²`; index `i * n + j` is the
/// point `(j h, i h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    pub n: usize,
    pub h: f64,
    pub values: Vec<f64>,
    pub boundary: Vec<bool>,
}

impl Grid2D {
    /// Grid with `values(x, y)` everywhere.
    pub fn from_fn(n: usize, u: &dyn Fn(f64, f64) -> f64) -> Self {
        let h = 1.0 / (n - 1) as f64;
        let mut values = Vec::with_capacity(n * n);
        let mut boundary = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(u(j as f64 * h, i as f64 * h));
                boundary.push(i == 0 || j == 0 || i == n - 1 || j == n - 1);
            }
        }
        Self { n, h, values, boundary }
    }

    pub fn point(&self, i: usize, j: usize) -> [f64; 2] {
        [j as f64 * self.h, i as f64 * self.h]
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    /// Maximum nodal error against `exact`.
    pub fn max_error(&self, exact: &dyn Fn(f64, f64) -> f64) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                let p = self.point(i, j);
                worst = worst.max((self.at(i, j) - exact(p[0], p[1])).abs());
            }
        }
        worst
    }

    /// `u_xx u_yy − u_xy²` by central differences at interior node `(i, j)`.
    fn det_hessian(&self, i: usize, j: usize) -> f64 {
        let n = self.n;
        let u = &self.values;
        let h2 = self.h * self.h;
        let c = u[i * n + j];
        let uxx = (u[i * n + j + 1] - 2.0 * c + u[i * n + j - 1]) / h2;
        let uyy = (u[(i + 1) * n + j] - 2.0 * c + u[(i - 1) * n + j]) / h2;
        let uxy = (u[(i + 1) * n + j + 1] - u[(i + 1) * n + j - 1] - u[(i - 1) * n + j + 1]
            + u[(i - 1) * n + j - 1])
            / (4.0 * h2);
        uxx * uyy - uxy * uxy
    }
}

/// Cholesky factor of the interior 5-point stencil `4u_p − Σ u_nb`, stored by
/// rows within bandwidth `m` (the interior width).
struct BandedPoisson {
    m: usize,
    /// Row `p` holds `L[p][p − m ..= p]` at offsets `0..=m`.
    l: Vec<f64>,
}

impl BandedPoisson {
    fn new(m: usize) -> Self {
        let size = m * m;
        let w = m + 1;
        let mut a = vec![0.0; size * w];
        for p in 0..size {
            a[p * w + m] = 4.0;
            if p % m != 0 {
                a[p * w + m - 1] = -1.0;
            }
            if p >= m {
                a[p * w] = -1.0;
            }
        }
        for p in 0..size {
            let lo = p.saturating_sub(m);
            for q in lo..=p {
                let qlo = q.saturating_sub(m).max(lo);
                let mut s = a[p * w + m + q - p];
                for k in qlo..q {
                    s -= a[p * w + m + k - p] * a[q * w + m + k - q];
                }
                if q == p {
                    a[p * w + m] = s.sqrt();
                } else {
                    a[p * w + m + q - p] = s / a[q * w + m];
                }
            }
        }
        Self { m, l: a }
    }

    fn solve(&self, b: &mut [f64]) {
        let m = self.m;
        let w = m + 1;
        let size = m * m;
        for p in 0..size {
            let lo = p.saturating_sub(m);
            let mut s = b[p];
            for k in lo..p {
                s -= self.l[p * w + m + k - p] * b[k];
            }
            b[p] = s / self.l[p * w + m];
        }
        for p in (0..size).rev() {
            let b_p = b[p] / self.l[p * w + m];
            b[p] = b_p;
            let lo = p.saturating_sub(m);
            for k in lo..p {
                b[k] -= self.l[p * w + m + k - p] * b_p;
            }
        }
    }
}

/// Solves `−Δ_h θ = rhs` at interior nodes with `θ = 0` on the boundary and
/// returns the interior values.
fn poisson_increment(solver: &BandedPoisson, grid: &Grid2D, rhs: &dyn Fn(usize, usize) -> f64) -> Vec<f64> {
    let n = grid.n;
    let m = n - 2;
    let h2 = grid.h * grid.h;
    let mut b = vec![0.0; m * m];
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            b[(i - 1) * m + j - 1] = h2 * rhs(i, j);
        }
    }
    solver.solve(&mut b);
    b
}

fn discrete_laplacian(grid: &Grid2D, i: usize, j: usize) -> f64 {
    let n = grid.n;
    let u = &grid.values;
    (u[i * n + j + 1] + u[i * n + j - 1] + u[(i + 1) * n + j] + u[(i - 1) * n + j] - 4.0 * u[i * n + j])
        / (grid.h * grid.h)
}

/// Result of [`fd_march_from`].
#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    pub grid: Grid2D,
    pub iterations: usize,
    /// Max-norm update of each step.
    pub updates: Vec<f64>,
}

fn check_args(n: usize, nu: f64) -> Result<()> {
    if n < 5 {
        return Err(Error::FiniteDifference(format!("need at least 5 points per side (got {n})")));
    }
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::FiniteDifference(format!("nu must be positive (got {nu})")));
    }
    Ok(())
}

/// Poisson initial guess `Δ_h u₀ = 2√f` with `u₀ = g` on the boundary.
pub fn fd_initial_guess(f: &dyn Fn(f64, f64) -> f64, g: &dyn Fn(f64, f64) -> f64, n: usize) -> Result<Grid2D> {
    check_args(n, 1.0)?;
    let mut grid = Grid2D::from_fn(n, g);
    let solver = BandedPoisson::new(n - 2);
    let base = grid.clone();
    let theta = poisson_increment(&solver, &grid, &|i, j| {
        let p = base.point(i, j);
        -2.0 * f(p[0], p[1]).max(0.0).sqrt() + discrete_laplacian(&base, i, j)
    });
    apply(&mut grid, &theta);
    Ok(grid)
}

fn apply(grid: &mut Grid2D, theta: &[f64]) -> f64 {
    let n = grid.n;
    let m = n - 2;
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        for j in 1..n - 1 {
            let t = theta[(i - 1) * m + j - 1];
            grid.values[i * n + j] += t;
            if !t.is_finite() {
                return f64::NAN;
            }
            worst = worst.max(t.abs());
        }
    }
    worst
}

/// Marches from `start` until the max-norm update is at most `tol`.
pub fn fd_march_from(
    start: Grid2D,
    f: &dyn Fn(f64, f64) -> f64,
    nu: f64,
    tol: f64,
    max_iter: usize,
) -> Result<FdSolution> {
    check_args(start.n, nu)?;
    let mut grid = start;
    let solver = BandedPoisson::new(grid.n - 2);
    let mut updates = Vec::new();
    for k in 1..=max_iter {
        let current = grid.clone();
        let theta = poisson_increment(&solver, &grid, &|i, j| {
            let p = current.point(i, j);
            (current.det_hessian(i, j) - f(p[0], p[1])) / nu
        });
        let step = apply(&mut grid, &theta);
        updates.push(step);
        if !step.is_finite() {
            return Err(Error::FiniteDifference(format!("NaN or overflow at step {k}")));
        }
        if step <= tol {
            return Ok(FdSolution {
                grid,
                iterations: k,
                updates,
            });
        }
    }
    Err(Error::FiniteDifference(format!(
        "no convergence after {max_iter} steps (last update {:e})",
        updates.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Finite-difference marching from the Poisson initial guess.
pub fn fd_march(
    f: &dyn Fn(f64, f64) -> f64,
    g: &dyn Fn(f64, f64) -> f64,
    n: usize,
    nu: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Grid2D> {
    check_args(n, nu)?;
    let start = fd_initial_guess(f, g, n)?;
    Ok(fd_march_from(start, f, nu, tol, max_iter)?.grid)
}

/// Maximum of `|grid − u_h|` over interior grid nodes inside the mesh.
pub fn compare_to_spline(grid: &Grid2D, u_h: &SplineFunction<'_>) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 1..grid.n - 1 {
        for j in 1..grid.n - 1 {
            if let Some(v) = u_h.eval(grid.point(i, j)) {
                worst = worst.max((v - grid.at(i, j)).abs());
            }
        }
    }
    worst
}
