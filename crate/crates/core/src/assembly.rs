//! Element assembly of the discrete forms over the unconstrained
//! (discontinuous) B-form basis.
//!
//! Every matrix here is block diagonal with one `n_loc × n_loc` block per
//! triangle; coupling enters only through the constraint rows. Element
//! loops run in parallel with the `parallel` feature, and contributions are
//! always reduced in triangle order, so results do not depend on the
//! thread count.

use alloc::vec;
use alloc::vec::Vec;

use crate::bform::{quadrature_for, BasisTable, Sym2};
use crate::error::Result;
use crate::linalg::{CsrMatrix, TripletMatrix};
use crate::spline_space::{SplineFunction, SplineSpace};
use crate::{Point2, ScalarField};

/// Cofactor matrix of a symmetric 2×2 matrix: `[[H₂₂, −H₁₂], [−H₁₂, H₁₁]]`.
pub fn cofactor2(h: Sym2) -> Sym2 {
    h.cofactor()
}

/// Quadrature exactness used for assembly at degree `d`: `3d − 4` (the
/// degree of `det D²v ψ` and `cof D²v Dv · Dψ`), but at least `2d` so the
/// mass matrix is exact.
pub fn assembly_exactness(d: usize) -> usize {
    (3 * d).saturating_sub(4).max(2 * d).max(1)
}

pub(crate) fn map_triangles<T, F>(nt: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Send + Sync,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..nt).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..nt).map(f).collect()
    }
}

/// Value, gradient and Hessian of a spline at one quadrature point.
#[derive(Debug, Clone, Copy, Default)]
pub struct PointValues {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: Sym2,
}

/// Quadrature tables bound to a space.
#[derive(Debug, Clone)]
pub struct Assembler<'s> {
    space: &'s SplineSpace,
    table: BasisTable,
}

impl<'s> Assembler<'s> {
    pub fn new(space: &'s SplineSpace) -> Result<Self> {
        Self::with_exactness(space, assembly_exactness(space.degree()))
    }

    pub fn with_exactness(space: &'s SplineSpace, exactness: usize) -> Result<Self> {
        let rule = quadrature_for(exactness)?;
        Ok(Self {
            space,
            table: BasisTable::new(space.degree(), rule),
        })
    }

    pub fn space(&self) -> &'s SplineSpace {
        self.space
    }

    pub fn table(&self) -> &BasisTable {
        &self.table
    }

    pub fn n_points(&self) -> usize {
        self.table.n_points()
    }

    /// Physical quadrature points of triangle `t`.
    pub fn points(&self, t: usize) -> Vec<Point2> {
        let g = self.space.geometry(t);
        self.table.rule.points.iter().map(|p| g.to_cartesian(p.0)).collect()
    }

    /// Integration weights of triangle `t` (reference weights times area).
    pub fn weights(&self, t: usize) -> Vec<f64> {
        let a = self.space.geometry(t).area;
        self.table.rule.weights.iter().map(|w| w * a).collect()
    }

    /// Cartesian gradients of every basis function at every point,
    /// indexed `q * n + j`.
    fn basis_grads(&self, t: usize) -> Vec<[f64; 2]> {
        let g = self.space.geometry(t);
        self.table.d1.iter().map(|d| g.map_grad(d)).collect()
    }

    /// Values and derivatives of `coeffs` at the quadrature points of `t`.
    pub fn point_values(&self, t: usize, coeffs: &[f64]) -> Vec<PointValues> {
        let n = self.table.n_basis();
        let c = &coeffs[self.space.local_range(t)];
        let g = self.space.geometry(t);
        (0..self.table.n_points())
            .map(|q| {
                let mut value = 0.0;
                let mut d1 = [0.0; 3];
                let mut d2 = [0.0; 6];
                for j in 0..n {
                    let cj = c[j];
                    value += cj * self.table.values[q * n + j];
                    let b1 = &self.table.d1[q * n + j];
                    for m in 0..3 {
                        d1[m] += cj * b1[m];
                    }
                    let b2 = &self.table.d2[q * n + j];
                    for m in 0..6 {
                        d2[m] += cj * b2[m];
                    }
                }
                PointValues {
                    value,
                    grad: g.map_grad(&d1),
                    hess: g.map_hess(&d2),
                }
            })
            .collect()
    }

    /// Hessians at every quadrature point, indexed `t * n_points + q`.
    pub fn hessians(&self, coeffs: &[f64]) -> Vec<Sym2> {
        map_triangles(self.space.mesh().n_triangles(), |t| {
            self.point_values(t, coeffs).into_iter().map(|p| p.hess).collect::<Vec<_>>()
        })
        .concat()
    }

    fn block_diagonal(&self, blocks: Vec<Vec<f64>>) -> CsrMatrix {
        let n = self.table.n_basis();
        let size = self.space.dof_count();
        let mut t = TripletMatrix::with_capacity(size, size, blocks.len() * n * n);
        for (tri, block) in blocks.iter().enumerate() {
            let off = tri * n;
            for i in 0..n {
                for j in 0..n {
                    t.push(off + i, off + j, block[i * n + j]);
                }
            }
        }
        t.to_csr()
    }

    fn local_vectors(&self, f: impl Fn(usize) -> Vec<f64> + Send + Sync) -> Vec<f64> {
        map_triangles(self.space.mesh().n_triangles(), f).concat()
    }

    /// `r_j = −½∫ (cof D²v) Dv · Dφ_j − ∫ f φ_j`.
    pub fn residual(&self, v: &[f64], f: &ScalarField) -> Vec<f64> {
        let n = self.table.n_basis();
        self.local_vectors(|t| {
            let vals = self.point_values(t, v);
            let grads = self.basis_grads(t);
            let pts = self.points(t);
            let w = self.weights(t);
            let mut r = vec![0.0; n];
            for q in 0..self.table.n_points() {
                let flux = vals[q].hess.cofactor().apply(vals[q].grad);
                let fq = f(pts[q][0], pts[q][1]);
                for j in 0..n {
                    let g = grads[q * n + j];
                    r[j] -= w[q] * (0.5 * (flux[0] * g[0] + flux[1] * g[1]) + fq * self.table.values[q * n + j]);
                }
            }
            r
        })
    }

    /// `(K_cof)_ij = ∫ (cof D²v) Dφ_i · Dφ_j`.
    pub fn cof_stiffness(&self, v: &[f64]) -> CsrMatrix {
        let n = self.table.n_basis();
        let blocks = map_triangles(self.space.mesh().n_triangles(), |t| {
            let vals = self.point_values(t, v);
            let grads = self.basis_grads(t);
            let w = self.weights(t);
            let mut k = vec![0.0; n * n];
            for q in 0..self.table.n_points() {
                let c = vals[q].hess.cofactor();
                for i in 0..n {
                    let ci = c.apply(grads[q * n + i]);
                    let ci = [w[q] * ci[0], w[q] * ci[1]];
                    for j in 0..n {
                        let gj = grads[q * n + j];
                        k[i * n + j] += ci[0] * gj[0] + ci[1] * gj[1];
                    }
                }
            }
            symmetrize(&mut k, n);
            k
        });
        self.block_diagonal(blocks)
    }

    /// Laplacian stiffness `∫ Dφ_i · Dφ_j` and mass `∫ φ_i φ_j`.
    pub fn laplace_and_mass(&self) -> (CsrMatrix, CsrMatrix) {
        let n = self.table.n_basis();
        let blocks = map_triangles(self.space.mesh().n_triangles(), |t| {
            let grads = self.basis_grads(t);
            let w = self.weights(t);
            let mut k = vec![0.0; n * n];
            let mut m = vec![0.0; n * n];
            for q in 0..self.table.n_points() {
                for i in 0..n {
                    let gi = grads[q * n + i];
                    let vi = w[q] * self.table.values[q * n + i];
                    for j in 0..n {
                        let gj = grads[q * n + j];
                        k[i * n + j] += w[q] * (gi[0] * gj[0] + gi[1] * gj[1]);
                        m[i * n + j] += vi * self.table.values[q * n + j];
                    }
                }
            }
            symmetrize(&mut k, n);
            symmetrize(&mut m, n);
            (k, m)
        });
        let (k, m): (Vec<_>, Vec<_>) = blocks.into_iter().unzip();
        (self.block_diagonal(k), self.block_diagonal(m))
    }

    /// `∫ f φ_j`.
    pub fn load(&self, f: &ScalarField) -> Vec<f64> {
        let n = self.table.n_basis();
        self.local_vectors(|t| {
            let pts = self.points(t);
            let w = self.weights(t);
            let mut r = vec![0.0; n];
            for (q, p) in pts.iter().enumerate() {
                let fq = w[q] * f(p[0], p[1]);
                for j in 0..n {
                    r[j] += fq * self.table.values[q * n + j];
                }
            }
            r
        })
    }

    /// `∫ det(D²v) φ_j`, the non-divergence form of the nonlinear term.
    pub fn det_load(&self, v: &[f64]) -> Vec<f64> {
        let n = self.table.n_basis();
        self.local_vectors(|t| {
            let vals = self.point_values(t, v);
            let w = self.weights(t);
            let mut r = vec![0.0; n];
            for q in 0..self.table.n_points() {
                let dq = w[q] * vals[q].hess.det();
                for j in 0..n {
                    r[j] += dq * self.table.values[q * n + j];
                }
            }
            r
        })
    }
}

/// Removes the rounding asymmetry of a locally accumulated block.
fn symmetrize(a: &mut [f64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            let s = 0.5 * (a[i * n + j] + a[j * n + i]);
            a[i * n + j] = s;
            a[j * n + i] = s;
        }
    }
}

/// Monge–Ampère residual vector of `v` for source `f`.
pub fn assemble_residual(space: &SplineSpace, v: &SplineFunction<'_>, f: &ScalarField) -> Result<Vec<f64>> {
    Ok(Assembler::new(space)?.residual(v.coeffs(), f))
}

/// Cofactor-weighted stiffness at `v`.
pub fn assemble_cof_stiffness(space: &SplineSpace, v: &SplineFunction<'_>) -> Result<CsrMatrix> {
    Ok(Assembler::new(space)?.cof_stiffness(v.coeffs()))
}

/// `(K_lap, M)`.
pub fn assemble_laplace_and_mass(space: &SplineSpace) -> Result<(CsrMatrix, CsrMatrix)> {
    Ok(Assembler::new(space)?.laplace_and_mass())
}

pub fn assemble_load(space: &SplineSpace, f: &ScalarField) -> Result<Vec<f64>> {
    Ok(Assembler::new(space)?.load(f))
}
