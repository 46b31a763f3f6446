//! `S¹_d(T)` as unconstrained piecewise B-form coefficients plus linear
//! side conditions `R c = G`.
//!
//! Coefficient `j` of triangle `t` has global index `t · n_loc + j` where
//! `n_loc = (d+1)(d+2)/2`. Smoothness rows tie coefficients across interior
//! edges (C⁰ then C¹); boundary rows pin the coefficients on boundary edges.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::assembly;
use crate::bform::{coeff_index, multi_indices, n_coeffs, BTriPoly, BarycentricPoint, Sym2, TriangleGeometry};
use crate::error::{Error, Result};
use crate::linalg::{norm2, CsrMatrix, DenseLu, KktSolver, LinalgError, TripletMatrix};
use crate::mesh::{PointLocator, Triangulation};
use crate::{Point2, ScalarField};

/// Bernstein polynomial `B^d_k(s) = C(d,k) s^k (1-s)^(d-k)` on `[0, 1]`.
fn bernstein_1d(d: usize, k: usize, s: f64) -> f64 {
    let mut binom = 1.0;
    for i in 0..k {
        binom = binom * (d - i) as f64 / (i + 1) as f64;
    }
    binom * s.powi(k as i32) * (1.0 - s).powi((d - k) as i32)
}

/// Key identifying a domain point independent of the triangle it is seen
/// from: the (vertex, power) pairs with positive power, sorted.
type PointKey = [(usize, usize); 3];

fn point_key(verts: [usize; 3], alpha: [usize; 3]) -> PointKey {
    let mut key = [(usize::MAX, 0); 3];
    for i in 0..3 {
        if alpha[i] > 0 {
            key[i] = (verts[i], alpha[i]);
        }
    }
    key.sort_unstable();
    key
}

#[derive(Debug, Clone)]
pub struct SplineSpace {
    mesh: Triangulation,
    degree: usize,
    n_local: usize,
    geometry: Vec<TriangleGeometry>,
    domain_points: Vec<Point2>,
    master: Vec<usize>,
    smoothness: CsrMatrix,
    n_c0_rows: usize,
    /// Boundary edges `[a, b]` in counterclockwise order, with the global
    /// indices of their `d + 1` edge coefficients from `a` to `b`.
    boundary_edges: Vec<([usize; 2], Vec<usize>)>,
    pinned: Vec<usize>,
    boundary: CsrMatrix,
    locator: PointLocator,
}

impl SplineSpace {
    /// Builds the space of degree `degree ≥ 1` on `mesh`.
    pub fn new(mesh: Triangulation, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidConfig("spline degree must be at least 1".into()));
        }
        let n_local = n_coeffs(degree);
        let nt = mesh.n_triangles();
        let alphas = multi_indices(degree);
        let geometry: Vec<TriangleGeometry> = (0..nt)
            .map(|t| TriangleGeometry::new(mesh.triangle_points(t)))
            .collect();

        let mut domain_points = Vec::with_capacity(nt * n_local);
        let mut master = Vec::with_capacity(nt * n_local);
        let mut first: BTreeMap<PointKey, usize> = BTreeMap::new();
        let mut c0 = Vec::new();
        let df = degree as f64;
        for t in 0..nt {
            let verts = mesh.triangles()[t];
            for (j, &a) in alphas.iter().enumerate() {
                let g = t * n_local + j;
                let b = a.map(|v| v as f64 / df);
                domain_points.push(geometry[t].to_cartesian(b));
                if a.iter().all(|&p| p > 0) {
                    master.push(g);
                    continue;
                }
                let m = *first.entry(point_key(verts, a)).or_insert(g);
                master.push(m);
                if m != g {
                    c0.push((g, m));
                }
            }
        }

        let n_c0_rows = c0.len();
        let mut row_entries: Vec<Vec<(usize, f64)>> = c0
            .iter()
            .map(|&(g, m)| vec![(g, 1.0), (m, -1.0)])
            .collect();

        for edge in mesh.edges() {
            let [Some(t), Some(tp)] = edge.triangles else {
                continue;
            };
            let [va, vb] = edge.vertices;
            let tri = mesh.triangles()[t];
            let trip = mesh.triangles()[tp];
            let (la, lb) = (mesh.local_vertex(t, va).unwrap(), mesh.local_vertex(t, vb).unwrap());
            let lc = 3 - la - lb;
            let (lpa, lpb) = (mesh.local_vertex(tp, va).unwrap(), mesh.local_vertex(tp, vb).unwrap());
            let lpc = 3 - lpa - lpb;
            let opposite = mesh.vertices()[trip[lpc]];
            let beta = mesh.barycentric(t, opposite);
            debug_assert_eq!(tri[la], va);
            for p in 0..degree {
                let q = degree - 1 - p;
                let local_t = |pa: usize, pb: usize, pc: usize| {
                    let mut a = [0; 3];
                    a[la] = pa;
                    a[lb] = pb;
                    a[lc] = pc;
                    t * n_local + coeff_index(a, degree)
                };
                let mut ap = [0; 3];
                ap[lpa] = p;
                ap[lpb] = q;
                ap[lpc] = 1;
                let across = tp * n_local + coeff_index(ap, degree);
                row_entries.push(vec![
                    (across, 1.0),
                    (local_t(p + 1, q, 0), -beta[la]),
                    (local_t(p, q + 1, 0), -beta[lb]),
                    (local_t(p, q, 1), -beta[lc]),
                ]);
            }
        }
        let n = nt * n_local;
        let mut rows = TripletMatrix::new(row_entries.len(), n);
        for (i, r) in row_entries.iter().enumerate() {
            for &(j, v) in r {
                rows.push(i, j, v);
            }
        }
        let smoothness = rows.to_csr();

        let mut boundary_edges = Vec::new();
        let mut pinned = Vec::new();
        for &e in mesh.boundary_edges() {
            let edge = &mesh.edges()[e];
            let t = edge.triangles[0].expect("boundary edge has a triangle");
            let tri = mesh.triangles()[t];
            let m = (0..3)
                .find(|&m| !edge.vertices.contains(&tri[m]))
                .expect("edge opposite a vertex");
            let (la, lb) = ((m + 1) % 3, (m + 2) % 3);
            let coeffs: Vec<usize> = (0..=degree)
                .map(|k| {
                    let mut a = [0; 3];
                    a[la] = degree - k;
                    a[lb] = k;
                    t * n_local + coeff_index(a, degree)
                })
                .collect();
            pinned.extend(coeffs.iter().map(|&g| master[g]));
            boundary_edges.push(([tri[la], tri[lb]], coeffs));
        }
        pinned.sort_unstable();
        pinned.dedup();
        let mut b = TripletMatrix::new(pinned.len(), n);
        for (i, &g) in pinned.iter().enumerate() {
            b.push(i, g, 1.0);
        }
        let boundary = b.to_csr();
        let locator = PointLocator::new(&mesh);

        Ok(Self {
            mesh,
            degree,
            n_local,
            geometry,
            domain_points,
            master,
            smoothness,
            n_c0_rows,
            boundary_edges,
            pinned,
            boundary,
            locator,
        })
    }

    pub fn mesh(&self) -> &Triangulation {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficients per triangle.
    pub fn n_local(&self) -> usize {
        self.n_local
    }

    /// Total number of unconstrained coefficients.
    pub fn dof_count(&self) -> usize {
        self.mesh.n_triangles() * self.n_local
    }

    pub fn geometry(&self, t: usize) -> &TriangleGeometry {
        &self.geometry[t]
    }

    /// Global index range of triangle `t`'s coefficients.
    pub fn local_range(&self, t: usize) -> core::ops::Range<usize> {
        t * self.n_local..(t + 1) * self.n_local
    }

    /// Planar position of the domain point of every coefficient.
    pub fn domain_points(&self) -> &[Point2] {
        &self.domain_points
    }

    /// C⁰ rows followed by C¹ rows.
    pub fn smoothness_rows(&self) -> &CsrMatrix {
        &self.smoothness
    }

    pub fn n_c0_rows(&self) -> usize {
        self.n_c0_rows
    }

    /// Identity rows pinning one copy of every boundary-edge coefficient.
    pub fn boundary_rows(&self) -> &CsrMatrix {
        &self.boundary
    }

    /// Smoothness rows stacked on boundary rows.
    pub fn all_rows(&self) -> CsrMatrix {
        self.smoothness.vstack(&self.boundary)
    }

    /// Right-hand side for [`Self::boundary_rows`] realizing the boundary
    /// data `g` (see [`boundary_constraints`]).
    pub fn boundary_values(&self, g: &dyn Fn(f64, f64) -> f64) -> Vec<f64> {
        let d = self.degree;
        let verts = self.mesh.vertices();
        let nb = self.boundary_edges.len();
        let mut traces: Vec<Vec<f64>> = Vec::with_capacity(nb);
        let interp = bernstein_interpolation_inverse(d);

        // Degree-d interpolant of g on each edge, and its derivative per unit
        // length at both ends.
        let mut ends: Vec<[f64; 2]> = Vec::with_capacity(nb);
        let mut dirs: Vec<[f64; 2]> = Vec::with_capacity(nb);
        let mut lens: Vec<f64> = Vec::with_capacity(nb);
        for ([a, b], _) in &self.boundary_edges {
            let (pa, pb) = (verts[*a], verts[*b]);
            let samples: Vec<f64> = (0..=d)
                .map(|k| {
                    let s = k as f64 / d as f64;
                    g(pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1]))
                })
                .collect();
            let c = interp.solve(&samples);
            let len = (pb[0] - pa[0]).hypot(pb[1] - pa[1]);
            ends.push([d as f64 * (c[1] - c[0]) / len, d as f64 * (c[d] - c[d - 1]) / len]);
            dirs.push([(pb[0] - pa[0]) / len, (pb[1] - pa[1]) / len]);
            lens.push(len);
            traces.push(c);
        }

        if d >= 3 {
            // Average tangential derivatives where two boundary edges meet
            // on a straight line.
            let mut at_vertex: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
            for (i, ([a, b], _)) in self.boundary_edges.iter().enumerate() {
                at_vertex.entry(*a).or_default().push((i, 0));
                at_vertex.entry(*b).or_default().push((i, 1));
            }
            let mut slopes = ends.clone();
            for list in at_vertex.values() {
                if let [(e1, s1), (e2, s2)] = list[..] {
                    let (t1, t2) = (dirs[e1], dirs[e2]);
                    let cross = t1[0] * t2[1] - t1[1] * t2[0];
                    if cross.abs() <= 1e-10 {
                        let sign = t1[0] * t2[0] + t1[1] * t2[1];
                        let mean = 0.5 * (ends[e1][s1] + sign * ends[e2][s2]);
                        slopes[e1][s1] = mean;
                        slopes[e2][s2] = sign * mean;
                    }
                }
            }
            let inner = hermite_inner_system(d);
            for (i, c) in traces.iter_mut().enumerate() {
                let ([a, b], _) = self.boundary_edges[i];
                let (pa, pb) = (verts[a], verts[b]);
                let h = lens[i] / d as f64;
                c[0] = g(pa[0], pa[1]);
                c[d] = g(pb[0], pb[1]);
                c[1] = c[0] + slopes[i][0] * h;
                c[d - 1] = c[d] - slopes[i][1] * h;
                if let Some((lu, nodes)) = &inner {
                    let rhs: Vec<f64> = nodes
                        .iter()
                        .map(|&s| {
                            let known: f64 = [0, 1, d - 1, d].iter().map(|&k| c[k] * bernstein_1d(d, k, s)).sum();
                            g(pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])) - known
                        })
                        .collect();
                    let x = lu.solve(&rhs);
                    c[2..d - 1].copy_from_slice(&x);
                }
            }
        }

        let mut values = vec![0.0; self.pinned.len()];
        for ((_, coeffs), c) in self.boundary_edges.iter().zip(&traces) {
            for (&g_idx, &v) in coeffs.iter().zip(c) {
                let row = self
                    .pinned
                    .binary_search(&self.master[g_idx])
                    .expect("boundary coefficient is pinned");
                values[row] = v;
            }
        }
        values
    }

    /// Boundary edges with their coefficient indices, in order from the
    /// first to the second vertex.
    pub fn boundary_edge_coefficients(&self) -> impl Iterator<Item = ([usize; 2], &[usize])> {
        self.boundary_edges.iter().map(|(e, c)| (*e, c.as_slice()))
    }

    /// Triangle containing `p` with its barycentric coordinates.
    pub fn locate(&self, p: Point2) -> Option<(usize, [f64; 3])> {
        self.locator.locate(&self.mesh, p, 1e-10)
    }

    pub fn function(&self, coeffs: Vec<f64>) -> SplineFunction<'_> {
        SplineFunction::new(self, coeffs)
    }

    pub fn zero(&self) -> SplineFunction<'_> {
        SplineFunction::new(self, vec![0.0; self.dof_count()])
    }

    /// Per-triangle Bernstein interpolation of `u` at the domain points.
    /// Exact, hence conforming, for polynomials of degree at most `d`.
    pub fn interpolate(&self, u: &dyn Fn(f64, f64) -> f64) -> SplineFunction<'_> {
        let inv = bernstein_interpolation_triangle(self.degree);
        let n = self.n_local;
        let mut coeffs = Vec::with_capacity(self.dof_count());
        for t in 0..self.mesh.n_triangles() {
            let vals: Vec<f64> = self.domain_points[self.local_range(t)]
                .iter()
                .map(|p| u(p[0], p[1]))
                .collect();
            for i in 0..n {
                coeffs.push((0..n).map(|j| inv[i * n + j] * vals[j]).sum());
            }
        }
        SplineFunction::new(self, coeffs)
    }
}

/// Inverse of the 1D Bernstein collocation matrix at `k / d`.
fn bernstein_interpolation_inverse(d: usize) -> DenseLu {
    let n = d + 1;
    let mut a = vec![0.0; n * n];
    for i in 0..n {
        let s = i as f64 / d as f64;
        for k in 0..n {
            a[i * n + k] = bernstein_1d(d, k, s);
        }
    }
    DenseLu::new(a, n).expect("Bernstein collocation is nonsingular")
}

/// Row-major inverse of the triangle Bernstein collocation matrix at the
/// domain points.
fn bernstein_interpolation_triangle(d: usize) -> Vec<f64> {
    let alphas = multi_indices(d);
    let n = alphas.len();
    let mut a = vec![0.0; n * n];
    for (i, p) in alphas.iter().enumerate() {
        let b = p.map(|v| v as f64 / d as f64);
        for (j, q) in alphas.iter().enumerate() {
            a[i * n + j] = crate::bform::bernstein(*q, b);
        }
    }
    DenseLu::new(a, n)
        .expect("Bernstein collocation is nonsingular")
        .inverse()
}

/// For `d ≥ 4`, the system fixing the middle trace coefficients
/// `c₂ … c_{d-2}` by interpolation at `k / (d-2)`, `k = 1 … d-3`.
fn hermite_inner_system(d: usize) -> Option<(DenseLu, Vec<f64>)> {
    if d < 4 {
        return None;
    }
    let m = d - 3;
    let nodes: Vec<f64> = (1..=m).map(|k| k as f64 / (d - 2) as f64).collect();
    let mut a = vec![0.0; m * m];
    for (i, &s) in nodes.iter().enumerate() {
        for j in 0..m {
            a[i * m + j] = bernstein_1d(d, j + 2, s);
        }
    }
    Some((DenseLu::new(a, m).expect("inner Hermite system is nonsingular"), nodes))
}

/// The C⁰ and C¹ rows of `space`.
pub fn smoothness_constraints(space: &SplineSpace) -> &CsrMatrix {
    space.smoothness_rows()
}

/// Rows and right-hand side imposing the boundary data `g`.
///
/// Each boundary edge carries a degree-`d` trace. For `d ≥ 3` its end
/// values match `g`, its end slopes match the tangential derivative of the
/// edge's equally spaced interpolant of `g` (averaged where two boundary
/// edges are collinear, so the trace stays C¹ along straight sides), and its
/// middle coefficients interpolate `g` at `d - 3` interior points. For
/// `d ≤ 2` the trace interpolates `g` at the `d + 1` equally spaced points.
pub fn boundary_constraints(space: &SplineSpace, g: &dyn Fn(f64, f64) -> f64) -> (CsrMatrix, Vec<f64>) {
    (space.boundary_rows().clone(), space.boundary_values(g))
}

/// L² projection of `u` onto the C¹ space (no boundary conditions).
pub fn project_to_space<'a>(space: &'a SplineSpace, u: &ScalarField) -> Result<SplineFunction<'a>> {
    let (_, mass) = assembly::assemble_laplace_and_mass(space)?;
    let load = assembly::assemble_load(space, u)?;
    let solver = KktSolver::new(&mass, space.smoothness_rows(), Some(space.domain_points()))
        .map_err(|e| projection_error(space, e))?;
    let sol = solver
        .solve(&load, &vec![0.0; space.smoothness_rows().nrows()])
        .map_err(|e| projection_error(space, e))?;
    Ok(SplineFunction::new(space, sol.c))
}

fn projection_error(space: &SplineSpace, e: LinalgError) -> Error {
    let block = match e {
        LinalgError::ZeroPivot { index, .. } if index >= space.dof_count() => "smoothness constraint",
        LinalgError::ZeroPivot { .. } => "mass",
        _ => "saddle point",
    };
    Error::Projection { block, source: e }
}

/// Orthogonal projector onto the kernel of the homogeneous constraints
/// (smoothness rows and boundary rows).
#[derive(Debug, Clone)]
pub struct KernelProjector {
    solver: KktSolver,
    m: usize,
}

impl KernelProjector {
    pub fn new(space: &SplineSpace) -> Result<Self> {
        let rows = space.all_rows();
        let m = rows.nrows();
        let solver = KktSolver::new(
            &CsrMatrix::identity(space.dof_count()),
            &rows,
            Some(space.domain_points()),
        )?;
        Ok(Self { solver, m })
    }

    pub fn project(&self, r: &[f64]) -> Result<Vec<f64>> {
        Ok(self.solver.solve(r, &vec![0.0; self.m])?.c)
    }

    /// `‖P r‖₂`: the residual seen by constrained test functions.
    pub fn norm(&self, r: &[f64]) -> Result<f64> {
        Ok(norm2(&self.project(r)?))
    }
}

/// A piecewise polynomial on a [`SplineSpace`].
#[derive(Debug, Clone)]
pub struct SplineFunction<'a> {
    space: &'a SplineSpace,
    coeffs: Vec<f64>,
}

impl<'a> SplineFunction<'a> {
    pub fn new(space: &'a SplineSpace, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), space.dof_count(), "coefficient vector length");
        Self { space, coeffs }
    }

    pub fn space(&self) -> &'a SplineSpace {
        self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn local(&self, t: usize) -> BTriPoly {
        BTriPoly::new(self.space.degree, self.coeffs[self.space.local_range(t)].to_vec(), t)
            .expect("local coefficient block")
    }

    pub fn eval_in(&self, t: usize, b: [f64; 3]) -> f64 {
        self.local(t).eval(BarycentricPoint(b))
    }

    pub fn grad_in(&self, t: usize, b: [f64; 3]) -> [f64; 2] {
        self.local(t).grad(BarycentricPoint(b), self.space.geometry(t))
    }

    pub fn hess_in(&self, t: usize, b: [f64; 3]) -> Sym2 {
        self.local(t).hess(BarycentricPoint(b), self.space.geometry(t))
    }

    /// Value at a point of the domain, `None` outside the mesh.
    pub fn eval(&self, p: Point2) -> Option<f64> {
        self.space.locate(p).map(|(t, b)| self.eval_in(t, b))
    }

    pub fn grad(&self, p: Point2) -> Option<[f64; 2]> {
        self.space.locate(p).map(|(t, b)| self.grad_in(t, b))
    }

    pub fn hess(&self, p: Point2) -> Option<Sym2> {
        self.space.locate(p).map(|(t, b)| self.hess_in(t, b))
    }

    /// `‖R_smooth c‖ / max(‖c‖, 1)`.
    pub fn smoothness_defect(&self) -> f64 {
        norm2(&self.space.smoothness.matvec(&self.coeffs)) / norm2(&self.coeffs).max(1.0)
    }

    pub fn is_conforming(&self) -> bool {
        norm2(&self.space.smoothness.matvec(&self.coeffs)) <= 1e-9 * norm2(&self.coeffs).max(f64::MIN_POSITIVE)
    }

    /// Largest two-sided value and gradient jumps over interior edges,
    /// sampled at `samples` equally spaced points per edge (endpoints
    /// included).
    pub fn max_edge_jumps(&self, samples: usize) -> (f64, f64) {
        let mesh = self.space.mesh();
        let mut worst = (0.0f64, 0.0f64);
        for edge in mesh.edges() {
            let [Some(t), Some(tp)] = edge.triangles else {
                continue;
            };
            let (pa, pb) = (mesh.vertices()[edge.vertices[0]], mesh.vertices()[edge.vertices[1]]);
            for k in 0..samples {
                let s = if samples > 1 { k as f64 / (samples - 1) as f64 } else { 0.5 };
                let p = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                let (b, bp) = (mesh.barycentric(t, p), mesh.barycentric(tp, p));
                let jv = (self.eval_in(t, b) - self.eval_in(tp, bp)).abs();
                let (g, gp) = (self.grad_in(t, b), self.grad_in(tp, bp));
                let jg = (g[0] - gp[0]).hypot(g[1] - gp[1]);
                worst = (worst.0.max(jv), worst.1.max(jg));
            }
        }
        worst
    }
}
