//! Two-dimensional triangulations with the edge connectivity needed to
//! write C¹ conditions across interior edges.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::Point2;

/// Relative degeneracy guard: a triangle is rejected when its area is
/// at most `DEGENERATE_AREA * h_max²`.
pub const DEGENERATE_AREA: f64 = 1e-14;

/// An edge between two vertices (`vertices[0] < vertices[1]`) with its one
/// or two incident triangles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub triangles: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.triangles[1].is_none()
    }

    /// The incident triangle other than `t`.
    pub fn other(&self, t: usize) -> Option<usize> {
        match self.triangles {
            [Some(a), b] if a == t => b,
            [a, Some(b)] if b == t => a,
            _ => None,
        }
    }
}

/// A conforming triangulation of a polygonal domain.
///
/// Triangles are counterclockwise. Local edge `m` of a triangle is the
/// edge opposite its local vertex `m`.
#[derive(Debug, Clone)]
pub struct Triangulation {
    vertices: Vec<Point2>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    triangle_edges: Vec<[usize; 3]>,
    boundary_edges: Vec<usize>,
    h_max: f64,
    h_min: f64,
}

fn signed_area(a: Point2, b: Point2, c: Point2) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

fn dist(a: Point2, b: Point2) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

impl Triangulation {
    /// Builds the connectivity from a vertex and triangle list.
    ///
    /// Fails on out-of-range indices, repeated vertices in a triangle,
    /// edges shared by more than two triangles, and clockwise or
    /// degenerate triangles.
    pub fn new(vertices: Vec<Point2>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} references a vertex outside 0..{nv}"
                )));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a vertex")));
            }
        }

        let mut h_max: f64 = 0.0;
        let mut h_min = f64::INFINITY;
        for tri in &triangles {
            let [a, b, c] = tri.map(|v| vertices[v]);
            let diam = dist(a, b).max(dist(b, c)).max(dist(a, c));
            h_max = h_max.max(diam);
            h_min = h_min.min(diam);
        }
        for (t, tri) in triangles.iter().enumerate() {
            let [a, b, c] = tri.map(|v| vertices[v]);
            let area = signed_area(a, b, c);
            if area <= DEGENERATE_AREA * h_max * h_max {
                return Err(Error::Orientation { triangle: t, area });
            }
        }

        let mut lookup: BTreeMap<(usize, usize), usize> = BTreeMap::new();
        let mut edges: Vec<Edge> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            let mut local = [0usize; 3];
            for m in 0..3 {
                let a = tri[(m + 1) % 3];
                let b = tri[(m + 2) % 3];
                let key = (a.min(b), a.max(b));
                let e = *lookup.entry(key).or_insert_with(|| {
                    edges.push(Edge {
                        vertices: [key.0, key.1],
                        triangles: [None, None],
                    });
                    edges.len() - 1
                });
                let slot = &mut edges[e].triangles;
                if slot[0].is_none() {
                    slot[0] = Some(t);
                } else if slot[1].is_none() {
                    slot[1] = Some(t);
                } else {
                    return Err(Error::InvalidMesh(format!(
                        "edge ({}, {}) has more than two incident triangles",
                        key.0, key.1
                    )));
                }
                local[m] = e;
            }
            triangle_edges.push(local);
        }
        let boundary_edges = edges
            .iter()
            .enumerate()
            .filter(|(_, e)| e.is_boundary())
            .map(|(i, _)| i)
            .collect();

        Ok(Self {
            vertices,
            triangles,
            edges,
            triangle_edges,
            boundary_edges,
            h_max,
            h_min,
        })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    /// Edge indices of triangle `t`, local edge `m` opposite local vertex `m`.
    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn boundary_edges(&self) -> &[usize] {
        &self.boundary_edges
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Largest triangle diameter.
    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    /// Smallest triangle diameter.
    pub fn h_min(&self) -> f64 {
        self.h_min
    }

    pub fn quasi_uniformity(&self) -> f64 {
        self.h_max / self.h_min
    }

    pub fn triangle_points(&self, t: usize) -> [Point2; 3] {
        self.triangles[t].map(|v| self.vertices[v])
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_points(t);
        signed_area(a, b, c)
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|t| self.area(t)).sum()
    }

    /// Vertices lying on at least one boundary edge.
    pub fn boundary_vertices(&self) -> Vec<usize> {
        let mut flag = vec![false; self.n_vertices()];
        for &e in &self.boundary_edges {
            for v in self.edges[e].vertices {
                flag[v] = true;
            }
        }
        (0..self.n_vertices()).filter(|&v| flag[v]).collect()
    }

    /// Local position (0, 1 or 2) of global vertex `v` in triangle `t`.
    pub fn local_vertex(&self, t: usize, v: usize) -> Option<usize> {
        self.triangles[t].iter().position(|&w| w == v)
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point2) -> [f64; 3] {
        let [a, b, c] = self.triangle_points(t);
        let area = signed_area(a, b, c);
        [
            signed_area(p, b, c) / area,
            signed_area(a, p, c) / area,
            signed_area(a, b, p) / area,
        ]
    }
}

/// Unit square `[0, 1]²` cut into `m × m` squares of side `1/m`, each split
/// by its negative-slope diagonal.
pub fn build_square_mesh(m: usize) -> Triangulation {
    let m = m.max(1);
    let h = 1.0 / m as f64;
    let mut vertices = Vec::with_capacity((m + 1) * (m + 1));
    for j in 0..=m {
        for i in 0..=m {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let id = |i: usize, j: usize| j * (m + 1) + i;
    let mut triangles = Vec::with_capacity(2 * m * m);
    for j in 0..m {
        for i in 0..m {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, d]);
            triangles.push([b, c, d]);
        }
    }
    Triangulation::new(vertices, triangles).expect("structured square mesh is valid")
}

/// Splits every triangle into four congruent children through its edge
/// midpoints. Parent vertices keep their indices.
pub fn refine_uniform(t: &Triangulation) -> Triangulation {
    let mut vertices = t.vertices.clone();
    let mut midpoint = Vec::with_capacity(t.edges.len());
    for e in &t.edges {
        let [a, b] = e.vertices.map(|v| t.vertices[v]);
        midpoint.push(vertices.len());
        vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
    }
    let mut triangles = Vec::with_capacity(4 * t.n_triangles());
    for (k, &[v0, v1, v2]) in t.triangles.iter().enumerate() {
        let [m0, m1, m2] = t.triangle_edges[k].map(|e| midpoint[e]);
        triangles.push([v0, m2, m1]);
        triangles.push([m2, v1, m0]);
        triangles.push([m1, m0, v2]);
        triangles.push([m0, m1, m2]);
    }
    Triangulation::new(vertices, triangles).expect("refinement of a valid mesh is valid")
}

/// Unit disk mesh from concentric rings: ring `k` (radius `k/rings`) holds
/// `counts[k-1]` equally spaced points, adjacent rings are stitched by an
/// angular merge, and the centre is fanned to the first ring.
///
/// The outer ring lies on the unit circle, so the domain is the inscribed
/// polygon.
pub fn build_disk_mesh_with_counts(counts: &[usize]) -> Result<Triangulation> {
    if counts.is_empty() || counts.iter().any(|&n| n < 3) {
        return Err(Error::InvalidMesh("each disk ring needs at least 3 points".into()));
    }
    let rings = counts.len();
    let tau = 2.0 * core::f64::consts::PI;
    let mut vertices = vec![[0.0, 0.0]];
    let mut ring_start = Vec::with_capacity(rings);
    let mut ring_angles: Vec<Vec<f64>> = Vec::with_capacity(rings);
    for (k, &n) in counts.iter().enumerate() {
        let r = (k + 1) as f64 / rings as f64;
        let shift = if k % 2 == 1 { 0.5 } else { 0.0 };
        ring_start.push(vertices.len());
        let mut angles = Vec::with_capacity(n);
        for i in 0..n {
            let theta = tau * (i as f64 + shift) / n as f64;
            angles.push(theta);
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
        ring_angles.push(angles);
    }

    let mut triangles = Vec::new();
    let n1 = counts[0];
    for i in 0..n1 {
        triangles.push([0, ring_start[0] + i, ring_start[0] + (i + 1) % n1]);
    }
    for k in 1..rings {
        let (na, nb) = (counts[k - 1], counts[k]);
        let (sa, sb) = (ring_start[k - 1], ring_start[k]);
        let (aa, ab) = (&ring_angles[k - 1], &ring_angles[k]);
        // Unwrapped angle of the i-th point after the starting point.
        let angle = |angles: &[f64], i: usize| {
            let n = angles.len();
            angles[i % n] + tau * (i / n) as f64
        };
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let advance_inner = if i == na {
                false
            } else if j == nb {
                true
            } else {
                angle(aa, i + 1) <= angle(ab, j + 1)
            };
            if advance_inner {
                triangles.push([sa + i % na, sb + j % nb, sa + (i + 1) % na]);
                i += 1;
            } else {
                triangles.push([sa + i % na, sb + j % nb, sb + (j + 1) % nb]);
                j += 1;
            }
        }
    }
    for tri in &mut triangles {
        let [a, b, c] = tri.map(|v| vertices[v]);
        if signed_area(a, b, c) < 0.0 {
            tri.swap(1, 2);
        }
    }
    Triangulation::new(vertices, triangles)
}

/// Quasi-uniform unit disk mesh with `rings` rings of `6k` points.
/// Produces `6 rings²` triangles.
pub fn build_disk_mesh(rings: usize) -> Triangulation {
    let counts: Vec<usize> = (1..=rings.max(1)).map(|k| 6 * k).collect();
    build_disk_mesh_with_counts(&counts).expect("regular disk mesh is valid")
}

fn disk_triangle_count(counts: &[usize]) -> usize {
    2 * counts.iter().sum::<usize>() - counts[counts.len() - 1]
}

/// Disk mesh with exactly `target` triangles. Ring counts start from
/// `round(c k)` with `c = target / rings²` and are then nudged by one point
/// at a time, outermost inner ring first, until the count matches.
/// Returns `None` for targets too small to mesh this way.
pub fn build_disk_mesh_with_target(target: usize) -> Option<Triangulation> {
    let rings = ((target as f64 / 6.0).sqrt()).round() as usize;
    if rings < 2 || target < 12 {
        return None;
    }
    let c = target as f64 / (rings * rings) as f64;
    let mut counts: Vec<usize> = (1..=rings)
        .map(|k| ((c * k as f64).round() as usize).max(3))
        .collect();
    // Parity of the outer ring fixes the parity of the count.
    let current = disk_triangle_count(&counts);
    if current % 2 != target % 2 {
        counts[rings - 1] += 1;
    }
    let mut k = rings - 1;
    let mut guard = 0;
    while disk_triangle_count(&counts) != target {
        guard += 1;
        if guard > 10 * target {
            return None;
        }
        k = if k == 0 { rings - 2 } else { k - 1 };
        let current = disk_triangle_count(&counts);
        if current < target {
            counts[k] += 1;
        } else if counts[k] > 3 {
            counts[k] -= 1;
        }
    }
    build_disk_mesh_with_counts(&counts).ok()
}

/// Bucket grid for locating the triangle containing a point.
#[derive(Debug, Clone)]
pub struct PointLocator {
    origin: Point2,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &Triangulation) -> Self {
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for p in mesh.vertices() {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        let cell = mesh.h_max().max(1e-300);
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut buckets = vec![Vec::new(); nx * ny];
        for t in 0..mesh.n_triangles() {
            let pts = mesh.triangle_points(t);
            let bx0 = pts.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let bx1 = pts.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            let by0 = pts.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min);
            let by1 = pts.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max);
            let ix0 = (((bx0 - lo[0]) / cell).floor() as usize).min(nx - 1);
            let ix1 = (((bx1 - lo[0]) / cell).floor() as usize).min(nx - 1);
            let iy0 = (((by0 - lo[1]) / cell).floor() as usize).min(ny - 1);
            let iy1 = (((by1 - lo[1]) / cell).floor() as usize).min(ny - 1);
            for iy in iy0..=iy1 {
                for ix in ix0..=ix1 {
                    buckets[iy * nx + ix].push(t);
                }
            }
        }
        Self {
            origin: lo,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    /// Triangle containing `p` and the barycentric coordinates of `p`
    /// in it, allowing `tol` of slack outside the triangle.
    pub fn locate(&self, mesh: &Triangulation, p: Point2, tol: f64) -> Option<(usize, [f64; 3])> {
        let fx = (p[0] - self.origin[0]) / self.cell;
        let fy = (p[1] - self.origin[1]) / self.cell;
        if fx < -1.0 || fy < -1.0 {
            return None;
        }
        let ix = (fx.max(0.0).floor() as usize).min(self.nx - 1);
        let iy = (fy.max(0.0).floor() as usize).min(self.ny - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        for &t in &self.buckets[iy * self.nx + ix] {
            let b = mesh.barycentric(t, p);
            let worst = b[0].min(b[1]).min(b[2]);
            if best.is_none_or(|(_, _, w)| worst > w) {
                best = Some((t, b, worst));
            }
        }
        match best {
            Some((t, b, w)) if w >= -tol => Some((t, b)),
            _ => None,
        }
    }
}
