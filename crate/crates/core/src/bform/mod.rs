//! Bernstein–Bézier (B-form) polynomials on triangles.
//!
//! A degree-`d` polynomial on a triangle is `Σ c_α B_α(b)` over multi-indices
//! `|α| = d`, with `B_α(b) = d!/(α₁!α₂!α₃!) b₁^α₁ b₂^α₂ b₃^α₃` in barycentric
//! coordinates `b`. Coefficients are stored in descending lexicographic
//! order on `(α₁, α₂)`: `(d,0,0), (d-1,1,0), (d-1,0,1), (d-2,2,0), ...`,
//! so `α` sits at index `(d-α₁)(d-α₁+1)/2 + α₃`.

mod quadrature;

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use crate::Point2;

pub use quadrature::{gauss_legendre, quadrature_for, QuadratureRule, MAX_QUADRATURE_DEGREE};

/// Number of B-form coefficients of a degree-`d` polynomial.
pub const fn n_coeffs(d: usize) -> usize {
    (d + 1) * (d + 2) / 2
}

/// Storage index of the multi-index `alpha` (with `|alpha| = d`).
#[inline]
pub fn coeff_index(alpha: [usize; 3], d: usize) -> usize {
    let m = d - alpha[0];
    m * (m + 1) / 2 + alpha[2]
}

/// All multi-indices of degree `d` in storage order.
pub fn multi_indices(d: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::with_capacity(n_coeffs(d));
    for i in (0..=d).rev() {
        for j in (0..=d - i).rev() {
            out.push([i, j, d - i - j]);
        }
    }
    out
}

fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * k as f64)
}

/// Value of the Bernstein basis polynomial `B_α` at `b`.
pub fn bernstein(alpha: [usize; 3], b: [f64; 3]) -> f64 {
    let d = alpha[0] + alpha[1] + alpha[2];
    let coef = factorial(d) / (factorial(alpha[0]) * factorial(alpha[1]) * factorial(alpha[2]));
    coef * b[0].powi(alpha[0] as i32) * b[1].powi(alpha[1] as i32) * b[2].powi(alpha[2] as i32)
}

/// A point in barycentric coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarycentricPoint(pub [f64; 3]);

impl BarycentricPoint {
    /// Checks `b₁ + b₂ + b₃ = 1` and `bᵢ ≥ 0` up to `1e-14`.
    pub fn new(b1: f64, b2: f64, b3: f64) -> Option<Self> {
        let ok = (b1 + b2 + b3 - 1.0).abs() <= 1e-14 && b1.min(b2).min(b3) >= -1e-14;
        ok.then_some(Self([b1, b2, b3]))
    }

    pub const fn centroid() -> Self {
        Self([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])
    }

    pub fn coords(&self) -> [f64; 3] {
        self.0
    }
}

/// A symmetric 2×2 matrix `[[xx, xy], [xy, yy]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const IDENTITY: Sym2 = Sym2 {
        xx: 1.0,
        xy: 0.0,
        yy: 1.0,
    };

    pub const fn new(xx: f64, xy: f64, yy: f64) -> Self {
        Self { xx, xy, yy }
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Matrix of cofactors; in 2D this is linear in the entries.
    pub fn cofactor(&self) -> Sym2 {
        Sym2::new(self.yy, -self.xy, self.xx)
    }

    /// Frobenius product `A : B`.
    pub fn frobenius(&self, other: &Sym2) -> f64 {
        self.xx * other.xx + 2.0 * self.xy * other.xy + self.yy * other.yy
    }

    pub fn apply(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.xx * v[0] + self.xy * v[1],
            self.xy * v[0] + self.yy * v[1],
        ]
    }

    /// Eigenvalues `(λ₁, λ₂)` with `λ₁ ≤ λ₂`.
    pub fn eigenvalues(&self) -> (f64, f64) {
        let mean = 0.5 * (self.xx + self.yy);
        let half_diff = 0.5 * (self.xx - self.yy);
        let r = half_diff.hypot(self.xy);
        (mean - r, mean + r)
    }
}

/// Affine data of a physical triangle: vertices, area and the (constant)
/// Cartesian gradients of the three barycentric coordinate functions.
#[derive(Debug, Clone, Copy)]
pub struct TriangleGeometry {
    pub points: [Point2; 3],
    pub area: f64,
    pub bary_grads: [[f64; 2]; 3],
}

impl TriangleGeometry {
    pub fn new(points: [Point2; 3]) -> Self {
        let [p1, p2, p3] = points;
        let twice = (p2[0] - p1[0]) * (p3[1] - p1[1]) - (p2[1] - p1[1]) * (p3[0] - p1[0]);
        let grad = |a: Point2, b: Point2| [-(b[1] - a[1]) / twice, (b[0] - a[0]) / twice];
        Self {
            points,
            area: 0.5 * twice,
            bary_grads: [grad(p2, p3), grad(p3, p1), grad(p1, p2)],
        }
    }

    pub fn to_cartesian(&self, b: [f64; 3]) -> Point2 {
        let [p1, p2, p3] = self.points;
        [
            b[0] * p1[0] + b[1] * p2[0] + b[2] * p3[0],
            b[0] * p1[1] + b[1] * p2[1] + b[2] * p3[1],
        ]
    }

    /// Cartesian gradient from the three barycentric partials.
    #[inline]
    pub fn map_grad(&self, d: &[f64; 3]) -> [f64; 2] {
        let g = &self.bary_grads;
        [
            d[0] * g[0][0] + d[1] * g[1][0] + d[2] * g[2][0],
            d[0] * g[0][1] + d[1] * g[1][1] + d[2] * g[2][1],
        ]
    }

    /// Cartesian Hessian from the barycentric second partials stored as
    /// `[∂₁₁, ∂₁₂, ∂₁₃, ∂₂₂, ∂₂₃, ∂₃₃]`.
    #[inline]
    pub fn map_hess(&self, dd: &[f64; 6]) -> Sym2 {
        let g = &self.bary_grads;
        let full = [
            [dd[0], dd[1], dd[2]],
            [dd[1], dd[3], dd[4]],
            [dd[2], dd[4], dd[5]],
        ];
        let mut h = Sym2::default();
        for m in 0..3 {
            for n in 0..3 {
                let w = full[m][n];
                h.xx += w * g[m][0] * g[n][0];
                h.xy += w * g[m][0] * g[n][1];
                h.yy += w * g[m][1] * g[n][1];
            }
        }
        h
    }
}

/// A B-form polynomial living on one triangle of a mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct BTriPoly {
    degree: usize,
    coeffs: Vec<f64>,
    triangle: usize,
}

impl BTriPoly {
    /// `None` unless `degree ≥ 1` and there are `n_coeffs(degree)` coefficients.
    pub fn new(degree: usize, coeffs: Vec<f64>, triangle: usize) -> Option<Self> {
        (degree >= 1 && coeffs.len() == n_coeffs(degree)).then_some(Self {
            degree,
            coeffs,
            triangle,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn triangle(&self) -> usize {
        self.triangle
    }

    /// Runs de Casteljau down to degree `target`, returning the
    /// intermediate coefficients (in storage order for that degree).
    fn de_casteljau(&self, b: [f64; 3], target: usize) -> Vec<f64> {
        let mut cur = self.coeffs.clone();
        for r in (target..self.degree).rev() {
            let mut next = vec![0.0; n_coeffs(r)];
            for (slot, beta) in next.iter_mut().zip(multi_indices(r)) {
                let up = |m: usize| {
                    let mut a = beta;
                    a[m] += 1;
                    cur[coeff_index(a, r + 1)]
                };
                *slot = b[0] * up(0) + b[1] * up(1) + b[2] * up(2);
            }
            cur = next;
        }
        cur
    }

    pub fn eval(&self, x: BarycentricPoint) -> f64 {
        self.de_casteljau(x.0, 0)[0]
    }

    /// Partials with respect to `b₁, b₂, b₃` of the homogeneous form.
    pub fn bary_grad(&self, x: BarycentricPoint) -> [f64; 3] {
        let c = self.de_casteljau(x.0, 1);
        let d = self.degree as f64;
        // degree-1 storage order: e1, e2, e3
        [d * c[0], d * c[1], d * c[2]]
    }

    /// Second partials `[∂₁₁, ∂₁₂, ∂₁₃, ∂₂₂, ∂₂₃, ∂₃₃]`; zero for `d < 2`.
    pub fn bary_hess(&self, x: BarycentricPoint) -> [f64; 6] {
        if self.degree < 2 {
            return [0.0; 6];
        }
        let c = self.de_casteljau(x.0, 2);
        let s = (self.degree * (self.degree - 1)) as f64;
        let at = |a: [usize; 3]| s * c[coeff_index(a, 2)];
        [
            at([2, 0, 0]),
            at([1, 1, 0]),
            at([1, 0, 1]),
            at([0, 2, 0]),
            at([0, 1, 1]),
            at([0, 0, 2]),
        ]
    }

    pub fn grad(&self, x: BarycentricPoint, geom: &TriangleGeometry) -> [f64; 2] {
        geom.map_grad(&self.bary_grad(x))
    }

    pub fn hess(&self, x: BarycentricPoint, geom: &TriangleGeometry) -> Sym2 {
        geom.map_hess(&self.bary_hess(x))
    }
}

/// Values and barycentric derivatives of every degree-`d` basis
/// polynomial at every point of a quadrature rule.
#[derive(Debug, Clone)]
pub struct BasisTable {
    pub degree: usize,
    pub rule: QuadratureRule,
    /// `values[q * n + j]`
    pub values: Vec<f64>,
    /// `d1[q * n + j]`
    pub d1: Vec<[f64; 3]>,
    /// `d2[q * n + j]`, layout as in [`TriangleGeometry::map_hess`].
    pub d2: Vec<[f64; 6]>,
}

impl BasisTable {
    pub fn new(degree: usize, rule: QuadratureRule) -> Self {
        let n = n_coeffs(degree);
        let nq = rule.points.len();
        let mut values = vec![0.0; nq * n];
        let mut d1 = vec![[0.0; 3]; nq * n];
        let mut d2 = vec![[0.0; 6]; nq * n];
        let alphas = multi_indices(degree);
        let df = degree as f64;
        let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
        for (q, p) in rule.points.iter().enumerate() {
            let b = p.0;
            for (j, &a) in alphas.iter().enumerate() {
                values[q * n + j] = bernstein(a, b);
                for m in 0..3 {
                    if a[m] > 0 {
                        let mut r = a;
                        r[m] -= 1;
                        d1[q * n + j][m] = df * bernstein(r, b);
                    }
                }
                for (s, &(m, k)) in pairs.iter().enumerate() {
                    let mut r = a;
                    if r[m] == 0 {
                        continue;
                    }
                    r[m] -= 1;
                    if r[k] == 0 {
                        continue;
                    }
                    r[k] -= 1;
                    d2[q * n + j][s] = df * (df - 1.0) * bernstein(r, b);
                }
            }
        }
        Self {
            degree,
            rule,
            values,
            d1,
            d2,
        }
    }

    pub fn n_basis(&self) -> usize {
        n_coeffs(self.degree)
    }

    pub fn n_points(&self) -> usize {
        self.rule.points.len()
    }
}
