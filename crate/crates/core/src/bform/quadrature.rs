//! Fully symmetric quadrature rules on the reference triangle.
//!
//! Low orders use classical closed-form rules (centroid, 3-point, Radon's
//! 7-point). Higher orders take a collapsed Gauss–Legendre product rule and
//! average it over the six permutations of the barycentric coordinates,
//! which keeps the exactness and makes the rule symmetric.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::BarycentricPoint;
use crate::error::{Error, Result};

pub const MAX_QUADRATURE_DEGREE: usize = 20;

/// Points and weights normalized so that `Σ wᵢ = 1`; the integral over a
/// triangle `T` is `|T| Σ wᵢ g(xᵢ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<BarycentricPoint>,
    pub weights: Vec<f64>,
    pub exactness_degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Gauss–Legendre nodes and weights on `[0, 1]` (weights sum to 1).
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (core::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if n == 0 { 1.0 } else { p1 };
            let pm1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

fn orbit_rule(orbits: &[(f64, f64)], centroid_weight: Option<f64>, exactness: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    if let Some(w) = centroid_weight {
        points.push(BarycentricPoint::centroid());
        weights.push(w);
    }
    for &(a, w) in orbits {
        let b = 1.0 - 2.0 * a;
        for p in [[b, a, a], [a, b, a], [a, a, b]] {
            points.push(BarycentricPoint(p));
            weights.push(w);
        }
    }
    QuadratureRule {
        points,
        weights,
        exactness_degree: exactness,
    }
}

fn symmetrized_product_rule(k: usize) -> QuadratureRule {
    let (ts, tw) = gauss_legendre((k + 2) / 2);
    let (ss, sw) = gauss_legendre((k + 3) / 2);
    let perms = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    let mut points: Vec<[f64; 3]> = Vec::new();
    let mut weights: Vec<f64> = Vec::new();
    for (s, ws) in ss.iter().zip(&sw) {
        for (t, wt) in ts.iter().zip(&tw) {
            let x = *s;
            let y = (1.0 - s) * t;
            let w = ws * wt * (1.0 - s) * 2.0 / 6.0;
            let b = [1.0 - x - y, x, y];
            for p in &perms {
                let q = [b[p[0]], b[p[1]], b[p[2]]];
                match points
                    .iter()
                    .position(|r| (0..3).all(|i| (r[i] - q[i]).abs() < 1e-14))
                {
                    Some(i) => weights[i] += w,
                    None => {
                        points.push(q);
                        weights.push(w);
                    }
                }
            }
        }
    }
    QuadratureRule {
        points: points.into_iter().map(BarycentricPoint).collect(),
        weights,
        exactness_degree: k,
    }
}

/// A symmetric rule integrating every polynomial of total degree at most
/// `degree_needed` exactly.
pub fn quadrature_for(degree_needed: usize) -> Result<QuadratureRule> {
    match degree_needed {
        0 | 1 => {
            if degree_needed == 0 {
                return Err(Error::UnsupportedQuadrature(0));
            }
            Ok(orbit_rule(&[], Some(1.0), 1))
        }
        2 => Ok(orbit_rule(&[(1.0 / 6.0, 1.0 / 3.0)], None, 2)),
        3..=5 => {
            let r = 15f64.sqrt();
            Ok(orbit_rule(
                &[
                    ((6.0 - r) / 21.0, (155.0 - r) / 1200.0),
                    ((6.0 + r) / 21.0, (155.0 + r) / 1200.0),
                ],
                Some(9.0 / 40.0),
                5,
            ))
        }
        k if k <= MAX_QUADRATURE_DEGREE => Ok(symmetrized_product_rule(k)),
        k => Err(Error::UnsupportedQuadrature(k)),
    }
}
