//! C¹ Bernstein–Bézier spline element solvers for the two-dimensional
//! Monge–Ampère equation `det D²u = f` in `Ω`, `u = g` on `∂Ω`.
//!
//! The crate is `no_std` with `alloc`. Enable the `std` feature for
//! `std::error::Error`-backed math, or `parallel` for rayon element loops.
//!
//! Layout:
//! - [`mesh`]: triangulations, structured square and disk meshers, uniform refinement.
//! - [`bform`]: Bernstein–Bézier polynomials on triangles and quadrature.
//! - [`spline_space`]: the constrained coefficient representation of `S¹_d(T)`.
//! - [`assembly`]: residual, cofactor stiffness, Laplacian stiffness and mass.
//! - [`linalg`]: sparse saddle-point solvers (direct KKT and augmented Lagrangian).
//! - [`iterate`]: Newton, pseudo-transient continuation and time marching.
//! - [`problems`]: builtin test problems, error norms and convergence studies.
//! - [`fd_oracle`]: an independent finite-difference time-marching solver.
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod assembly;
pub mod bform;
pub mod error;
pub mod fd_oracle;
pub mod iterate;
pub mod linalg;
pub mod mesh;
pub mod problems;
pub mod spline_space;

pub use error::{Error, Result};

/// A point of the plane.
pub type Point2 = [f64; 2];

/// A scalar field on the plane, `(x, y) ↦ value`.
pub type ScalarField<'a> = dyn Fn(f64, f64) -> f64 + Send + Sync + 'a;
