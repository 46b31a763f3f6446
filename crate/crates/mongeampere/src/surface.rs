//! Plain-text surface export.
//!
//! Each triangle is split into `s²` subtriangles. The surface file lists
//! vertex lines `v x y z` followed by face lines `f i j k` (1-based, as in
//! Wavefront OBJ). The section file holds `x u(x, x)` along the diagonal.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use mongeampere_core::spline_space::SplineFunction;

use crate::io::{write_text, IoResult};

/// Default subdivision per triangle edge.
pub const DEFAULT_SUBDIVISION: usize = 4;

/// Samples along the diagonal section.
pub const SECTION_SAMPLES: usize = 201;

/// Vertices `(x, y, z)` and 0-based faces of the subdivided surface.
pub fn surface_mesh(u: &SplineFunction<'_>, s: usize) -> (Vec<[f64; 3]>, Vec<[usize; 3]>) {
    let s = s.max(1);
    let mesh = u.space().mesh();
    let per = (s + 1) * (s + 2) / 2;
    let mut verts = Vec::with_capacity(mesh.n_triangles() * per);
    let mut faces = Vec::with_capacity(mesh.n_triangles() * s * s);
    for t in 0..mesh.n_triangles() {
        let [a, b, c] = mesh.triangle_points(t);
        let base = verts.len();
        // Row i holds s + 1 − i lattice points.
        let mut row_start = Vec::with_capacity(s + 1);
        for i in 0..=s {
            row_start.push(verts.len() - base);
            for j in 0..=s - i {
                let bary = [(s - i - j) as f64 / s as f64, j as f64 / s as f64, i as f64 / s as f64];
                let x = bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0];
                let y = bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1];
                verts.push([x, y, u.eval_in(t, bary)]);
            }
        }
        let idx = |i: usize, j: usize| base + row_start[i] + j;
        for i in 0..s {
            for j in 0..s - i {
                faces.push([idx(i, j), idx(i, j + 1), idx(i + 1, j)]);
                if j + 1 < s - i {
                    faces.push([idx(i, j + 1), idx(i + 1, j + 1), idx(i + 1, j)]);
                }
            }
        }
    }
    (verts, faces)
}

pub fn surface_text(u: &SplineFunction<'_>, s: usize) -> String {
    let (verts, faces) = surface_mesh(u, s);
    let mut out = String::with_capacity(verts.len() * 60 + faces.len() * 20);
    for v in &verts {
        let _ = writeln!(out, "v {:.12e} {:.12e} {:.12e}", v[0], v[1], v[2]);
    }
    for f in &faces {
        let _ = writeln!(out, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    out
}

/// Samples `(x, u(x, x))` on the part of the diagonal `y = x` inside the
/// mesh bounding box, skipping points outside the mesh.
pub fn diagonal_section(u: &SplineFunction<'_>, samples: usize) -> Vec<[f64; 2]> {
    let verts = u.space().mesh().vertices();
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for axis in 0..2 {
        let min = verts.iter().map(|v| v[axis]).fold(f64::INFINITY, f64::min);
        let max = verts.iter().map(|v| v[axis]).fold(f64::NEG_INFINITY, f64::max);
        lo = if axis == 0 { min } else { lo.max(min) };
        hi = if axis == 0 { max } else { hi.min(max) };
    }
    let n = samples.max(2);
    (0..n)
        .filter_map(|k| {
            let x = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            u.eval([x, x]).map(|z| [x, z])
        })
        .collect()
}

pub fn section_text(u: &SplineFunction<'_>, samples: usize) -> String {
    let mut out = String::new();
    for [x, z] in diagonal_section(u, samples) {
        let _ = writeln!(out, "{x:.12e} {z:.12e}");
    }
    out
}

/// Path of the section file that accompanies `surface`.
pub fn section_path(surface: &Path) -> PathBuf {
    let mut name = surface.as_os_str().to_owned();
    name.push(".section");
    PathBuf::from(name)
}

/// Writes the surface to `path` and the diagonal section next to it.
pub fn export_surface(u: &SplineFunction<'_>, path: &Path, s: usize) -> IoResult<PathBuf> {
    write_text(path, &surface_text(u, s))?;
    let section = section_path(path);
    write_text(&section, &section_text(u, SECTION_SAMPLES))?;
    Ok(section)
}
