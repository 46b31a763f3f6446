//! Text formats: meshes, iteration traces and study tables.
//!
//! Mesh files hold a header line `nv nt`, then `nv` lines `x y`, then `nt`
//! lines `i j k` with 0-based vertex indices. Text after `#` is ignored.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use mongeampere_core::iterate::IterationTrace;
use mongeampere_core::mesh::Triangulation;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Core(#[from] mongeampere_core::Error),
}

pub type IoResult<T> = Result<T, IoError>;

/// Header of trace CSV files.
pub const TRACE_HEADER: &str = "k,residual,increment_h1,min_eig,min_lap";

fn read(path: &Path) -> IoResult<String> {
    fs::read_to_string(path).map_err(|source| IoError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `contents`, creating parent directories.
pub fn write_text(path: &Path, contents: &str) -> IoResult<()> {
    let wrap = |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(wrap)?;
    }
    fs::write(path, contents).map_err(wrap)
}

fn fields<'a, const N: usize>(line: usize, text: &'a str, what: &str) -> IoResult<[&'a str; N]> {
    let parts: Vec<&str> = text.split_whitespace().collect();
    parts.try_into().map_err(|p: Vec<&str>| IoError::Parse {
        line,
        message: format!("expected {N} fields ({what}), found {}", p.len()),
    })
}

fn number<T: std::str::FromStr>(line: usize, s: &str) -> IoResult<T> {
    s.parse().map_err(|_| IoError::Parse {
        line,
        message: format!("invalid number '{s}'"),
    })
}

/// Parses a mesh from text and validates it.
pub fn parse_mesh(text: &str) -> IoResult<Triangulation> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());
    let (hl, header) = lines.next().ok_or(IoError::Parse {
        line: 1,
        message: "empty mesh file".into(),
    })?;
    let [nv, nt] = fields::<2>(hl, header, "nv nt")?;
    let (nv, nt): (usize, usize) = (number(hl, nv)?, number(hl, nt)?);
    let mut last = hl;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (ln, l) = lines.next().ok_or(IoError::Parse {
            line: last + 1,
            message: format!("expected {nv} vertices, found {}", vertices.len()),
        })?;
        let [x, y] = fields::<2>(ln, l, "x y")?;
        vertices.push([number(ln, x)?, number(ln, y)?]);
        last = ln;
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (ln, l) = lines.next().ok_or(IoError::Parse {
            line: last + 1,
            message: format!("expected {nt} triangles, found {}", triangles.len()),
        })?;
        let [i, j, k] = fields::<3>(ln, l, "i j k")?;
        let tri: [usize; 3] = [number(ln, i)?, number(ln, j)?, number(ln, k)?];
        if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
            return Err(IoError::Parse {
                line: ln,
                message: format!("vertex index {bad} out of range (nv = {nv})"),
            });
        }
        triangles.push(tri);
        last = ln;
    }
    if let Some((ln, _)) = lines.next() {
        return Err(IoError::Parse {
            line: ln,
            message: "trailing data after the triangle list".into(),
        });
    }
    Ok(Triangulation::new(vertices, triangles)?)
}

pub fn read_mesh(path: &Path) -> IoResult<Triangulation> {
    parse_mesh(&read(path)?)
}

pub fn format_mesh(mesh: &Triangulation) -> String {
    let mut out = format!("{} {}\n", mesh.n_vertices(), mesh.n_triangles());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:.17e} {:.17e}", v[0], v[1]);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "{} {} {}", t[0], t[1], t[2]);
    }
    out
}

pub fn write_mesh(path: &Path, mesh: &Triangulation) -> IoResult<()> {
    write_text(path, &format_mesh(mesh))
}

/// Trace CSV with [`TRACE_HEADER`]; monitors are `nan` when disabled.
pub fn trace_csv(trace: &IterationTrace) -> String {
    let mut out = format!("{TRACE_HEADER}\n");
    for r in &trace.rows {
        let (e, l) = r.convexity.map_or((f64::NAN, f64::NAN), |c| (c.min_eig, c.min_lap));
        let _ = writeln!(out, "{},{:.6e},{:.6e},{:.6e},{:.6e}", r.k, r.residual, r.increment_h1, e, l);
    }
    out
}

pub fn write_trace(path: &Path, trace: &IterationTrace) -> IoResult<()> {
    write_text(path, &trace_csv(trace))
}

/// Coefficient vector, one value per line.
pub fn format_coefficients(coeffs: &[f64]) -> String {
    let mut out = String::with_capacity(coeffs.len() * 25);
    for c in coeffs {
        let _ = writeln!(out, "{c:.17e}");
    }
    out
}
