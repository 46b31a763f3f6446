//! Small dense LU with partial pivoting.

use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::LinalgError;

#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

impl DenseLu {
    /// Factors the row-major `n × n` matrix `a`.
    pub fn new(mut a: Vec<f64>, n: usize) -> Result<Self, LinalgError> {
        if a.len() != n * n {
            return Err(LinalgError::DimensionMismatch(alloc::format!(
                "dense matrix has {} entries, expected {}",
                a.len(),
                n * n
            )));
        }
        let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let p = (k..n)
                .max_by(|&i, &j| a[i * n + k].abs().total_cmp(&a[j * n + k].abs()))
                .unwrap_or(k);
            let pivot = a[p * n + k];
            if !(pivot.abs() > 1e-14 * scale) {
                return Err(LinalgError::ZeroPivot { index: k, pivot });
            }
            if p != k {
                for j in 0..n {
                    a.swap(k * n + j, p * n + j);
                }
                piv.swap(k, p);
            }
            for i in k + 1..n {
                let l = a[i * n + k] / pivot;
                a[i * n + k] = l;
                for j in k + 1..n {
                    a[i * n + j] -= l * a[k * n + j];
                }
            }
        }
        Ok(Self { n, lu: a, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.piv.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s: f64 = (0..i).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| self.lu[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }

    /// Row-major inverse.
    pub fn inverse(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = alloc::vec![0.0; n * n];
        let mut e = alloc::vec![0.0; n];
        for j in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[j] = 1.0;
            let col = self.solve(&e);
            for i in 0..n {
                inv[i * n + j] = col[i];
            }
        }
        inv
    }
}
