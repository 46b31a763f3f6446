//! Sparse up-looking LDLᵀ factorization without pivoting.
//!
//! Suitable for symmetric positive definite and symmetric quasi-definite
//! matrices, which admit a stable factorization under any symmetric
//! permutation.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)]
use num_traits::Float;

use super::sparse::CsrMatrix;
use super::LinalgError;

#[derive(Debug, Clone)]
pub struct LdlFactor {
    n: usize,
    /// `perm[k]` is the original index of the `k`-th pivot.
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    d: Vec<f64>,
}

impl LdlFactor {
    /// Factors `P A Pᵀ = L D Lᵀ` for the symmetric matrix `a` (both
    /// triangles stored) with the elimination order `perm`.
    ///
    /// A pivot with `|D_kk| ≤ pivot_tol(i)`, `i` the original index, fails
    /// with [`LinalgError::ZeroPivot`].
    pub fn factor(
        a: &CsrMatrix,
        perm: Vec<usize>,
        pivot_tol: impl Fn(usize) -> f64,
    ) -> Result<Self, LinalgError> {
        let n = a.nrows();
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0usize; n];
        for (k, &p) in perm.iter().enumerate() {
            iperm[p] = k;
        }

        // Upper triangle of the permuted matrix, column-compressed:
        // column k holds rows i <= k.
        let mut colcount = vec![0usize; n + 1];
        for (i, j, _) in a.iter() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                colcount[pj + 1] += 1;
            }
        }
        for k in 0..n {
            colcount[k + 1] += colcount[k];
        }
        let ap = colcount.clone();
        let mut next = colcount;
        let mut ai = vec![0usize; ap[n]];
        let mut ax = vec![0.0; ap[n]];
        for (i, j, v) in a.iter() {
            let (pi, pj) = (iperm[i], iperm[j]);
            if pi <= pj {
                ai[next[pj]] = pi;
                ax[next[pj]] = v;
                next[pj] += 1;
            }
        }

        // Symbolic: elimination tree and column counts of L.
        const NONE: usize = usize::MAX;
        let mut parent = vec![NONE; n];
        let mut lnz = vec![0usize; n];
        let mut flag = vec![NONE; n];
        for k in 0..n {
            flag[k] = k;
            for &row in &ai[ap[k]..ap[k + 1]] {
                let mut i = row;
                if i >= k {
                    continue;
                }
                while flag[i] != k {
                    if parent[i] == NONE {
                        parent[i] = k;
                    }
                    lnz[i] += 1;
                    flag[i] = k;
                    i = parent[i];
                }
            }
        }
        let mut lp = vec![0usize; n + 1];
        for k in 0..n {
            lp[k + 1] = lp[k] + lnz[k];
        }

        // Numeric.
        let mut li = vec![0usize; lp[n]];
        let mut lx = vec![0.0; lp[n]];
        let mut d = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut pattern = vec![0usize; n];
        flag.iter_mut().for_each(|f| *f = NONE);
        lnz.iter_mut().for_each(|c| *c = 0);
        for k in 0..n {
            let mut top = n;
            flag[k] = k;
            for p in ap[k]..ap[k + 1] {
                let mut i = ai[p];
                y[i] += ax[p];
                let mut len = 0;
                while flag[i] != k {
                    pattern[len] = i;
                    len += 1;
                    flag[i] = k;
                    i = parent[i];
                }
                while len > 0 {
                    top -= 1;
                    len -= 1;
                    pattern[top] = pattern[len];
                }
            }
            d[k] = y[k];
            y[k] = 0.0;
            for &i in &pattern[top..n] {
                let yi = y[i];
                y[i] = 0.0;
                let start = lp[i];
                let end = start + lnz[i];
                for p in start..end {
                    y[li[p]] -= lx[p] * yi;
                }
                let lki = yi / d[i];
                d[k] -= lki * yi;
                li[end] = k;
                lx[end] = lki;
                lnz[i] += 1;
            }
            if !(d[k].abs() > pivot_tol(perm[k])) {
                return Err(LinalgError::ZeroPivot {
                    index: perm[k],
                    pivot: d[k],
                });
            }
        }

        Ok(Self {
            n,
            perm,
            lp,
            li,
            lx,
            d,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of stored off-diagonal entries of `L`.
    pub fn nnz_l(&self) -> usize {
        self.lx.len()
    }

    /// Diagonal of `D` in elimination order.
    pub fn pivots(&self) -> &[f64] {
        &self.d
    }

    /// Original index of the `k`-th pivot.
    pub fn pivot_index(&self, k: usize) -> usize {
        self.perm[k]
    }

    /// Pivots paired with the original index they eliminate.
    pub fn indexed_pivots(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.perm.iter().copied().zip(self.d.iter().copied())
    }

    /// Number of negative entries of `D` (the matrix inertia's negative count).
    pub fn negative_pivots(&self) -> usize {
        self.d.iter().filter(|&&v| v < 0.0).count()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for j in 0..n {
            let xj = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                x[self.li[p]] -= self.lx[p] * xj;
            }
        }
        for j in 0..n {
            x[j] /= self.d[j];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for p in self.lp[j]..self.lp[j + 1] {
                s -= self.lx[p] * x[self.li[p]];
            }
            x[j] = s;
        }
        let mut out = vec![0.0; n];
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = x[k];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sparse::TripletMatrix;

    #[test]
    fn solves_spd_tridiagonal() {
        let n = 50;
        let mut t = TripletMatrix::new(n, n);
        for i in 0..n {
            t.push(i, i, 2.0);
            if i + 1 < n {
                t.push(i, i + 1, -1.0);
                t.push(i + 1, i, -1.0);
            }
        }
        let a = t.to_csr();
        let perm: Vec<usize> = (0..n).rev().collect();
        let f = LdlFactor::factor(&a, perm, |_| 0.0).unwrap();
        let xs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&xs);
        let x = f.solve(&b);
        for i in 0..n {
            assert!((x[i] - xs[i]).abs() < 1e-10);
        }
        assert_eq!(f.negative_pivots(), 0);
    }

    #[test]
    fn quasi_definite_inertia() {
        // [[2, 1], [1, -1]]
        let a = CsrMatrix::from_dense(&[vec![2.0, 1.0], vec![1.0, -1.0]]);
        let f = LdlFactor::factor(&a, vec![0, 1], |_| 0.0).unwrap();
        assert_eq!(f.negative_pivots(), 1);
        let x = f.solve(&[3.0, 0.0]);
        assert!((2.0 * x[0] + x[1] - 3.0).abs() < 1e-14);
        assert!((x[0] - x[1]).abs() < 1e-14);
    }

    #[test]
    fn zero_pivot_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        let err = LdlFactor::factor(&a, vec![0, 1], |_| 1e-14).unwrap_err();
        assert!(matches!(err, LinalgError::ZeroPivot { index: 1, .. }));
    }
}
