//! Geometric nested dissection for fill reduction.

use alloc::vec;
use alloc::vec::Vec;

use super::sparse::CsrMatrix;

const LEAF: usize = 64;

struct Dissector<'a> {
    adj: &'a CsrMatrix,
    coords: &'a [[f64; 2]],
    mark: Vec<u32>,
    stamp: u32,
    order: Vec<usize>,
}

impl Dissector<'_> {
    fn next_stamp(&mut self) -> u32 {
        self.stamp += 1;
        self.stamp
    }

    /// Nodes of `side` that touch a node carrying `other_stamp`.
    fn frontier(&self, side: &[usize], other_stamp: u32) -> Vec<bool> {
        side.iter()
            .map(|&v| self.adj.row(v).0.iter().any(|&w| w != v && self.mark[w] == other_stamp))
            .collect()
    }

    fn dissect(&mut self, mut nodes: Vec<usize>) {
        if nodes.len() <= LEAF {
            self.order.extend(nodes);
            return;
        }
        let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
        for &v in &nodes {
            for a in 0..2 {
                lo[a] = lo[a].min(self.coords[v][a]);
                hi[a] = hi[a].max(self.coords[v][a]);
            }
        }
        let axis = usize::from(hi[1] - lo[1] > hi[0] - lo[0]);
        let coords = self.coords;
        nodes.sort_by(|&a, &b| {
            coords[a][axis]
                .partial_cmp(&coords[b][axis])
                .unwrap_or(core::cmp::Ordering::Equal)
                .then(a.cmp(&b))
        });
        let right = nodes.split_off(nodes.len() / 2);
        let left = nodes;

        let left_stamp = self.next_stamp();
        for &v in &left {
            self.mark[v] = left_stamp;
        }
        let right_stamp = self.next_stamp();
        for &v in &right {
            self.mark[v] = right_stamp;
        }
        let left_front = self.frontier(&left, right_stamp);
        let right_front = self.frontier(&right, left_stamp);
        let nl = left_front.iter().filter(|&&b| b).count();
        let nr = right_front.iter().filter(|&&b| b).count();

        let (a, a_front, b) = if nl <= nr {
            (left, left_front, right)
        } else {
            (right, right_front, left)
        };
        let mut rest = Vec::with_capacity(a.len());
        let mut sep = Vec::new();
        for (v, on_front) in a.into_iter().zip(a_front) {
            if on_front {
                sep.push(v);
            } else {
                rest.push(v);
            }
        }
        if rest.is_empty() {
            // No useful separator: the block is essentially dense.
            self.order.extend(b);
            self.order.extend(sep);
            return;
        }
        self.dissect(rest);
        self.dissect(b);
        self.order.extend(sep);
    }
}

/// Elimination order for the symmetric pattern of `adj`, using the planar
/// position of each unknown. `order[k]` is the unknown eliminated `k`-th.
pub fn nested_dissection(adj: &CsrMatrix, coords: &[[f64; 2]]) -> Vec<usize> {
    let n = adj.nrows();
    assert_eq!(coords.len(), n);
    let mut d = Dissector {
        adj,
        coords,
        mark: vec![0; n],
        stamp: 0,
        order: Vec::with_capacity(n),
    };
    d.dissect((0..n).collect());
    d.order
}
