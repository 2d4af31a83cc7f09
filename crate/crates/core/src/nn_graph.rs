//! Exact Euclidean nearest-neighbor graph.
//!
//! Every point is linked to its closest *other* point. Ties in distance go
//! to the smallest index, so the graph is a deterministic function of the
//! covariates. Low-dimensional inputs go through a k-d tree; higher
//! dimensions use the quadratic scan, and both give identical graphs.

use rayon::prelude::*;

use crate::dataset::Matrix;
use crate::error::{Error, Result};

/// Dimensions above this use brute force. Performance knob only.
pub const TREE_MAX_DIM: usize = 15;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct NnGraph {
    pub nn: Vec<usize>,
    pub dist: Vec<f64>,
}

impl NnGraph {
    pub fn len(&self) -> usize {
        self.nn.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nn.is_empty()
    }

    /// Largest number of points sharing the same nearest neighbor.
    pub fn max_in_degree(&self) -> usize {
        let mut deg = vec![0usize; self.nn.len()];
        for &j in &self.nn {
            deg[j] += 1;
        }
        deg.into_iter().max().unwrap_or(0)
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let t = a[k] - b[k];
        s += t * t;
    }
    s
}

#[derive(Clone, Copy)]
struct Best {
    d2: f64,
    idx: usize,
}

impl Best {
    const NONE: Best = Best {
        d2: f64::INFINITY,
        idx: usize::MAX,
    };

    #[inline]
    fn offer(&mut self, d2: f64, idx: usize) {
        if d2 < self.d2 || (d2 == self.d2 && idx < self.idx) {
            self.d2 = d2;
            self.idx = idx;
        }
    }
}

fn check_input(x: &Matrix) -> Result<()> {
    if x.rows() < 2 {
        return Err(Error::InsufficientRows(x.rows()));
    }
    if let Some(index) = x.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            what: "covariates",
            index,
        });
    }
    Ok(())
}

fn finish(best: Vec<Best>) -> NnGraph {
    let (nn, dist) = best.into_iter().map(|b| (b.idx, b.d2.sqrt())).unzip();
    NnGraph { nn, dist }
}

/// Quadratic scan implementing the argmin definition verbatim.
pub fn nn_brute_force(x: &Matrix) -> Result<NnGraph> {
    check_input(x)?;
    let n = x.rows();
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            let q = x.row(i);
            let mut best = Best::NONE;
            for j in (0..n).filter(|&j| j != i) {
                best.offer(sq_dist(q, x.row(j)), j);
            }
            best
        })
        .collect();
    Ok(finish(best))
}

/// Exact nearest neighbors; picks the tree or the scan by dimension.
pub fn build_nn(x: &Matrix) -> Result<NnGraph> {
    check_input(x)?;
    if x.cols() > TREE_MAX_DIM {
        return nn_brute_force(x);
    }
    let tree = KdTree::new(x);
    let best = (0..x.rows())
        .into_par_iter()
        .map(|i| tree.nearest_excluding(i))
        .collect();
    Ok(finish(best))
}

enum Node {
    Leaf {
        start: usize,
        end: usize,
    },
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
}

struct KdTree<'a> {
    x: &'a Matrix,
    perm: Vec<usize>,
    nodes: Vec<Node>,
}

impl<'a> KdTree<'a> {
    fn new(x: &'a Matrix) -> Self {
        let mut tree = KdTree {
            x,
            perm: (0..x.rows()).collect(),
            nodes: Vec::new(),
        };
        tree.build(0, x.rows());
        tree
    }

    fn build(&mut self, start: usize, end: usize) -> usize {
        let id = self.nodes.len();
        if end - start <= LEAF_SIZE {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let d = self.x.cols();
        let mut dim = 0;
        let mut widest = -1.0;
        for k in 0..d {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for &i in &self.perm[start..end] {
                let v = self.x.get(i, k);
                lo = lo.min(v);
                hi = hi.max(v);
            }
            if hi - lo > widest {
                widest = hi - lo;
                dim = k;
            }
        }
        if widest <= 0.0 {
            // all points coincide
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let mid = start + (end - start) / 2;
        let x = self.x;
        self.perm[start..end]
            .select_nth_unstable_by(mid - start, |&a, &b| x.get(a, dim).total_cmp(&x.get(b, dim)));
        let value = x.get(self.perm[mid], dim);

        self.nodes.push(Node::Split {
            dim,
            value,
            left: 0,
            right: 0,
        });
        let left = self.build(start, mid);
        let right = self.build(mid, end);
        if let Node::Split {
            left: l, right: r, ..
        } = &mut self.nodes[id]
        {
            *l = left;
            *r = right;
        }
        id
    }

    fn nearest_excluding(&self, qi: usize) -> Best {
        let q = self.x.row(qi);
        let mut off = vec![0.0; q.len()];
        let mut best = Best::NONE;
        self.search(0, q, qi, &mut off, &mut best);
        best
    }

    // `off` holds per-axis gaps from the query to the current cell. The
    // lower bound is summed in axis order like `sq_dist`, so it can never
    // exceed the true squared distance of any point in the cell and strict
    // pruning keeps the search exact, including the tie rule.
    fn search(&self, node: usize, q: &[f64], qi: usize, off: &mut [f64], best: &mut Best) {
        match self.nodes[node] {
            Node::Leaf { start, end } => {
                for &j in &self.perm[start..end] {
                    if j != qi {
                        best.offer(sq_dist(q, self.x.row(j)), j);
                    }
                }
            }
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                let diff = q[dim] - value;
                let (near, far) = if diff < 0.0 { (left, right) } else { (right, left) };
                self.search(near, q, qi, off, best);
                let saved = off[dim];
                off[dim] = diff;
                let bound: f64 = off.iter().fold(0.0, |s, t| s + t * t);
                if bound <= best.d2 {
                    self.search(far, q, qi, off, best);
                }
                off[dim] = saved;
            }
        }
    }
}
