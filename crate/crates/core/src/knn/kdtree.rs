//! A kd-tree over sparse rows with budgeted best-bin-first search.
//!
//! Each internal node splits on the dimension of largest variance (estimated
//! from a bounded, evenly strided sample of the node's points) at the median
//! coordinate, so the tree is balanced regardless of the data. Absent entries
//! of a sparse row count as zero coordinates.

use alloc::collections::BinaryHeap;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::{Ordering, Reverse};

use super::{sparse_sq_distance, KnnParams, Neighbor};
use crate::sparse::SparseMatrix;

/// Upper bound on the points sampled when choosing a split dimension.
pub const SPLIT_SAMPLE: usize = 256;

#[derive(Debug, Clone, Copy)]
enum Node {
    Split {
        dim: usize,
        value: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        start: usize,
        end: usize,
    },
}

/// kd-tree over the rows of a sparse matrix.
#[derive(Debug, Clone)]
pub struct KdTree<'a> {
    points: &'a SparseMatrix,
    nodes: Vec<Node>,
    order: Vec<usize>,
}

/// Total order on finite floats for heap keys.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Key(pub f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> KdTree<'a> {
    /// Builds a tree whose leaves hold at most `leaf_size` points.
    pub fn build(points: &'a SparseMatrix, leaf_size: usize) -> Self {
        let leaf_size = leaf_size.max(1);
        let mut tree = KdTree {
            points,
            nodes: Vec::new(),
            order: (0..points.rows()).collect(),
        };
        let mut sums = vec![0.0f64; points.cols()];
        let mut sq_sums = vec![0.0f64; points.cols()];
        let mut touched = Vec::new();
        tree.build_node(
            0,
            points.rows(),
            leaf_size,
            &mut Scratch {
                sums: &mut sums,
                sq_sums: &mut sq_sums,
                touched: &mut touched,
            },
        );
        tree
    }

    fn build_node(&mut self, start: usize, end: usize, leaf_size: usize, s: &mut Scratch) -> usize {
        let id = self.nodes.len();
        if end - start <= leaf_size {
            self.nodes.push(Node::Leaf { start, end });
            return id;
        }
        let dim = self.split_dimension(start, end, s);
        let points = self.points;
        let slice = &mut self.order[start..end];
        let mid = slice.len() / 2;
        let key = |p: &usize| (Key(points.row(*p).get(dim)), *p);
        slice.select_nth_unstable_by_key(mid, key);
        let value = points.row(slice[mid]).get(dim);

        // placeholder, patched once both children exist
        self.nodes.push(Node::Leaf { start, end });
        let left = self.build_node(start, start + mid, leaf_size, s);
        let right = self.build_node(start + mid, end, leaf_size, s);
        self.nodes[id] = Node::Split {
            dim,
            value,
            left,
            right,
        };
        id
    }

    fn split_dimension(&self, start: usize, end: usize, s: &mut Scratch) -> usize {
        let count = end - start;
        let stride = count.div_ceil(SPLIT_SAMPLE);
        let sample: Vec<usize> = self.order[start..end].iter().step_by(stride).copied().collect();
        for &p in &sample {
            for (c, v) in self.points.row(p).iter() {
                if s.sums[c] == 0.0 && s.sq_sums[c] == 0.0 {
                    s.touched.push(c);
                }
                s.sums[c] += v;
                s.sq_sums[c] += v * v;
            }
        }
        let n = sample.len() as f64;
        let mut best = (f64::NEG_INFINITY, 0usize);
        s.touched.sort_unstable();
        for &c in s.touched.iter() {
            let mean = s.sums[c] / n;
            let var = s.sq_sums[c] / n - mean * mean;
            if var > best.0 {
                best = (var, c);
            }
            s.sums[c] = 0.0;
            s.sq_sums[c] = 0.0;
        }
        s.touched.clear();
        best.1
    }

    /// The indexed point set.
    pub fn points(&self) -> &'a SparseMatrix {
        self.points
    }

    /// Point indices of every leaf, left to right.
    pub fn leaves(&self) -> Vec<&[usize]> {
        self.nodes
            .iter()
            .filter_map(|n| match *n {
                Node::Leaf { start, end } => Some(&self.order[start..end]),
                Node::Split { .. } => None,
            })
            .collect()
    }

    /// Number of node levels on the longest root-to-leaf path.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], id: usize) -> usize {
            match nodes[id] {
                Node::Leaf { .. } => 1,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        if self.nodes.is_empty() {
            0
        } else {
            walk(&self.nodes, 0)
        }
    }

    /// Checks the split invariant at every internal node: left points have
    /// coordinate `<= value`, right points `>= value` on the split dimension.
    pub fn is_consistent(&self) -> bool {
        self.nodes.iter().all(|n| match *n {
            Node::Leaf { .. } => true,
            Node::Split {
                dim,
                value,
                left,
                right,
            } => {
                self.subtree_points(left).all(|p| self.points.row(p).get(dim) <= value)
                    && self.subtree_points(right).all(|p| self.points.row(p).get(dim) >= value)
            }
        })
    }

    fn subtree_points(&self, id: usize) -> impl Iterator<Item = usize> + '_ {
        let (lo, hi) = self.span(id);
        self.order[lo..hi].iter().copied()
    }

    fn span(&self, id: usize) -> (usize, usize) {
        match self.nodes[id] {
            Node::Leaf { start, end } => (start, end),
            Node::Split { left, right, .. } => (self.span(left).0, self.span(right).1),
        }
    }

    /// Approximate `k` nearest neighbours of point `q`.
    ///
    /// Branches are explored in order of a lower bound on their distance to
    /// `q`; the search ends once the bound exceeds the current `k`-th best
    /// distance or after `max_comparisons` exact distance evaluations. Results
    /// are sorted by distance, ties by index. The query point itself is left
    /// out unless `self_loops` is set.
    pub fn query(&self, q: usize, params: &KnnParams) -> Vec<Neighbor> {
        let k = params.k;
        if self.nodes.is_empty() || k == 0 {
            return Vec::new();
        }
        let qrow = self.points.row(q);
        let mut best: BinaryHeap<(Key, usize)> = BinaryHeap::with_capacity(k + 1);
        let mut frontier: BinaryHeap<Reverse<(Key, usize)>> = BinaryHeap::new();
        let mut evaluations = 0usize;
        frontier.push(Reverse((Key(0.0), 0)));

        let worst = |best: &BinaryHeap<(Key, usize)>| {
            if best.len() < k {
                f64::INFINITY
            } else {
                best.peek().unwrap().0 .0
            }
        };

        'search: while let Some(Reverse((Key(bound), mut id))) = frontier.pop() {
            if bound > worst(&best) {
                break;
            }
            loop {
                match self.nodes[id] {
                    Node::Split {
                        dim,
                        value,
                        left,
                        right,
                    } => {
                        let diff = qrow.get(dim) - value;
                        let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                        let far_bound = bound.max(diff * diff);
                        if far_bound <= worst(&best) {
                            frontier.push(Reverse((Key(far_bound), far)));
                        }
                        id = near;
                    }
                    Node::Leaf { start, end } => {
                        for &p in &self.order[start..end] {
                            if p == q && !params.self_loops {
                                continue;
                            }
                            if evaluations >= params.max_comparisons {
                                break 'search;
                            }
                            evaluations += 1;
                            let d = sparse_sq_distance(qrow, self.points.row(p));
                            let cand = (Key(d), p);
                            if best.len() < k {
                                best.push(cand);
                            } else if cand < *best.peek().unwrap() {
                                best.pop();
                                best.push(cand);
                            }
                        }
                        break;
                    }
                }
            }
        }

        let mut out: Vec<Neighbor> = best
            .into_iter()
            .map(|(Key(sq_dist), index)| Neighbor { index, sq_dist })
            .collect();
        out.sort_by_key(|n| (Key(n.sq_dist), n.index));
        out
    }
}

struct Scratch<'s> {
    sums: &'s mut [f64],
    sq_sums: &'s mut [f64],
    touched: &'s mut Vec<usize>,
}
