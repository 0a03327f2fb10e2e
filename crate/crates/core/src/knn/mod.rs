//! User-user similarity graph.
//!
//! Users are points in item space (their sparse rating rows, missing ratings
//! read as zero). Each user is queried against a kd-tree for `k` approximate
//! nearest neighbours with at most `max_comparisons` distance evaluations,
//! neighbours get Gaussian weights `exp(-d^2 / 4t)`, and the result is
//! symmetrized by the elementwise maximum of `W` and `W^T`.

mod kdtree;

pub use kdtree::{KdTree, SPLIT_SAMPLE};

use alloc::format;
use alloc::vec::Vec;

use crate::exec::Executor;
use crate::sparse::{SparseMatrix, SparseRow};
use crate::{Error, Result};

/// How the Gaussian bandwidth `t` is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// Mean squared distance to the `ceil(k/2)`-th neighbour, divided by 4.
    Auto,
    /// A fixed `t > 0`.
    Fixed(f64),
}

/// Parameters of the kNN graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnnParams {
    /// Neighbours per user.
    pub k: usize,
    /// Cap on exact distance evaluations per query (`D`).
    pub max_comparisons: usize,
    /// Bandwidth rule.
    pub bandwidth: Bandwidth,
    /// Keep each user as its own neighbour (weight 1 on the diagonal).
    pub self_loops: bool,
    /// Maximum points per kd-tree leaf.
    pub leaf_size: usize,
}

impl Default for KnnParams {
    fn default() -> Self {
        Self {
            k: 64,
            max_comparisons: 256,
            bandwidth: Bandwidth::Auto,
            self_loops: false,
            leaf_size: 16,
        }
    }
}

impl KnnParams {
    /// Checks `1 <= k <= max_comparisons`, a positive fixed bandwidth and a
    /// nonzero leaf size.
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("k must be at least 1".into()));
        }
        if self.k > self.max_comparisons {
            return Err(Error::InvalidParameter(format!(
                "k ({}) must not exceed max_comparisons ({})",
                self.k, self.max_comparisons
            )));
        }
        if let Bandwidth::Fixed(t) = self.bandwidth {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "bandwidth must be positive, got {t}"
                )));
            }
        }
        if self.leaf_size == 0 {
            return Err(Error::InvalidParameter("leaf_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// A neighbour found by a kNN query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Neighbor {
    /// Point index.
    pub index: usize,
    /// Squared Euclidean distance to the query.
    pub sq_dist: f64,
}

/// Squared Euclidean distance between two sparse rows; absent entries are 0.
///
/// Walks both index lists once: shared entries contribute `(a - b)^2`, entries
/// on only one side contribute their square.
pub fn sparse_sq_distance(a: SparseRow<'_>, b: SparseRow<'_>) -> f64 {
    let (mut i, mut j) = (0, 0);
    let mut acc = 0.0;
    while i < a.indices.len() && j < b.indices.len() {
        let (ca, cb) = (a.indices[i], b.indices[j]);
        if ca == cb {
            let d = a.values[i] - b.values[j];
            acc += d * d;
            i += 1;
            j += 1;
        } else if ca < cb {
            acc += a.values[i] * a.values[i];
            i += 1;
        } else {
            acc += b.values[j] * b.values[j];
            j += 1;
        }
    }
    for &v in &a.values[i..] {
        acc += v * v;
    }
    for &v in &b.values[j..] {
        acc += v * v;
    }
    acc
}

/// Gaussian bandwidth `t` for the weights `exp(-d^2 / 4t)`.
///
/// In auto mode `t` is the mean, over points, of the squared distance to the
/// `ceil(k/2)`-th neighbour (or the farthest one found, if fewer), divided by
/// four, so a typical mid-rank neighbour gets weight `e^-1`. Self matches are
/// ignored. If every such distance is zero the rule falls back to `t = 1`.
pub fn select_bandwidth(neighbors: &[Vec<Neighbor>], params: &KnnParams) -> f64 {
    match params.bandwidth {
        Bandwidth::Fixed(t) => t,
        Bandwidth::Auto => {
            let rank = params.k.div_ceil(2).max(1);
            let mut sum = 0.0;
            let mut count = 0usize;
            for (p, list) in neighbors.iter().enumerate() {
                let others: Vec<&Neighbor> = list.iter().filter(|n| n.index != p).collect();
                if let Some(n) = others.get(rank.min(others.len()).wrapping_sub(1)) {
                    sum += n.sq_dist;
                    count += 1;
                }
            }
            let mean = if count == 0 { 0.0 } else { sum / count as f64 };
            if mean > 0.0 && mean.is_finite() {
                mean / 4.0
            } else {
                1.0
            }
        }
    }
}

/// Symmetric sparse similarity graph over users.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightGraph {
    /// `m x m` symmetric weights in `[0, 1]`.
    pub w: SparseMatrix,
    /// Bandwidth used for the Gaussian weights.
    pub t: f64,
    /// `d_i = sum_j w_ij`.
    pub degrees: Vec<f64>,
    /// Build parameters, when built from data.
    pub params: Option<KnnParams>,
}

impl WeightGraph {
    /// Wraps an existing symmetric weight matrix.
    pub fn from_matrix(w: SparseMatrix) -> Result<Self> {
        if let Some((row, col)) = w.find_asymmetry() {
            return Err(Error::Asymmetric { row, col });
        }
        if let Some(v) = w.values().iter().find(|v| **v < 0.0) {
            return Err(Error::InvalidParameter(format!("negative weight {v}")));
        }
        let degrees = w.row_sums();
        Ok(Self {
            w,
            t: 1.0,
            degrees,
            params: None,
        })
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.w.rows()
    }

    /// `true` for the empty graph.
    pub fn is_empty(&self) -> bool {
        self.w.rows() == 0
    }

    /// Subgraph induced by `keep` (ascending), with degrees recomputed.
    pub fn induced(&self, keep: &[usize]) -> WeightGraph {
        let w = self.w.principal_submatrix(keep);
        let degrees = w.row_sums();
        WeightGraph {
            w,
            t: self.t,
            degrees,
            params: self.params,
        }
    }
}

/// Builds the symmetric Gaussian kNN graph over the rows of `points`.
///
/// Queries run through `exec`; results are merged in user order, so the graph
/// does not depend on the executor's width.
pub fn build_weight_matrix<E: Executor>(
    points: &SparseMatrix,
    params: &KnnParams,
    exec: &E,
) -> Result<WeightGraph> {
    params.validate()?;
    let m = points.rows();
    let tree = KdTree::build(points, params.leaf_size);
    let lists = exec.map(m, |i| tree.query(i, params));
    let t = select_bandwidth(&lists, params);

    let mut entries: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * params.k * m);
    for (i, list) in lists.iter().enumerate() {
        for n in list {
            if n.index == i {
                if params.self_loops {
                    entries.push((i, i, 1.0));
                }
                continue;
            }
            let w = libm::exp(-n.sq_dist / (4.0 * t));
            if w > 0.0 {
                entries.push((i, n.index, w));
                entries.push((n.index, i, w));
            }
        }
    }
    entries.sort_unstable_by_key(|e| (e.0, e.1));
    let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(entries.len());
    for e in entries {
        match merged.last_mut() {
            Some(last) if (last.0, last.1) == (e.0, e.1) => last.2 = last.2.max(e.2),
            _ => merged.push(e),
        }
    }
    let w = SparseMatrix::from_triplets(m, m, &merged)?;
    let degrees = w.row_sums();
    Ok(WeightGraph {
        w,
        t,
        degrees,
        params: Some(*params),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Sequential;
    use alloc::vec;

    fn row<'a>(idx: &'a [usize], val: &'a [f64]) -> SparseRow<'a> {
        SparseRow {
            indices: idx,
            values: val,
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(sparse_sq_distance(row(&[0, 3], &[1.0, 2.0]), row(&[0, 3], &[1.0, 2.0])), 0.0);
        assert_eq!(sparse_sq_distance(row(&[0], &[5.0]), row(&[1], &[3.0])), 34.0);
        assert_eq!(sparse_sq_distance(row(&[0], &[5.0]), row(&[0], &[3.0])), 4.0);
    }

    #[test]
    fn validate_rejects_k_above_budget() {
        let p = KnnParams {
            k: 10,
            max_comparisons: 5,
            ..KnnParams::default()
        };
        assert!(p.validate().is_err());
        assert!(KnnParams::default().validate().is_ok());
    }

    #[test]
    fn bandwidth_examples() {
        let nb = |index, sq_dist| Neighbor { index, sq_dist };
        // two points at squared distance 8, k = 1
        let lists = vec![vec![nb(1, 8.0)], vec![nb(0, 8.0)]];
        let p = KnnParams {
            k: 1,
            max_comparisons: 1,
            ..KnnParams::default()
        };
        assert_eq!(select_bandwidth(&lists, &p), 2.0);

        let lists = vec![vec![nb(1, 4.0), nb(2, 4.0)]; 3];
        let p = KnnParams {
            k: 2,
            max_comparisons: 2,
            ..KnnParams::default()
        };
        assert_eq!(select_bandwidth(&lists, &p), 1.0);

        let fixed = KnnParams {
            bandwidth: Bandwidth::Fixed(0.5),
            ..KnnParams::default()
        };
        assert_eq!(select_bandwidth(&lists, &fixed), 0.5);

        let zeros = vec![vec![nb(1, 0.0)], vec![nb(0, 0.0)]];
        assert_eq!(select_bandwidth(&zeros, &p), 1.0);
    }

    #[test]
    fn twins_get_unit_weight() {
        let pts = SparseMatrix::from_triplets(
            3,
            2,
            &[(0, 0, 4.0), (1, 0, 4.0), (2, 1, 9.0)],
        )
        .unwrap();
        let p = KnnParams {
            k: 1,
            max_comparisons: 3,
            ..KnnParams::default()
        };
        let g = build_weight_matrix(&pts, &p, &Sequential).unwrap();
        assert_eq!(g.w.get(0, 1), 1.0);
        assert_eq!(g.w.get(1, 0), 1.0);
        assert_eq!(g.w.get(0, 0), 0.0);
    }

    #[test]
    fn weight_at_bandwidth_distance_is_inv_e() {
        // 1-D points 0 and 2: d^2 = 4 with t fixed at 1
        let pts = SparseMatrix::from_triplets(2, 1, &[(1, 0, 2.0)]).unwrap();
        let p = KnnParams {
            k: 1,
            max_comparisons: 2,
            bandwidth: Bandwidth::Fixed(1.0),
            ..KnnParams::default()
        };
        let g = build_weight_matrix(&pts, &p, &Sequential).unwrap();
        assert!((g.w.get(0, 1) - 0.367_879_441_171_442_33).abs() < 1e-15);
    }

    #[test]
    fn one_sided_neighbor_is_symmetrized() {
        // 0 at 0, 1 at 1, 2 at 3: 2 lists 1, but 1 lists 0
        let pts = SparseMatrix::from_triplets(3, 1, &[(1, 0, 1.0), (2, 0, 3.0)]).unwrap();
        let p = KnnParams {
            k: 1,
            max_comparisons: 3,
            bandwidth: Bandwidth::Fixed(1.0),
            ..KnnParams::default()
        };
        let g = build_weight_matrix(&pts, &p, &Sequential).unwrap();
        assert!(g.w.get(2, 1) > 0.0);
        assert_eq!(g.w.get(1, 2), g.w.get(2, 1));
        assert!(g.w.find_asymmetry().is_none());
    }

    #[test]
    fn self_loops_put_ones_on_diagonal() {
        let pts = SparseMatrix::from_triplets(3, 1, &[(1, 0, 1.0), (2, 0, 3.0)]).unwrap();
        let p = KnnParams {
            k: 2,
            max_comparisons: 3,
            self_loops: true,
            ..KnnParams::default()
        };
        let g = build_weight_matrix(&pts, &p, &Sequential).unwrap();
        for i in 0..3 {
            assert_eq!(g.w.get(i, i), 1.0);
        }
    }

    #[test]
    fn from_matrix_rejects_asymmetry() {
        let w = SparseMatrix::from_triplets(2, 2, &[(0, 1, 1.0)]).unwrap();
        assert_eq!(
            WeightGraph::from_matrix(w).unwrap_err(),
            Error::Asymmetric { row: 0, col: 1 }
        );
    }
}
