//! Hard-constraint discrete harmonic extension, the baseline that minimizes
//! `sum_ij w_ij (f_i - f_j)^2` subject to `f = g` on the labeled nodes.

use alloc::collections::VecDeque;
use alloc::vec;
use alloc::vec::Vec;

use crate::knn::WeightGraph;
use crate::solver::{conjugate_gradient, LinearOperator, SolverOptions};
use crate::{Error, Result};

/// `L_UU` restricted to the unlabeled nodes.
struct UnlabeledBlock<'a> {
    graph: &'a WeightGraph,
    unlabeled: &'a [usize],
    local: &'a [usize],
}

impl LinearOperator for UnlabeledBlock<'_> {
    fn dim(&self) -> usize {
        self.unlabeled.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (a, &u) in self.unlabeled.iter().enumerate() {
            let mut off = 0.0;
            for (v, w) in self.graph.w.row(u).iter() {
                let b = self.local[v];
                if b != usize::MAX {
                    off += w * x[b];
                }
            }
            y[a] = self.graph.degrees[u] * x[a] - off;
        }
    }
}

/// [`discrete_harmonic_with`] with a tight default tolerance.
pub fn discrete_harmonic(graph: &WeightGraph, labeled: &[usize], g: &[f64]) -> Result<Vec<f64>> {
    let opts = SolverOptions {
        tol: 1e-13,
        max_iter: (20 * graph.len()).max(1000),
    };
    discrete_harmonic_with(graph, labeled, g, &opts)
}

/// Solves `L_UU f_U = W_UΛ g` by conjugate gradient and returns the full
/// vector with `f_Λ = g` exactly.
///
/// Fails with [`Error::Disconnected`] when some unlabeled node has no path to
/// a labeled one, since `L_UU` is then singular.
pub fn discrete_harmonic_with(
    graph: &WeightGraph,
    labeled: &[usize],
    g: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    let m = graph.len();
    if labeled.len() != g.len() {
        return Err(Error::DimensionMismatch {
            expected: labeled.len(),
            got: g.len(),
        });
    }
    if labeled.is_empty() {
        return Err(Error::EmptyLabels { item: 0 });
    }
    let mut is_labeled = vec![false; m];
    for &l in labeled {
        if l >= m {
            return Err(Error::DimensionMismatch { expected: m, got: l + 1 });
        }
        is_labeled[l] = true;
    }

    // breadth-first search from the labeled set
    let mut reached = is_labeled.clone();
    let mut queue: VecDeque<usize> = labeled.iter().copied().collect();
    while let Some(u) = queue.pop_front() {
        for (v, w) in graph.w.row(u).iter() {
            if w > 0.0 && !reached[v] {
                reached[v] = true;
                queue.push_back(v);
            }
        }
    }
    let unreachable: Vec<usize> = (0..m).filter(|&u| !reached[u]).collect();
    if !unreachable.is_empty() {
        return Err(Error::Disconnected {
            component: unreachable,
        });
    }

    let mut f = vec![0.0; m];
    for (&l, &v) in labeled.iter().zip(g) {
        f[l] = v;
    }
    let unlabeled: Vec<usize> = (0..m).filter(|&u| !is_labeled[u]).collect();
    if unlabeled.is_empty() {
        return Ok(f);
    }
    let mut local = vec![usize::MAX; m];
    for (a, &u) in unlabeled.iter().enumerate() {
        local[u] = a;
    }
    let rhs: Vec<f64> = unlabeled
        .iter()
        .map(|&u| {
            graph
                .w
                .row(u)
                .iter()
                .filter(|&(v, _)| is_labeled[v])
                .map(|(v, w)| w * f[v])
                .sum()
        })
        .collect();
    let diag: Vec<f64> = unlabeled
        .iter()
        .map(|&u| graph.degrees[u] - graph.w.get(u, u))
        .collect();
    let block = UnlabeledBlock {
        graph,
        unlabeled: &unlabeled,
        local: &local,
    };
    let mean = g.iter().sum::<f64>() / g.len() as f64;
    let mut x = vec![mean; unlabeled.len()];
    conjugate_gradient(&block, &rhs, &mut x, Some(&diag), opts);
    for (&u, v) in unlabeled.iter().zip(x) {
        f[u] = v;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::SparseMatrix;

    fn graph(m: usize, edges: &[(usize, usize, f64)]) -> WeightGraph {
        let t: Vec<_> = edges.iter().flat_map(|&(i, j, w)| [(i, j, w), (j, i, w)]).collect();
        WeightGraph::from_matrix(SparseMatrix::from_triplets(m, m, &t).unwrap()).unwrap()
    }

    #[test]
    fn three_node_path_interpolates() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        let f = discrete_harmonic(&g, &[0, 2], &[0.0, 2.0]).unwrap();
        assert!((f[1] - 1.0).abs() < 1e-12);
        assert_eq!((f[0], f[2]), (0.0, 2.0));
    }

    #[test]
    fn all_labeled_returns_g() {
        let g = graph(3, &[(0, 1, 1.0), (1, 2, 1.0)]);
        assert_eq!(
            discrete_harmonic(&g, &[0, 1, 2], &[3.0, 1.0, 2.0]).unwrap(),
            vec![3.0, 1.0, 2.0]
        );
    }

    #[test]
    fn disconnected_component_is_named() {
        let g = graph(5, &[(0, 1, 1.0), (3, 4, 1.0)]);
        let err = discrete_harmonic(&g, &[0], &[1.0]).unwrap_err();
        assert_eq!(
            err,
            Error::Disconnected {
                component: vec![2, 3, 4]
            }
        );
    }

    #[test]
    fn maximum_principle_on_a_small_mesh() {
        let g = graph(
            6,
            &[(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 0.1), (4, 5, 1.0), (0, 5, 0.3), (1, 4, 0.7)],
        );
        let f = discrete_harmonic(&g, &[0, 3], &[1.0, 5.0]).unwrap();
        for v in f {
            assert!((1.0 - 1e-12..=5.0 + 1e-12).contains(&v));
        }
    }
}
