//! Localized extension: each item is solved on `S_j = Ω_j ∪ N(Ω_j)`, the
//! users who rated it plus their one-hop graph neighbours.

use alloc::vec::Vec;

use super::{build_laplacian, solve_item, CompletedMatrix, ItemSystem, ModelParams};
use crate::exec::Executor;
use crate::knn::WeightGraph;
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// `Ω_j ∪ N(Ω_j)` in ascending order.
pub fn local_support(graph: &WeightGraph, labeled: &[usize]) -> Vec<usize> {
    let mut s: Vec<usize> = labeled.to_vec();
    for &u in labeled {
        s.extend(graph.w.row(u).iter().filter(|&(_, w)| w > 0.0).map(|(v, _)| v));
    }
    s.sort_unstable();
    s.dedup();
    s
}

/// Solves every item on its local subgraph only.
///
/// Predictions are written for users in `S_j`; every other cell of column `j`
/// is left unpredicted. Observed entries are restored as in the global solve.
pub fn localized_extension<E: Executor>(
    graph: &WeightGraph,
    items: &SparseMatrix,
    params: &ModelParams,
    exec: &E,
) -> Result<CompletedMatrix> {
    params.validate()?;
    build_laplacian(graph)?;
    let m = graph.len();
    if items.cols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: items.cols(),
        });
    }
    let results = exec.map(items.rows(), |j| {
        let row = items.row(j);
        if row.nnz() == 0 {
            return Ok(None);
        }
        let support = local_support(graph, row.indices);
        let sub = graph.induced(&support);
        let lap = build_laplacian(&sub)?;
        let local: Vec<usize> = row
            .indices
            .iter()
            .map(|u| support.binary_search(u).expect("labeled users are in S_j"))
            .collect();
        let sys = ItemSystem::new(j, local, row.values.to_vec())?;
        let (sys, outcome) = solve_item(&lap, sys, params)?;
        Ok(Some((support, sys.f, outcome)))
    });

    let mut out = CompletedMatrix::empty(m, items.rows());
    for (j, res) in results.into_iter().enumerate() {
        let res: Result<_> = res;
        if let Some((support, f, outcome)) = res? {
            for (&u, &v) in support.iter().zip(&f) {
                out.write(u, j, v);
            }
            out.outcomes[j] = Some(outcome);
        }
    }
    out.restore(items);
    Ok(out)
}
