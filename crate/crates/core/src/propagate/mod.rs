//! Harmonic extension of item ratings over the user graph.
//!
//! For item `j` with labeled users `Λ` (those who rated it) and observed
//! values `g`, the point-integral discretization of the Laplace equation
//! with soft boundary data gives the `m x m` system
//!
//! ```text
//! (L + mu * W[:, Λ] P_Λ) f = mu * W[:, Λ] h,      h = g - d
//! ```
//!
//! which is nonsymmetric because `W` is restricted on the right. `d` is a
//! Bregman dual, updated after each solve by `d += f[Λ] - g`, which pulls the
//! labeled values towards `g`. The system is solved matrix-free by BiCGStab.

mod harmonic;
mod localized;

pub use harmonic::{discrete_harmonic, discrete_harmonic_with};
pub use localized::{local_support, localized_extension};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::exec::Executor;
use crate::knn::{build_weight_matrix, KnnParams, WeightGraph};
use crate::solver::{bicgstab, LinearOperator, SolverOptions};
use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// `L = D - W` applied without forming the matrix.
#[derive(Debug, Clone, Copy)]
pub struct LaplacianOperator<'a> {
    graph: &'a WeightGraph,
}

/// Checks that `graph` is symmetric and wraps it as a Laplacian.
pub fn build_laplacian(graph: &WeightGraph) -> Result<LaplacianOperator<'_>> {
    if let Some((row, col)) = graph.w.find_asymmetry() {
        return Err(Error::Asymmetric { row, col });
    }
    Ok(LaplacianOperator { graph })
}

impl<'a> LaplacianOperator<'a> {
    /// The underlying graph.
    pub fn graph(&self) -> &'a WeightGraph {
        self.graph
    }

    /// Cached degrees `d_i`.
    pub fn degrees(&self) -> &'a [f64] {
        &self.graph.degrees
    }

    /// Number of nodes.
    pub fn len(&self) -> usize {
        self.graph.len()
    }

    /// `true` for the empty graph.
    pub fn is_empty(&self) -> bool {
        self.graph.is_empty()
    }

    /// `x^T L x = 1/2 sum_ij w_ij (x_i - x_j)^2` evaluated as `x . (L x)`.
    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        self.apply(x, &mut y);
        x.iter().zip(&y).map(|(a, b)| a * b).sum()
    }

    /// Dense row-major copy, for small graphs and tests.
    pub fn to_dense(&self) -> Vec<f64> {
        let m = self.len();
        let mut out = vec![0.0; m * m];
        for i in 0..m {
            out[i * m + i] = self.graph.degrees[i];
            for (j, w) in self.graph.w.row(i).iter() {
                out[i * m + j] -= w;
            }
        }
        out
    }
}

impl LinearOperator for LaplacianOperator<'_> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let w = &self.graph.w;
        for (i, yi) in y.iter_mut().enumerate() {
            let off: f64 = w.row(i).iter().map(|(j, v)| v * x[j]).sum();
            *yi = self.graph.degrees[i] * x[i] - off;
        }
    }
}

/// The soft-boundary operator `x -> L x + mu * W[:, Λ] x[Λ]`.
#[derive(Debug, Clone)]
pub struct SoftSystem<'a> {
    lap: LaplacianOperator<'a>,
    labeled: Vec<bool>,
    mu_bar: f64,
}

impl<'a> SoftSystem<'a> {
    /// Operator for the labeled set `labeled` (indices into `0..m`).
    pub fn new(lap: LaplacianOperator<'a>, labeled: &[usize], mu_bar: f64) -> Self {
        let mut mask = vec![false; lap.len()];
        for &l in labeled {
            mask[l] = true;
        }
        Self {
            lap,
            labeled: mask,
            mu_bar,
        }
    }

    /// Right-hand side `mu * W[:, Λ] h[Λ]`; `h` is indexed like `labeled`.
    pub fn rhs(&self, labeled: &[usize], h: &[f64]) -> Vec<f64> {
        let m = self.lap.len();
        let mut full = vec![0.0; m];
        for (&l, &v) in labeled.iter().zip(h) {
            full[l] = v;
        }
        let w = &self.lap.graph.w;
        (0..m)
            .map(|i| {
                let s: f64 = w
                    .row(i)
                    .iter()
                    .filter(|&(j, _)| self.labeled[j])
                    .map(|(j, v)| v * full[j])
                    .sum();
                self.mu_bar * s
            })
            .collect()
    }

    /// Absolute column sums of the operator.
    ///
    /// Used as a diagonal right preconditioner: the `mu`-scaled entries live
    /// in the labeled columns, off the diagonal, so plain Jacobi scaling does
    /// nothing for them.
    pub fn column_scale(&self) -> Vec<f64> {
        let g = self.lap.graph;
        (0..self.lap.len())
            .map(|j| {
                let coef = if self.labeled[j] { self.mu_bar - 1.0 } else { -1.0 };
                // column j of a symmetric W is row j
                let mut diag = g.degrees[j];
                let mut s = 0.0;
                for (i, v) in g.w.row(j).iter() {
                    if i == j {
                        diag += coef * v;
                    } else {
                        s += (coef * v).abs();
                    }
                }
                s += diag.abs();
                if s > 0.0 {
                    s
                } else {
                    1.0
                }
            })
            .collect()
    }
}

impl LinearOperator for SoftSystem<'_> {
    fn dim(&self) -> usize {
        self.lap.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let g = self.lap.graph;
        for (i, yi) in y.iter_mut().enumerate() {
            let mut off = 0.0;
            for (j, v) in g.w.row(i).iter() {
                // -w_ij x_j from L, +mu w_ij x_j from the boundary term
                let scale = if self.labeled[j] { self.mu_bar - 1.0 } else { -1.0 };
                off += scale * v * x[j];
            }
            *yi = g.degrees[i] * x[i] + off;
        }
    }
}

/// `L x + mu * W[:, Λ] x[Λ]`.
pub fn apply_system(
    lap: &LaplacianOperator<'_>,
    labeled: &[usize],
    mu_bar: f64,
    x: &[f64],
) -> Vec<f64> {
    let sys = SoftSystem::new(*lap, labeled, mu_bar);
    let mut y = vec![0.0; x.len()];
    sys.apply(x, &mut y);
    y
}

/// `mu = 1e4 * n / m`, the coupling implied by the point-integral Dirichlet
/// discretization with the boundary constants folded in.
pub fn pim_mu_bar(n_items: usize, m_users: usize) -> f64 {
    1e4 * n_items as f64 / m_users.max(1) as f64
}

/// Parameters of the extension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Boundary coupling `mu`.
    pub mu_bar: f64,
    /// Bregman iterations per item.
    pub bregman_iters: usize,
    /// Graph re-estimation passes.
    pub outer_iters: usize,
    /// Relative residual target of each linear solve.
    pub solver_tol: f64,
    /// Iteration cap of each linear solve.
    pub solver_maxit: usize,
    /// Solve each item on its labeled users plus their graph neighbours only.
    pub localized: bool,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            mu_bar: 1.0,
            bregman_iters: 1,
            outer_iters: 1,
            solver_tol: 1e-6,
            solver_maxit: 500,
            localized: false,
        }
    }
}

impl ModelParams {
    /// Checks `mu_bar > 0`, iteration counts `>= 1` and a positive tolerance.
    pub fn validate(&self) -> Result<()> {
        if !(self.mu_bar > 0.0 && self.mu_bar.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "mu_bar must be positive, got {}",
                self.mu_bar
            )));
        }
        if self.bregman_iters == 0 || self.outer_iters == 0 || self.solver_maxit == 0 {
            return Err(Error::InvalidParameter(
                "iteration counts must be at least 1".into(),
            ));
        }
        if self.solver_tol.is_nan() || self.solver_tol <= 0.0 {
            return Err(Error::InvalidParameter("solver_tol must be positive".into()));
        }
        Ok(())
    }

    fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver_tol,
            max_iter: self.solver_maxit,
        }
    }
}

/// One item's extension problem and its state.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemSystem {
    /// Item index.
    pub item: usize,
    /// Labeled users `Λ`, strictly increasing.
    pub labeled: Vec<usize>,
    /// Observed ratings over `Λ`.
    pub g: Vec<f64>,
    /// Bregman dual over `Λ`.
    pub d: Vec<f64>,
    /// Solution over all users; empty until solved.
    pub f: Vec<f64>,
}

impl ItemSystem {
    /// A fresh system with zero dual.
    pub fn new(item: usize, labeled: Vec<usize>, g: Vec<f64>) -> Result<Self> {
        if labeled.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: labeled.len(),
                got: g.len(),
            });
        }
        if labeled.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter(
                "labeled indices must be strictly increasing".into(),
            ));
        }
        let d = vec![0.0; g.len()];
        Ok(Self {
            item,
            labeled,
            g,
            d,
            f: Vec::new(),
        })
    }
}

/// Diagnostics of one item solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemOutcome {
    /// Dimension of the linear system (all users, or `|S_j|` when localized).
    pub system_dim: usize,
    /// Krylov iterations summed over Bregman steps.
    pub iterations: usize,
    /// Worst final relative residual over Bregman steps.
    pub relative_residual: f64,
    /// Every solve reached its tolerance.
    pub converged: bool,
    /// Some solve stagnated and returned its best iterate.
    pub stagnated: bool,
    /// `max |f[Λ] - g|` after each Bregman step.
    pub labeled_residuals: Vec<f64>,
}

/// Runs the Bregman-refined soft-boundary solve for one item.
///
/// The first solve starts from the mean of `g` on every user; later Bregman
/// steps warm-start from the previous solution.
pub fn solve_item(
    lap: &LaplacianOperator<'_>,
    mut sys: ItemSystem,
    params: &ModelParams,
) -> Result<(ItemSystem, ItemOutcome)> {
    if sys.labeled.is_empty() {
        return Err(Error::EmptyLabels { item: sys.item });
    }
    let m = lap.len();
    if let Some(&l) = sys.labeled.last() {
        if l >= m {
            return Err(Error::DimensionMismatch { expected: m, got: l + 1 });
        }
    }
    let system = SoftSystem::new(*lap, &sys.labeled, params.mu_bar);
    let scale = system.column_scale();
    let opts = params.solver_options();
    let mean = sys.g.iter().sum::<f64>() / sys.g.len() as f64;
    if sys.f.len() != m {
        sys.f = vec![mean; m];
    }

    let mut outcome = ItemOutcome {
        system_dim: m,
        iterations: 0,
        relative_residual: 0.0,
        converged: true,
        stagnated: false,
        labeled_residuals: Vec::with_capacity(params.bregman_iters),
    };
    let mut h = vec![0.0; sys.g.len()];
    for _ in 0..params.bregman_iters {
        for ((hi, gi), di) in h.iter_mut().zip(&sys.g).zip(&sys.d) {
            *hi = gi - di;
        }
        let b = system.rhs(&sys.labeled, &h);
        let stats = bicgstab(&system, &b, &mut sys.f, Some(&scale), &opts);
        outcome.iterations += stats.iterations;
        outcome.relative_residual = outcome.relative_residual.max(stats.relative_residual);
        outcome.converged &= stats.converged;
        outcome.stagnated |= stats.stagnated;

        let mut worst = 0.0f64;
        for ((di, &l), gi) in sys.d.iter_mut().zip(&sys.labeled).zip(&sys.g) {
            let gap = sys.f[l] - gi;
            *di += gap;
            worst = worst.max(gap.abs());
        }
        outcome.labeled_residuals.push(worst);
    }
    Ok((sys, outcome))
}

/// Predicted rating matrix.
///
/// Values are stored column by column (item-major). Cells that were not
/// predicted (items with no training ratings, users outside a localized
/// subgraph) are flagged and hold `0.0`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletedMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    predicted: Vec<bool>,
    /// Per-item diagnostics; `None` for items with no labeled users.
    pub outcomes: Vec<Option<ItemOutcome>>,
}

impl CompletedMatrix {
    /// Builds a matrix from `(user, item, prediction)` cells; all other cells
    /// are unpredicted.
    pub fn from_cells(rows: usize, cols: usize, cells: &[(usize, usize, f64)]) -> Self {
        let mut out = Self::empty(rows, cols);
        for &(u, j, v) in cells {
            out.write(u, j, v);
        }
        out
    }

    fn empty(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            values: vec![0.0; rows * cols],
            predicted: vec![false; rows * cols],
            outcomes: vec![None; cols],
        }
    }

    /// Number of users.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of items.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Prediction for `(user, item)`, `None` when the cell was not predicted.
    pub fn get(&self, user: usize, item: usize) -> Option<f64> {
        let p = item * self.rows + user;
        self.predicted[p].then(|| self.values[p])
    }

    /// Whether `(user, item)` holds a prediction.
    pub fn is_predicted(&self, user: usize, item: usize) -> bool {
        self.predicted[item * self.rows + user]
    }

    /// All users' values for one item (unpredicted cells read `0.0`).
    pub fn column(&self, item: usize) -> &[f64] {
        &self.values[item * self.rows..(item + 1) * self.rows]
    }

    /// Number of predicted cells.
    pub fn predicted_count(&self) -> usize {
        self.predicted.iter().filter(|&&p| p).count()
    }

    /// Users as dense rows in item space, unpredicted cells as zero.
    pub fn to_user_points(&self) -> SparseMatrix {
        let mut data = vec![0.0; self.rows * self.cols];
        for j in 0..self.cols {
            for i in 0..self.rows {
                data[i * self.cols + j] = self.values[j * self.rows + i];
            }
        }
        SparseMatrix::from_dense(self.rows, self.cols, &data).expect("finite predictions")
    }

    fn write(&mut self, user: usize, item: usize, value: f64) {
        let p = item * self.rows + user;
        self.values[p] = value;
        self.predicted[p] = true;
    }

    /// Overwrites observed cells with their observed values.
    fn restore(&mut self, items: &SparseMatrix) {
        for j in 0..items.rows() {
            for (u, v) in items.row(j).iter() {
                self.write(u, j, v);
            }
        }
    }
}

/// Solves every item's system on the full graph.
///
/// `items` is the `n x m` rating matrix with one row per item. Observed
/// entries are written back unchanged, so `R` agrees with `A` on `Ω`.
pub fn solve_all_items<E: Executor>(
    graph: &WeightGraph,
    items: &SparseMatrix,
    params: &ModelParams,
    exec: &E,
) -> Result<CompletedMatrix> {
    params.validate()?;
    let lap = build_laplacian(graph)?;
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
        let sys = ItemSystem::new(j, row.indices.to_vec(), row.values.to_vec())?;
        solve_item(&lap, sys, params).map(Some)
    });

    let mut out = CompletedMatrix::empty(m, items.rows());
    for (j, res) in results.into_iter().enumerate() {
        if let Some((sys, outcome)) = res? {
            for (u, &v) in sys.f.iter().enumerate() {
                out.write(u, j, v);
            }
            out.outcomes[j] = Some(outcome);
        }
    }
    out.restore(items);
    Ok(out)
}

/// Phases reported to an [`ExtensionObserver`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// kd-tree, kNN queries and weight assembly.
    Graph,
    /// Per-item linear solves.
    Solve,
}

/// Hooks into [`harmonic_extension_observed`], e.g. for timing.
pub trait ExtensionObserver {
    /// A phase of outer pass `pass` is about to start.
    fn phase_started(&mut self, _pass: usize, _phase: Phase) {}
    /// A phase of outer pass `pass` finished.
    fn phase_finished(&mut self, _pass: usize, _phase: Phase) {}
    /// The weight graph of outer pass `pass` is ready.
    fn graph_built(&mut self, _pass: usize, _graph: &WeightGraph) {}
}

impl ExtensionObserver for () {}

/// Completes the `m x n` user-row rating matrix `a` by harmonic extension.
///
/// The first pass builds the graph from the sparse ratings; each further
/// outer pass rebuilds it from the dense completed rows.
pub fn harmonic_extension<E: Executor>(
    a: &SparseMatrix,
    knn: &KnnParams,
    params: &ModelParams,
    exec: &E,
) -> Result<CompletedMatrix> {
    harmonic_extension_observed(a, knn, params, exec, &mut ())
}

/// [`harmonic_extension`] with phase callbacks.
pub fn harmonic_extension_observed<E: Executor, O: ExtensionObserver>(
    a: &SparseMatrix,
    knn: &KnnParams,
    params: &ModelParams,
    exec: &E,
    observer: &mut O,
) -> Result<CompletedMatrix> {
    knn.validate()?;
    params.validate()?;
    if a.rows() == 0 || a.nnz() == 0 {
        return Err(Error::InvalidParameter("rating matrix is empty".into()));
    }
    let items = a.transpose();
    let mut dense_points: Option<SparseMatrix> = None;
    let mut completed = None;
    for pass in 0..params.outer_iters {
        observer.phase_started(pass, Phase::Graph);
        let graph = build_weight_matrix(dense_points.as_ref().unwrap_or(a), knn, exec)?;
        observer.phase_finished(pass, Phase::Graph);
        observer.graph_built(pass, &graph);

        observer.phase_started(pass, Phase::Solve);
        let r = if params.localized {
            localized_extension(&graph, &items, params, exec)?
        } else {
            solve_all_items(&graph, &items, params, exec)?
        };
        observer.phase_finished(pass, Phase::Solve);
        if pass + 1 < params.outer_iters {
            dense_points = Some(r.to_user_points());
        }
        completed = Some(r);
    }
    Ok(completed.expect("outer_iters >= 1"))
}
