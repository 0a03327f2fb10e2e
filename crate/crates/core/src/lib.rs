//! Collaborative ranking by harmonic extension on a kNN user graph.
//!
//! Each item's observed ratings are treated as boundary data on a user-user
//! similarity graph and extended to every other user by solving a
//! point-integral discretization of the Laplace equation:
//!
//! ```text
//! L f + mu * W[:, Λ] f[Λ] = mu * W[:, Λ] h        L = D - W
//! ```
//!
//! where `Λ` is the set of users who rated the item, `h = g - d` the boundary
//! values shifted by a Bregman dual, and `W` a symmetric Gaussian kNN graph
//! built from a bounded-comparison kd-tree over the sparse rating rows.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, thread pools and
//! the command line live in the `harmonic-rank` companion crate; parallel
//! work is injected through the [`Executor`] trait.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`sparse`] | compressed-row matrices |
//! | [`ratings`] | rating datasets, user filtering, per-user train/test split |
//! | [`knn`] | kd-tree, approximate kNN queries, Gaussian weight graph |
//! | [`solver`] | matrix-free BiCGStab and conjugate gradient |
//! | [`propagate`] | Laplacian, per-item solves, localized and hard-constraint variants |
//! | [`eval`] | DCG/NDCG and per-user ranking evaluation |

#![no_std]
#![warn(missing_docs)]

extern crate alloc;

pub mod error;
pub mod eval;
pub mod exec;
pub mod knn;
pub mod propagate;
pub mod ratings;
pub mod solver;
pub mod sparse;

pub use error::{Error, Result};
pub use eval::{dcg_at_k, evaluate, ndcg_at_k, rank_for_user, EvalReport, NdcgScore, RankedList};
pub use exec::{Executor, Sequential};
pub use knn::{
    build_weight_matrix, select_bandwidth, sparse_sq_distance, Bandwidth, KdTree, KnnParams,
    Neighbor, WeightGraph,
};
pub use propagate::{
    apply_system, build_laplacian, discrete_harmonic, harmonic_extension, localized_extension,
    pim_mu_bar, solve_all_items, solve_item, CompletedMatrix, ItemOutcome, ItemSystem,
    LaplacianOperator, ModelParams,
};
pub use ratings::{
    filter_min_ratings, split_per_user, to_csr, Orientation, Rating, RatingDataset, SplitSpec,
};
pub use sparse::{SparseMatrix, SparseRow};
