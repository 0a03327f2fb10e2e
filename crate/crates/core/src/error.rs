//! Error type shared by every module of the core crate.

use alloc::string::String;
use alloc::vec::Vec;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by the ranking pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A parameter violated its documented range.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two operands had incompatible shapes.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Required size.
        expected: usize,
        /// Size that was supplied.
        got: usize,
    },

    /// A user had fewer ratings than the split asks for.
    #[error("user {user} has {have} ratings, split needs at least {need} (filter skipped?)")]
    InsufficientRatings {
        /// Internal user id.
        user: usize,
        /// Ratings available.
        have: usize,
        /// Ratings required.
        need: usize,
    },

    /// A weight matrix was expected to be symmetric but is not.
    #[error("weight matrix is not symmetric at ({row}, {col})")]
    Asymmetric {
        /// Row of the offending entry.
        row: usize,
        /// Column of the offending entry.
        col: usize,
    },

    /// An item system was requested with no labeled users.
    #[error("item {item} has no labeled users")]
    EmptyLabels {
        /// Item index.
        item: usize,
    },

    /// Unlabeled nodes with no path to any labeled node.
    #[error("{} unlabeled node(s) are disconnected from the labeled set (first: {:?})", component.len(), component.first())]
    Disconnected {
        /// Node indices of the unreachable component(s), ascending.
        component: Vec<usize>,
    },

    /// Non-finite value in the input.
    #[error("non-finite value at {0}")]
    NonFinite(String),
}
