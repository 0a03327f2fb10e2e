//! Ranking quality: DCG@K and NDCG@K over each user's test items.
//!
//! ```text
//! DCG@K  = sum_{j=1..K} (2^{r_j} - 1) / log2(j + 1)
//! NDCG@K = DCG@K / DCG@K(relevances sorted descending)
//! ```
//!
//! `K` larger than the list is truncated to the list length. A list whose
//! ideal DCG is zero scores 0 and is flagged.

use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::propagate::CompletedMatrix;
use crate::ratings::RatingDataset;
use crate::{Error, Result};

fn gain(rel: f64) -> f64 {
    libm::pow(2.0, rel) - 1.0
}

/// DCG of the first `k` relevances (already in predicted order).
pub fn dcg_at_k(rels: &[f64], k: usize) -> f64 {
    rels.iter()
        .take(k)
        .enumerate()
        .map(|(i, &r)| gain(r) / libm::log2(i as f64 + 2.0))
        .sum()
}

/// NDCG value plus the degenerate-list flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NdcgScore {
    /// NDCG@K in `[0, 1]`.
    pub value: f64,
    /// The ideal DCG was zero, so `value` was defined as 0.
    pub zero_ideal: bool,
}

/// NDCG of the first `k` relevances (already in predicted order).
pub fn ndcg_at_k(rels: &[f64], k: usize) -> NdcgScore {
    let mut ideal = rels.to_vec();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg = dcg_at_k(&ideal, k);
    if idcg <= 0.0 {
        return NdcgScore {
            value: 0.0,
            zero_ideal: true,
        };
    }
    NdcgScore {
        value: dcg_at_k(rels, k) / idcg,
        zero_ideal: false,
    }
}

/// A user's test items in predicted order with their true ratings.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedList {
    /// Item indices, best predicted first.
    pub items: Vec<usize>,
    /// Ground-truth ratings aligned with `items`.
    pub relevance: Vec<f64>,
}

/// Orders `test` (item, true rating) pairs by predicted score.
///
/// Higher predictions come first and ties go to the smaller item index.
/// Unpredicted cells sort after every predicted one, by index.
pub fn rank_for_user(r: &CompletedMatrix, user: usize, test: &[(usize, f64)]) -> RankedList {
    let mut scored: Vec<(Option<f64>, usize, f64)> = test
        .iter()
        .map(|&(item, rel)| (r.get(user, item), item, rel))
        .collect();
    scored.sort_by(|a, b| {
        let by_score = match (a.0, b.0) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        };
        by_score.then(a.1.cmp(&b.1))
    });
    RankedList {
        items: scored.iter().map(|s| s.1).collect(),
        relevance: scored.iter().map(|s| s.2).collect(),
    }
}

/// Aggregate ranking quality over users.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    /// Cutoff `K`.
    pub k_cutoff: usize,
    /// NDCG@K of each evaluated user, in user order.
    pub per_user_ndcg: Vec<f64>,
    /// Internal id of each evaluated user, aligned with `per_user_ndcg`.
    pub users: Vec<usize>,
    /// Arithmetic mean of `per_user_ndcg`.
    pub mean_ndcg: f64,
    /// Test cells ranked.
    pub items_evaluated: usize,
    /// Test cells without a prediction (ranked last).
    pub unpredicted: usize,
    /// Users whose test ratings were all zero.
    pub zero_ideal_users: usize,
}

/// Mean NDCG@K over every user with test ratings.
pub fn evaluate(r: &CompletedMatrix, test: &RatingDataset, k: usize) -> Result<EvalReport> {
    if k == 0 {
        return Err(Error::InvalidParameter("K must be at least 1".into()));
    }
    if test.m() > r.rows() || test.n() > r.cols() {
        return Err(Error::DimensionMismatch {
            expected: r.rows(),
            got: test.m(),
        });
    }
    let mut report = EvalReport {
        k_cutoff: k,
        per_user_ndcg: Vec::new(),
        users: Vec::new(),
        mean_ndcg: 0.0,
        items_evaluated: 0,
        unpredicted: 0,
        zero_ideal_users: 0,
    };
    let mut pairs = Vec::new();
    for user in 0..test.m() {
        let rs = test.user_ratings(user);
        if rs.is_empty() {
            continue;
        }
        pairs.clear();
        pairs.extend(rs.iter().map(|x| (x.item, x.value)));
        report.unpredicted += pairs.iter().filter(|p| !r.is_predicted(user, p.0)).count();
        let ranked = rank_for_user(r, user, &pairs);
        let score = ndcg_at_k(&ranked.relevance, k);
        report.zero_ideal_users += score.zero_ideal as usize;
        report.items_evaluated += pairs.len();
        report.per_user_ndcg.push(score.value);
        report.users.push(user);
    }
    if !report.per_user_ndcg.is_empty() {
        report.mean_ndcg =
            report.per_user_ndcg.iter().sum::<f64>() / report.per_user_ndcg.len() as f64;
    }
    Ok(report)
}
