//! Rating datasets, user filtering and the per-user train/test split.
//!
//! Users and items carry dense 0-based internal ids. The original ids from
//! the source file are kept in ascending order in [`RatingDataset::user_ids`]
//! and [`RatingDataset::item_ids`], so internal id `u` maps back to
//! `user_ids[u]`.

use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::sparse::SparseMatrix;
use crate::{Error, Result};

/// One observed rating.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    /// Internal user id.
    pub user: usize,
    /// Internal item id.
    pub item: usize,
    /// Rating score.
    pub value: f64,
    /// Seconds since the epoch, when the source provides one.
    pub timestamp: Option<i64>,
}

/// A set of ratings over `m` users and `n` items.
///
/// Ratings are stored sorted by `(user, item)` with no duplicate pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDataset {
    ratings: Vec<Rating>,
    /// Original user id of each internal user.
    pub user_ids: Vec<u64>,
    /// Original item id of each internal item.
    pub item_ids: Vec<u64>,
}

/// A rating as it appears in a source file, before id remapping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawRating {
    /// Original user id.
    pub user: u64,
    /// Original item id.
    pub item: u64,
    /// Rating score.
    pub value: f64,
    /// Optional timestamp.
    pub timestamp: Option<i64>,
}

/// Parameters of the per-user split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    /// Ratings per user kept for training (`N`).
    pub n_train: usize,
    /// Minimum ratings per user left for testing.
    pub min_test: usize,
    /// Seed for the per-user draws.
    pub seed: u64,
}

impl SplitSpec {
    /// `n_train` training ratings, 10 test ratings minimum.
    pub fn new(n_train: usize, seed: u64) -> Self {
        Self {
            n_train,
            min_test: 10,
            seed,
        }
    }

    /// Checks `n_train >= 1` and `min_test >= 1`.
    pub fn validate(&self) -> Result<()> {
        if self.n_train == 0 || self.min_test == 0 {
            return Err(Error::InvalidParameter(
                "n_train and min_test must be at least 1".into(),
            ));
        }
        Ok(())
    }

    /// Minimum number of ratings a user needs to survive the filter.
    pub fn min_ratings(&self) -> usize {
        self.n_train + self.min_test
    }
}

/// Row orientation of [`to_csr`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orientation {
    /// `m x n`, one row per user.
    UserRows,
    /// `n x m`, one row per item.
    ItemRows,
}

impl RatingDataset {
    /// Builds a dataset from raw records, remapping ids densely in ascending
    /// order of the original ids.
    ///
    /// Duplicate `(user, item)` pairs keep the last occurrence. Returns the
    /// dataset and the number of duplicates dropped.
    pub fn from_raw(raw: &[RawRating]) -> Result<(Self, usize)> {
        if let Some(r) = raw.iter().find(|r| !r.value.is_finite()) {
            return Err(Error::NonFinite(alloc::format!(
                "rating of user {} for item {}",
                r.user,
                r.item
            )));
        }
        let mut user_ids: Vec<u64> = raw.iter().map(|r| r.user).collect();
        user_ids.sort_unstable();
        user_ids.dedup();
        let mut item_ids: Vec<u64> = raw.iter().map(|r| r.item).collect();
        item_ids.sort_unstable();
        item_ids.dedup();

        let mut ratings: Vec<(usize, Rating)> = raw
            .iter()
            .enumerate()
            .map(|(pos, r)| {
                let user = user_ids.binary_search(&r.user).unwrap();
                let item = item_ids.binary_search(&r.item).unwrap();
                (
                    pos,
                    Rating {
                        user,
                        item,
                        value: r.value,
                        timestamp: r.timestamp,
                    },
                )
            })
            .collect();
        // later occurrences first within a pair, so dedup keeps the last one
        ratings.sort_unstable_by(|a, b| {
            (a.1.user, a.1.item, b.0).cmp(&(b.1.user, b.1.item, a.0))
        });
        let before = ratings.len();
        ratings.dedup_by(|a, b| a.1.user == b.1.user && a.1.item == b.1.item);
        let duplicates = before - ratings.len();

        Ok((
            Self {
                ratings: ratings.into_iter().map(|(_, r)| r).collect(),
                user_ids,
                item_ids,
            },
            duplicates,
        ))
    }

    /// Builds a dataset from ratings that already use internal ids.
    ///
    /// `m` and `n` fix the id ranges; original ids default to the internal ids.
    pub fn from_ratings(m: usize, n: usize, mut ratings: Vec<Rating>) -> Result<Self> {
        for r in &ratings {
            if r.user >= m || r.item >= n {
                return Err(Error::InvalidParameter(alloc::format!(
                    "rating ({}, {}) outside {m} users x {n} items",
                    r.user,
                    r.item
                )));
            }
            if !r.value.is_finite() {
                return Err(Error::NonFinite(alloc::format!("({}, {})", r.user, r.item)));
            }
        }
        ratings.sort_by_key(|r| (r.user, r.item));
        if ratings
            .windows(2)
            .any(|w| (w[0].user, w[0].item) == (w[1].user, w[1].item))
        {
            return Err(Error::InvalidParameter("duplicate (user, item) pair".into()));
        }
        Ok(Self {
            ratings,
            user_ids: (0..m as u64).collect(),
            item_ids: (0..n as u64).collect(),
        })
    }

    /// Number of users `m`.
    pub fn m(&self) -> usize {
        self.user_ids.len()
    }

    /// Number of items `n`.
    pub fn n(&self) -> usize {
        self.item_ids.len()
    }

    /// Number of ratings.
    pub fn len(&self) -> usize {
        self.ratings.len()
    }

    /// `true` when there are no ratings.
    pub fn is_empty(&self) -> bool {
        self.ratings.is_empty()
    }

    /// All ratings, sorted by `(user, item)`.
    pub fn ratings(&self) -> &[Rating] {
        &self.ratings
    }

    /// Ratings of one user, sorted by item.
    pub fn user_ratings(&self, user: usize) -> &[Rating] {
        let s = self.ratings.partition_point(|r| r.user < user);
        let e = self.ratings.partition_point(|r| r.user <= user);
        &self.ratings[s..e]
    }

    /// Number of ratings of every user.
    pub fn user_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.m()];
        for r in &self.ratings {
            counts[r.user] += 1;
        }
        counts
    }

    /// Number of items with at least one rating.
    pub fn items_with_ratings(&self) -> usize {
        let mut seen = alloc::vec![false; self.n()];
        for r in &self.ratings {
            seen[r.item] = true;
        }
        seen.into_iter().filter(|&s| s).count()
    }

    /// Same users and items, different ratings (already sorted and unique).
    fn with_ratings(&self, ratings: Vec<Rating>) -> Self {
        Self {
            ratings,
            user_ids: self.user_ids.clone(),
            item_ids: self.item_ids.clone(),
        }
    }
}

/// Drops every user with fewer than `n_train + min_test` ratings.
///
/// Surviving users are renumbered densely in their original order. Items are
/// not filtered, so some may end up without ratings.
pub fn filter_min_ratings(ds: &RatingDataset, spec: &SplitSpec) -> RatingDataset {
    let counts = ds.user_counts();
    let need = spec.min_ratings();
    let mut remap = alloc::vec![usize::MAX; ds.m()];
    let mut user_ids = Vec::new();
    for (u, &c) in counts.iter().enumerate() {
        if c >= need {
            remap[u] = user_ids.len();
            user_ids.push(ds.user_ids[u]);
        }
    }
    let ratings = ds
        .ratings
        .iter()
        .filter(|r| remap[r.user] != usize::MAX)
        .map(|r| Rating {
            user: remap[r.user],
            ..*r
        })
        .collect();
    RatingDataset {
        ratings,
        user_ids,
        item_ids: ds.item_ids.clone(),
    }
}

/// Splits every user's ratings into exactly `n_train` training ratings and
/// the rest for testing.
///
/// The draw for user `u` uses a ChaCha stream keyed by `(seed, u)`, so the
/// split of one user does not depend on any other user.
pub fn split_per_user(
    ds: &RatingDataset,
    spec: &SplitSpec,
) -> Result<(RatingDataset, RatingDataset)> {
    spec.validate()?;
    let mut train = Vec::with_capacity(ds.m() * spec.n_train);
    let mut test = Vec::with_capacity(ds.len().saturating_sub(ds.m() * spec.n_train));
    let mut chosen = Vec::new();
    for user in 0..ds.m() {
        let rs = ds.user_ratings(user);
        if rs.len() < spec.n_train {
            return Err(Error::InsufficientRatings {
                user,
                have: rs.len(),
                need: spec.n_train,
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(user as u64);
        chosen.clear();
        chosen.resize(rs.len(), false);
        for i in index::sample(&mut rng, rs.len(), spec.n_train).into_iter() {
            chosen[i] = true;
        }
        for (r, &c) in rs.iter().zip(&chosen) {
            if c {
                train.push(*r);
            } else {
                test.push(*r);
            }
        }
    }
    Ok((ds.with_ratings(train), ds.with_ratings(test)))
}

/// Compressed-row rating matrix.
pub fn to_csr(ds: &RatingDataset, orientation: Orientation) -> SparseMatrix {
    let triplets: Vec<(usize, usize, f64)> = match orientation {
        Orientation::UserRows => ds.ratings.iter().map(|r| (r.user, r.item, r.value)).collect(),
        Orientation::ItemRows => ds.ratings.iter().map(|r| (r.item, r.user, r.value)).collect(),
    };
    let (rows, cols) = match orientation {
        Orientation::UserRows => (ds.m(), ds.n()),
        Orientation::ItemRows => (ds.n(), ds.m()),
    };
    SparseMatrix::from_triplets(rows, cols, &triplets).expect("dataset ids are in range")
}
