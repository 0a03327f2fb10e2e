//! MovieLens rating files.
//!
//! `ml100k` (`u.data`): `user<TAB>item<TAB>rating<TAB>timestamp`.
//! `ml1m` (`ratings.dat`, also 10m): `user::item::rating::timestamp`.

use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use harmonic_rank_core::ratings::RawRating;
use harmonic_rank_core::RatingDataset;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    /// Tab-separated, as in MovieLens-100k `u.data`.
    Ml100k,
    /// `::`-separated, as in MovieLens-1m/10m `ratings.dat`.
    Ml1m,
}

impl Format {
    fn split(self, line: &str) -> Vec<&str> {
        match self {
            Format::Ml100k => line.split('\t').collect(),
            Format::Ml1m => line.split("::").collect(),
        }
    }
}

/// A parsed rating file.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: RatingDataset,
    /// `(user, item)` pairs seen more than once; the last occurrence wins.
    pub duplicates: usize,
}

/// Reads a MovieLens rating file.
///
/// Blank lines are ignored. Anything else that does not have exactly four
/// numeric fields is an error carrying the 1-based line number.
pub fn load_movielens(path: &Path, format: Format) -> Result<Loaded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_movielens(BufReader::new(file), format, path)
}

/// Like [`load_movielens`] but from any reader; `origin` only labels errors.
pub fn parse_movielens<R: BufRead>(reader: R, format: Format, origin: &Path) -> Result<Loaded> {
    let mut raw = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: i + 1,
            message,
        };
        let fields = format.split(line);
        if fields.len() != 4 {
            return Err(bad(format!("expected 4 fields, found {}", fields.len())));
        }
        let int = |name: &str, s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|_| bad(format!("{name} is not a non-negative integer: {s:?}")))
        };
        let user = int("user id", fields[0])?;
        let item = int("item id", fields[1])?;
        let value: f64 = fields[2]
            .trim()
            .parse()
            .map_err(|_| bad(format!("rating is not a number: {:?}", fields[2])))?;
        if !value.is_finite() {
            return Err(bad(format!("rating is not finite: {:?}", fields[2])));
        }
        let timestamp = fields[3]
            .trim()
            .parse::<i64>()
            .map_err(|_| bad(format!("timestamp is not an integer: {:?}", fields[3])))?;
        raw.push(RawRating {
            user,
            item,
            value,
            timestamp: Some(timestamp),
        });
    }
    let (dataset, duplicates) = RatingDataset::from_raw(&raw)?;
    if duplicates > 0 {
        log::warn!("{}: {duplicates} duplicate (user, item) pairs, kept the last", origin.display());
    }
    Ok(Loaded { dataset, duplicates })
}

/// Size of a published MovieLens release.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnownDataset {
    pub name: &'static str,
    pub file_name: &'static str,
    pub users: usize,
    pub items: usize,
    pub ratings: usize,
    pub url: &'static str,
}

pub const ML_100K: KnownDataset = KnownDataset {
    name: "MovieLens-100k",
    file_name: "u.data",
    users: 943,
    items: 1682,
    ratings: 100_000,
    url: "https://files.grouplens.org/datasets/movielens/ml-100k.zip",
};

pub const ML_1M: KnownDataset = KnownDataset {
    name: "MovieLens-1m",
    file_name: "ratings.dat",
    users: 6040,
    items: 3706,
    ratings: 1_000_209,
    url: "https://files.grouplens.org/datasets/movielens/ml-1m.zip",
};

/// The release a file looks like, judged by its file name and format.
pub fn known_dataset(path: &Path, format: Format) -> Option<KnownDataset> {
    let name = path.file_name()?.to_str()?;
    [ML_100K, ML_1M].into_iter().find(|k| {
        k.file_name == name
            && matches!(
                (k.file_name, format),
                ("u.data", Format::Ml100k) | ("ratings.dat", Format::Ml1m)
            )
    })
}

/// Compares a loaded release against its published user/item/rating counts.
///
/// Returns a message with retrieval instructions on mismatch.
pub fn verify_known(known: &KnownDataset, loaded: &Loaded) -> std::result::Result<(), String> {
    let ds = &loaded.dataset;
    let got = (ds.m(), ds.n(), ds.len() + loaded.duplicates);
    let want = (known.users, known.items, known.ratings);
    if got == want {
        return Ok(());
    }
    Err(format!(
        "{} should have {} users, {} items and {} ratings but the file has {}, {} and {}. \
         Download a fresh copy from {} and extract `{}`.",
        known.name, want.0, want.1, want.2, got.0, got.1, got.2, known.url, known.file_name
    ))
}
