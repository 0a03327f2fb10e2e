//! Run configuration: defaults, JSON config file, command-line overrides.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use harmonic_rank_core::{Bandwidth, KnnParams, ModelParams, SplitSpec};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::io::Format;

/// Gaussian bandwidth: chosen from the data or fixed.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum BandwidthSetting {
    #[default]
    Auto,
    Fixed(f64),
}

/// Boundary coupling: a number, or the point-integral preset `1e4 * n / m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuBarSetting {
    Value(f64),
    Pim,
}

impl Default for MuBarSetting {
    fn default() -> Self {
        MuBarSetting::Value(1.0)
    }
}

impl FromStr for BandwidthSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Self::Auto);
        }
        s.parse()
            .map(Self::Fixed)
            .map_err(|_| format!("expected `auto` or a number, got {s:?}"))
    }
}

impl FromStr for MuBarSetting {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("pim") {
            return Ok(Self::Pim);
        }
        s.parse()
            .map(Self::Value)
            .map_err(|_| format!("expected `pim` or a number, got {s:?}"))
    }
}

impl fmt::Display for BandwidthSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Auto => f.write_str("auto"),
            Self::Fixed(t) => write!(f, "{t}"),
        }
    }
}

impl fmt::Display for MuBarSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Pim => f.write_str("pim"),
            Self::Value(x) => write!(f, "{x}"),
        }
    }
}

/// JSON form of the keyword-or-number settings.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum KeywordOrNumber {
    Number(f64),
    Keyword(String),
}

macro_rules! keyword_serde {
    ($ty:ty, $kw:literal, $num:path, $named:path) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                match *self {
                    $num(x) => KeywordOrNumber::Number(x),
                    $named => KeywordOrNumber::Keyword($kw.into()),
                }
                .serialize(s)
            }
        }

        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                match KeywordOrNumber::deserialize(d)? {
                    KeywordOrNumber::Number(x) => Ok($num(x)),
                    KeywordOrNumber::Keyword(s) => s.parse().map_err(serde::de::Error::custom),
                }
            }
        }
    };
}

keyword_serde!(BandwidthSetting, "auto", BandwidthSetting::Fixed, BandwidthSetting::Auto);
keyword_serde!(MuBarSetting, "pim", MuBarSetting::Value, MuBarSetting::Pim);

/// Everything a pipeline run needs.
///
/// Unset fields in a JSON config file fall back to [`RunConfig::default`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub format: Format,
    pub n_train: usize,
    pub min_test: usize,
    pub seed: u64,
    pub k: usize,
    pub max_comparisons: usize,
    pub bandwidth: BandwidthSetting,
    pub mu_bar: MuBarSetting,
    pub bregman_iters: usize,
    pub outer_iters: usize,
    pub solver_tol: f64,
    pub solver_maxit: usize,
    pub localized: bool,
    pub topk: usize,
    pub threads: usize,
    pub out: Option<PathBuf>,
    pub dump_split: Option<PathBuf>,
    pub dump_graph: Option<PathBuf>,
    pub dump_predictions: Option<PathBuf>,
    pub sweep_k: Option<Vec<usize>>,
    pub sweep_d: Option<Vec<usize>>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let knn = KnnParams::default();
        let model = ModelParams::default();
        Self {
            data: None,
            format: Format::Ml100k,
            n_train: 10,
            min_test: 10,
            seed: 0,
            k: knn.k,
            max_comparisons: knn.max_comparisons,
            bandwidth: BandwidthSetting::Auto,
            mu_bar: MuBarSetting::Value(model.mu_bar),
            bregman_iters: model.bregman_iters,
            outer_iters: model.outer_iters,
            solver_tol: model.solver_tol,
            solver_maxit: model.solver_maxit,
            localized: model.localized,
            topk: 10,
            threads: std::thread::available_parallelism().map_or(1, |n| n.get()),
            out: None,
            dump_split: None,
            dump_graph: None,
            dump_predictions: None,
            sweep_k: None,
            sweep_d: None,
        }
    }
}

impl RunConfig {
    /// Reads a (possibly partial) JSON config.
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            n_train: self.n_train,
            min_test: self.min_test,
            seed: self.seed,
        }
    }

    pub fn knn_params(&self) -> KnnParams {
        KnnParams {
            k: self.k,
            max_comparisons: self.max_comparisons,
            bandwidth: match self.bandwidth {
                BandwidthSetting::Auto => Bandwidth::Auto,
                BandwidthSetting::Fixed(t) => Bandwidth::Fixed(t),
            },
            ..KnnParams::default()
        }
    }

    /// Model parameters with `mu_bar` resolved for an `n_items x m_users` problem.
    pub fn model_params(&self, n_items: usize, m_users: usize) -> ModelParams {
        ModelParams {
            mu_bar: match self.mu_bar {
                MuBarSetting::Value(x) => x,
                MuBarSetting::Pim => harmonic_rank_core::pim_mu_bar(n_items, m_users.max(1)),
            },
            bregman_iters: self.bregman_iters,
            outer_iters: self.outer_iters,
            solver_tol: self.solver_tol,
            solver_maxit: self.solver_maxit,
            localized: self.localized,
        }
    }

    /// Checks every parameter before any data is touched.
    pub fn validate(&self) -> Result<()> {
        let cfg = |e: harmonic_rank_core::Error| Error::Config(e.to_string());
        if self.data.is_none() {
            return Err(Error::Config("no data file given (--data)".into()));
        }
        self.split_spec().validate().map_err(cfg)?;
        if self.sweep_k.is_none() && self.sweep_d.is_none() {
            self.knn_params().validate().map_err(cfg)?;
        } else {
            for (k, d) in self.grid() {
                if k == 0 || d == 0 {
                    return Err(Error::Config("sweep values must be at least 1".into()));
                }
            }
        }
        self.model_params(1, 1).validate().map_err(cfg)?;
        if self.topk == 0 {
            return Err(Error::Config("topk must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(Error::Config("threads must be at least 1".into()));
        }
        Ok(())
    }

    /// `(k, D)` pairs of a sweep in grid order (k outer). A missing axis
    /// uses the single configured value.
    pub fn grid(&self) -> Vec<(usize, usize)> {
        let ks = self.sweep_k.clone().unwrap_or_else(|| vec![self.k]);
        let ds = self.sweep_d.clone().unwrap_or_else(|| vec![self.max_comparisons]);
        ks.iter().flat_map(|&k| ds.iter().map(move |&d| (k, d))).collect()
    }

    pub fn is_sweep(&self) -> bool {
        self.sweep_k.is_some() || self.sweep_d.is_some()
    }
}
