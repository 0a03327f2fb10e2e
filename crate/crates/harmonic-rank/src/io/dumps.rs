//! CSV/JSON side outputs: split manifest, weight graph, test predictions.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use harmonic_rank_core::{CompletedMatrix, KnnParams, RatingDataset, WeightGraph};
use serde::Serialize;

use crate::error::{Error, Result};

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(BufWriter::new(file)))
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |source| Error::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// `user_id,item_id,split` with original ids, train rows first.
pub fn write_split(path: &Path, train: &RatingDataset, test: &RatingDataset) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["user_id", "item_id", "split"]).map_err(&err)?;
    for (ds, label) in [(train, "train"), (test, "test")] {
        for r in ds.ratings() {
            w.write_record([
                ds.user_ids[r.user].to_string(),
                ds.item_ids[r.item].to_string(),
                label.to_string(),
            ])
            .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Metadata written next to a graph dump.
#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct GraphSidecar {
    pub t: f64,
    pub k: usize,
    #[serde(rename = "D")]
    pub max_comparisons: usize,
    pub m: usize,
    pub nnz: usize,
}

/// Path of the JSON sidecar for a graph dump: `<path>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Upper triangle of `W` as `i,j,w` (internal user ids, `i < j`), plus a
/// JSON sidecar with the bandwidth and kNN parameters.
pub fn write_graph(path: &Path, graph: &WeightGraph, knn: &KnnParams) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["i", "j", "w"]).map_err(&err)?;
    for (i, j, v) in graph.w.triplets() {
        if i < j {
            w.write_record([i.to_string(), j.to_string(), v.to_string()])
                .map_err(&err)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    let side = GraphSidecar {
        t: graph.t,
        k: knn.k,
        max_comparisons: knn.max_comparisons,
        m: graph.len(),
        nnz: graph.w.nnz(),
    };
    let sp = sidecar_path(path);
    let file = File::create(&sp).map_err(|e| Error::io(&sp, e))?;
    serde_json::to_writer_pretty(file, &side).map_err(|source| Error::Json { path: sp, source })
}

/// `user,item,prediction` for every test cell, original ids. Cells without a
/// prediction get an empty field.
pub fn write_predictions(path: &Path, r: &CompletedMatrix, test: &RatingDataset) -> Result<()> {
    let mut w = writer(path)?;
    let err = csv_err(path);
    w.write_record(["user", "item", "prediction"]).map_err(&err)?;
    for x in test.ratings() {
        let p = r.get(x.user, x.item).map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            test.user_ids[x.user].to_string(),
            test.item_ids[x.item].to_string(),
            p,
        ])
        .map_err(&err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
