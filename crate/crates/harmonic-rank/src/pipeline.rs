//! load → filter/split → graph → solve → evaluate, with per-phase timing.

use std::path::Path;
use std::time::Instant;

use harmonic_rank_core::propagate::{harmonic_extension_observed, ExtensionObserver, Phase as CorePhase};
use harmonic_rank_core::{
    evaluate, filter_min_ratings, split_per_user, to_csr, CompletedMatrix, Executor, KnnParams, ModelParams,
    Orientation, RatingDataset, WeightGraph,
};
use serde::{Deserialize, Serialize};

use crate::config::{BandwidthSetting, MuBarSetting, RunConfig};
use crate::error::{Error, Phase, Result};
use crate::io::dumps;
use crate::io::movielens::{self, Format, Loaded};

pub const SCHEMA_VERSION: u32 = 1;

/// Wall-clock seconds per phase.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseSeconds {
    pub load: f64,
    pub split: f64,
    pub graph: f64,
    pub solve: f64,
    pub eval: f64,
    pub output: f64,
}

impl PhaseSeconds {
    pub fn sum(&self) -> f64 {
        self.load + self.split + self.graph + self.solve + self.eval + self.output
    }
}

/// Parameters actually used, with presets resolved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub data: String,
    pub format: Format,
    pub n_train: usize,
    pub min_test: usize,
    pub seed: u64,
    pub k: usize,
    pub max_comparisons: usize,
    pub bandwidth: BandwidthSetting,
    /// Bandwidth of the last graph built.
    pub bandwidth_t: f64,
    pub mu_bar: MuBarSetting,
    pub mu_bar_value: f64,
    pub bregman_iters: usize,
    pub outer_iters: usize,
    pub solver_tol: f64,
    pub solver_maxit: usize,
    pub localized: bool,
    pub topk: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub raw_users: usize,
    pub raw_items: usize,
    pub raw_ratings: usize,
    pub duplicates: usize,
    /// Users left after dropping those with fewer than `n_train + min_test` ratings.
    pub users: usize,
    /// Item columns (never filtered).
    pub items: usize,
    pub ratings: usize,
    /// Items with at least one rating after user filtering.
    pub items_with_ratings: usize,
    pub train_nnz: usize,
    pub test_nnz: usize,
    pub train_items_with_ratings: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub nnz: usize,
    pub t: f64,
    pub mean_degree: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverStats {
    pub items_solved: usize,
    /// Items with no training ratings; their column is not predicted.
    pub items_skipped: usize,
    pub iterations: usize,
    pub max_relative_residual: f64,
    pub not_converged: usize,
    pub stagnated: usize,
    pub predicted_cells: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdMaps {
    /// Original user id of each internal user index.
    pub users: Vec<u64>,
    /// Original item id of each internal item index.
    pub items: Vec<u64>,
}

/// Result of one pipeline run, written as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema: u32,
    pub params: ReportParams,
    pub dataset_stats: DatasetStats,
    pub graph: GraphStats,
    pub solver: SolverStats,
    pub mean_ndcg: f64,
    pub k_cutoff: usize,
    pub users_evaluated: usize,
    pub zero_ideal_users: usize,
    pub unpredicted_test_cells: usize,
    pub per_user_ndcg: Vec<f64>,
    pub id_maps: IdMaps,
    pub threads: usize,
    pub per_phase_seconds: PhaseSeconds,
    pub total_seconds: f64,
}

impl Report {
    /// The report as JSON with the timing fields removed, for comparing runs.
    pub fn without_timings(&self) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report serializes");
        let obj = v.as_object_mut().expect("report is an object");
        obj.remove("per_phase_seconds");
        obj.remove("total_seconds");
        obj.remove("threads");
        v
    }
}

/// A loaded, filtered and split dataset, reusable across runs.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub raw: Loaded,
    pub filtered: RatingDataset,
    pub train: RatingDataset,
    pub test: RatingDataset,
    pub load_seconds: f64,
    pub split_seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Reads the data file and checks known releases against their published sizes.
pub fn load(cfg: &RunConfig) -> Result<(Loaded, f64)> {
    let path = cfg.data.as_deref().ok_or_else(|| Error::Config("no data file given (--data)".into()))?;
    let (loaded, secs) = timed(|| movielens::load_movielens(path, cfg.format));
    let loaded = loaded.map_err(|e| e.in_phase(Phase::Load))?;
    if let Some(known) = movielens::known_dataset(path, cfg.format) {
        if let Err(msg) = movielens::verify_known(&known, &loaded) {
            log::warn!("{msg}");
        }
    }
    Ok((loaded, secs))
}

/// Filters users and splits each user's ratings.
pub fn prepare(cfg: &RunConfig, raw: Loaded, load_seconds: f64) -> Result<Prepared> {
    let spec = cfg.split_spec();
    let ((filtered, split), secs) = timed(|| {
        let filtered = filter_min_ratings(&raw.dataset, &spec);
        let split = split_per_user(&filtered, &spec);
        (filtered, split)
    });
    let (train, test) = split.map_err(|e| Error::from(e).in_phase(Phase::Split))?;
    if filtered.is_empty() {
        return Err(Error::Config(format!(
            "no user has at least {} ratings",
            spec.min_ratings()
        ))
        .in_phase(Phase::Split));
    }
    Ok(Prepared {
        raw,
        filtered,
        train,
        test,
        load_seconds,
        split_seconds: secs,
    })
}

#[derive(Default)]
struct Recorder {
    started: Option<Instant>,
    current: Option<CorePhase>,
    graph: f64,
    solve: f64,
    last_graph: Option<WeightGraph>,
    keep_graph: bool,
    stats: Option<GraphStats>,
}

impl ExtensionObserver for Recorder {
    fn phase_started(&mut self, _pass: usize, phase: CorePhase) {
        self.started = Some(Instant::now());
        self.current = Some(phase);
    }

    fn phase_finished(&mut self, _pass: usize, phase: CorePhase) {
        let secs = self.started.take().map_or(0.0, |s| s.elapsed().as_secs_f64());
        match phase {
            CorePhase::Graph => self.graph += secs,
            CorePhase::Solve => self.solve += secs,
        }
    }

    fn graph_built(&mut self, _pass: usize, graph: &WeightGraph) {
        let m = graph.len().max(1);
        self.stats = Some(GraphStats {
            nnz: graph.w.nnz(),
            t: graph.t,
            mean_degree: graph.w.nnz() as f64 / m as f64,
        });
        if self.keep_graph {
            self.last_graph = Some(graph.clone());
        }
    }
}

/// Output of the model phases of a run.
pub struct Completed {
    pub predictions: CompletedMatrix,
    pub graph: Option<WeightGraph>,
    graph_stats: GraphStats,
    model: ModelParams,
    graph_seconds: f64,
    solve_seconds: f64,
}

/// Builds the graph and solves every item on a prepared split.
pub fn complete<E: Executor>(
    data: &Prepared,
    knn: &KnnParams,
    model: &ModelParams,
    exec: &E,
    keep_graph: bool,
) -> Result<Completed> {
    let a = to_csr(&data.train, Orientation::UserRows);
    let mut rec = Recorder {
        keep_graph,
        ..Recorder::default()
    };
    let r = harmonic_extension_observed(&a, knn, model, exec, &mut rec);
    let predictions = r.map_err(|e| {
        let phase = match rec.current {
            Some(CorePhase::Solve) => Phase::Solve,
            _ => Phase::Graph,
        };
        Error::from(e).in_phase(phase)
    })?;
    Ok(Completed {
        predictions,
        graph: rec.last_graph,
        graph_stats: rec.stats.expect("graph built"),
        model: *model,
        graph_seconds: rec.graph,
        solve_seconds: rec.solve,
    })
}

fn solver_stats(r: &CompletedMatrix) -> SolverStats {
    let mut s = SolverStats {
        items_solved: 0,
        items_skipped: 0,
        iterations: 0,
        max_relative_residual: 0.0,
        not_converged: 0,
        stagnated: 0,
        predicted_cells: r.predicted_count(),
    };
    for o in &r.outcomes {
        match o {
            None => s.items_skipped += 1,
            Some(o) => {
                s.items_solved += 1;
                s.iterations += o.iterations;
                s.max_relative_residual = s.max_relative_residual.max(o.relative_residual);
                s.not_converged += !o.converged as usize;
                s.stagnated += o.stagnated as usize;
            }
        }
    }
    s
}

/// Full pipeline on an already prepared split. `started` is when the run
/// began, so the total covers loading too.
pub fn run_prepared<E: Executor>(
    cfg: &RunConfig,
    data: &Prepared,
    exec: &E,
    threads: usize,
    started: Instant,
) -> Result<Report> {
    let knn = cfg.knn_params();
    knn.validate().map_err(|e| Error::Config(e.to_string()))?;
    let model = cfg.model_params(data.filtered.n(), data.filtered.m());
    let done = complete(data, &knn, &model, exec, cfg.dump_graph.is_some())?;

    let (eval, eval_seconds) = timed(|| evaluate(&done.predictions, &data.test, cfg.topk));
    let eval = eval.map_err(|e| Error::from(e).in_phase(Phase::Eval))?;

    let (written, output_seconds) = timed(|| write_dumps(cfg, data, &done, &knn));
    written.map_err(|e| e.in_phase(Phase::Output))?;

    let raw = &data.raw.dataset;
    let report = Report {
        schema: SCHEMA_VERSION,
        params: ReportParams {
            data: cfg.data.as_deref().map(|p| p.display().to_string()).unwrap_or_default(),
            format: cfg.format,
            n_train: cfg.n_train,
            min_test: cfg.min_test,
            seed: cfg.seed,
            k: knn.k,
            max_comparisons: knn.max_comparisons,
            bandwidth: cfg.bandwidth,
            bandwidth_t: done.graph_stats.t,
            mu_bar: cfg.mu_bar,
            mu_bar_value: done.model.mu_bar,
            bregman_iters: cfg.bregman_iters,
            outer_iters: cfg.outer_iters,
            solver_tol: cfg.solver_tol,
            solver_maxit: cfg.solver_maxit,
            localized: cfg.localized,
            topk: cfg.topk,
        },
        dataset_stats: DatasetStats {
            raw_users: raw.m(),
            raw_items: raw.n(),
            raw_ratings: raw.len(),
            duplicates: data.raw.duplicates,
            users: data.filtered.m(),
            items: data.filtered.n(),
            ratings: data.filtered.len(),
            items_with_ratings: data.filtered.items_with_ratings(),
            train_nnz: data.train.len(),
            test_nnz: data.test.len(),
            train_items_with_ratings: data.train.items_with_ratings(),
        },
        graph: done.graph_stats.clone(),
        solver: solver_stats(&done.predictions),
        mean_ndcg: eval.mean_ndcg,
        k_cutoff: eval.k_cutoff,
        users_evaluated: eval.users.len(),
        zero_ideal_users: eval.zero_ideal_users,
        unpredicted_test_cells: eval.unpredicted,
        per_user_ndcg: eval.per_user_ndcg,
        id_maps: IdMaps {
            users: data.filtered.user_ids.clone(),
            items: data.filtered.item_ids.clone(),
        },
        threads,
        per_phase_seconds: PhaseSeconds {
            load: data.load_seconds,
            split: data.split_seconds,
            graph: done.graph_seconds,
            solve: done.solve_seconds,
            eval: eval_seconds,
            output: output_seconds,
        },
        total_seconds: 0.0,
    };
    Ok(Report {
        total_seconds: started.elapsed().as_secs_f64(),
        ..report
    })
}

fn write_dumps(cfg: &RunConfig, data: &Prepared, done: &Completed, knn: &KnnParams) -> Result<()> {
    if let Some(p) = &cfg.dump_split {
        dumps::write_split(p, &data.train, &data.test)?;
    }
    if let (Some(p), Some(g)) = (&cfg.dump_graph, &done.graph) {
        dumps::write_graph(p, g, knn)?;
    }
    if let Some(p) = &cfg.dump_predictions {
        dumps::write_predictions(p, &done.predictions, &data.test)?;
    }
    Ok(())
}

/// Loads, splits and runs the whole pipeline once.
pub fn run<E: Executor>(cfg: &RunConfig, exec: &E, threads: usize) -> Result<Report> {
    cfg.validate()?;
    let started = Instant::now();
    let (raw, load_seconds) = load(cfg)?;
    let data = prepare(cfg, raw, load_seconds)?;
    run_prepared(cfg, &data, exec, threads, started)
}

/// One row of a `(k, D)` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: usize,
    #[serde(rename = "D")]
    pub max_comparisons: usize,
    pub mean_ndcg: Option<f64>,
    pub seconds: Option<f64>,
    pub status: String,
}

/// Runs the model for every `(k, D)` of the config grid on one split.
///
/// Pairs with `k > D` are not run; their row records why.
pub fn sweep<E: Executor>(cfg: &RunConfig, exec: &E, threads: usize) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let started = Instant::now();
    let (raw, load_seconds) = load(cfg)?;
    let data = prepare(cfg, raw, load_seconds)?;
    sweep_prepared(cfg, &data, exec, threads, started)
}

/// [`sweep`] on an already prepared split.
pub fn sweep_prepared<E: Executor>(
    cfg: &RunConfig,
    data: &Prepared,
    exec: &E,
    threads: usize,
    started: Instant,
) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for (k, d) in cfg.grid() {
        if k > d {
            rows.push(SweepRow {
                k,
                max_comparisons: d,
                mean_ndcg: None,
                seconds: None,
                status: format!("skipped: k ({k}) exceeds D ({d})"),
            });
            continue;
        }
        let one = RunConfig {
            k,
            max_comparisons: d,
            dump_split: None,
            dump_graph: None,
            dump_predictions: None,
            ..cfg.clone()
        };
        let t0 = Instant::now();
        let report = run_prepared(&one, data, exec, threads, started)?;
        log::info!("k={k} D={d}: NDCG@{} = {:.4}", report.k_cutoff, report.mean_ndcg);
        rows.push(SweepRow {
            k,
            max_comparisons: d,
            mean_ndcg: Some(report.mean_ndcg),
            seconds: Some(t0.elapsed().as_secs_f64()),
            status: "ok".into(),
        });
    }
    Ok(rows)
}

/// Writes sweep rows as CSV `k,D,mean_ndcg,seconds,status`.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], out: W, origin: &Path) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |source| Error::Csv {
        path: origin.to_path_buf(),
        source,
    };
    for r in rows {
        w.serialize(r).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io(origin, e))
}
