use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use harmonic_rank::config::{BandwidthSetting, MuBarSetting, RunConfig};
use harmonic_rank::io::Format;
use harmonic_rank::{pipeline, Error, Phase, RayonExecutor};

/// Collaborative ranking by harmonic extension on a kNN user graph.
///
/// Options given on the command line override those from `--config`, which
/// override the built-in defaults.
#[derive(Debug, Parser)]
#[command(version)]
struct Cli {
    /// JSON file with any subset of the run options.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rating file (`u.data` or `ratings.dat`).
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Training ratings kept per user (N).
    #[arg(long)]
    n_train: Option<usize>,
    /// Minimum test ratings per user; users with fewer than N + this are dropped.
    #[arg(long)]
    min_test: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Neighbours per user.
    #[arg(long)]
    k: Option<usize>,
    /// Distance evaluations per kd-tree query (D).
    #[arg(long)]
    max_comparisons: Option<usize>,
    /// `auto` or a positive number.
    #[arg(long)]
    bandwidth: Option<BandwidthSetting>,
    /// A positive number, or `pim` for 1e4 * items / users.
    #[arg(long)]
    mu_bar: Option<MuBarSetting>,
    #[arg(long)]
    bregman_iters: Option<usize>,
    #[arg(long)]
    outer_iters: Option<usize>,
    #[arg(long)]
    solver_tol: Option<f64>,
    #[arg(long)]
    solver_maxit: Option<usize>,
    /// Solve each item only on its raters and their graph neighbours.
    #[arg(long)]
    localized: bool,
    /// NDCG cutoff K.
    #[arg(long)]
    topk: Option<usize>,
    #[arg(long)]
    threads: Option<usize>,
    /// Report path (JSON; CSV for sweeps). The report is also printed.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    dump_split: Option<PathBuf>,
    #[arg(long)]
    dump_graph: Option<PathBuf>,
    #[arg(long)]
    dump_predictions: Option<PathBuf>,
    /// Comma-separated k values to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_k: Option<Vec<usize>>,
    /// Comma-separated D values to sweep.
    #[arg(long, value_delimiter = ',')]
    sweep_d: Option<Vec<usize>>,
}

impl Cli {
    fn into_config(self) -> Result<RunConfig, Error> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(
                if let Some(v) = self.$f {
                    c.$f = v.into();
                }
            )*};
        }
        set!(
            format, n_train, min_test, seed, k, max_comparisons, bandwidth, mu_bar, bregman_iters,
            outer_iters, solver_tol, solver_maxit, topk, threads
        );
        macro_rules! set_opt {
            ($($f:ident),*) => {$(
                if self.$f.is_some() {
                    c.$f = self.$f;
                }
            )*};
        }
        set_opt!(data, out, dump_split, dump_graph, dump_predictions, sweep_k, sweep_d);
        c.localized |= self.localized;
        Ok(c)
    }
}

fn write_out(path: &Path, body: &[u8]) -> Result<(), Error> {
    let io_err = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut f = BufWriter::new(File::create(path).map_err(io_err)?);
    f.write_all(body).map_err(io_err)?;
    f.flush().map_err(io_err)
}

fn execute(cfg: &RunConfig) -> Result<(), Error> {
    cfg.validate()?;
    let exec = RayonExecutor::new(cfg.threads)?;
    if cfg.is_sweep() {
        let rows = pipeline::sweep(cfg, &exec, exec.threads())?;
        let mut buf = Vec::new();
        pipeline::write_sweep_csv(&rows, &mut buf, Path::new("<sweep>"))?;
        io::stdout().write_all(&buf).ok();
        if let Some(p) = &cfg.out {
            write_out(p, &buf).map_err(|e| e.in_phase(Phase::Output))?;
        }
        return Ok(());
    }
    let report = pipeline::run(cfg, &exec, exec.threads())?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    println!("{json}");
    if let Some(p) = &cfg.out {
        write_out(p, json.as_bytes()).map_err(|e| e.in_phase(Phase::Output))?;
    }
    log::info!(
        "NDCG@{} = {:.4} over {} users in {:.1}s (solve {:.1}s)",
        report.k_cutoff,
        report.mean_ndcg,
        report.users_evaluated,
        report.total_seconds,
        report.per_phase_seconds.solve
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let result = Cli::parse().into_config().and_then(|c| execute(&c));
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let phase = e.phase().unwrap_or(Phase::Config);
            eprintln!("error [{phase}]: {e}");
            ExitCode::from(if phase == Phase::Config { 2 } else { 1 })
        }
    }
}
