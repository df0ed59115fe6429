//! Replicated runs, their CSV outputs and the summary.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use gpfso::models::{
    read_dataset, sagm_truth, sample_multimodal, sample_sagm, BootstrapStream, CqrDesign, CqrModel,
    GaussianMeanModel, GaussianOracle, MultimodalModel, Record, SagmModel,
};
use gpfso::trace::{fmt_f64, Recorder};
use gpfso::{adagrad_run, run, Domain, Norm, RngStream, Trace, TraceRow};
use thiserror::Error;

use crate::config::{ConfigError, DataSource, ExperimentConfig, Method, ModelChoice};
use crate::slope::{fit_slope, success_rate, SlopeError, SlopeFit};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Dataset {
        path: PathBuf,
        source: gpfso::models::DatasetError,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("all {replications} replications failed; first error: {first}")]
    AllFailed { replications: usize, first: String },
    #[error("column `{0}` not found")]
    Column(String),
    #[error(transparent)]
    Slope(#[from] SlopeError),
    #[error(transparent)]
    Run(#[from] gpfso::Error),
}

impl HarnessError {
    /// Process exit code: 1 for configuration and input problems, 2 when
    /// every replication failed.
    pub fn exit_code(&self) -> u8 {
        match self {
            HarnessError::AllFailed { .. } => 2,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Mean error columns over the runs recorded at `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub t: u64,
    pub runs: usize,
    pub err_tilde_l2: Option<f64>,
    pub err_bar_l2: Option<f64>,
    pub err_tilde_max: Option<f64>,
    pub err_bar_max: Option<f64>,
}

impl AggregateRow {
    pub fn err_bar(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::Euclidean => self.err_bar_l2,
            Norm::Max => self.err_bar_max,
        }
    }

    pub fn err_tilde(&self, norm: Norm) -> Option<f64> {
        match norm {
            Norm::Euclidean => self.err_tilde_l2,
            Norm::Max => self.err_tilde_max,
        }
    }
}

pub const AGGREGATE_HEADER: [&str; 6] = [
    "t",
    "runs",
    "err_tilde_l2",
    "err_bar_l2",
    "err_tilde_max",
    "err_bar_max",
];

/// Averages the error columns of several traces at every recorded `t`.
pub fn aggregate(traces: &[&Trace]) -> Vec<AggregateRow> {
    use std::collections::BTreeMap;
    let mut acc: BTreeMap<u64, (usize, [(f64, usize); 4])> = BTreeMap::new();
    for tr in traces {
        for row in &tr.rows {
            let e = acc.entry(row.t).or_insert((0, [(0.0, 0); 4]));
            e.0 += 1;
            let cols = [row.err_tilde_l2, row.err_bar_l2, row.err_tilde_max, row.err_bar_max];
            for (slot, v) in e.1.iter_mut().zip(cols) {
                if let Some(v) = v {
                    slot.0 += v;
                    slot.1 += 1;
                }
            }
        }
    }
    acc.into_iter()
        .map(|(t, (runs, cols))| {
            let m = |(s, c): (f64, usize)| (c > 0).then(|| s / c as f64);
            AggregateRow {
                t,
                runs,
                err_tilde_l2: m(cols[0]),
                err_bar_l2: m(cols[1]),
                err_tilde_max: m(cols[2]),
                err_bar_max: m(cols[3]),
            }
        })
        .collect()
}

pub fn write_aggregate<W: Write>(rows: &[AggregateRow], w: W) -> csv::Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(AGGREGATE_HEADER)?;
    let f = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
    for r in rows {
        out.write_record([
            r.t.to_string(),
            r.runs.to_string(),
            f(r.err_tilde_l2),
            f(r.err_bar_l2),
            f(r.err_tilde_max),
            f(r.err_bar_max),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Data shared by every replication (file inputs are read once).
enum Shared {
    None,
    File(Vec<Record>),
}

fn load_shared(cfg: &ExperimentConfig) -> Result<Shared, HarnessError> {
    match &cfg.data {
        DataSource::File { path, .. } => {
            let f = File::open(path).map_err(io_err(path))?;
            let data = read_dataset(f).map_err(|source| HarnessError::Dataset {
                path: path.clone(),
                source,
            })?;
            if data.is_empty() {
                return Err(ConfigError::Value {
                    key: "data_file".into(),
                    msg: "dataset is empty".into(),
                }
                .into());
            }
            let want = match &cfg.model {
                ModelChoice::Gaussian { .. } => None,
                ModelChoice::Cqr { dim, .. } | ModelChoice::Multimodal { dim } => Some(*dim),
                ModelChoice::Sagm => Some(4),
            };
            if let Some(dx) = want {
                if let Some(r) = data.iter().find(|r| r.x.len() != dx) {
                    return Err(ConfigError::Value {
                        key: "data_file".into(),
                        msg: format!("expected {dx} covariates, found {}", r.x.len()),
                    }
                    .into());
                }
            }
            Ok(Shared::File(data))
        }
        _ => Ok(Shared::None),
    }
}

type Stream<'a, T> = Box<dyn Iterator<Item = T> + 'a>;

/// Record stream for one replication, plus the truth it was drawn from.
fn record_stream<'a>(
    cfg: &'a ExperimentConfig,
    shared: &'a Shared,
    seed: u64,
    mut draw: impl FnMut(&mut RngStream) -> Record + 'a,
) -> Stream<'a, Record> {
    let steps = cfg.steps as usize;
    let mut rng = RngStream::substream(seed, Domain::Data, 0, 0);
    let boot = RngStream::substream(seed, Domain::Bootstrap, 0, 0);
    match (&cfg.data, shared) {
        (DataSource::Simulate, _) => Box::new((0..steps).map(move |_| draw(&mut rng))),
        (DataSource::Bootstrap { sample_size }, _) => {
            let sample: Vec<Record> = (0..*sample_size).map(|_| draw(&mut rng)).collect();
            let mut boot = boot;
            Box::new((0..steps).map(move |_| sample[boot.index(sample.len())].clone()))
        }
        (DataSource::File { bootstrap: false, .. }, Shared::File(data)) => {
            Box::new(data.iter().take(steps).cloned())
        }
        (DataSource::File { bootstrap: true, .. }, Shared::File(data)) => {
            Box::new(BootstrapStream::new(data, boot).take(steps).cloned())
        }
        _ => unreachable!("file data is loaded before the replications start"),
    }
}

fn gaussian_stream<'a>(cfg: &'a ExperimentConfig, shared: &'a Shared, seed: u64, mean: f64) -> Stream<'a, f64> {
    match shared {
        Shared::File(_) => Box::new(record_stream(cfg, shared, seed, |_| unreachable!()).map(|r| r.z)),
        Shared::None => Box::new(
            record_stream(cfg, shared, seed, move |rng| Record {
                z: mean + rng.normal(),
                x: Vec::new(),
            })
            .map(|r| r.z),
        ),
    }
}

fn oracle_trace(cfg: &ExperimentConfig, stream: Stream<'_, f64>, truth: Option<&[f64]>) -> Trace {
    let mut oracle = GaussianOracle::new(cfg.prior.location, cfg.prior.variance, cfg.gpfso.learning_rate);
    let mut trace = Trace::new(1);
    let mut rec = Recorder::new(cfg.stride);
    let row = |o: &GaussianOracle| TraceRow::new(o.t, vec![o.mean], vec![o.bar], 1.0, false, truth);
    for y in stream {
        oracle.step(y);
        if rec.due(oracle.t) {
            trace.rows.push(row(&oracle));
        }
    }
    if oracle.t > 0 && trace.last().map(|r| r.t) != Some(oracle.t) {
        trace.rows.push(row(&oracle));
    }
    trace
}

fn gaussian_prior(loc: f64, var: f64) -> impl Fn(&mut RngStream) -> Vec<f64> + Sync {
    let sd = var.sqrt();
    move |rng| vec![loc + sd * rng.normal()]
}

fn shifted_prior(center: Vec<f64>, var: f64) -> impl Fn(&mut RngStream) -> Vec<f64> + Sync {
    let sd = var.sqrt();
    move |rng| center.iter().map(|c| c + sd * rng.normal()).collect()
}

/// Runs replication `r` (seed `base + r`) and returns its trace.
pub fn run_replication(cfg: &ExperimentConfig, r: usize) -> Result<Trace, HarnessError> {
    let shared = load_shared(cfg)?;
    Ok(replicate(cfg, &shared, r)?)
}

fn replicate(cfg: &ExperimentConfig, shared: &Shared, r: usize) -> Result<Trace, gpfso::Error> {
    let seed = cfg.gpfso.seed.wrapping_add(r as u64);
    let engine = gpfso::GpfsoConfig {
        seed,
        ..cfg.gpfso.clone()
    };
    let from_file = matches!(cfg.data, DataSource::File { .. });
    let stride = cfg.stride;
    match &cfg.model {
        ModelChoice::Gaussian { true_mean } => {
            let truth = if from_file { cfg.truth.clone() } else { Some(vec![*true_mean]) };
            let stream = gaussian_stream(cfg, shared, seed, *true_mean);
            match cfg.method {
                Method::Oracle => Ok(oracle_trace(cfg, stream, truth.as_deref())),
                _ => {
                    let model = GaussianMeanModel::new(truth.map(|t| t[0]));
                    run(model, gaussian_prior(cfg.prior.location, cfg.prior.variance), stream, engine, stride)
                }
            }
        }
        ModelChoice::Cqr { dim, tau } => {
            // the design is drawn from the data stream before any record
            let mut rng = RngStream::substream(seed, Domain::Data, 1, 0);
            let design = CqrDesign::new(*dim, &mut rng);
            let truth = if from_file { cfg.truth.clone() } else { Some(design.theta_star(*tau)) };
            let center: Vec<f64> = match &truth {
                Some(t) => t.iter().map(|v| v + cfg.prior.location).collect(),
                None => vec![cfg.prior.location; *dim],
            };
            let model = CqrModel::new(*tau, *dim, truth);
            let stream = record_stream(cfg, shared, seed, move |rng| design.sample(rng));
            match cfg.method {
                Method::Adagrad { step_size, epsilon } => {
                    adagrad_run(&model, center, stream, step_size, epsilon, stride)
                }
                _ => run(model, shifted_prior(center, cfg.prior.variance), stream, engine, stride),
            }
        }
        ModelChoice::Multimodal { dim } => {
            let d = *dim;
            let mut model = MultimodalModel::new(d);
            if from_file {
                model = model.with_truth(cfg.truth.clone());
            }
            let support = MultimodalModel::new(d);
            let prior = move |rng: &mut RngStream| support.sample_uniform(rng);
            let stream = record_stream(cfg, shared, seed, move |rng| sample_multimodal(d, rng));
            run(model, prior, stream, engine, stride)
        }
        ModelChoice::Sagm => {
            let truth = sagm_truth();
            let model = SagmModel::new(2, 4, if from_file { cfg.truth.clone() } else { Some(truth.clone()) });
            let prior_model = SagmModel::new(2, 4, None);
            let prior = move |rng: &mut RngStream| prior_model.sample_prior(rng);
            let stream = record_stream(cfg, shared, seed, move |rng| sample_sagm(&truth, rng));
            run(model, prior, stream, engine, stride)
        }
    }
}

/// Result of one replication.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub replication: usize,
    pub seed: u64,
    pub result: Result<Trace, String>,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub outcomes: Vec<RunOutcome>,
    pub aggregate: Vec<AggregateRow>,
    pub slope_bar: Result<SlopeFit, SlopeError>,
    pub slope_tilde: Result<SlopeFit, SlopeError>,
    /// Final `theta_bar` errors of the successful runs, in the configured norm.
    pub final_errors: Vec<f64>,
    /// `(threshold, success rate)` over the successful runs.
    pub success: Vec<(f64, f64)>,
    pub wall_clock: f64,
}

impl ExperimentReport {
    pub fn succeeded(&self) -> usize {
        self.outcomes.iter().filter(|o| o.result.is_ok()).count()
    }

    pub fn traces(&self) -> Vec<&Trace> {
        self.outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect()
    }
}

pub fn run_file_name(r: usize) -> String {
    format!("run_{r:04}.csv")
}

fn write_trace(path: &Path, trace: &Trace) -> Result<(), HarnessError> {
    let f = File::create(path).map_err(io_err(path))?;
    trace.write_csv(BufWriter::new(f))?;
    Ok(())
}

fn run_all(cfg: &ExperimentConfig, shared: &Shared) -> Vec<RunOutcome> {
    let one = |r: usize| {
        let seed = cfg.gpfso.seed.wrapping_add(r as u64);
        let result = replicate(cfg, shared, r)
            .map_err(|e| e.to_string())
            .and_then(|trace| {
                // the owning worker writes its own file
                let path = cfg.output.join(run_file_name(r));
                write_trace(&path, &trace).map_err(|e| e.to_string())?;
                Ok(trace)
            });
        RunOutcome {
            replication: r,
            seed,
            result,
        }
    };
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let go = || (0..cfg.replications).into_par_iter().map(one).collect::<Vec<_>>();
        if cfg.threads > 0 {
            if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build() {
                return pool.install(go);
            }
        }
        go()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..cfg.replications).map(one).collect()
    }
}

/// Runs every replication, writes per-run traces, `aggregate.csv` and
/// `summary.txt` into the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport, HarnessError> {
    let start = Instant::now();
    let shared = load_shared(cfg)?;
    fs::create_dir_all(&cfg.output).map_err(io_err(&cfg.output))?;
    let outcomes = run_all(cfg, &shared);

    let ok: Vec<&Trace> = outcomes.iter().filter_map(|o| o.result.as_ref().ok()).collect();
    if ok.is_empty() {
        let first = outcomes
            .iter()
            .find_map(|o| o.result.as_ref().err().cloned())
            .unwrap_or_default();
        let report = ExperimentReport {
            outcomes,
            aggregate: Vec::new(),
            slope_bar: Err(SlopeError::InsufficientPoints { found: 0 }),
            slope_tilde: Err(SlopeError::InsufficientPoints { found: 0 }),
            final_errors: Vec::new(),
            success: Vec::new(),
            wall_clock: start.elapsed().as_secs_f64(),
        };
        write_summary(cfg, &report)?;
        return Err(HarnessError::AllFailed {
            replications: cfg.replications,
            first,
        });
    }
    let agg = aggregate(&ok);
    let path = cfg.output.join("aggregate.csv");
    let f = File::create(&path).map_err(io_err(&path))?;
    write_aggregate(&agg, BufWriter::new(f))?;

    let (lo, hi) = cfg.slope_window;
    let norm = cfg.norm;
    let slope_bar = fit_slope(agg.iter().filter_map(|r| Some((r.t as f64, r.err_bar(norm)?))), lo, hi);
    let slope_tilde = fit_slope(agg.iter().filter_map(|r| Some((r.t as f64, r.err_tilde(norm)?))), lo, hi);
    let final_errors: Vec<f64> = ok
        .iter()
        .filter_map(|t| t.last().and_then(|r| r.err_bar(norm)))
        .collect();
    let success = if final_errors.is_empty() {
        Vec::new()
    } else {
        cfg.thresholds
            .iter()
            .map(|&th| (th, success_rate(&final_errors, th)))
            .collect()
    };
    let report = ExperimentReport {
        outcomes,
        aggregate: agg,
        slope_bar,
        slope_tilde,
        final_errors,
        success,
        wall_clock: start.elapsed().as_secs_f64(),
    };
    write_summary(cfg, &report)?;
    Ok(report)
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn toml_list(xs: impl IntoIterator<Item = f64>) -> String {
    let items: Vec<String> = xs.into_iter().map(toml_f64).collect();
    format!("[{}]", items.join(", "))
}

fn toml_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        // keep a decimal point or exponent so the value parses back as a float
        let s = format!("{x:?}");
        if s.contains(['.', 'e', 'E']) { s } else { format!("{s}.0") }
    }
}

fn slope_lines(name: &str, fit: &Result<SlopeFit, SlopeError>) -> String {
    match fit {
        Ok(f) => format!(
            "slope_{name}_beta1 = {}\nslope_{name}_beta2 = {}\nslope_{name}_rse = {}\nslope_{name}_points = {}\nslope_{name}_skipped = {}\n",
            toml_f64(f.beta1),
            toml_f64(f.beta2),
            toml_f64(f.rse),
            f.points,
            f.skipped
        ),
        Err(e) => format!("slope_{name}_error = {}\n", toml_str(&e.to_string())),
    }
}

/// Key-value summary text (valid TOML).
pub fn summary_text(cfg: &ExperimentConfig, report: &ExperimentReport) -> String {
    let mut s = String::new();
    let method = match cfg.method {
        Method::Pfso => "gpfso",
        Method::Adagrad { .. } => "adagrad",
        Method::Oracle => "oracle",
    };
    s += &format!("model = {}\n", toml_str(cfg.model.name()));
    s += &format!("method = {}\n", toml_str(method));
    s += &format!("seed = {}\n", cfg.gpfso.seed);
    s += &format!("steps = {}\n", cfg.steps);
    s += &format!("n_particles = {}\n", cfg.gpfso.n_particles);
    s += &format!("replications = {}\n", cfg.replications);
    s += &format!("succeeded = {}\n", report.succeeded());
    s += &format!("failed = {}\n", cfg.replications - report.succeeded());
    let norm = match cfg.norm {
        Norm::Euclidean => "euclidean",
        Norm::Max => "max",
    };
    s += &format!("norm = {}\n", toml_str(norm));
    s += &format!("slope_lo = {}\n", toml_f64(cfg.slope_window.0));
    s += &format!("slope_hi = {}\n", toml_f64(cfg.slope_window.1));
    s += &slope_lines("bar", &report.slope_bar);
    s += &slope_lines("tilde", &report.slope_tilde);
    let fe = &report.final_errors;
    if !fe.is_empty() {
        s += &format!("final_err_bar_mean = {}\n", toml_f64(fe.iter().sum::<f64>() / fe.len() as f64));
    }
    s += &format!("thresholds = {}\n", toml_list(report.success.iter().map(|x| x.0)));
    s += &format!("success_rate = {}\n", toml_list(report.success.iter().map(|x| x.1)));
    s += &format!("wall_clock_seconds = {}\n", toml_f64(report.wall_clock));
    let failures: Vec<&RunOutcome> = report.outcomes.iter().filter(|o| o.result.is_err()).collect();
    if !failures.is_empty() {
        s += "\n[failures]\n";
        for o in failures {
            let msg = o.result.as_ref().err().map(String::as_str).unwrap_or_default();
            s += &format!("run_{:04} = {}\n", o.replication, toml_str(msg));
        }
    }
    s
}

fn write_summary(cfg: &ExperimentConfig, report: &ExperimentReport) -> Result<(), HarnessError> {
    let path = cfg.output.join("summary.txt");
    fs::write(&path, summary_text(cfg, report)).map_err(io_err(&path))
}

/// Reads `(t, value)` pairs of one column from a trace or aggregate CSV,
/// skipping empty cells.
pub fn read_column(path: &Path, column: &str) -> Result<Vec<(f64, f64)>, HarnessError> {
    let f = File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::Reader::from_reader(f);
    let headers = rdr.headers()?.clone();
    let t_idx = headers
        .iter()
        .position(|h| h == "t")
        .ok_or_else(|| HarnessError::Column("t".into()))?;
    let idx = headers
        .iter()
        .position(|h| h == column)
        .ok_or_else(|| HarnessError::Column(column.into()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let (t, v) = (rec.get(t_idx).unwrap_or(""), rec.get(idx).unwrap_or(""));
        if v.is_empty() {
            continue;
        }
        let parse = |s: &str| {
            s.parse::<f64>().map_err(|_| {
                HarnessError::Config(ConfigError::Value {
                    key: column.to_string(),
                    msg: format!("not a number: {s}"),
                })
            })
        };
        out.push((parse(t)?, parse(v)?));
    }
    Ok(out)
}

/// One row of `sweep.csv`.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub label: String,
    pub config: ExperimentConfig,
    pub report: Result<ExperimentReport, String>,
}

/// Runs every configuration of the grid in its own subdirectory and writes
/// `sweep.csv` into `root`.
pub fn sweep(grid: Vec<(String, ExperimentConfig)>, root: &Path) -> Result<Vec<SweepEntry>, HarnessError> {
    fs::create_dir_all(root).map_err(io_err(root))?;
    let mut entries = Vec::with_capacity(grid.len());
    for (label, mut cfg) in grid {
        cfg.output = root.join(&label);
        let report = match run_experiment(&cfg) {
            Ok(r) => Ok(r),
            Err(e @ HarnessError::AllFailed { .. }) => Err(e.to_string()),
            Err(e) => return Err(e),
        };
        entries.push(SweepEntry {
            label,
            config: cfg,
            report,
        });
    }
    let path = root.join("sweep.csv");
    let f = File::create(&path).map_err(io_err(&path))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(f));
    w.write_record([
        "label",
        "alpha",
        "c_sigma",
        "nu",
        "succeeded",
        "slope_bar_beta2",
        "slope_tilde_beta2",
        "final_err_bar_mean",
    ])?;
    for e in &entries {
        let alpha = e.config.gpfso.learning_rate.alpha().map(fmt_f64).unwrap_or_default();
        let (ok, sb, st, fe) = match &e.report {
            Ok(r) => (
                r.succeeded().to_string(),
                r.slope_bar.as_ref().map(|f| fmt_f64(f.beta2)).unwrap_or_default(),
                r.slope_tilde.as_ref().map(|f| fmt_f64(f.beta2)).unwrap_or_default(),
                if r.final_errors.is_empty() {
                    String::new()
                } else {
                    fmt_f64(r.final_errors.iter().sum::<f64>() / r.final_errors.len() as f64)
                },
            ),
            Err(_) => ("0".into(), String::new(), String::new(), String::new()),
        };
        w.write_record([
            e.label.clone(),
            alpha,
            fmt_f64(e.config.gpfso.c_sigma),
            fmt_f64(e.config.gpfso.nu),
            ok,
            sb,
            st,
            fe,
        ])?;
    }
    w.flush().map_err(io_err(&path))?;
    Ok(entries)
}
