use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use newst::data::{generate_spiked, load_dataset, standardize, LoadOptions};
use newst::optim::{optimize, IterationTrace, Method, RunParameters, Termination};
use newst::Dataset;
use serde::{Deserialize, Serialize};

use crate::config::{BenchConfig, DatasetSource};
use crate::{BenchError, Result};

/// Offset added before taking the log of an objective gap.
pub const GAP_FLOOR: f64 = 1e-16;

pub const SUMMARY_JSON: &str = "summary.json";
pub const SUMMARY_TEXT: &str = "summary.txt";
pub const GAP_CSV: &str = "objective_gap.csv";
pub const BETA_STAR_JSON: &str = "beta_star.json";

pub fn trace_file(method: Method) -> String {
    format!("trace_{method}.csv")
}

pub fn iterates_file(method: Method) -> String {
    format!("iterates_{method}.csv")
}

/// One row of the summary table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub elapsed_sec: f64,
    pub iterations: usize,
    /// `converged`, `max_iterations`, `diverged`, or `failed`.
    pub terminated: String,
    pub final_objective: Option<f64>,
    pub warnings: Vec<String>,
    pub tol_eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_grad_norm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameters: Option<RunParameters>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl MethodSummary {
    fn from_trace(trace: &IterationTrace) -> Self {
        let last = trace.final_record();
        Self {
            method: trace.method,
            elapsed_sec: trace.total_elapsed(),
            iterations: trace.iterations(),
            terminated: trace.termination.as_str().to_string(),
            final_objective: trace.final_objective(),
            warnings: trace.all_warnings(),
            tol_eps: trace.tol_eps,
            final_grad_norm: last.map(|r| r.row.grad_norm),
            parameters: Some(trace.parameters.clone()),
            error: None,
        }
    }

    fn failure(method: Method, tol_eps: f64, message: String) -> Self {
        Self {
            method,
            elapsed_sec: 0.0,
            iterations: 0,
            terminated: "failed".into(),
            final_objective: None,
            warnings: Vec::new(),
            tol_eps,
            final_grad_norm: None,
            parameters: None,
            error: Some(message),
        }
    }
}

/// Reference minimizer for distance diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BetaStar {
    pub method: Method,
    pub grad_norm: f64,
    pub beta: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RepetitionReport {
    pub dir: PathBuf,
    pub summaries: Vec<MethodSummary>,
    pub traces: Vec<IterationTrace>,
    pub beta_star: Option<BetaStar>,
}

impl RepetitionReport {
    pub fn trace(&self, method: Method) -> Option<&IterationTrace> {
        self.traces.iter().find(|t| t.method == method)
    }

    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }
}

#[derive(Clone, Debug)]
pub struct BenchReport {
    pub output_dir: PathBuf,
    pub repetitions: Vec<RepetitionReport>,
}

/// Loads or generates the configured dataset. Generated data uses the
/// global seed.
pub fn prepare_dataset(cfg: &BenchConfig) -> Result<Dataset> {
    match &cfg.dataset {
        DatasetSource::Generated(spec) => {
            let spec = newst::data::SpikedModelSpec { seed: cfg.seed, ..spec.clone() };
            Ok(generate_spiked(&spec)?.dataset)
        }
        DatasetSource::File { path, format, label, mapping, standardize: scale } => {
            let options = LoadOptions {
                format: *format,
                label: *label,
                mapping: mapping.unwrap_or(LoadOptions::for_family(cfg.family).mapping),
                features: None,
            };
            let data = load_dataset(path, &options)?;
            if *scale {
                let s = standardize(&data)?;
                for w in &s.warnings {
                    log::warn!("{w}");
                }
                Ok(s.dataset)
            } else {
                Ok(data)
            }
        }
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| BenchError::Io(path.to_path_buf(), e))
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> BenchError + '_ {
    move |e| BenchError::Io(path.to_path_buf(), e)
}

/// Runs every configured method on the dataset and writes per-method traces,
/// the summary (JSON and text), the objective-gap table, and the reference
/// minimizer. A method that fails or panics is recorded as `failed`; the
/// others still run.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    cfg.validate()?;
    let data = prepare_dataset(cfg)?;
    run_benchmark_on(cfg, &data)
}

/// [`run_benchmark`] with an already loaded dataset.
pub fn run_benchmark_on(cfg: &BenchConfig, data: &Dataset) -> Result<BenchReport> {
    cfg.validate()?;
    let p = data.p();
    let beta0 = match &cfg.start {
        Some(b) if b.len() != p => return Err(newst::Error::DimensionMismatch { expected: p, found: b.len() }.into()),
        Some(b) => DVector::from_column_slice(b),
        None => DVector::zeros(p),
    };
    fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;
    let mut repetitions = Vec::with_capacity(cfg.repetitions);
    for rep in 0..cfg.repetitions {
        let dir = if cfg.repetitions == 1 { cfg.output_dir.clone() } else { cfg.output_dir.join(format!("rep_{}", rep + 1)) };
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        repetitions.push(run_repetition(cfg, data, &beta0, dir)?);
    }
    Ok(BenchReport { output_dir: cfg.output_dir.clone(), repetitions })
}

fn run_repetition(cfg: &BenchConfig, data: &Dataset, beta0: &DVector<f64>, dir: PathBuf) -> Result<RepetitionReport> {
    let mut summaries = Vec::new();
    let mut traces = Vec::new();
    for &method in &cfg.methods {
        let mut opt = cfg.optimizer_config(method)?;
        opt.keep_iterates |= cfg.save_iterates;
        log::info!("running {method}");
        let outcome = panic::catch_unwind(AssertUnwindSafe(|| optimize(data, cfg.family, beta0, &opt)));
        let trace = match outcome {
            Ok(Ok(trace)) => trace,
            Ok(Err(e)) => {
                log::warn!("{method} failed: {e}");
                summaries.push(MethodSummary::failure(method, opt.tol_eps, e.to_string()));
                continue;
            }
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<&str>()
                    .map(|s| s.to_string())
                    .or_else(|| payload.downcast_ref::<String>().cloned())
                    .unwrap_or_else(|| "panic".into());
                summaries.push(MethodSummary::failure(method, opt.tol_eps, format!("panicked: {msg}")));
                continue;
            }
        };
        let path = dir.join(trace_file(method));
        let mut w = create(&path)?;
        trace.write_csv(&mut w)?;
        w.flush().map_err(io_err(&path))?;
        if cfg.save_iterates {
            let path = dir.join(iterates_file(method));
            let mut w = create(&path)?;
            write_iterates(&trace.iterates, &mut w)?;
            w.flush().map_err(io_err(&path))?;
        }
        summaries.push(MethodSummary::from_trace(&trace));
        traces.push(trace);
    }

    let beta_star = select_beta_star(&traces);
    if let Some(b) = &beta_star {
        write_json(&dir.join(BETA_STAR_JSON), b)?;
    }
    write_json(&dir.join(SUMMARY_JSON), &summaries)?;
    let path = dir.join(SUMMARY_TEXT);
    let mut w = create(&path)?;
    w.write_all(summary_table(&summaries).as_bytes()).map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    let path = dir.join(GAP_CSV);
    let mut w = create(&path)?;
    write_gap_table(&traces, &mut w)?;
    w.flush().map_err(io_err(&path))?;
    Ok(RepetitionReport { dir, summaries, traces, beta_star })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Newton's final iterate if it converged, otherwise the converged run with
/// the smallest final gradient norm (any run if none converged).
pub fn select_beta_star(traces: &[IterationTrace]) -> Option<BetaStar> {
    let grad = |t: &IterationTrace| t.final_record().map_or(f64::INFINITY, |r| r.row.grad_norm);
    let converged: Vec<&IterationTrace> = traces.iter().filter(|t| t.termination == Termination::Converged).collect();
    let pool: Vec<&IterationTrace> = if converged.is_empty() { traces.iter().collect() } else { converged };
    let best = pool
        .iter()
        .find(|t| t.method == Method::Newton)
        .or_else(|| pool.iter().min_by(|a, b| grad(a).total_cmp(&grad(b))))?;
    Some(BetaStar { method: best.method, grad_norm: grad(best), beta: best.beta.iter().copied().collect() })
}

/// Aligned text table with the same columns as the JSON summary.
pub fn summary_table(summaries: &[MethodSummary]) -> String {
    let mut out = format!(
        "{:<8} {:>14} {:>8} {:<15} {:>24} {:>10}\n",
        "method", "elapsed(sec)", "iter", "terminated", "final_objective", "tol"
    );
    for s in summaries {
        let obj = s.final_objective.map_or_else(|| "-".to_string(), |v| format!("{v:.16e}"));
        out.push_str(&format!(
            "{:<8} {:>14.6} {:>8} {:<15} {:>24} {:>10.1e}\n",
            s.method.name(),
            s.elapsed_sec,
            s.iterations,
            s.terminated,
            obj,
            s.tol_eps
        ));
        if let Some(e) = &s.error {
            out.push_str(&format!("  error: {e}\n"));
        }
    }
    out
}

/// Long-format table `method,t,elapsed_seconds,objective,log10_gap` with
/// cumulative time and `log10(ℓ − ℓ_min + 1e-16)`, `ℓ_min` taken over every
/// recorded objective.
pub fn write_gap_table<W: Write>(traces: &[IterationTrace], writer: W) -> Result<()> {
    let best = traces.iter().flat_map(|t| t.objectives()).filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    let mut w = csv_writer(writer);
    w.write_record(["method", "t", "elapsed_seconds", "objective", "log10_gap"]).map_err(csv_err)?;
    for trace in traces {
        let mut clock = 0.0;
        for r in &trace.records {
            clock += r.row.elapsed_seconds;
            let gap = (r.row.objective - best + GAP_FLOOR).log10();
            w.write_record([
                trace.method.name().to_string(),
                r.row.t.to_string(),
                clock.to_string(),
                r.row.objective.to_string(),
                gap.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| BenchError::Core(e.into()))?;
    Ok(())
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::Writer::from_writer(w)
}

fn csv_err(e: csv::Error) -> BenchError {
    BenchError::Core(e.into())
}

/// `t,b0,b1,…` rows.
pub fn write_iterates<W: Write>(iterates: &[DVector<f64>], writer: W) -> Result<()> {
    let p = iterates.first().map_or(0, |b| b.len());
    let mut w = csv_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((0..p).map(|j| format!("b{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, b) in iterates.iter().enumerate() {
        let mut row = vec![t.to_string()];
        row.extend(b.iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| BenchError::Core(e.into()))?;
    Ok(())
}

pub fn read_iterates(path: &Path) -> Result<Vec<DVector<f64>>> {
    let mut rdr = csv::Reader::from_path(path).map_err(csv_err)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let values: std::result::Result<Vec<f64>, _> = rec.iter().skip(1).map(str::parse::<f64>).collect();
        let values = values.map_err(|_| newst::Error::Parse { line: k + 2, message: "iterate value is not a number".into() })?;
        out.push(DVector::from_vec(values));
    }
    Ok(out)
}

pub fn read_beta_star(path: &Path) -> Result<BetaStar> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    Ok(serde_json::from_str(&text)?)
}
