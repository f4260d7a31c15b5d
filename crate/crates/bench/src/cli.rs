//! `newst` command-line interface.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use nalgebra::DVector;
use newst::data::{
    default_spikes, generate_spiked, load_dataset, save_dataset, standardize, DataFormat, DatasetMetadata,
    LabelColumn, LabelMapping, LoadOptions, SpikedModelSpec,
};
use newst::optim::{optimize, read_rows, Method, OptimizerConfig};
use newst::stein::subsample_covariance;
use newst::theory::{suggest_rank, suggest_sample_size};
use newst::{CumulantFamily, Dataset};

use crate::{diagnose, distance_errors, read_beta_star, read_iterates, run_benchmark, BenchConfig, BenchError, Result};

#[derive(Debug, Parser)]
#[command(name = "newst", version, about = "Newton-Stein and baseline GLM optimizers: data generation, benchmarks, diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a spiked-covariance dataset (CSV plus JSON sidecar).
    Generate(GenerateArgs),
    /// Run a benchmark described by a JSON config file.
    Run(RunArgs),
    /// Train one method on a dataset and print the solution.
    Fit(FitArgs),
    /// Composite-convergence fit, phase transition, and iteration bound for a trace.
    Diagnose(DiagnoseArgs),
    /// Sub-sampled covariance spectrum and suggested thresholding rank.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Output CSV path; metadata goes next to it as `<stem>.meta.json`.
    #[arg(long, short)]
    out: PathBuf,
    /// Read the full model specification from a JSON file instead of flags.
    #[arg(long, conflicts_with_all = ["n", "p", "r", "theta", "sigma2", "family", "beta_norm"])]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 50_000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    p: usize,
    /// Number of spikes; magnitudes default to log-spaced values from 100 to 10.
    #[arg(long, default_value_t = 3)]
    r: usize,
    /// Explicit spike magnitudes, descending (overrides --r).
    #[arg(long, value_delimiter = ',')]
    theta: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long, default_value_t = CumulantFamily::Logistic)]
    family: CumulantFamily,
    #[arg(long, default_value_t = 1.0)]
    beta_norm: f64,
    #[arg(long, env = crate::SEED_ENV, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long, short)]
    config: PathBuf,
    /// Replace the configured output directory.
    #[arg(long)]
    output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DataArgs {
    /// Dataset file (CSV or libsvm).
    #[arg(long, short)]
    data: PathBuf,
    /// File format; inferred from the extension if omitted.
    #[arg(long)]
    format: Option<DataFormat>,
    /// Label column: `last`, `first`, or a 0-based index (CSV only).
    #[arg(long, default_value = "last", value_parser = parse_label)]
    label: LabelColumn,
    /// Label mapping: `raw`, `binary`, or `class=<value>` for one-vs-rest.
    /// Defaults to `binary` for logistic and `raw` otherwise.
    #[arg(long, value_parser = parse_mapping)]
    mapping: Option<LabelMapping>,
    /// Center and scale each feature column before use.
    #[arg(long)]
    standardize: bool,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = CumulantFamily::Logistic)]
    family: CumulantFamily,
    #[arg(long, default_value_t = Method::Newst)]
    method: Method,
    /// JSON object with optimizer settings; flags below take precedence.
    #[arg(long)]
    settings: Option<PathBuf>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long)]
    rank: Option<usize>,
    #[arg(long)]
    radius: Option<f64>,
    #[arg(long, env = crate::SEED_ENV)]
    seed: Option<u64>,
    /// Write the iteration trace CSV here.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    /// Trace CSV written by `run` or `fit`.
    #[arg(long, short)]
    trace: PathBuf,
    /// Iterates CSV; with --beta-star, errors are exact distances instead of step norms.
    #[arg(long, requires = "beta_star")]
    iterates: Option<PathBuf>,
    /// `beta_star.json` written by `run`.
    #[arg(long, requires = "iterates")]
    beta_star: Option<PathBuf>,
    /// Target tolerance for the iteration bound.
    #[arg(long, default_value_t = 1e-8)]
    tol: f64,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = CumulantFamily::Logistic)]
    family: CumulantFamily,
    /// Rows to sub-sample; defaults to ⌈p ln p⌉.
    #[arg(long)]
    sample_size: Option<usize>,
    #[arg(long, env = crate::SEED_ENV, default_value_t = 0)]
    seed: u64,
    /// Number of leading eigenvalues to print.
    #[arg(long, default_value_t = 10)]
    top: usize,
}

fn parse_label(s: &str) -> std::result::Result<LabelColumn, String> {
    match s {
        "last" => Ok(LabelColumn::Last),
        "first" => Ok(LabelColumn::First),
        _ => s.parse().map(LabelColumn::Index).map_err(|_| format!("expected last, first or a column index, got '{s}'")),
    }
}

fn parse_mapping(s: &str) -> std::result::Result<LabelMapping, String> {
    match s {
        "raw" => Ok(LabelMapping::Raw),
        "binary" => Ok(LabelMapping::Binary),
        _ => s
            .strip_prefix("class=")
            .and_then(|v| v.parse().ok())
            .map(LabelMapping::OneVsRest)
            .ok_or_else(|| format!("expected raw, binary or class=<value>, got '{s}'")),
    }
}

/// Parses `args` (program name first), runs the command, and returns the
/// process exit code: 0 on success, 2 on usage errors, 1 on runtime errors.
pub fn cli_main<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match execute(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a, out),
        Command::Run(a) => run(a, out),
        Command::Fit(a) => fit(a, out),
        Command::Diagnose(a) => diagnose_cmd(a, out),
        Command::Spectrum(a) => spectrum(a, out),
    }
}

fn w(out: &mut dyn Write, text: &str) -> Result<()> {
    out.write_all(text.as_bytes()).map_err(|e| BenchError::Io(PathBuf::from("<stdout>"), e))
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<()> {
    let mut spec = match &a.spec {
        Some(path) => {
            let f = File::open(path).map_err(|e| BenchError::Io(path.clone(), e))?;
            serde_json::from_reader::<_, SpikedModelSpec>(BufReader::new(f))?
        }
        None => SpikedModelSpec {
            theta: a.theta.clone().unwrap_or_else(|| default_spikes(a.r)),
            sigma2: a.sigma2,
            beta_norm: a.beta_norm,
            ..SpikedModelSpec::new(a.n, a.p, a.r, a.family, a.seed)
        },
    };
    spec.seed = a.seed;
    let sample = generate_spiked(&spec)?;
    let meta = DatasetMetadata {
        family: Some(spec.family),
        generator: Some(spec.clone()),
        seed: Some(spec.seed),
        beta_true: Some(sample.beta_true.iter().copied().collect()),
        ..DatasetMetadata::for_dataset(&sample.dataset)
    };
    let meta_path = save_dataset(&sample.dataset, &a.out, &meta)?;
    w(
        out,
        &format!(
            "wrote {} (n = {}, p = {}, r = {}) and {}\n",
            a.out.display(),
            spec.n,
            spec.p,
            spec.r(),
            meta_path.display()
        ),
    )
}

fn run(a: RunArgs, out: &mut dyn Write) -> Result<()> {
    let mut cfg = BenchConfig::from_path(&a.config)?;
    cfg.apply_env()?;
    if let Some(dir) = a.output_dir {
        cfg.output_dir = dir;
    }
    let report = run_benchmark(&cfg)?;
    for (k, rep) in report.repetitions.iter().enumerate() {
        if report.repetitions.len() > 1 {
            w(out, &format!("repetition {}\n", k + 1))?;
        }
        w(out, &crate::summary_table(&rep.summaries))?;
    }
    w(out, &format!("results in {}\n", report.output_dir.display()))
}

fn load(a: &DataArgs, family: CumulantFamily) -> Result<Dataset> {
    let options = LoadOptions {
        format: a.format,
        label: a.label,
        mapping: a.mapping.unwrap_or(LoadOptions::for_family(family).mapping),
        features: None,
    };
    let data = load_dataset(&a.data, &options).map_err(|e| match e {
        newst::Error::Io(io) => BenchError::Io(a.data.clone(), io),
        other => other.into(),
    })?;
    if a.standardize {
        let s = standardize(&data)?;
        for warning in &s.warnings {
            log::warn!("{warning}");
        }
        Ok(s.dataset)
    } else {
        Ok(data)
    }
}

fn fit(a: FitArgs, out: &mut dyn Write) -> Result<()> {
    let data = load(&a.data, a.family)?;
    let mut cfg = match &a.settings {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| BenchError::Io(path.clone(), e))?;
            let mut value: serde_json::Value = serde_json::from_str(&text)?;
            if let Some(obj) = value.as_object_mut() {
                obj.insert("method".into(), serde_json::to_value(a.method)?);
            }
            serde_json::from_value::<OptimizerConfig>(value)?
        }
        None => OptimizerConfig::for_method(a.method),
    };
    cfg.tol_eps = a.tol.unwrap_or(cfg.tol_eps);
    cfg.max_iter = a.max_iter.unwrap_or(cfg.max_iter);
    cfg.gamma = a.gamma.or(cfg.gamma);
    cfg.sample_size = a.sample_size.or(cfg.sample_size);
    cfg.rank = a.rank.or(cfg.rank);
    cfg.radius = a.radius.unwrap_or(cfg.radius);
    cfg.seed = a.seed.unwrap_or(cfg.seed);
    let trace = optimize(&data, a.family, &DVector::zeros(data.p()), &cfg)?;
    if let Some(path) = &a.trace {
        write_trace(&trace, path)?;
    }
    let last = trace.final_record().expect("traces start with a record");
    let mut text = format!(
        "method: {}\nfamily: {}\nn = {}, p = {}\ntermination: {}\niterations: {}\nobjective: {:.16e}\ngrad_norm: {:.6e}\nelapsed_sec: {:.6}\n",
        trace.method,
        a.family,
        data.n(),
        data.p(),
        trace.termination.as_str(),
        trace.iterations(),
        last.row.objective,
        last.row.grad_norm,
        trace.total_elapsed()
    );
    let p = &trace.parameters;
    if let Some(g) = p.gamma {
        text.push_str(&format!("gamma: {g}\n"));
    }
    if let (Some(s), Some(r), Some(s2)) = (p.sample_size, p.rank, p.sigma2_hat) {
        text.push_str(&format!("sample_size: {s}\nrank: {r}\nsigma2_hat: {s2:.6e}\n"));
    }
    for warning in trace.all_warnings() {
        text.push_str(&format!("warning: {warning}\n"));
    }
    text.push_str("beta:\n");
    for (j, b) in trace.beta.iter().enumerate() {
        let name = data.feature_names().map_or_else(|| format!("x{j}"), |n| n[j].clone());
        text.push_str(&format!("  {name} {b:.16e}\n"));
    }
    w(out, &text)
}

fn write_trace(trace: &newst::IterationTrace, path: &Path) -> Result<()> {
    let f = File::create(path).map_err(|e| BenchError::Io(path.to_path_buf(), e))?;
    let mut writer = BufWriter::new(f);
    trace.write_csv(&mut writer)?;
    writer.flush().map_err(|e| BenchError::Io(path.to_path_buf(), e))
}

fn diagnose_cmd(a: DiagnoseArgs, out: &mut dyn Write) -> Result<()> {
    let f = File::open(&a.trace).map_err(|e| BenchError::Io(a.trace.clone(), e))?;
    let rows = read_rows(BufReader::new(f))?;
    let errors = match (&a.iterates, &a.beta_star) {
        (Some(it), Some(bs)) => {
            let iterates = read_iterates(it)?;
            let star = DVector::from_vec(read_beta_star(bs)?.beta);
            Some(distance_errors(&iterates, &star))
        }
        _ => None,
    };
    let d = diagnose(&rows, errors, a.tol)?;
    w(out, &d.report())
}

fn spectrum(a: SpectrumArgs, out: &mut dyn Write) -> Result<()> {
    let data = load(&a.data, a.family)?;
    let size = a.sample_size.unwrap_or_else(|| suggest_sample_size(data.p(), data.n()));
    let spec = subsample_covariance(&data, size, a.seed)?.spectrum();
    let values = spec.values().as_slice();
    let rank = suggest_rank(values)?;
    let mut text = format!("n = {}, p = {}, sub-sample size = {size}, seed = {}\n", data.n(), data.p(), a.seed);
    text.push_str("  i   eigenvalue        relative_gap\n");
    for (i, v) in values.iter().take(a.top).enumerate() {
        let gap = rank.relative_gaps.get(i).map_or_else(|| "-".to_string(), |g| format!("{g:.4}"));
        text.push_str(&format!("{:>3}   {:<16.6e}  {gap}\n", i + 1, v));
    }
    text.push_str(&format!("suggested rank: {}\n", rank.rank));
    if let Some(warning) = &rank.warning {
        text.push_str(&format!("warning: {warning}\n"));
    }
    w(out, &text)
}
