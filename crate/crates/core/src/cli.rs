//! Command-line front end: `simulate`, `metrics`, `serve` and `convert`.
//!
//! Exit codes: 0 on success, 1 on data or runtime errors, 2 on usage errors.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::classify::ClassifierKind;
use crate::corpus::{format_for_path, load_path, write_csv, write_ris, SourceFormat};
use crate::engine::Settings;
use crate::service::{self, ServiceConfig, DEFAULT_HOST, DEFAULT_PORT, TOKEN_ENV};
use crate::simulate::{self, recall_curve, rrf, wss, SimulationResult, SimulationSpec};
use crate::strategy::{BalanceKind, QueryKind};
use crate::textfeat::FeatureKind;

pub const DATA_DIR_ENV: &str = "SCREENLOOP_DATA_DIR";
pub const RESULTS_FILE: &str = "results.json";
pub const PLOT_FILE: &str = "recall.csv";

#[derive(Parser, Debug)]
#[command(name = "screenloop", version, about = "Active-learning screening for systematic reviews")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Replay a fully labeled dataset and write results.json and recall.csv.
    Simulate(SimulateArgs),
    /// Print WSS and RRF per run from a results document.
    Metrics(MetricsArgs),
    /// Run the local screening service.
    Serve(ServeArgs),
    /// Convert between RIS and CSV.
    Convert(ConvertArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ClassifierArg {
    Nb,
    Logreg,
    Svm,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FeaturesArg {
    Tfidf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum QueryArg {
    Max,
    Uncertainty,
    Random,
    Mixed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum BalanceArg {
    Simple,
    Undersample,
    Dr,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Fully labeled RIS or CSV file.
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "nb")]
    pub classifier: ClassifierArg,
    #[arg(long, value_enum, default_value = "tfidf")]
    pub features: FeaturesArg,
    #[arg(long, value_enum, default_value = "max")]
    pub query: QueryArg,
    /// Probability of a random pick under `--query mixed`.
    #[arg(long, default_value_t = 0.05)]
    pub mixed_random_fraction: f64,
    #[arg(long, value_enum, default_value = "dr")]
    pub balance: BalanceArg,
    #[arg(long, default_value_t = 15)]
    pub runs: usize,
    /// Master seed; run r uses seed + r.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub prior_included: usize,
    #[arg(long, default_value_t = 1)]
    pub prior_excluded: usize,
    /// Compute curves and metrics over the records screened after the priors only.
    #[arg(long)]
    pub exclude_priors_from_metrics: bool,
    #[arg(long, default_value_t = 1)]
    pub ngram_max: usize,
    /// Separate title and abstract vocabularies.
    #[arg(long)]
    pub split_ta: bool,
    #[arg(long, default_value_t = 1.0)]
    pub title_weight: f64,
    #[arg(long, default_value_t = 1.0)]
    pub abstract_weight: f64,
    /// Worker threads for independent runs (default: all cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Output directory.
    #[arg(short = 'o', long = "output", default_value = ".")]
    pub output: PathBuf,
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// results.json written by `simulate`.
    pub results: PathBuf,
    /// Extra WSS level in percent, e.g. `--wss 50`. Repeatable.
    #[arg(long = "wss")]
    pub wss: Vec<f64>,
    /// Extra RRF fraction in percent, e.g. `--rrf 20`. Repeatable.
    #[arg(long = "rrf")]
    pub rrf: Vec<f64>,
}

#[derive(Args, Debug)]
pub struct ServeArgs {
    /// Interface to bind. Anything but loopback exposes your data to the network.
    #[arg(long, default_value = DEFAULT_HOST)]
    pub host: String,
    /// Port; 0 picks a free one.
    #[arg(long, default_value_t = DEFAULT_PORT)]
    pub port: u16,
    /// Project directory (default: $SCREENLOOP_DATA_DIR, else ~/.screenloop).
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Built front end to serve at `/`.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ConvertArgs {
    pub input: PathBuf,
    pub output: PathBuf,
    /// Input format when the extension does not say.
    #[arg(long, value_enum)]
    pub from: Option<FormatArg>,
    /// Output format when the extension does not say.
    #[arg(long, value_enum)]
    pub to: Option<FormatArg>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum FormatArg {
    Ris,
    Csv,
}

impl From<FormatArg> for SourceFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Ris => SourceFormat::Ris,
            FormatArg::Csv => SourceFormat::Csv,
        }
    }
}

/// Parses `std::env::args` and runs the command.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(message) => {
            eprintln!("screenloop: {message}");
            ExitCode::from(1)
        }
    }
}

pub fn run(cli: Cli) -> Result<(), String> {
    match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Metrics(args) => cmd_metrics(&args).map(|table| print!("{table}")),
        Command::Serve(args) => cmd_serve(&args),
        Command::Convert(args) => cmd_convert(&args),
    }
}

impl SimulateArgs {
    pub fn spec(&self) -> SimulationSpec {
        let mut settings = Settings::default();
        settings.classifier.kind = match self.classifier {
            ClassifierArg::Nb => ClassifierKind::NaiveBayes,
            ClassifierArg::Logreg => ClassifierKind::LogisticRegression,
            ClassifierArg::Svm => ClassifierKind::LinearSvm,
        };
        settings.feature.kind = match self.features {
            FeaturesArg::Tfidf => FeatureKind::Tfidf,
        };
        settings.feature.ngram_max = self.ngram_max;
        settings.feature.split_title_abstract = self.split_ta;
        settings.feature.title_weight = self.title_weight;
        settings.feature.abstract_weight = self.abstract_weight;
        settings.query.kind = match self.query {
            QueryArg::Max => QueryKind::Max,
            QueryArg::Uncertainty => QueryKind::Uncertainty,
            QueryArg::Random => QueryKind::Random,
            QueryArg::Mixed => QueryKind::Mixed,
        };
        settings.query.mixed_random_fraction = self.mixed_random_fraction;
        settings.balance.kind = match self.balance {
            BalanceArg::Simple => BalanceKind::Simple,
            BalanceArg::Undersample => BalanceKind::Undersample,
            BalanceArg::Dr => BalanceKind::DynamicResample,
        };
        SimulationSpec {
            settings,
            n_runs: self.runs,
            n_prior_included: self.prior_included,
            n_prior_excluded: self.prior_excluded,
            master_seed: self.seed,
            exclude_priors_from_metrics: self.exclude_priors_from_metrics,
        }
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), String> {
    std::fs::write(path, bytes).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), String> {
    let spec = args.spec();
    let dataset = Arc::new(load_path(&args.dataset).map_err(|e| e.to_string())?);
    let simulate = || simulate::run_simulation(Arc::clone(&dataset), &spec).map_err(|e| e.to_string());
    let mut result = match args.jobs {
        Some(0) => return Err("--jobs must be at least 1".into()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| e.to_string())?
            .install(simulate)?,
        None => simulate()?,
    };
    std::fs::create_dir_all(&args.output).map_err(|e| format!("cannot create {}: {e}", args.output.display()))?;
    result.plot_data = Some(PLOT_FILE.to_owned());
    write_file(&args.output.join(PLOT_FILE), &simulate::emit_plot_data(&result))?;
    write_file(&args.output.join(RESULTS_FILE), &result.to_json())?;
    print!("{}", metrics_table(&result, &[], &[]));
    eprintln!(
        "wrote {} and {}",
        args.output.join(RESULTS_FILE).display(),
        args.output.join(PLOT_FILE).display()
    );
    Ok(())
}

pub fn read_results(path: &Path) -> Result<SimulationResult, String> {
    let bytes = std::fs::read(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let result: SimulationResult =
        serde_json::from_slice(&bytes).map_err(|e| format!("malformed results document {}: {e}", path.display()))?;
    if result.schema_version != simulate::RESULTS_SCHEMA_VERSION {
        return Err(format!("unsupported results schema version {}", result.schema_version));
    }
    Ok(result)
}

fn cmd_metrics(args: &MetricsArgs) -> Result<String, String> {
    let result = read_results(&args.results)?;
    for &v in args.wss.iter().chain(&args.rrf) {
        if !(v > 0.0 && v <= 100.0) {
            return Err(format!("levels are percentages in (0, 100], got {v}"));
        }
    }
    Ok(metrics_table(&result, &args.wss, &args.rrf))
}

/// Recall curve of a run rebuilt from its event log.
pub fn curve_from_events(result: &SimulationResult, run: &simulate::RunResult) -> Result<Vec<f64>, String> {
    let skip = if result.spec.exclude_priors_from_metrics {
        run.prior_included.len() + run.prior_excluded.len()
    } else {
        0
    };
    let n_relevant = if result.spec.exclude_priors_from_metrics {
        result.n_relevant.saturating_sub(run.prior_included.len())
    } else {
        result.n_relevant
    };
    let events = run.events.get(skip..).ok_or("event log shorter than its priors")?;
    recall_curve(events.iter().map(|e| e.label), n_relevant).map_err(|e| e.to_string())
}

fn percent_label(v: f64) -> String {
    format!("{}", (v * 1e6).round() / 1e6)
}

/// Per-run WSS@85/95/100 and RRF@5/10 (plus extra levels in percent),
/// recomputed from each run's event log, with a MEAN row.
pub fn metrics_table(result: &SimulationResult, extra_wss: &[f64], extra_rrf: &[f64]) -> String {
    let mut header: Vec<String> = vec!["run".into()];
    type Metric = Box<dyn Fn(&[f64]) -> Option<f64>>;
    let mut metrics: Vec<Metric> = Vec::new();
    for level in [85.0, 95.0, 100.0].into_iter().chain(extra_wss.iter().copied()) {
        header.push(format!("WSS@{}", percent_label(level)));
        metrics.push(Box::new(move |c: &[f64]| wss(c, level / 100.0).ok()));
    }
    for fraction in [5.0, 10.0].into_iter().chain(extra_rrf.iter().copied()) {
        header.push(format!("RRF@{}", percent_label(fraction)));
        metrics.push(Box::new(move |c: &[f64]| rrf(c, fraction / 100.0).ok()));
    }
    let mut rows: Vec<Vec<String>> = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); metrics.len()];
    for run in &result.runs {
        let curve = curve_from_events(result, run).unwrap_or_default();
        let mut row = vec![run.run.to_string()];
        for (m, col) in metrics.iter().zip(&mut columns) {
            match m(&curve) {
                Some(v) => {
                    col.push(v);
                    row.push(format!("{v:.4}"));
                }
                None => row.push("-".into()),
            }
        }
        rows.push(row);
    }
    let mut mean = vec!["MEAN".to_string()];
    for col in &columns {
        if col.is_empty() {
            mean.push("-".into());
        } else {
            mean.push(format!("{:.4}", col.iter().sum::<f64>() / col.len() as f64));
        }
    }
    rows.push(mean);
    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in std::iter::once(&header).chain(&rows) {
        let cells: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        writeln!(out, "{}", cells.join("  ")).unwrap();
    }
    out
}

fn default_data_dir() -> PathBuf {
    if let Some(dir) = std::env::var_os(DATA_DIR_ENV).filter(|d| !d.is_empty()) {
        return PathBuf::from(dir);
    }
    match std::env::var_os("HOME") {
        Some(home) => PathBuf::from(home).join(".screenloop"),
        None => PathBuf::from("screenloop-data"),
    }
}

fn is_loopback(host: &str) -> bool {
    host == "localhost" || host.parse::<std::net::IpAddr>().is_ok_and(|ip| ip.is_loopback())
}

fn cmd_serve(args: &ServeArgs) -> Result<(), String> {
    let config = ServiceConfig {
        data_dir: args.data_dir.clone().unwrap_or_else(default_data_dir),
        ui_dir: args.ui_dir.clone(),
        token: std::env::var(TOKEN_ENV).ok().filter(|t| !t.is_empty()),
    };
    if !is_loopback(&args.host) && config.token.is_none() {
        eprintln!("screenloop: warning: binding {} without {TOKEN_ENV}; anyone on the network can read your data", args.host);
    }
    let app = service::AppState::open(&config)?;
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host.as_str(), args.port))
            .await
            .map_err(|e| format!("cannot bind {}:{}: {e}", args.host, args.port))?;
        service::serve(listener, app, config.ui_dir.clone())
            .await
            .map_err(|e| e.to_string())
    })
}

fn resolve_format(path: &Path, flag: Option<FormatArg>, role: &str) -> Result<SourceFormat, String> {
    if let Some(f) = flag {
        return Ok(f.into());
    }
    format_for_path(path)
        .map_err(|e| e.to_string())?
        .ok_or_else(|| format!("cannot tell the {role} format from {}; pass --{role} ris|csv", path.display()))
}

fn cmd_convert(args: &ConvertArgs) -> Result<(), String> {
    let bytes = std::fs::read(&args.input).map_err(|e| format!("cannot read {}: {e}", args.input.display()))?;
    let from = match args.from {
        Some(f) => Some(f.into()),
        None => format_for_path(&args.input).map_err(|e| e.to_string())?,
    };
    let dataset = crate::corpus::parse_bytes(&bytes, from).map_err(|e| e.to_string())?;
    let to = resolve_format(&args.output, args.to, "to")?;
    let rows = dataset.records().iter().map(|r| (r, r.label));
    let out = match to {
        SourceFormat::Csv => write_csv(rows),
        SourceFormat::Ris => write_ris(rows),
    };
    write_file(&args.output, &out)?;
    let rejected = dataset.report().rejected.len();
    eprintln!(
        "converted {} records to {}{}",
        dataset.len(),
        args.output.display(),
        if rejected > 0 { format!(" ({rejected} rejected)") } else { String::new() }
    );
    Ok(())
}
