//! The `uxkpi` command line: ingest, score, compare, simulate, report, serve.
//!
//! Every subcommand takes `--json`, which prints the library result as JSON
//! instead of the human-readable form.

use std::fs;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use uxkpi_core::analytics::{Analytics, FilterSpec, Quarter, QuarterRange};
use uxkpi_core::config::AnalyticsConfig;
use uxkpi_core::ingest::{parse_csv, parse_ndjson, Store, SurveyDefinition};
use uxkpi_core::report::{build_report, OutputFormat, ReportSpec, DEFAULT_COMMENT_SAMPLE_SIZE};
use uxkpi_core::simulate::{
    run_experiment, CoverageSpec, Execution, ExperimentOutput, ExperimentSpec,
};
use uxkpi_core::survey::{Channel, KpiKind, KpiResult};

pub const DEFAULT_STORE: &str = "uxkpi-data/responses.ndjson";

#[derive(Debug, Parser)]
#[command(name = "uxkpi", version, about = "Standardized UX survey KPIs: scoring, comparison, reports")]
pub struct Cli {
    #[command(flatten)]
    pub config: CliConfig,
    #[command(subcommand)]
    pub command: Command,
}

/// Options shared by every subcommand.
#[derive(Debug, Clone, Args)]
#[command(next_help_heading = "Global options")]
pub struct CliConfig {
    /// Response store (NDJSON); created on first ingest
    #[arg(long = "store", env = "UXKPI_STORE", default_value = DEFAULT_STORE, global = true)]
    pub store_path: PathBuf,
    /// Analytics config JSON (min_n, alpha, benchmarks, highlight_min_delta, cors_origin)
    #[arg(long = "config", global = true)]
    pub config_path: Option<PathBuf>,
    /// More log output on stderr; repeat for more
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    /// Print the result as JSON
    #[arg(long, global = true)]
    pub json: bool,
}

impl CliConfig {
    fn analytics_config(&self) -> Result<AnalyticsConfig> {
        match &self.config_path {
            Some(p) => Ok(AnalyticsConfig::load(p)?),
            None => Ok(AnalyticsConfig::default()),
        }
    }

    fn store(&self) -> Store {
        Store::new(&self.store_path)
    }

    fn analytics(&self) -> Result<Analytics> {
        Ok(Analytics::open(&self.store(), self.analytics_config()?)?)
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a survey export and append the accepted responses to the store
    Ingest(IngestArgs),
    /// Score one KPI over the selected responses
    Score(ScoreArgs),
    /// Test whether a KPI differs between two filtered groups
    Compare(CompareArgs),
    /// Run a Monte-Carlo experiment
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Write the quarterly KPI report
    Report(ReportArgs),
    /// Serve the HTTP/JSON API
    Serve(ServeArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum InputFormat {
    Csv,
    Ndjson,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Export file to read
    #[arg(long)]
    pub input: PathBuf,
    /// Survey definition JSON (column map, value maps, redactions)
    #[arg(long)]
    pub definition: PathBuf,
    /// Input format; guessed from the file extension when omitted
    #[arg(long, value_enum)]
    pub format: Option<InputFormat>,
}

/// Filter flags shared by score and report-like commands.
#[derive(Debug, Clone, Default, Args)]
pub struct FilterArgs {
    /// Only these products (repeatable)
    #[arg(long = "product")]
    pub products: Vec<String>,
    /// Only this quarter, as YYYY-Qn
    #[arg(long, conflicts_with_all = ["from", "to"])]
    pub quarter: Option<Quarter>,
    /// First quarter of an inclusive range
    #[arg(long)]
    pub from: Option<Quarter>,
    /// Last quarter of an inclusive range
    #[arg(long)]
    pub to: Option<Quarter>,
    /// Only these roles (repeatable)
    #[arg(long = "role")]
    pub roles: Vec<String>,
    /// Only these channels (repeatable)
    #[arg(long = "channel")]
    pub channels: Vec<Channel>,
}

impl FilterArgs {
    pub fn to_filter(&self) -> Result<FilterSpec> {
        let set = |v: &[String]| (!v.is_empty()).then(|| v.iter().cloned().collect());
        let quarters = match (self.quarter, self.from, self.to) {
            (Some(q), _, _) => Some(QuarterRange::single(q)),
            (None, None, None) => None,
            (None, from, to) => {
                if let (Some(f), Some(t)) = (from, to) {
                    if f > t {
                        bail!("--from {f} is after --to {t}");
                    }
                }
                Some(QuarterRange { from, to })
            }
        };
        Ok(FilterSpec {
            products: set(&self.products),
            roles: set(&self.roles),
            channels: (!self.channels.is_empty()).then(|| self.channels.iter().copied().collect()),
            quarters,
            ..FilterSpec::default()
        })
    }
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    /// KPI: uxlite, ueqoverall, ueqpragmatic, ueqhedonic, psat, nps
    #[arg(long)]
    pub kind: KpiKind,
    #[command(flatten)]
    pub filter: FilterArgs,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// KPI: uxlite, ueqoverall, ueqpragmatic, ueqhedonic, psat, nps
    #[arg(long)]
    pub kind: KpiKind,
    /// Group A as a filter query, e.g. "products=crm&quarter_from=2024-Q2&quarter_to=2024-Q2"
    #[arg(long)]
    pub a: String,
    /// Group B as a filter query
    #[arg(long)]
    pub b: String,
}

/// Options common to every experiment.
#[derive(Debug, Clone, Args)]
pub struct RunOptions {
    /// Write the CSV here instead of stdout
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Run trials on one thread
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Debug, Subcommand)]
pub enum SimulateCommand {
    /// 100 samples of 50 from 1000 users with mean rating 3
    Fig5 {
        /// RNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        run: RunOptions,
    },
    /// Empirical coverage of t intervals over Normal samples
    Coverage {
        /// Population mean
        #[arg(long, default_value_t = 3.0)]
        mu: f64,
        /// Population standard deviation
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        /// Sample size per trial
        #[arg(long, default_value_t = 30)]
        n: usize,
        /// Number of trials
        #[arg(long, default_value_t = 20_000)]
        trials: usize,
        /// Significance level; intervals are at 1 - alpha
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        /// RNG seed
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[command(flatten)]
        run: RunOptions,
    },
    /// Any experiment described by a JSON file
    Run {
        /// Experiment JSON (sampling, coverage or bias)
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        run: RunOptions,
    },
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
pub enum ReportFormat {
    #[default]
    Markdown,
    Html,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Quarter to report, as YYYY-Qn
    #[arg(long)]
    pub period: Quarter,
    /// Quarter to compare against; must precede the period
    #[arg(long)]
    pub baseline: Quarter,
    /// Only these products (repeatable); default is every product with responses
    #[arg(long = "product")]
    pub products: Vec<String>,
    /// Output format
    #[arg(long, value_enum, default_value_t = ReportFormat::Markdown)]
    pub format: ReportFormat,
    /// Output file; defaults to report-<period>.md or .html
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Seed of the comment sample
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Comments shown per product
    #[arg(long, default_value_t = DEFAULT_COMMENT_SAMPLE_SIZE)]
    pub comments: usize,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Address to bind
    #[arg(long, default_value = "127.0.0.1")]
    pub host: std::net::IpAddr,
    /// Port to bind; 0 picks a free one
    #[arg(long, default_value_t = 8080)]
    pub port: u16,
}

pub fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    let filter = tracing_subscriber::EnvFilter::try_from_default_env()
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(level));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn print_json<T: Serialize + ?Sized>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    writeln!(out)?;
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let cfg = cli.config;
    match cli.command {
        Command::Ingest(args) => ingest(&cfg, args, out),
        Command::Score(args) => score(&cfg, args, out),
        Command::Compare(args) => compare(&cfg, args, out),
        Command::Simulate(cmd) => simulate(&cfg, cmd, out),
        Command::Report(args) => report(&cfg, args, out),
        Command::Serve(args) => serve(&cfg, args, out),
    }
}

fn ingest(cfg: &CliConfig, args: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let def_text = fs::read_to_string(&args.definition)
        .with_context(|| format!("reading definition {}", args.definition.display()))?;
    let def = SurveyDefinition::from_json(&def_text)?;
    let bytes = fs::read(&args.input).with_context(|| format!("reading input {}", args.input.display()))?;
    let format = args.format.unwrap_or_else(|| guess_format(&args.input));
    let (responses, report) = match format {
        InputFormat::Csv => parse_csv(&bytes, &def)?,
        InputFormat::Ndjson => parse_ndjson(&bytes, &def)?,
    };
    let store = cfg.store();
    store.append(&responses)?;
    tracing::info!(store = %store.path().display(), appended = responses.len(), "ingested");
    if cfg.json {
        return print_json(out, &report);
    }
    writeln!(out, "accepted {}, rejected {}", report.accepted, report.rejected)?;
    for issue in &report.rejection_reasons {
        writeln!(out, "  row {}: rejected, {}", issue.row, serde_json::to_string(&issue.issue)?)?;
    }
    for issue in &report.warnings {
        writeln!(out, "  row {}: warning, {}", issue.row, serde_json::to_string(&issue.issue)?)?;
    }
    Ok(())
}

fn guess_format(path: &Path) -> InputFormat {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("ndjson" | "jsonl" | "json") => InputFormat::Ndjson,
        _ => InputFormat::Csv,
    }
}

fn fmt_result(r: &KpiResult) -> String {
    format!(
        "{:<13} {:>5} {:>9.2} {:>9.2} {:>9.2}  {}",
        r.kind.as_str(),
        r.n,
        r.value,
        r.ci_low,
        r.ci_high,
        match (&r.benchmark_category, &r.percentile_band) {
            (Some(c), Some(b)) => format!("{c} ({b})"),
            _ => "-".into(),
        }
    )
}

fn score(cfg: &CliConfig, args: ScoreArgs, out: &mut dyn Write) -> Result<()> {
    let a = cfg.analytics()?;
    let responses = a.usable(&args.filter.to_filter()?, args.kind);
    if responses.is_empty() {
        if cfg.json {
            return print_json(out, &Option::<KpiResult>::None);
        }
        writeln!(out, "no data")?;
        return Ok(());
    }
    let result = a.score(args.kind, &responses)?;
    if cfg.json {
        return print_json(out, &result);
    }
    writeln!(out, "{:<13} {:>5} {:>9} {:>9} {:>9}  benchmark", "kind", "n", "value", "ci_low", "ci_high")?;
    writeln!(out, "{}", fmt_result(&result))?;
    Ok(())
}

fn compare(cfg: &CliConfig, args: CompareArgs, out: &mut dyn Write) -> Result<()> {
    let a = cfg.analytics()?;
    let fa = FilterSpec::from_query(&args.a).context("--a")?;
    let fb = FilterSpec::from_query(&args.b).context("--b")?;
    let r = a.compare(&fa, &fb, args.kind)?;
    if cfg.json {
        return print_json(out, &r);
    }
    let o = &r.outcome;
    writeln!(out, "group A: n {}, value {:.4}", r.group_a.n, r.group_a.value)?;
    writeln!(out, "group B: n {}, value {:.4}", r.group_b.n, r.group_b.value)?;
    writeln!(out, "delta {:+.4}", r.delta)?;
    let df = o.df.map_or_else(String::new, |d| format!(", df {d:.4}"));
    writeln!(
        out,
        "statistic {:.4}{df}, critical {:.4}, alpha {}: {}",
        o.statistic,
        o.critical_value,
        o.alpha,
        if o.significant { "significant" } else { "not significant" }
    )?;
    for w in &r.warnings {
        writeln!(out, "warning: {}", serde_json::to_string(w)?)?;
    }
    Ok(())
}

fn simulate(cfg: &CliConfig, cmd: SimulateCommand, out: &mut dyn Write) -> Result<()> {
    let (spec, run) = match cmd {
        SimulateCommand::Fig5 { seed, run } => (ExperimentSpec::fig5(seed), run),
        SimulateCommand::Coverage {
            mu,
            sigma,
            n,
            trials,
            alpha,
            seed,
            run,
        } => (
            ExperimentSpec::Coverage(CoverageSpec {
                mu,
                sigma,
                n,
                trials,
                seed,
                alpha,
            }),
            run,
        ),
        SimulateCommand::Run { spec, run } => {
            let text = fs::read_to_string(&spec).with_context(|| format!("reading {}", spec.display()))?;
            (ExperimentSpec::from_json(&text)?, run)
        }
    };
    let exec = if run.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let output = run_experiment(&spec, exec)?;
    tracing::info!("{}", summary(&output));
    if let Some(path) = &run.output {
        fs::write(path, output.to_csv()).with_context(|| format!("writing {}", path.display()))?;
    }
    if cfg.json {
        return print_json(out, &output);
    }
    match &run.output {
        Some(path) => writeln!(out, "{}; wrote {}", summary(&output), path.display())?,
        None => out.write_all(output.to_csv().as_bytes())?,
    }
    Ok(())
}

fn summary(output: &ExperimentOutput) -> String {
    match output {
        ExperimentOutput::Sampling { population_mu, means } => {
            let mean = means.iter().sum::<f64>() / means.len().max(1) as f64;
            let (lo, hi) = means
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &m| (l.min(m), h.max(m)));
            format!(
                "population mean {population_mu:.4}; {} sample means, mean {mean:.4}, range {lo:.4} to {hi:.4}",
                means.len()
            )
        }
        ExperimentOutput::Coverage { coverage, trials } => {
            format!("coverage {coverage:.4} over {} trials", trials.len())
        }
        ExperimentOutput::Bias { population_mu, observed } => {
            let mean = observed.iter().map(|&r| f64::from(r)).sum::<f64>() / observed.len().max(1) as f64;
            format!(
                "population mean {population_mu:.4}; {} observed ratings, mean {mean:.4}",
                observed.len()
            )
        }
    }
}

fn report(cfg: &CliConfig, args: ReportArgs, out: &mut dyn Write) -> Result<()> {
    let a = cfg.analytics()?;
    let mut spec = ReportSpec::new(args.period, args.baseline);
    spec.products = args.products.into_iter().collect();
    spec.seed = args.seed;
    spec.comment_sample_size = args.comments;
    let (format, ext) = match args.format {
        ReportFormat::Markdown => (OutputFormat::Markdown, "md"),
        ReportFormat::Html => (OutputFormat::Html, "html"),
    };
    spec.output_format = format;
    let doc = build_report(&a, &spec)?;
    let path = args
        .output
        .unwrap_or_else(|| PathBuf::from(format!("report-{}.{ext}", args.period)));
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, &doc.rendered).with_context(|| format!("writing {}", path.display()))?;
    if cfg.json {
        return print_json(out, &doc);
    }
    let highlighted = doc.manifest.iter().filter(|m| m.highlighted).count();
    writeln!(
        out,
        "wrote {}; product sections: {}, highlighted changes: {highlighted}",
        path.display(),
        doc.sections.len()
    )?;
    Ok(())
}

#[derive(Serialize)]
struct Listening {
    address: SocketAddr,
}

fn serve(cfg: &CliConfig, args: ServeArgs, out: &mut dyn Write) -> Result<()> {
    let service = uxkpi_service::Service::open(cfg.store(), cfg.analytics_config()?)
        .map_err(|e| anyhow::anyhow!("{}: {}", e.code, e.message))?;
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind((args.host, args.port))
            .await
            .with_context(|| format!("binding {}:{}", args.host, args.port))?;
        let address = listener.local_addr()?;
        if cfg.json {
            serde_json::to_writer(&mut *out, &Listening { address })?;
            writeln!(out)?;
        } else {
            writeln!(out, "listening on http://{address}")?;
        }
        out.flush()?;
        let shutdown = async {
            let _ = tokio::signal::ctrl_c().await;
        };
        uxkpi_service::serve(listener, service, shutdown).await?;
        Ok(())
    })
}
