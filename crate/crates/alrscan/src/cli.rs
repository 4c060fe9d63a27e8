//! Command-line front end: `analyze` ties ingestion, windows, statistics and
//! p-values together; `simulate` dispatches the scripted experiments.
//!
//! Exit codes: 0 on success, 2 on any validation error (bad flag, malformed
//! input row, conflicting options). Reports are byte-identical for identical
//! (arguments, seed, input files) on any thread count; wall-clock timing is
//! logged to stderr only.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::data::{self, CsvKind, PointDataset};
use crate::likelihood::{self, Sidedness};
use crate::logistic::{self, LogisticFit};
use crate::pvalue::{self, PValueResult, StatPipeline};
use crate::replicate::{self, example1, example2, power, qq};
use crate::report::{
    ArgmaxInfo, CovariateInfo, DatasetSummary, StatRecord, TestReport, WindowSummary, REPORT_SCHEMA,
};
use crate::rng::derive_seed;
use crate::stats::{self, StatKind};
use crate::windows::{self, Rect, WindowSet, WindowSpec};

#[derive(Parser)]
#[command(
    name = "alrscan",
    version,
    about = "Spatial cluster detection with scan and ALR test statistics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute statistics and p-values for a dataset
    Analyze(AnalyzeArgs),
    /// Run a scripted simulation experiment
    Simulate(SimulateArgs),
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Input CSV; point or aggregated schema, detected from the header
    #[arg(long)]
    data: PathBuf,
    /// Window family, e.g. grid:w=40,s=10,o=5,min=2 | knn:jmax=10 |
    /// allpairs:wmax=20 | sets:<file>
    #[arg(long)]
    windows: String,
    /// Statistic: scan | alr | walr[:weights=<file>]
    #[arg(long)]
    stat: String,
    /// Alternative: one | two
    #[arg(long, default_value = "two")]
    alt: String,
    /// P-value method (repeatable): chi2 | gdist | perm[:L=999] | risk[:L=999]
    #[arg(long = "pvalue")]
    pvalue: Vec<String>,
    /// Covariate adjustment: off | on | quadratic
    #[arg(long, default_value = "off")]
    covariates: String,
    /// Standardize covariate columns (never done silently)
    #[arg(long)]
    standardize: bool,
    /// Master seed for Monte Carlo methods
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Write the JSON report here instead of stdout
    #[arg(long)]
    out: Option<PathBuf>,
    /// Dump window provenance (id, center/radius, n, m) as TSV
    #[arg(long)]
    dump_windows: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Experiment: example1 | example2 | qq | power
    #[arg(long)]
    experiment: String,
    /// Key-value config file (defaults apply when omitted)
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism)
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory for tables and summaries
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Point CSV with fixed locations (power experiment only)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Window family for the power experiment
    #[arg(long, default_value = "grid:w=40,s=10,o=5,min=2")]
    windows: String,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Data(#[from] data::DataError),
    #[error(transparent)]
    Window(#[from] windows::WindowError),
    #[error(transparent)]
    Score(#[from] likelihood::ScoreError),
    #[error(transparent)]
    Stat(#[from] stats::StatError),
    #[error(transparent)]
    Logistic(#[from] logistic::LogisticError),
    #[error(transparent)]
    PValue(#[from] pvalue::PValueError),
    #[error(transparent)]
    Experiment(#[from] replicate::ExperimentError),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Runs the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    let (threads, result) = match cli.command {
        Command::Analyze(args) => (args.threads, with_pool(args.threads, || analyze(&args))),
        Command::Simulate(args) => (args.threads, with_pool(args.threads, || simulate(&args))),
    };
    let _ = threads;
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn with_pool<T>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .expect("thread pool")
            .install(f),
    }
}

fn kv_pairs(body: &str) -> Result<Vec<(&str, &str)>, CliError> {
    body.split(',')
        .filter(|p| !p.is_empty())
        .map(|pair| {
            pair.split_once('=').ok_or_else(|| {
                CliError::Usage(format!("--windows: expected key=value, got {pair:?}"))
            })
        })
        .collect()
}

fn parse_windows_flag(s: &str, base: &Path) -> Result<(WindowSpec, bool), CliError> {
    let (kind, body) = s.split_once(':').unwrap_or((s, ""));
    let mut dedup = false;
    match kind {
        "grid" => {
            let mut w = None;
            let mut spacing = None;
            let mut offset = 0.0;
            let mut min = 1u32;
            let mut inside = true;
            let mut domain = None;
            for (key, value) in kv_pairs(body)? {
                match key {
                    "w" => w = Some(parse_num(key, value)?),
                    "s" => spacing = Some(parse_num(key, value)?),
                    "o" => offset = parse_num(key, value)?,
                    "min" => min = parse_num(key, value)? as u32,
                    "inside" => inside = parse_bool(key, value)?,
                    "dedup" => dedup = parse_bool(key, value)?,
                    "domain" => {
                        let parts: Vec<f64> = value
                            .split(':')
                            .map(|v| parse_num("domain", v))
                            .collect::<Result<_, _>>()?;
                        if parts.len() != 4 {
                            return Err(CliError::Usage(
                                "--windows grid domain must be x0:x1:y0:y1".into(),
                            ));
                        }
                        domain = Some(Rect {
                            lo: vec![parts[0], parts[2]],
                            hi: vec![parts[1], parts[3]],
                        });
                    }
                    other => {
                        return Err(CliError::Usage(format!(
                            "--windows grid: unknown key {other}"
                        )))
                    }
                }
            }
            let radius =
                w.ok_or_else(|| CliError::Usage("--windows grid needs w=<radius>".into()))?;
            let spacing = spacing
                .ok_or_else(|| CliError::Usage("--windows grid needs s=<spacing>".into()))?;
            Ok((
                WindowSpec::FixedRadiusGrid {
                    radius,
                    spacing,
                    offset,
                    min_subjects: min,
                    domain,
                    circle_inside: inside,
                },
                dedup,
            ))
        }
        "knn" => {
            let mut jmax = None;
            let mut jmin = 1usize;
            let mut rmax = None;
            for (key, value) in kv_pairs(body)? {
                match key {
                    "jmax" => jmax = Some(parse_num(key, value)? as usize),
                    "jmin" => jmin = parse_num(key, value)? as usize,
                    "rmax" => rmax = Some(parse_num(key, value)?),
                    "dedup" => dedup = parse_bool(key, value)?,
                    other => {
                        return Err(CliError::Usage(format!(
                            "--windows knn: unknown key {other}"
                        )))
                    }
                }
            }
            let max_rank =
                jmax.ok_or_else(|| CliError::Usage("--windows knn needs jmax=<rank>".into()))?;
            Ok((
                WindowSpec::KnnCircles {
                    min_rank: jmin,
                    max_rank,
                    max_radius: rmax,
                },
                dedup,
            ))
        }
        "allpairs" => {
            let mut wmax = None;
            for (key, value) in kv_pairs(body)? {
                match key {
                    "wmax" => wmax = Some(parse_num(key, value)?),
                    "dedup" => dedup = parse_bool(key, value)?,
                    other => {
                        return Err(CliError::Usage(format!(
                            "--windows allpairs: unknown key {other}"
                        )))
                    }
                }
            }
            let max_radius = wmax
                .ok_or_else(|| CliError::Usage("--windows allpairs needs wmax=<radius>".into()))?;
            Ok((WindowSpec::AllPairsCircles { max_radius }, dedup))
        }
        "sets" => {
            if body.is_empty() {
                return Err(CliError::Usage("--windows sets:<file> needs a path".into()));
            }
            let path = base.parent().map(|p| p.join(body)).filter(|p| p.exists());
            let path = path.unwrap_or_else(|| PathBuf::from(body));
            let text = std::fs::read_to_string(&path).map_err(|e| {
                CliError::Usage(format!(
                    "--windows sets: cannot read {}: {e}",
                    path.display()
                ))
            })?;
            let mut sets = Vec::new();
            for line in text.lines() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let ids: Result<Vec<usize>, _> = line
                    .split(|c: char| c == ',' || c.is_whitespace())
                    .filter(|t| !t.is_empty())
                    .map(|t| t.parse::<usize>())
                    .collect();
                sets.push(ids.map_err(|_| {
                    CliError::Usage(format!("--windows sets: bad index list {line:?}"))
                })?);
            }
            Ok((WindowSpec::ExplicitSets(sets), false))
        }
        other => Err(CliError::Usage(format!(
            "--windows: unknown family {other:?} (expected grid, knn, allpairs or sets)"
        ))),
    }
}

fn parse_num(key: &str, value: &str) -> Result<f64, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("--windows: cannot parse {key}={value:?}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(CliError::Usage(format!(
            "--windows: {key} must be true or false, got {value:?}"
        ))),
    }
}

#[derive(Clone, Copy, PartialEq)]
enum CovariateMode {
    Off,
    Refit,
    Quadratic,
}

struct StatRequest {
    kind: StatKind,
    weights_path: Option<PathBuf>,
}

fn parse_stat(s: &str) -> Result<StatRequest, CliError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    match kind {
        "scan" | "alr" if !rest.is_empty() => {
            Err(CliError::Usage(format!("--stat {kind} takes no options")))
        }
        "scan" => Ok(StatRequest {
            kind: StatKind::Scan,
            weights_path: None,
        }),
        "alr" => Ok(StatRequest {
            kind: StatKind::Alr,
            weights_path: None,
        }),
        "walr" => {
            let weights_path = if rest.is_empty() {
                None
            } else {
                let Some(path) = rest.strip_prefix("weights=") else {
                    return Err(CliError::Usage(
                        "--stat walr options: weights=<file>".into(),
                    ));
                };
                Some(PathBuf::from(path))
            };
            Ok(StatRequest {
                kind: StatKind::WeightedAlr,
                weights_path,
            })
        }
        other => Err(CliError::Usage(format!(
            "--stat: unknown statistic {other:?} (expected scan, alr or walr)"
        ))),
    }
}

enum PValueRequest {
    Chi2,
    GDist,
    Permutation { replicates: u64 },
    RiskAdjusted { replicates: u64 },
}

impl PValueRequest {
    fn name(&self) -> &'static str {
        match self {
            PValueRequest::Chi2 => "chi2",
            PValueRequest::GDist => "gdist",
            PValueRequest::Permutation { .. } => "perm",
            PValueRequest::RiskAdjusted { .. } => "risk",
        }
    }
}

fn parse_pvalue(s: &str) -> Result<PValueRequest, CliError> {
    let (kind, rest) = s.split_once(':').unwrap_or((s, ""));
    let replicates = || -> Result<u64, CliError> {
        if rest.is_empty() {
            return Ok(999);
        }
        let Some(l) = rest.strip_prefix("L=") else {
            return Err(CliError::Usage(format!(
                "--pvalue {kind} options: L=<replicates>"
            )));
        };
        l.parse()
            .map_err(|_| CliError::Usage(format!("--pvalue {kind}: bad replicate count {l:?}")))
    };
    match kind {
        "chi2" if rest.is_empty() => Ok(PValueRequest::Chi2),
        "gdist" if rest.is_empty() => Ok(PValueRequest::GDist),
        "chi2" | "gdist" => Err(CliError::Usage(format!("--pvalue {kind} takes no options"))),
        "perm" => Ok(PValueRequest::Permutation {
            replicates: replicates()?,
        }),
        "risk" => Ok(PValueRequest::RiskAdjusted {
            replicates: replicates()?,
        }),
        other => Err(CliError::Usage(format!(
            "--pvalue: unknown method {other:?} (expected chi2, gdist, perm or risk)"
        ))),
    }
}

fn load_weights(path: &Path, expected: usize) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        CliError::Usage(format!("--stat walr: cannot read {}: {e}", path.display()))
    })?;
    let mut weights = Vec::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        weights.push(
            line.parse::<f64>()
                .map_err(|_| CliError::Usage(format!("--stat walr: bad weight {line:?}")))?,
        );
    }
    if weights.len() != expected {
        return Err(CliError::Usage(format!(
            "--stat walr: {} weights for {} windows",
            weights.len(),
            expected
        )));
    }
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|&w| !(w > 0.0)) || (sum - 1.0).abs() > 1e-12 {
        return Err(CliError::Usage(format!(
            "--stat walr: weights must be positive and normalized (sum to 1 within 1e-12; got sum {sum})"
        )));
    }
    Ok(weights)
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let sidedness = match args.alt.as_str() {
        "one" => Sidedness::One,
        "two" => Sidedness::Two,
        other => {
            return Err(CliError::Usage(format!(
                "--alt must be one or two, got {other:?}"
            )))
        }
    };
    let cov_mode = match args.covariates.as_str() {
        "off" => CovariateMode::Off,
        "on" => CovariateMode::Refit,
        "quadratic" => CovariateMode::Quadratic,
        other => {
            return Err(CliError::Usage(format!(
                "--covariates must be off, on or quadratic, got {other:?}"
            )))
        }
    };
    let stat_req = parse_stat(&args.stat)?;
    let pvalue_reqs: Vec<PValueRequest> = args
        .pvalue
        .iter()
        .map(|s| parse_pvalue(s))
        .collect::<Result<_, _>>()?;
    for (i, a) in pvalue_reqs.iter().enumerate() {
        if pvalue_reqs[..i].iter().any(|b| b.name() == a.name()) {
            return Err(CliError::Usage(format!(
                "--pvalue {} requested more than once",
                a.name()
            )));
        }
    }
    let (spec, dedup) = parse_windows_flag(&args.windows, &args.data)?;

    // load: aggregated data expands to subjects for label-level methods,
    // but windows are built on the aggregated structure directly
    let kind = data::detect_csv_kind(&args.data)?;
    let (mut dataset, ws, kind_name): (PointDataset, WindowSet, &'static str) = match kind {
        CsvKind::Point => {
            let d = data::load_point_csv(&args.data)?;
            let ws = windows::build_windows(&d, &spec)?;
            (d, ws, "point")
        }
        CsvKind::Aggregated => {
            let agg = data::load_aggregated_csv(&args.data)?;
            let ws = windows::build_windows_aggregated(&agg, &spec)?;
            (agg.expand(), ws, "aggregated")
        }
    };
    let ws = if dedup { ws.dedup_membership()? } else { ws };
    if args.standardize {
        dataset.standardize_covariates();
    }
    let (i_total, j_total) = (dataset.num_cases() as u64, dataset.num_subjects() as u64);

    if cov_mode != CovariateMode::Off && dataset.covariates().is_none() {
        return Err(CliError::Usage(format!(
            "--covariates {} needs covariate columns in the data file",
            args.covariates
        )));
    }
    let wants_risk = pvalue_reqs
        .iter()
        .any(|r| matches!(r, PValueRequest::RiskAdjusted { .. }));
    if wants_risk && cov_mode == CovariateMode::Off {
        return Err(CliError::Usage(
            "--pvalue risk requires --covariates on or quadratic".into(),
        ));
    }
    if wants_risk && sidedness == Sidedness::One {
        return Err(CliError::Usage(
            "--pvalue risk is defined for --alt two only".into(),
        ));
    }
    if wants_risk && stat_req.kind == StatKind::WeightedAlr {
        return Err(CliError::Usage(
            "--pvalue risk supports --stat scan or alr only".into(),
        ));
    }

    // null fit and window scores under the requested adjustment
    let fit0: Option<LogisticFit> = match cov_mode {
        CovariateMode::Off => None,
        _ => Some(logistic::fit_logistic_null(&dataset)?),
    };
    let mut cov_info = CovariateInfo {
        mode: args.covariates.clone(),
        columns: dataset.covariates().map(|c| c.cols()),
        refit_fallback_windows: Vec::new(),
        degenerate_windows: Vec::new(),
    };
    let scores = match cov_mode {
        CovariateMode::Off => likelihood::glr_scores(&ws, i_total, j_total, sidedness)?,
        CovariateMode::Refit => {
            let r =
                logistic::refit_window_scores(&dataset, &ws, fit0.as_ref().unwrap(), sidedness)?;
            cov_info.refit_fallback_windows = r.fallback_windows;
            cov_info.degenerate_windows = r.degenerate_windows;
            r.scores
        }
        CovariateMode::Quadratic => {
            let r = logistic::quadratic_window_scores(
                &dataset,
                &ws,
                fit0.as_ref().unwrap(),
                sidedness,
            )?;
            cov_info.degenerate_windows = r.degenerate_windows;
            r.scores
        }
    };

    let weights = match (&stat_req.weights_path, stat_req.kind) {
        (Some(path), _) => Some(load_weights(path, ws.len())?),
        (None, StatKind::WeightedAlr) => Some(vec![1.0 / ws.len() as f64; ws.len()]),
        _ => None,
    };
    let statistic = match stat_req.kind {
        StatKind::Scan => stats::scan_statistic(&scores)?,
        StatKind::Alr => stats::alr_statistic(&scores, None)?,
        StatKind::WeightedAlr => stats::alr_statistic(&scores, weights.as_deref())?,
    };

    let mut pvalues: Vec<PValueResult> = Vec::new();
    for (idx, req) in pvalue_reqs.iter().enumerate() {
        let method_seed = derive_seed(args.seed, idx as u64);
        let result = match req {
            PValueRequest::Chi2 => pvalue::chi2_pvalue(statistic.value, sidedness),
            PValueRequest::GDist => pvalue::gdist_pvalue(statistic.value, sidedness),
            PValueRequest::Permutation { replicates } => {
                let pipeline = StatPipeline {
                    kind: stat_req.kind,
                    sidedness,
                    weights: weights.clone(),
                };
                match cov_mode {
                    CovariateMode::Off => pvalue::permutation_pvalue(
                        &dataset,
                        &ws,
                        &pipeline,
                        *replicates,
                        method_seed,
                    )?,
                    _ => permutation_adjusted(
                        &dataset,
                        &ws,
                        cov_mode,
                        &pipeline,
                        statistic.value,
                        *replicates,
                        method_seed,
                    )?,
                }
            }
            PValueRequest::RiskAdjusted { replicates } => pvalue::risk_adjusted_mc_pvalue(
                &dataset,
                &ws,
                fit0.as_ref().expect("risk requires a fit"),
                stat_req.kind,
                *replicates,
                method_seed,
            )?,
        };
        pvalues.push(result);
    }

    if let Some(path) = &args.dump_windows {
        use std::io::Write as _;
        let mut f = std::fs::File::create(path)?;
        writeln!(f, "window\tprovenance\tn\tm\tscore")?;
        for (idx, w) in ws.windows().iter().enumerate() {
            writeln!(
                f,
                "{idx}\t{}\t{}\t{}\t{}",
                w.provenance,
                w.n(),
                w.m(),
                scores.scores[idx]
            )?;
        }
    }

    let argmax = statistic.argmax.map(|w| {
        let info = ws.window(w);
        ArgmaxInfo {
            window: w,
            provenance: info.provenance.to_string(),
            n: info.n(),
            m: info.m(),
        }
    });
    let report = TestReport {
        schema: REPORT_SCHEMA,
        tool_version: env!("CARGO_PKG_VERSION"),
        dataset: DatasetSummary {
            path: args.data.display().to_string(),
            kind: kind_name,
            subjects: j_total,
            cases: i_total,
            p0_hat: i_total as f64 / j_total as f64,
        },
        windows: WindowSummary {
            spec: args.windows.clone(),
            count: ws.len(),
        },
        covariates: cov_info,
        statistics: vec![StatRecord::from_statistic(&statistic, argmax)],
        pvalues,
        seed: args.seed,
    };
    let json = report.to_json();
    match &args.out {
        Some(path) => std::fs::write(path, &json)?,
        None => print!("{json}"),
    }
    eprintln!("analyze: {} ms", start.elapsed().as_millis());
    Ok(())
}

/// Permutation Monte Carlo with the statistic recomputed under covariate
/// adjustment: labels permute, covariates stay attached to subjects, and
/// every replicate refits the null (and windows, for `on`). A replicate
/// whose fit fails counts as exceeding, which can only make the p-value
/// more conservative.
fn permutation_adjusted(
    dataset: &PointDataset,
    ws: &WindowSet,
    cov_mode: CovariateMode,
    pipeline: &StatPipeline,
    observed: f64,
    replicates: u64,
    seed: u64,
) -> Result<PValueResult, CliError> {
    let stat_of = |labels: &[bool]| -> f64 {
        let Ok(d) = dataset.with_cases(labels.to_vec()) else {
            return f64::INFINITY;
        };
        let Ok(fit0) = logistic::fit_logistic_null(&d) else {
            return f64::INFINITY;
        };
        let scores = match cov_mode {
            CovariateMode::Refit => {
                logistic::refit_window_scores(&d, ws, &fit0, pipeline.sidedness).map(|r| r.scores)
            }
            _ => logistic::quadratic_window_scores(&d, ws, &fit0, pipeline.sidedness)
                .map(|r| r.scores),
        };
        match scores {
            Ok(sv) => pipeline.value(&sv.scores),
            Err(_) => f64::INFINITY,
        }
    };
    Ok(pvalue::permutation_pvalue_with(
        dataset.cases(),
        observed,
        stat_of,
        replicates,
        seed,
    )?)
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let start = Instant::now();
    let cfg = match &args.config {
        Some(path) => Config::from_path(path)?,
        None => Config::default(),
    };
    std::fs::create_dir_all(&args.out)?;
    let summary = match args.experiment.as_str() {
        "example1" => {
            let ecfg = example1::Example1Config::from_config(&cfg)?;
            let result = example1::run_example1(&ecfg, args.seed)?;
            result.write_tsv(&args.out.join("example1.tsv"))?;
            result.summary_json()
        }
        "example2" => {
            let ecfg = example2::Example2Config::from_config(&cfg)?;
            let result = example2::run_example2(&ecfg, args.seed)?;
            result.write_tsv(&args.out.join("example2.tsv"))?;
            result.summary_json()
        }
        "qq" => {
            let qcfg = qq::QqConfig::from_config(&cfg)?;
            let result = qq::run_qq(&qcfg, args.seed)?;
            result.write_tsv(&args.out.join("qq_two_sided.tsv"), Sidedness::Two)?;
            result.write_tsv(&args.out.join("qq_one_sided.tsv"), Sidedness::One)?;
            result.summary_json(qcfg.replicates)
        }
        "power" => {
            let data_path = args.data.as_ref().ok_or_else(|| {
                CliError::Usage("--experiment power needs --data <point csv>".into())
            })?;
            let dataset = data::load_point_csv(data_path)?;
            let (spec, _) = parse_windows_flag(&args.windows, data_path)?;
            let pcfg = power::PowerConfig::from_config(&cfg, spec)?;
            let result = power::run_power_study(&dataset, &pcfg, args.seed)?;
            result.write_tsv(&args.out.join("power.tsv"))?;
            result.summary_json()
        }
        other => return Err(CliError::Usage(format!(
            "--experiment: unknown experiment {other:?} (expected example1, example2, qq or power)"
        ))),
    };
    let path = args.out.join(format!("{}.json", args.experiment));
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    std::fs::write(&path, &text)?;
    print!("{text}");
    eprintln!("simulate: {} ms", start.elapsed().as_millis());
    Ok(())
}
