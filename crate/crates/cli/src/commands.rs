// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use serde_json::json;
use timeinf::anomaly::{auc, evaluate, f1, kmeans_threshold, sep_inf_from_series, topk_threshold, EvalRule, MetricReport};
use timeinf::baselines::{block_loocv_series, conditional_influence_series};
use timeinf::datagen::{generate, AnomalySpec, SynthBase, SynthSpec};
use timeinf::prune::{run_prune, PruneConfig, RemovalOrder};
use timeinf::{fit, make_instances, ArConfig, InfluenceContext, ScoreSeries, SolverChoice, SolverKind, TimeSeries, WindowSpec};

use crate::error::CliError;
use crate::io::{csv_bytes, read_labels, read_scores, read_series, write_atomic};
use crate::manifest::{sidecar, ManifestBuilder};
use crate::plot::{render, Panel};

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Number of samples.
    #[arg(long)]
    pub length: usize,
    /// `ar1:<phi>:<sigma>` or `sine:<period>:<amplitude>:<noise_sigma>`.
    #[arg(long, default_value = "ar1:0.8:1.0")]
    pub base: SynthBase,
    /// `<kind>:<start>:<span>:<magnitude>`; kind is point, noise_burst,
    /// local_context or global_context. Repeatable.
    #[arg(long = "anomaly")]
    pub anomalies: Vec<AnomalySpec>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Series CSV to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Labels CSV to write (default `<out>.labels.csv`).
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

pub fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let spec = SynthSpec { length: args.length, base: args.base, anomalies: args.anomalies.clone(), seed: args.seed };
    let mut manifest = ManifestBuilder::new("synth", json!({ "spec": spec }));
    manifest.seed(args.seed);
    let (series, labels) = generate(&spec)?;
    let labels_path = args.labels.clone().unwrap_or_else(|| sidecar(&args.out, "labels.csv"));

    let values = series.column(0)?;
    write_atomic(&args.out, &csv_bytes(&["x0"], values.iter().map(|v| vec![v.to_string()]))?)?;
    write_atomic(&labels_path, &csv_bytes(&["label"], labels.iter().map(|l| vec![l.to_string()]))?)?;
    manifest.output(&args.out);
    manifest.output(&labels_path);
    manifest.finish(&args.out)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Timeinf,
    Loocv,
    Conditional,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Timeinf => "timeinf",
            Method::Loocv => "loocv",
            Method::Conditional => "conditional",
        }
    }
}

/// Rule that turns scores into predicted labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DetectRule {
    KMeans,
    TopK(usize),
}

impl FromStr for DetectRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.split_once(':') {
            None if s == "kmeans" => Ok(DetectRule::KMeans),
            Some(("topk", k)) => k.parse().map(DetectRule::TopK).map_err(|_| format!("bad k in '{s}'")),
            _ => Err(format!("expected kmeans or topk:<k>, got '{s}'")),
        }
    }
}

impl std::fmt::Display for DetectRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DetectRule::KMeans => write!(f, "kmeans"),
            DetectRule::TopK(k) => write!(f, "topk:{k}"),
        }
    }
}

#[derive(Debug, Args)]
pub struct DetectArgs {
    /// Series CSV: optional header, one column per dimension.
    #[arg(long)]
    pub input: PathBuf,
    /// Treat the first column as a timestamp and ignore it.
    #[arg(long)]
    pub timestamp: bool,
    /// Ground-truth 0/1 labels; enables the metrics record.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "timeinf")]
    pub method: Method,
    /// direct, cg or hessian-free.
    #[arg(long, default_value = "direct")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-10)]
    pub cg_tol: f64,
    /// CG iteration cap (default: number of parameters).
    #[arg(long)]
    pub cg_max_iter: Option<usize>,
    #[arg(long, default_value_t = 100)]
    pub block_len: usize,
    #[arg(long, default_value_t = 1)]
    pub stride: usize,
    /// Ridge relative to the mean Gram eigenvalue.
    #[arg(long, default_value_t = 1e-8)]
    pub ridge: f64,
    #[arg(long)]
    pub intercept: bool,
    /// kmeans or topk:<k>.
    #[arg(long, default_value = "kmeans")]
    pub rule: DetectRule,
    /// Scores CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn score_dimension(series: &TimeSeries, dim: usize, args: &DetectArgs) -> Result<ScoreSeries, CliError> {
    let spec = WindowSpec::new(args.block_len, args.stride)?;
    let cfg = ArConfig::new(args.block_len).with_ridge(args.ridge).with_intercept(args.intercept);
    let choice = SolverChoice { kind: args.solver, cg_tol: args.cg_tol, cg_max_iter: args.cg_max_iter };
    Ok(match args.method {
        Method::Timeinf => {
            let set = make_instances(series, dim, spec)?;
            let model = fit(&set, cfg)?;
            InfluenceContext::new(model, set, choice)?.with_cache()?.self_influence_series()?
        }
        Method::Loocv => block_loocv_series(series, dim, spec, cfg)?,
        Method::Conditional => conditional_influence_series(series, dim, spec, cfg, choice)?,
    })
}

fn metrics_line(report: &MetricReport) -> Result<String, CliError> {
    serde_json::to_string(report).map_err(|e| CliError::Output(e.to_string()))
}

fn warn_single_class(report: &MetricReport) {
    if report.auc.is_none() {
        eprintln!("warning: labels contain a single class; AUC is undefined");
    }
}

pub fn detect(args: &DetectArgs) -> Result<(), CliError> {
    let params = json!({
        "input": args.input, "timestamp": args.timestamp, "labels": args.labels,
        "method": args.method.name(), "solver": args.solver.name(), "cg_tol": args.cg_tol, "cg_max_iter": args.cg_max_iter,
        "block_len": args.block_len, "stride": args.stride, "ridge": args.ridge,
        "intercept": args.intercept, "rule": args.rule.to_string(), "out": args.out,
    });
    let mut manifest = ManifestBuilder::new("detect", params);
    manifest.input(&args.input)?;
    let series = read_series(&args.input, args.timestamp)?;
    if args.block_len >= series.len() {
        return Err(CliError::Input(format!(
            "block length {} must be shorter than the series ({} points)",
            args.block_len,
            series.len()
        )));
    }
    let labels = match &args.labels {
        Some(path) => {
            manifest.input(path)?;
            let labels = read_labels(path)?;
            if labels.len() != series.len() {
                return Err(CliError::Input(format!(
                    "labels have {} rows, series has {}",
                    labels.len(),
                    series.len()
                )));
            }
            Some(labels)
        }
        None => None,
    };

    let per_dim = (0..series.dims()).map(|d| score_dimension(&series, d, args)).collect::<Result<Vec<_>, _>>()?;
    let combined = sep_inf_from_series(&per_dim)?;
    let coverage: Vec<usize> =
        (0..series.len()).map(|t| per_dim.iter().map(|s| s.coverage[t]).min().unwrap_or(0)).collect();
    let prediction = match args.rule {
        DetectRule::KMeans => kmeans_threshold(&combined.scores)?,
        DetectRule::TopK(k) => topk_threshold(&combined.scores, k)?,
    };

    let rows = (0..series.len()).map(|t| {
        vec![
            (t + 1).to_string(),
            combined.scores[t].to_string(),
            coverage[t].to_string(),
            prediction.labels[t].to_string(),
        ]
    });
    write_atomic(&args.out, &csv_bytes(&["index", "score", "coverage", "label_pred"], rows)?)?;
    manifest.output(&args.out);

    if let Some(labels) = labels {
        let mut report = f1(&prediction.labels, &labels)?;
        report.auc = match auc(&combined.scores, &labels) {
            Ok(v) => Some(v),
            Err(timeinf::Error::AucUndefined) => None,
            Err(e) => return Err(e.into()),
        };
        warn_single_class(&report);
        let line = metrics_line(&report)?;
        println!("{line}");
        let path = sidecar(&args.out, "metrics.json");
        write_atomic(&path, format!("{line}\n").as_bytes())?;
        manifest.output(&path);
    }
    manifest.finish(&args.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Scores CSV (a `score` column, or a single column).
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub labels: PathBuf,
    /// kmeans, topk (k = number of true anomalies) or best.
    #[arg(long, default_value = "kmeans")]
    pub rule: EvalRule,
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let scores = read_scores(&args.scores)?;
    let labels = read_labels(&args.labels)?;
    if scores.len() != labels.len() {
        return Err(CliError::Input(format!("scores have {} rows, labels have {}", scores.len(), labels.len())));
    }
    let evaluation = evaluate(&scores, &labels, args.rule)?;
    warn_single_class(&evaluation.report);
    println!("{}", metrics_line(&evaluation.report)?);
    Ok(())
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub timestamp: bool,
    /// Column to model, by index or header name.
    #[arg(long, default_value = "0")]
    pub dim: String,
    #[arg(long)]
    pub train: usize,
    #[arg(long)]
    pub val: usize,
    #[arg(long)]
    pub test: usize,
    #[arg(long, default_value_t = 100)]
    pub block_len: usize,
    /// Length of each removal unit (default: block length).
    #[arg(long)]
    pub prune_block_size: Option<usize>,
    #[arg(long)]
    pub steps: usize,
    /// descending, ascending or random:<seed>.
    #[arg(long, default_value = "descending")]
    pub order: RemovalOrder,
    #[arg(long, default_value = "direct")]
    pub solver: SolverKind,
    #[arg(long, default_value_t = 1e-8)]
    pub ridge: f64,
    #[arg(long)]
    pub intercept: bool,
    /// Curve CSV to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn resolve_dim(series: &TimeSeries, dim: &str) -> Result<usize, CliError> {
    if let Some(i) = series.dim_names().iter().position(|n| n == dim) {
        return Ok(i);
    }
    match dim.parse::<usize>() {
        Ok(i) if i < series.dims() => Ok(i),
        _ => Err(CliError::Input(format!("unknown dimension '{dim}'"))),
    }
}

fn order_name(order: RemovalOrder) -> String {
    match order {
        RemovalOrder::DescendingHelpful => "descending".into(),
        RemovalOrder::AscendingHelpful => "ascending".into(),
        RemovalOrder::Random(seed) => format!("random:{seed}"),
    }
}

pub fn prune(args: &PruneArgs) -> Result<(), CliError> {
    let mut cfg = PruneConfig::new(args.train, args.val, args.test, args.block_len, args.steps);
    cfg.prune_block_size = args.prune_block_size.unwrap_or(args.block_len);
    cfg.order = args.order;
    cfg.ridge = args.ridge;
    cfg.include_intercept = args.intercept;
    cfg.solver = SolverChoice { kind: args.solver, ..SolverChoice::direct() };

    let params = json!({
        "input": args.input, "timestamp": args.timestamp, "dim": args.dim,
        "train": args.train, "val": args.val, "test": args.test, "block_len": args.block_len,
        "prune_block_size": cfg.prune_block_size, "steps": args.steps, "order": order_name(args.order),
        "solver": args.solver.name(), "ridge": args.ridge, "intercept": args.intercept, "out": args.out,
    });
    let mut manifest = ManifestBuilder::new("prune", params);
    if let RemovalOrder::Random(seed) = args.order {
        manifest.seed(seed);
    }
    manifest.input(&args.input)?;
    let series = read_series(&args.input, args.timestamp)?;
    let dim = resolve_dim(&series, &args.dim)?;
    let curve = run_prune(&series, dim, &cfg)?;

    let last = curve.records.len() - 1;
    let rows = curve.records.iter().enumerate().map(|(i, r)| {
        vec![
            r.step.to_string(),
            r.fraction_removed.to_string(),
            r.r2.to_string(),
            r.rmse.to_string(),
            (curve.truncated && i == last).to_string(),
        ]
    });
    write_atomic(&args.out, &csv_bytes(&["step", "fraction_removed", "r2", "rmse", "truncated"], rows)?)?;
    if curve.truncated {
        eprintln!("warning: curve truncated after step {}", curve.records[last].step);
    }
    manifest.output(&args.out);
    manifest.finish(&args.out)?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct PlotArgs {
    #[arg(long)]
    pub series: PathBuf,
    #[arg(long)]
    pub timestamp: bool,
    /// Score files, one panel each. Repeatable.
    #[arg(long = "scores")]
    pub scores: Vec<PathBuf>,
    /// Labels to shade.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    /// SVG to write.
    #[arg(long)]
    pub out: PathBuf,
}

fn file_title(path: &Path) -> String {
    path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| path.display().to_string())
}

pub fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let params = json!({
        "series": args.series, "timestamp": args.timestamp, "scores": args.scores,
        "labels": args.labels, "out": args.out,
    });
    let mut manifest = ManifestBuilder::new("plot", params);
    manifest.input(&args.series)?;
    let series = read_series(&args.series, args.timestamp)?;
    let len = series.len();
    let mut panels = vec![Panel { title: file_title(&args.series), lines: series.columns().to_vec() }];
    for path in &args.scores {
        manifest.input(path)?;
        let scores = read_scores(path)?;
        if scores.len() != len {
            return Err(CliError::Input(format!("{} has {} rows, series has {len}", path.display(), scores.len())));
        }
        panels.push(Panel { title: file_title(path), lines: vec![scores] });
    }
    let labels = match &args.labels {
        Some(path) => {
            manifest.input(path)?;
            let labels = read_labels(path)?;
            if labels.len() != len {
                return Err(CliError::Input(format!("labels have {} rows, series has {len}", labels.len())));
            }
            Some(labels)
        }
        None => None,
    };
    write_atomic(&args.out, render(&panels, len, labels.as_deref()).as_bytes())?;
    manifest.output(&args.out);
    manifest.finish(&args.out)?;
    Ok(())
}
