//! Commands behind the `mano` binary. Every command renders its output to a
//! string, so tests can drive them in-process as well as through the binary.

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use mano_core::baselines::SourceInfo;
use mano_core::data_io::{read_labels, read_logits, read_manifest, Role};
use mano_core::estimators::{score_dataset, Estimator, ScoreReport, ScoreSign, ScoringContext};
use mano_core::evaluation::{
    accuracy, benchmark_report, fit_regression, mae, predict_accuracy, EstimatorMetrics, EvalRecord,
    RegressionModel,
};
use mano_core::mano::{phi_confidence_study, PhiInterval, PhiStudyConfig};
use mano_core::simulator::{
    export_benchmark, run_benchmark, severity_grid, ShiftSpec, TaskSpec, TrainConfig, TrainingMeta,
};
use mano_core::{Error, LogitsMatrix, Result, SoftrunConfig};

/// Version stamped into every JSON document the CLI emits.
pub const OUTPUT_SCHEMA_VERSION: u32 = 1;

#[derive(Parser, Debug)]
#[command(name = "mano", version, about = "Label-free accuracy estimation from classifier logits")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Score one logits file or every test entry of a manifest.
    Score(ScoreArgs),
    /// Correlate estimator scores with true accuracy over labeled datasets.
    Bench(BenchArgs),
    /// Fit accuracy ~ score on records and predict held-out datasets.
    Regress(RegressArgs),
    /// Run the synthetic shift benchmark, optionally exporting it.
    Simulate(SimulateArgs),
    /// Monte-Carlo 99% interval of the softrun criterion for random logits.
    PhiStudy(PhiStudyArgs),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

#[derive(Args, Debug, Clone)]
pub struct EstimatorArgs {
    /// Comma-separated estimator names [default: all that the inputs support]
    #[arg(long)]
    pub estimators: Option<String>,
    #[arg(long, default_value_t = 4.0)]
    pub p: f64,
    /// Branch threshold on the criterion (Taylor when criterion <= eta)
    #[arg(long, default_value_t = 5.0)]
    pub eta: f64,
    #[arg(long, default_value_t = 2)]
    pub taylor_order: u32,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
}

impl EstimatorArgs {
    fn softrun(&self) -> Result<SoftrunConfig> {
        let cfg = SoftrunConfig { eta: self.eta, taylor_order: self.taylor_order, p: self.p };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long, required_unless_present = "logits", conflicts_with_all = ["logits", "labels"])]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub logits: Option<PathBuf>,
    /// Labels for --logits; when given, accuracy is reported alongside
    #[arg(long, requires = "logits")]
    pub labels: Option<PathBuf>,
    /// Manifest entry to use as the labeled validation set (ATC, COT marginal)
    #[arg(long, requires = "manifest")]
    pub val_id: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub val_id: Option<String>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Args, Debug)]
pub struct RegressArgs {
    /// JSON file: a bench/simulate document or a bare array of records
    #[arg(long)]
    pub records: PathBuf,
    #[arg(long, default_value = "mano")]
    pub estimator: String,
    /// Comma-separated dataset ids to hold out from the fit and predict
    #[arg(long, default_value = "")]
    pub holdout: String,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub classes: usize,
    #[arg(long, default_value_t = 16)]
    pub dim: usize,
    #[arg(long, default_value_t = 3.0)]
    pub radius: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma: f64,
    #[arg(long, default_value_t = 200)]
    pub n_train: usize,
    #[arg(long, default_value_t = 100)]
    pub n_test: usize,
    #[arg(long, default_value_t = 100)]
    pub n_val: usize,
    #[arg(long, default_value_t = 4)]
    pub directions: u64,
    #[arg(long, default_value = "1,2,3,4,5")]
    pub severities: String,
    #[arg(long, default_value_t = 0.4)]
    pub mean_drift: f64,
    #[arg(long, default_value_t = 1.3)]
    pub noise_gain: f64,
    #[arg(long, default_value_t = 0.0)]
    pub tilt: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lr: f64,
    #[arg(long, default_value_t = 500)]
    pub epochs: usize,
    /// Write NPY logits/labels and a manifest to this directory
    #[arg(long)]
    pub export: Option<PathBuf>,
    #[command(flatten)]
    pub est: EstimatorArgs,
}

#[derive(Args, Debug)]
pub struct PhiStudyArgs {
    /// Comma-separated class counts
    #[arg(long, default_value = "2,10,100")]
    pub k: String,
    #[arg(long, default_value_t = 100_000)]
    pub n_models: usize,
    #[arg(long, default_value_t = 1)]
    pub n_samples: usize,
    /// Logits are uniform in [-bound, bound]
    #[arg(long, default_value_t = 5.0)]
    pub bound: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Threshold the lower bound is compared against in the table
    #[arg(long, default_value_t = 5.0)]
    pub eta: f64,
    #[arg(long, value_enum, default_value_t)]
    pub output: OutputFormat,
}

/// Exit status for a failed command: 2 for I/O and parse problems, 1 for
/// everything else.
pub fn exit_code(err: &Error) -> u8 {
    if err.is_io_or_parse() {
        2
    } else {
        1
    }
}

pub fn run(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::Score(a) => cmd_score(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Regress(a) => cmd_regress(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::PhiStudy(a) => cmd_phi_study(a),
    }
}

struct Loaded {
    id: String,
    logits: LogitsMatrix,
    labels: Option<Vec<usize>>,
}

fn load(id: &str, logits_path: &Path, labels_path: Option<&Path>) -> Result<Loaded> {
    let logits = read_logits(logits_path)?;
    let labels = match labels_path {
        Some(p) => {
            let y = read_labels(p, Some(logits.n_cols()))?;
            if y.len() != logits.n_rows() {
                return Err(Error::InvalidInput(format!(
                    "{}: {} labels for {} logit rows",
                    p.display(),
                    y.len(),
                    logits.n_rows()
                )));
            }
            Some(y)
        }
        None => None,
    };
    Ok(Loaded { id: id.to_string(), logits, labels })
}

/// Validation entry (if any) and test entries, in manifest order.
fn load_manifest(path: &Path, val_id: Option<&str>) -> Result<(Option<Loaded>, Vec<Loaded>)> {
    let manifest = read_manifest(path)?;
    let val_entry = match val_id {
        Some(id) => Some(manifest.entries.iter().find(|e| e.id == id).ok_or_else(|| {
            Error::InvalidInput(format!("{}: no entry with id '{id}'", path.display()))
        })?),
        None => manifest.validation(),
    };
    let val_id = val_entry.map(|e| e.id.as_str());
    let validation = val_entry
        .map(|e| load(&e.id, &e.logits_path, e.labels_path.as_deref()))
        .transpose()?;
    let mut tests = Vec::new();
    for e in &manifest.entries {
        if Some(e.id.as_str()) == val_id {
            continue;
        }
        if e.role == Role::Validation {
            log::warn!("ignoring validation entry '{}' (using '{}')", e.id, val_id.unwrap_or(""));
            continue;
        }
        log::info!("loading {}", e.id);
        tests.push(load(&e.id, &e.logits_path, e.labels_path.as_deref())?);
    }
    let k = validation.as_ref().or(tests.first()).map(|d| d.logits.n_cols());
    if let Some(bad) = tests.iter().find(|d| Some(d.logits.n_cols()) != k) {
        return Err(Error::InvalidInput(format!(
            "{}: entry '{}' has {} classes, expected {}",
            path.display(),
            bad.id,
            bad.logits.n_cols(),
            k.unwrap_or(0)
        )));
    }
    Ok((validation, tests))
}

fn scoring_context(softrun: SoftrunConfig, validation: Option<&Loaded>) -> Result<ScoringContext> {
    let source = match validation {
        Some(v) => SourceInfo { val_logits: Some(v.logits.clone()), val_labels: v.labels.clone(), label_marginal: None },
        None => SourceInfo::default(),
    };
    ScoringContext::from_source(softrun, &source)
}

/// Explicit estimator list, or every estimator the context supports. ATC
/// is dropped from the default set when no labeled validation data exists.
fn select_estimators(spec: Option<&str>, ctx: &ScoringContext, notes: &mut Vec<String>) -> Result<Vec<Estimator>> {
    match spec {
        Some(s) => Estimator::parse_list(s),
        None => Ok(Estimator::ALL
            .into_iter()
            .filter(|&e| {
                let keep = e != Estimator::Atc || ctx.atc_threshold.is_some();
                if !keep {
                    log::warn!("atc skipped: no labeled validation set");
                    notes.push("atc skipped: no labeled validation set".into());
                }
                keep
            })
            .collect()),
    }
}

#[derive(Serialize)]
struct ConfigDoc {
    p: f64,
    eta: f64,
    taylor_order: u32,
}

impl From<SoftrunConfig> for ConfigDoc {
    fn from(c: SoftrunConfig) -> Self {
        Self { p: c.p, eta: c.eta, taylor_order: c.taylor_order }
    }
}

#[derive(Serialize)]
struct EstimatorDoc {
    name: &'static str,
    sign: ScoreSign,
    variant: &'static str,
}

fn estimator_docs(list: &[Estimator]) -> Vec<EstimatorDoc> {
    list.iter().map(|&e| EstimatorDoc { name: e.name(), sign: e.sign(), variant: e.variant() }).collect()
}

#[derive(Serialize)]
struct ScoreDoc {
    schema_version: u32,
    kind: &'static str,
    config: ConfigDoc,
    estimators: Vec<EstimatorDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    reports: Vec<ScoredDataset>,
}

#[derive(Serialize)]
struct ScoredDataset {
    #[serde(flatten)]
    report: ScoreReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    true_accuracy: Option<f64>,
}

#[derive(Serialize)]
struct BenchDoc {
    schema_version: u32,
    kind: &'static str,
    config: ConfigDoc,
    estimators: Vec<EstimatorDoc>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<String>,
    metrics: Option<BTreeMap<String, EstimatorMetrics>>,
    records: Vec<EvalRecord>,
}

fn to_json<T: Serialize>(doc: &T) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("output document serializes");
    s.push('\n');
    s
}

fn fmt_num(v: f64) -> String {
    format!("{v:.6}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), fmt_num)
}

/// Left-aligned first column, right-aligned rest.
fn render_table(headers: &[String], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: &[String]| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| if i == 0 { format!("{c:<w$}") } else { format!("{c:>w$}") })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers);
    for row in rows {
        out.push_str(&line(row));
    }
    out
}

fn notes_text(notes: &[String]) -> String {
    notes.iter().map(|n| format!("note: {n}\n")).collect()
}

pub fn cmd_score(args: &ScoreArgs) -> Result<String> {
    let softrun = args.est.softrun()?;
    let (validation, datasets) = match (&args.manifest, &args.logits) {
        (Some(m), _) => load_manifest(m, args.val_id.as_deref())?,
        (None, Some(l)) => {
            let id = l.file_stem().map_or_else(|| "logits".to_string(), |s| s.to_string_lossy().into_owned());
            (None, vec![load(&id, l, args.labels.as_deref())?])
        }
        (None, None) => return Err(Error::InvalidInput("either --manifest or --logits is required".into())),
    };
    let ctx = scoring_context(softrun, validation.as_ref())?;
    let mut notes = Vec::new();
    let estimators = select_estimators(args.est.estimators.as_deref(), &ctx, &mut notes)?;

    let mut reports = Vec::with_capacity(datasets.len());
    for d in &datasets {
        let report = score_dataset(&d.id, &d.logits, &estimators, &ctx)?;
        let true_accuracy = d.labels.as_ref().map(|y| accuracy(&d.logits, y)).transpose()?;
        reports.push(ScoredDataset { report, true_accuracy });
    }

    if args.est.output == OutputFormat::Json {
        return Ok(to_json(&ScoreDoc {
            schema_version: OUTPUT_SCHEMA_VERSION,
            kind: "score",
            config: softrun.into(),
            estimators: estimator_docs(&estimators),
            notes,
            reports,
        }));
    }
    let mut headers: Vec<String> = ["dataset", "n", "K", "phi", "branch"].map(String::from).to_vec();
    headers.extend(estimators.iter().map(|e| e.name().to_string()));
    let has_acc = reports.iter().any(|r| r.true_accuracy.is_some());
    if has_acc {
        headers.push("accuracy".into());
    }
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let rep = &r.report;
            let mut row = vec![
                rep.dataset_id.clone(),
                rep.n_samples.to_string(),
                rep.n_classes.to_string(),
                fmt_num(rep.phi),
                rep.branch.to_string(),
            ];
            row.extend(estimators.iter().map(|e| fmt_num(rep.scores[e.name()])));
            if has_acc {
                row.push(fmt_opt(r.true_accuracy));
            }
            row
        })
        .collect();
    let mut out = render_table(&headers, &rows);
    for r in &reports {
        for w in &r.report.warnings {
            out.push_str(&format!("warning: {}: {w}\n", r.report.dataset_id));
        }
    }
    out.push_str(&notes_text(&notes));
    Ok(out)
}

fn bench_table(
    metrics: Option<&BTreeMap<String, EstimatorMetrics>>,
    estimators: &[Estimator],
    records: &[EvalRecord],
) -> String {
    let headers: Vec<String> = ["estimator", "sign", "R2", "rho", "|rho|", "MAE-CV"].map(String::from).to_vec();
    let mut out = String::new();
    match metrics {
        Some(m) => {
            let rows: Vec<Vec<String>> = estimators
                .iter()
                .filter_map(|e| m.get(e.name()).map(|x| (e, x)))
                .map(|(e, x)| {
                    let sign = match e.sign() {
                        ScoreSign::Positive => "+",
                        ScoreSign::Negative => "-",
                    };
                    vec![
                        e.name().to_string(),
                        sign.to_string(),
                        fmt_opt(x.r2),
                        fmt_opt(x.rho),
                        fmt_opt(x.abs_rho),
                        fmt_opt(x.mae_cv),
                    ]
                })
                .collect();
            out.push_str(&render_table(&headers, &rows));
        }
        None => out.push_str("metrics: need at least 3 labeled datasets\n"),
    }
    out.push_str(&format!("datasets: {}\n", records.len()));
    out
}

fn records_table(records: &[EvalRecord], estimators: &[Estimator]) -> String {
    let mut headers: Vec<String> = ["dataset", "n", "accuracy"].map(String::from).to_vec();
    headers.extend(estimators.iter().map(|e| e.name().to_string()));
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(|r| {
            let mut row = vec![r.dataset_id.clone(), r.n_samples.to_string(), fmt_opt(r.true_accuracy)];
            row.extend(estimators.iter().map(|e| fmt_opt(r.scores.get(e.name()).copied())));
            row
        })
        .collect();
    render_table(&headers, &rows)
}

pub fn cmd_bench(args: &BenchArgs) -> Result<String> {
    let softrun = args.est.softrun()?;
    let (validation, datasets) = load_manifest(&args.manifest, args.val_id.as_deref())?;
    let ctx = scoring_context(softrun, validation.as_ref())?;
    let mut notes = Vec::new();
    let estimators = select_estimators(args.est.estimators.as_deref(), &ctx, &mut notes)?;

    let records = datasets
        .iter()
        .map(|d| {
            let report = score_dataset(&d.id, &d.logits, &estimators, &ctx)?;
            Ok(EvalRecord {
                dataset_id: d.id.clone(),
                scores: report.scores,
                true_accuracy: d.labels.as_ref().map(|y| accuracy(&d.logits, y)).transpose()?,
                n_samples: d.logits.n_rows(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let metrics = benchmark_report(&records)?;
    Ok(render_bench(softrun, &estimators, notes, Some(metrics), records, args.est.output, ""))
}

fn render_bench(
    softrun: SoftrunConfig,
    estimators: &[Estimator],
    notes: Vec<String>,
    metrics: Option<BTreeMap<String, EstimatorMetrics>>,
    records: Vec<EvalRecord>,
    output: OutputFormat,
    preamble: &str,
) -> String {
    match output {
        OutputFormat::Json => to_json(&BenchDoc {
            schema_version: OUTPUT_SCHEMA_VERSION,
            kind: "benchmark",
            config: softrun.into(),
            estimators: estimator_docs(estimators),
            notes,
            metrics,
            records,
        }),
        OutputFormat::Table => {
            let mut out = preamble.to_string();
            out.push_str(&records_table(&records, estimators));
            out.push('\n');
            out.push_str(&bench_table(metrics.as_ref(), estimators, &records));
            out.push_str(&notes_text(&notes));
            out
        }
    }
}

fn parse_csv_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|_| Error::InvalidInput(format!("bad {what} '{p}'"))))
        .collect()
}

fn describe_training(clean_accuracy: f64, meta: &TrainingMeta) -> String {
    format!(
        "clean accuracy {}  (train loss {:.6}, lr {}, lr halvings {}, epochs {})\n\n",
        fmt_num(clean_accuracy),
        meta.final_loss,
        meta.lr,
        meta.lr_halvings,
        meta.epochs
    )
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let softrun = args.est.softrun()?;
    let task = TaskSpec {
        n_classes: args.classes,
        input_dim: args.dim,
        radius: args.radius,
        class_means: None,
        class_cov_scale: args.sigma,
        n_train_per_class: args.n_train,
        n_test_per_class: args.n_test,
        n_val_per_class: args.n_val,
        seed: args.seed,
    };
    let severities: Vec<u32> = parse_csv_list(&args.severities, "severity")?;
    if severities.is_empty() {
        return Err(Error::InvalidInput("empty severity list".into()));
    }
    let base = ShiftSpec {
        severity: 0,
        mean_drift: args.mean_drift,
        noise_gain: args.noise_gain,
        drift_direction_seed: 0,
        label_marginal_tilt: args.tilt,
    };
    let shifts = severity_grid(args.directions, &severities, &base);
    for s in &shifts {
        s.validate()?;
    }
    let estimators = match &args.est.estimators {
        Some(s) => Estimator::parse_list(s)?,
        None => Estimator::ALL.to_vec(),
    };
    let train = TrainConfig { lr: args.lr, epochs: args.epochs };
    let run = run_benchmark(&task, &shifts, &estimators, &softrun, &train)?;
    if let Some(dir) = &args.export {
        export_benchmark(&run, dir)?;
        log::info!("exported {} datasets to {}", run.sets.len() + 1, dir.display());
    }
    let labeled = run.records.iter().filter(|r| r.true_accuracy.is_some()).count();
    let metrics = if labeled >= 3 { Some(benchmark_report(&run.records)?) } else { None };
    let preamble = describe_training(run.clean_accuracy, &run.classifier.meta);
    Ok(render_bench(softrun, &estimators, Vec::new(), metrics, run.records, args.est.output, &preamble))
}

#[derive(Serialize)]
struct Prediction {
    dataset_id: String,
    score: f64,
    predicted: f64,
    actual: Option<f64>,
}

#[derive(Serialize)]
struct RegressDoc {
    schema_version: u32,
    kind: &'static str,
    model: RegressionModel,
    n_fit: usize,
    predictions: Vec<Prediction>,
    mae: Option<f64>,
}

fn read_records(path: &Path) -> Result<Vec<EvalRecord>> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io { path: path.to_path_buf(), source })?;
    let parse_err = |e: serde_json::Error| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    };
    let value: serde_json::Value = serde_json::from_str(&text).map_err(parse_err)?;
    let list = match value {
        serde_json::Value::Object(mut obj) => obj.remove("records").ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            column: 1,
            message: "expected an array of records or an object with a 'records' field".into(),
        })?,
        other => other,
    };
    serde_json::from_value(list).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        column: 0,
        message: format!("records: {e}"),
    })
}

pub fn cmd_regress(args: &RegressArgs) -> Result<String> {
    let records = read_records(&args.records)?;
    let holdout: Vec<String> = parse_csv_list(&args.holdout, "dataset id")?;
    let known: HashSet<&str> = records.iter().map(|r| r.dataset_id.as_str()).collect();
    if let Some(missing) = holdout.iter().find(|h| !known.contains(h.as_str())) {
        return Err(Error::InvalidInput(format!("holdout id '{missing}' not found in records")));
    }
    let held: HashSet<&str> = holdout.iter().map(String::as_str).collect();
    let fit_set: Vec<EvalRecord> = records.iter().filter(|r| !held.contains(r.dataset_id.as_str())).cloned().collect();
    let model = fit_regression(&fit_set, &args.estimator)?;
    let n_fit = fit_set.iter().filter(|r| r.true_accuracy.is_some()).count();

    let predictions = holdout
        .iter()
        .map(|id| {
            let r = records.iter().find(|r| &r.dataset_id == id).expect("checked above");
            let score = *r.scores.get(&args.estimator).ok_or_else(|| {
                Error::InvalidInput(format!("record '{id}' has no '{}' score", args.estimator))
            })?;
            Ok(Prediction {
                dataset_id: id.clone(),
                score,
                predicted: predict_accuracy(&model, score),
                actual: r.true_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (pred, actual): (Vec<f64>, Vec<f64>) =
        predictions.iter().filter_map(|p| p.actual.map(|a| (p.predicted, a))).unzip();
    let mae = if pred.is_empty() { None } else { Some(mae(&pred, &actual)?) };

    if args.output == OutputFormat::Json {
        return Ok(to_json(&RegressDoc {
            schema_version: OUTPUT_SCHEMA_VERSION,
            kind: "regression",
            model,
            n_fit,
            predictions,
            mae,
        }));
    }
    let mut out = format!(
        "model: accuracy = {} * {} + {}  (fit R2 {}, {n_fit} datasets)\n",
        fmt_num(model.slope),
        model.estimator_name,
        fmt_num(model.intercept),
        fmt_num(model.fit_r2)
    );
    if !predictions.is_empty() {
        let headers: Vec<String> = ["dataset", "score", "predicted", "actual"].map(String::from).to_vec();
        let rows: Vec<Vec<String>> = predictions
            .iter()
            .map(|p| vec![p.dataset_id.clone(), fmt_num(p.score), fmt_num(p.predicted), fmt_opt(p.actual)])
            .collect();
        out.push('\n');
        out.push_str(&render_table(&headers, &rows));
    }
    if let Some(m) = mae {
        out.push_str(&format!("MAE {}\n", fmt_num(m)));
    }
    Ok(out)
}

#[derive(Serialize)]
struct PhiStudyDoc {
    schema_version: u32,
    kind: &'static str,
    config: PhiStudyConfig,
    intervals: Vec<PhiInterval>,
}

pub fn cmd_phi_study(args: &PhiStudyArgs) -> Result<String> {
    let ks: Vec<usize> = parse_csv_list(&args.k, "class count")?;
    if ks.is_empty() {
        return Err(Error::InvalidInput("empty class-count list".into()));
    }
    let cfg = PhiStudyConfig {
        n_models: args.n_models,
        n_samples: args.n_samples,
        logit_bound: args.bound,
        seed: args.seed,
    };
    let intervals = phi_confidence_study(&ks, &cfg)?;
    if args.output == OutputFormat::Json {
        return Ok(to_json(&PhiStudyDoc { schema_version: OUTPUT_SCHEMA_VERSION, kind: "phi_study", config: cfg, intervals }));
    }
    let headers: Vec<String> = ["K", "low (0.5%)", "high (99.5%)", "low > eta"].map(String::from).to_vec();
    let rows: Vec<Vec<String>> = intervals
        .iter()
        .map(|iv| {
            vec![
                iv.k.to_string(),
                fmt_num(iv.low),
                fmt_num(iv.high),
                if iv.low > args.eta { "yes" } else { "no" }.to_string(),
            ]
        })
        .collect();
    let mut out = render_table(&headers, &rows);
    out.push_str(&format!(
        "{} models x {} samples, logits uniform in [-{}, {}], seed {}\n",
        cfg.n_models, cfg.n_samples, cfg.logit_bound, cfg.logit_bound, cfg.seed
    ));
    Ok(out)
}
