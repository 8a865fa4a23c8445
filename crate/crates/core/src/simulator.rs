//! Deterministic synthetic distribution-shift benchmark.
//!
//! A Gaussian-mixture task is sampled, a softmax-regression classifier is
//! trained on it by full-batch gradient descent, and graded covariate and
//! label shifts are applied to the clean test set. Every random draw comes
//! from a [`SeededStream`] with a fixed stream id (see [`crate::rng`]), so
//! the whole benchmark is a pure function of its specs.
//!
//! Sampling order: class `y = i mod K` for sample `i`, and each sample
//! draws its `d` coordinates in order as `mean_y + σ·normal()`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::SourceInfo;
use crate::data_io::{self, DatasetManifest, ManifestEntry, Role, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::estimators::{score_dataset, Estimator, ScoringContext};
use crate::evaluation::{accuracy, EvalRecord};
use crate::mano::SoftrunConfig;
use crate::numerics::{logsumexp_finite, softmax_into, LogitsMatrix};
use crate::rng::{streams, SeededStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub n_classes: usize,
    pub input_dim: usize,
    /// Radius of the circle the default class means sit on.
    pub radius: f64,
    /// Explicit `K × d` means; overrides the default placement.
    pub class_means: Option<Vec<Vec<f64>>>,
    pub class_cov_scale: f64,
    pub n_train_per_class: usize,
    pub n_test_per_class: usize,
    pub n_val_per_class: usize,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            n_classes: 10,
            input_dim: 16,
            radius: 3.0,
            class_means: None,
            class_cov_scale: 1.0,
            n_train_per_class: 200,
            n_test_per_class: 100,
            n_val_per_class: 100,
            seed: 0,
        }
    }
}

impl TaskSpec {
    /// Class means as a flat `K × d` buffer. By default class `k` sits at
    /// `r·(cos 2πk/K, sin 2πk/K, 0, …, 0)`.
    pub fn means(&self) -> Result<Vec<f64>> {
        let (k, d) = (self.n_classes, self.input_dim);
        if k < 2 {
            return Err(Error::invalid(format!("need at least 2 classes, got {k}")));
        }
        if d < 2 {
            return Err(Error::invalid(format!("input dimension must be at least 2, got {d}")));
        }
        if !(self.class_cov_scale > 0.0) || !self.class_cov_scale.is_finite() {
            return Err(Error::invalid("class_cov_scale must be finite and > 0"));
        }
        if self.n_train_per_class < 1 || self.n_test_per_class < 1 || self.n_val_per_class < 1 {
            return Err(Error::invalid("per-class sample counts must be at least 1"));
        }
        let means = match &self.class_means {
            Some(rows) => {
                if rows.len() != k || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::invalid(format!("class_means must be {k} x {d}")));
                }
                rows.concat()
            }
            None => {
                if !(self.radius > 0.0) || !self.radius.is_finite() {
                    return Err(Error::invalid("radius must be finite and > 0"));
                }
                let mut m = vec![0.0; k * d];
                for c in 0..k {
                    let angle = TAU * c as f64 / k as f64;
                    m[c * d] = self.radius * angle.cos();
                    m[c * d + 1] = self.radius * angle.sin();
                }
                m
            }
        };
        if means.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("class means must be finite"));
        }
        for a in 0..k {
            for b in a + 1..k {
                if means[a * d..(a + 1) * d] == means[b * d..(b + 1) * d] {
                    return Err(Error::invalid(format!("class means {a} and {b} coincide")));
                }
            }
        }
        Ok(means)
    }
}

/// Samples with their labels; features row-major `n × dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Vec<f64>,
    pub labels: Vec<usize>,
    pub dim: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }
}

#[derive(Debug, Clone)]
pub struct GeneratedTask {
    pub spec: TaskSpec,
    /// Flat `K × d` class means.
    pub means: Vec<f64>,
    pub train: Dataset,
    pub test: Dataset,
    pub validation: Dataset,
}

fn sample_split(means: &[f64], k: usize, d: usize, sigma: f64, per_class: usize, rng: &mut SeededStream) -> Dataset {
    let n = per_class * k;
    let mut x = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = i % k;
        labels.push(y);
        for j in 0..d {
            x.push(means[y * d + j] + sigma * rng.normal());
        }
    }
    Dataset { x, labels, dim: d }
}

/// Samples the train, clean test and validation splits, balanced across
/// classes, each from its own stream.
pub fn generate_task(spec: &TaskSpec) -> Result<GeneratedTask> {
    let means = spec.means()?;
    let (k, d, s) = (spec.n_classes, spec.input_dim, spec.class_cov_scale);
    let split = |per_class, stream| {
        sample_split(&means, k, d, s, per_class, &mut SeededStream::new(spec.seed, stream))
    };
    let train = split(spec.n_train_per_class, streams::TRAIN);
    let test = split(spec.n_test_per_class, streams::CLEAN_TEST);
    let validation = split(spec.n_val_per_class, streams::VALIDATION);
    Ok(GeneratedTask { spec: spec.clone(), means, train, test, validation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftSpec {
    /// 0 (no shift) through 5.
    pub severity: u32,
    /// Mean translation per severity unit.
    pub mean_drift: f64,
    /// Noise multiplier per severity unit.
    pub noise_gain: f64,
    pub drift_direction_seed: u64,
    /// Geometric class-prior tilt reached at severity 5.
    pub label_marginal_tilt: f64,
}

impl Default for ShiftSpec {
    fn default() -> Self {
        Self { severity: 0, mean_drift: 0.4, noise_gain: 1.3, drift_direction_seed: 0, label_marginal_tilt: 0.0 }
    }
}

pub const MAX_SEVERITY: u32 = 5;

impl ShiftSpec {
    pub fn validate(&self) -> Result<()> {
        if self.severity > MAX_SEVERITY {
            return Err(Error::invalid(format!("severity must be in 0..=5, got {}", self.severity)));
        }
        if !(self.mean_drift >= 0.0) || !self.mean_drift.is_finite() {
            return Err(Error::invalid("mean_drift must be finite and >= 0"));
        }
        if !(self.noise_gain >= 1.0) || !self.noise_gain.is_finite() {
            return Err(Error::invalid("noise_gain must be finite and >= 1"));
        }
        if !(0.0..1.0).contains(&self.label_marginal_tilt) {
            return Err(Error::invalid("label_marginal_tilt must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Unit vector in `R^d` drawn from the drift-direction stream.
pub fn drift_direction(task_seed: u64, direction_seed: u64, d: usize) -> Vec<f64> {
    let mut rng = SeededStream::new(task_seed, streams::DRIFT_DIRECTION + direction_seed);
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Shifts a clean test set. Every sample keeps its label and becomes
/// `mean_y + s·drift·u + gain^s·(x − mean_y)` with `u` a shared unit
/// direction (covariate shift). Class `k` samples are then kept with
/// probability `(1 − tilt·s/5)^k` (label shift). Severity 0 returns the
/// input unchanged.
pub fn apply_shift(task: &GeneratedTask, clean: &Dataset, shift: &ShiftSpec) -> Result<Dataset> {
    shift.validate()?;
    if shift.severity == 0 {
        return Ok(clean.clone());
    }
    let d = clean.dim;
    let s = shift.severity as f64;
    let u = drift_direction(task.spec.seed, shift.drift_direction_seed, d);
    let gain = shift.noise_gain.powi(shift.severity as i32);
    let offset: Vec<f64> = u.iter().map(|v| s * shift.mean_drift * v).collect();

    let tilt = shift.label_marginal_tilt * s / MAX_SEVERITY as f64;
    let mut rng = SeededStream::new(
        task.spec.seed,
        streams::LABEL_TILT + (shift.drift_direction_seed << 8) + shift.severity as u64,
    );

    let mut x = Vec::with_capacity(clean.x.len());
    let mut labels = Vec::with_capacity(clean.len());
    for i in 0..clean.len() {
        let y = clean.labels[i];
        if tilt > 0.0 && rng.uniform() >= (1.0 - tilt).powi(y as i32) {
            continue;
        }
        let mean = &task.means[y * d..(y + 1) * d];
        for ((xi, m), o) in clean.row(i).iter().zip(mean).zip(&offset) {
            x.push(m + o + gain * (xi - m));
        }
        labels.push(y);
    }
    if labels.is_empty() {
        return Err(Error::InsufficientData("label tilt removed every sample".into()));
    }
    Ok(Dataset { x, labels, dim: d })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    /// Learning rate in effect at the end of training.
    pub lr: f64,
    pub epochs: usize,
    pub final_loss: f64,
    pub seed: Option<u64>,
    pub lr_halvings: u32,
}

/// Affine classifier `q = W x + b`; `W` is `K × d` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub n_classes: usize,
    pub dim: usize,
    pub meta: TrainingMeta,
}

impl LinearClassifier {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: vec![0.0; n_classes * dim],
            bias: vec![0.0; n_classes],
            n_classes,
            dim,
            meta: TrainingMeta { lr: 0.0, epochs: 0, final_loss: 0.0, seed: None, lr_halvings: 0 },
        }
    }

    pub fn class_weights(&self, k: usize) -> &[f64] {
        &self.weights[k * self.dim..(k + 1) * self.dim]
    }

    fn logits_row(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.bias[k] + self.class_weights(k).iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }

    pub fn logits(&self, data: &Dataset) -> Result<LogitsMatrix> {
        if data.dim != self.dim {
            return Err(Error::invalid(format!(
                "classifier expects dimension {}, data has {}",
                self.dim, data.dim
            )));
        }
        let k = self.n_classes;
        let mut out = vec![0.0; data.len() * k];
        for (i, o) in out.chunks_exact_mut(k).enumerate() {
            self.logits_row(data.row(i), o);
        }
        LogitsMatrix::new(out, data.len(), k)
    }
}

/// Mean softmax cross-entropy of the classifier on `data`.
pub fn softmax_ce_loss(clf: &LinearClassifier, data: &Dataset) -> f64 {
    let mut q = vec![0.0; clf.n_classes];
    let total: f64 = (0..data.len())
        .map(|i| {
            clf.logits_row(data.row(i), &mut q);
            logsumexp_finite(&q) - q[data.labels[i]]
        })
        .sum();
    total / data.len() as f64
}

/// Analytic gradient of [`softmax_ce_loss`]: `(∂W, ∂b)` with
/// `∂q = softmax(q) − e_y` averaged over samples.
pub fn softmax_ce_gradient(clf: &LinearClassifier, data: &Dataset) -> (Vec<f64>, Vec<f64>) {
    let (k, d) = (clf.n_classes, clf.dim);
    let mut gw = vec![0.0; k * d];
    let mut gb = vec![0.0; k];
    let mut q = vec![0.0; k];
    let mut p = vec![0.0; k];
    for i in 0..data.len() {
        let x = data.row(i);
        clf.logits_row(x, &mut q);
        softmax_into(&q, &mut p);
        p[data.labels[i]] -= 1.0;
        for c in 0..k {
            gb[c] += p[c];
            for (g, v) in gw[c * d..(c + 1) * d].iter_mut().zip(x) {
                *g += p[c] * v;
            }
        }
    }
    let n = data.len() as f64;
    gw.iter_mut().for_each(|g| *g /= n);
    gb.iter_mut().for_each(|g| *g /= n);
    (gw, gb)
}

pub const MAX_LR_HALVINGS: u32 = 10;
const LOSS_INCREASE_TOL: f64 = 1e-9;

/// Full-batch gradient descent on softmax cross-entropy from zero
/// initialization. A step that raises the loss by more than `1e-9` is
/// rejected and the learning rate halved; more than ten halvings in total
/// is reported as divergence.
pub fn train_logistic(train: &Dataset, n_classes: usize, lr: f64, epochs: usize) -> Result<LinearClassifier> {
    if n_classes < 2 {
        return Err(Error::invalid("need at least 2 classes"));
    }
    if !(lr > 0.0) || !lr.is_finite() {
        return Err(Error::invalid(format!("learning rate must be > 0, got {lr}")));
    }
    if let Some(&y) = train.labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("training label {y} outside [0, {n_classes})")));
    }
    for c in 0..n_classes {
        if !train.labels.contains(&c) {
            return Err(Error::InsufficientData(format!("no training sample for class {c}")));
        }
    }

    let mut clf = LinearClassifier::zeros(n_classes, train.dim);
    let mut lr = lr;
    let mut halvings = 0;
    let mut loss = softmax_ce_loss(&clf, train);
    let mut epoch = 0;
    while epoch < epochs {
        let (gw, gb) = softmax_ce_gradient(&clf, train);
        loop {
            let mut next = clf.clone();
            next.weights.iter_mut().zip(&gw).for_each(|(w, g)| *w -= lr * g);
            next.bias.iter_mut().zip(&gb).for_each(|(b, g)| *b -= lr * g);
            let next_loss = softmax_ce_loss(&next, train);
            if next_loss.is_finite() && next_loss <= loss + LOSS_INCREASE_TOL {
                clf = next;
                loss = next_loss;
                break;
            }
            halvings += 1;
            if halvings > MAX_LR_HALVINGS {
                return Err(Error::TrainingDiverged { halvings: MAX_LR_HALVINGS, lr });
            }
            lr /= 2.0;
            log::debug!("epoch {epoch}: loss increased, halving learning rate to {lr}");
        }
        epoch += 1;
    }
    clf.meta = TrainingMeta { lr, epochs, final_loss: loss, seed: None, lr_halvings: halvings };
    Ok(clf)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { lr: 0.1, epochs: 500 }
    }
}

/// One scored, labeled shifted test set.
#[derive(Debug, Clone)]
pub struct ShiftedSet {
    pub id: String,
    pub shift: ShiftSpec,
    pub logits: LogitsMatrix,
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct BenchmarkRun {
    pub classifier: LinearClassifier,
    pub clean_accuracy: f64,
    pub validation_logits: LogitsMatrix,
    pub validation_labels: Vec<usize>,
    pub sets: Vec<ShiftedSet>,
    pub records: Vec<EvalRecord>,
}

pub const VALIDATION_ID: &str = "validation";

/// Identifier of the `index`-th shifted set.
pub fn shift_id(index: usize, shift: &ShiftSpec) -> String {
    format!("shift{index:02}-dir{}-sev{}", shift.drift_direction_seed, shift.severity)
}

/// Trains once on the task, then scores every shifted test set with every
/// estimator. ATC and COT use the clean validation split as source data.
/// Records follow the order of `shifts`.
pub fn run_benchmark(
    task: &TaskSpec,
    shifts: &[ShiftSpec],
    estimators: &[Estimator],
    softrun: &SoftrunConfig,
    train_cfg: &TrainConfig,
) -> Result<BenchmarkRun> {
    let generated = generate_task(task)?;
    let mut classifier = train_logistic(&generated.train, task.n_classes, train_cfg.lr, train_cfg.epochs)?;
    classifier.meta.seed = Some(task.seed);
    let clean_accuracy = accuracy(&classifier.logits(&generated.test)?, &generated.test.labels)?;

    let validation_logits = classifier.logits(&generated.validation)?;
    let validation_labels = generated.validation.labels.clone();
    let source = SourceInfo {
        val_logits: Some(validation_logits.clone()),
        val_labels: Some(validation_labels.clone()),
        label_marginal: None,
    };
    let ctx = ScoringContext::from_source(*softrun, &source)?;

    let mut sets = Vec::with_capacity(shifts.len());
    let mut records = Vec::with_capacity(shifts.len());
    for (i, shift) in shifts.iter().enumerate() {
        let data = apply_shift(&generated, &generated.test, shift)?;
        let logits = classifier.logits(&data)?;
        let id = shift_id(i, shift);
        let report = score_dataset(&id, &logits, estimators, &ctx)?;
        records.push(EvalRecord {
            dataset_id: id.clone(),
            scores: report.scores,
            true_accuracy: Some(accuracy(&logits, &data.labels)?),
            n_samples: data.len(),
        });
        sets.push(ShiftedSet { id, shift: shift.clone(), logits, labels: data.labels });
    }
    Ok(BenchmarkRun { classifier, clean_accuracy, validation_logits, validation_labels, sets, records })
}

/// The default sweep: `directions` drift directions times severities 1..=5.
pub fn severity_grid(directions: u64, severities: &[u32], base: &ShiftSpec) -> Vec<ShiftSpec> {
    let mut out = Vec::new();
    for dir in 0..directions {
        for &s in severities {
            out.push(ShiftSpec { severity: s, drift_direction_seed: dir, ..base.clone() });
        }
    }
    out
}

/// Writes the validation split and every shifted set as NPY files plus a
/// manifest in `dir`: `logits/<id>.npy` (`<f8`), `labels/<id>.npy` (`<i8`).
pub fn export_benchmark(run: &BenchmarkRun, dir: &Path) -> Result<DatasetManifest> {
    for sub in ["logits", "labels"] {
        std::fs::create_dir_all(dir.join(sub))
            .map_err(|source| Error::Io { path: dir.join(sub), source })?;
    }
    let mut entries = Vec::with_capacity(run.sets.len() + 1);
    let mut write = |id: &str, logits: &LogitsMatrix, labels: &[usize], role: Role| -> Result<()> {
        let lp = dir.join("logits").join(format!("{id}.npy"));
        let yp = dir.join("labels").join(format!("{id}.npy"));
        data_io::write_logits_npy(&lp, logits)?;
        data_io::write_labels_npy(&yp, labels)?;
        entries.push(ManifestEntry { id: id.to_string(), logits_path: lp, labels_path: Some(yp), role });
        Ok(())
    };
    write(VALIDATION_ID, &run.validation_logits, &run.validation_labels, Role::Validation)?;
    for s in &run.sets {
        write(&s.id, &s.logits, &s.labels, Role::Test)?;
    }
    let manifest = DatasetManifest { schema_version: SCHEMA_VERSION, entries };
    data_io::write_manifest(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

/// Class counts of a label vector.
pub fn class_counts(labels: &[usize], k: usize) -> BTreeMap<usize, usize> {
    let mut m: BTreeMap<usize, usize> = (0..k).map(|c| (c, 0)).collect();
    for &y in labels {
        *m.entry(y).or_default() += 1;
    }
    m
}
