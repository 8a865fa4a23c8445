//! Browser bindings for the demo page in `www/`. Every export takes plain
//! numbers or strings and returns a JSON document; failures come back as
//! `{"error": "..."}` so the page has a single code path.

use serde::Serialize;
use serde_json::json;
use wasm_bindgen::prelude::*;

use mano_core::baselines::conf_score;
use mano_core::estimators::Estimator;
use mano_core::evaluation::benchmark_report;
use mano_core::mano::{mano_score, phi_confidence_study, softrun, taylor_normalize, PhiStudyConfig};
use mano_core::numerics::softmax;
use mano_core::simulator::{run_benchmark, severity_grid, ShiftSpec, TaskSpec, TrainConfig};
use mano_core::{LogitsMatrix, SoftrunConfig};

fn respond<T: Serialize>(result: mano_core::Result<T>) -> String {
    match result {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| json!({ "error": e.to_string() }).to_string()),
        Err(e) => json!({ "error": e.to_string() }).to_string(),
    }
}

/// One row per line; entries separated by commas and/or whitespace.
pub fn parse_logits(text: &str) -> mano_core::Result<LogitsMatrix> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(|l| {
            l.split(|c: char| c == ',' || c.is_whitespace())
                .filter(|t| !t.is_empty())
                .map(|t| t.parse::<f64>().map_err(|_| mano_core::Error::InvalidInput(format!("not a number: '{t}'"))))
                .collect()
        })
        .collect::<mano_core::Result<_>>()?;
    LogitsMatrix::from_rows(&rows)
}

#[derive(Serialize)]
struct Explained {
    phi: f64,
    branch: String,
    score: f64,
    /// Score with each branch forced, for comparison.
    score_taylor: f64,
    score_softmax: f64,
    confscore: f64,
    /// Rows actually used by the score.
    probs: Vec<Vec<f64>>,
    taylor: Vec<Vec<f64>>,
    softmax: Vec<Vec<f64>>,
}

pub fn explain(text: &str, scale: f64, p: f64, eta: f64, taylor_order: u32) -> mano_core::Result<impl Serialize> {
    let base = parse_logits(text)?;
    let scaled: Vec<f64> = base.as_slice().iter().map(|x| x * scale).collect();
    let logits = LogitsMatrix::new(scaled, base.n_rows(), base.n_cols())?;
    let cfg = SoftrunConfig { p, eta, taylor_order };
    let run = softrun(&logits, &cfg)?;
    let result = mano_score(&logits, &cfg)?;
    let forced = |eta| mano_score(&logits, &SoftrunConfig { eta, ..cfg }).map(|r| r.score);
    Ok(Explained {
        phi: result.phi_value,
        branch: result.branch.to_string(),
        score: result.score,
        score_taylor: forced(f64::INFINITY)?,
        score_softmax: forced(f64::NEG_INFINITY)?,
        confscore: conf_score(&logits),
        probs: run.probs.rows().map(<[f64]>::to_vec).collect(),
        taylor: logits.rows().map(|r| taylor_normalize(r, taylor_order).map(|v| v.into_vec())).collect::<Result<_, _>>()?,
        softmax: logits.rows().map(|r| softmax(r).map(|v| v.into_vec())).collect::<Result<_, _>>()?,
    })
}

/// Normalization explorer: `Φ`, the chosen branch, the score and the
/// per-row probabilities of both normalizations for pasted logits.
#[wasm_bindgen]
pub fn explain_logits(text: &str, scale: f64, p: f64, eta: f64, taylor_order: u32) -> String {
    respond(explain(text, scale, p, eta, taylor_order))
}

#[derive(Serialize)]
struct Point {
    id: String,
    severity: u32,
    direction: u64,
    accuracy: f64,
    mano: f64,
    confscore: f64,
    nuclear: f64,
}

pub fn benchmark(seed: u64, n_classes: usize, mean_drift: f64, noise_gain: f64) -> mano_core::Result<impl Serialize> {
    let task = TaskSpec { seed, n_classes, ..Default::default() };
    let base = ShiftSpec { mean_drift, noise_gain, ..Default::default() };
    let shifts = severity_grid(4, &[1, 2, 3, 4, 5], &base);
    let estimators = [Estimator::Mano, Estimator::ConfScore, Estimator::Nuclear];
    let run = run_benchmark(&task, &shifts, &estimators, &SoftrunConfig::default(), &TrainConfig::default())?;
    let metrics = benchmark_report(&run.records)?;
    let points: Vec<Point> = run
        .records
        .iter()
        .zip(&run.sets)
        .map(|(r, s)| Point {
            id: r.dataset_id.clone(),
            severity: s.shift.severity,
            direction: s.shift.drift_direction_seed,
            accuracy: r.true_accuracy.unwrap_or(f64::NAN),
            mano: r.scores["mano"],
            confscore: r.scores["confscore"],
            nuclear: r.scores["nuclear"],
        })
        .collect();
    Ok(json!({ "clean_accuracy": run.clean_accuracy, "points": points, "metrics": metrics }))
}

/// Shift benchmark scatter: trains the linear model on the synthetic task
/// and scores 4 directions × 5 severities. COT and ATC are left out to keep
/// the page responsive.
#[wasm_bindgen]
pub fn benchmark_scatter(seed: u32, n_classes: u32, mean_drift: f64, noise_gain: f64) -> String {
    respond(benchmark(seed as u64, n_classes as usize, mean_drift, noise_gain))
}

/// 99% interval of `Φ` for random logits, one entry per class count.
#[wasm_bindgen]
pub fn phi_interval_curve(k_max: u32, n_models: u32, logit_bound: f64, seed: u32) -> String {
    let ks: Vec<usize> = (2..=k_max.max(2) as usize)
        .filter(|k| *k <= 10 || k % 5 == 0 || *k == k_max as usize)
        .collect();
    let cfg = PhiStudyConfig { n_models: n_models as usize, n_samples: 1, logit_bound, seed: seed as u64 };
    respond(phi_confidence_study(&ks, &cfg))
}
