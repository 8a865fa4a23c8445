//! Ground-truth accuracy and the metrics used to judge an estimator:
//! linear fit quality (R²), rank agreement (Spearman ρ) and the
//! fit-then-predict deployment error (MAE).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{Estimator, ScoreSign};
use crate::numerics::{compensated_sum, LogitsMatrix};

/// One dataset's estimator scores and, when labels exist, its accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub dataset_id: String,
    pub scores: BTreeMap<String, f64>,
    pub true_accuracy: Option<f64>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    pub estimator_name: String,
    pub slope: f64,
    pub intercept: f64,
    pub fit_r2: f64,
}

/// Fraction of rows whose argmax (lowest index on ties) equals the label.
pub fn accuracy(logits: &LogitsMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.n_rows() {
        return Err(Error::invalid(format!(
            "{} labels for {} rows",
            labels.len(),
            logits.n_rows()
        )));
    }
    if let Some(i) = labels.iter().position(|&y| y >= logits.n_cols()) {
        return Err(Error::invalid(format!(
            "label {} at index {i} outside [0, {})",
            labels[i],
            logits.n_cols()
        )));
    }
    let hits = logits
        .argmax_rows()
        .into_iter()
        .zip(labels)
        .filter(|(p, y)| p == *y)
        .count();
    Ok(hits as f64 / labels.len() as f64)
}

fn check_pair(x: &[f64], y: &[f64], what: &str) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{what}: length mismatch {} vs {}", x.len(), y.len())));
    }
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!("{what}: need at least 2 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("{what}: non-finite value")));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    compensated_sum(v.iter().copied()) / v.len() as f64
}

struct LineFit {
    slope: f64,
    intercept: f64,
    r2: f64,
}

fn ols(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let (mx, my) = (mean(x), mean(y));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("scores are constant".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 {
        f64::NAN
    } else {
        let ss_res = compensated_sum(x.iter().zip(y).map(|(a, b)| {
            let r = b - (slope * a + intercept);
            r * r
        }));
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(LineFit { slope, intercept, r2 })
}

/// Coefficient of determination of the least-squares line of `y` on `x`,
/// clamped to `[0, 1]`.
pub fn r_squared(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "r_squared")?;
    let fit = ols(x, y)?;
    if fit.r2.is_nan() {
        return Err(Error::DegenerateFit("targets are constant".into()));
    }
    Ok(fit.r2)
}

/// Average ranks (1-based); tied values share the mean of their positions.
pub fn average_ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut ranks = vec![0.0; v.len()];
    let mut start = 0;
    while start < idx.len() {
        let mut end = start + 1;
        while end < idx.len() && v[idx[end]] == v[idx[start]] {
            end += 1;
        }
        let r = (start + end + 1) as f64 / 2.0;
        for &i in &idx[start..end] {
            ranks[i] = r;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let (mx, my) = (mean(x), mean(y));
    let sxx = compensated_sum(x.iter().map(|a| (a - mx) * (a - mx)));
    let syy = compensated_sum(y.iter().map(|b| (b - my) * (b - my)));
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateFit("zero rank variance".into()));
    }
    let sxy = compensated_sum(x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)));
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's ρ: Pearson correlation of average ranks.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y, "spearman_rho")?;
    pearson(&average_ranks(x), &average_ranks(y))
}

pub fn mae(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() {
        return Err(Error::invalid(format!(
            "mae: length mismatch {} vs {}",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(Error::InsufficientData("mae of empty vectors".into()));
    }
    Ok(compensated_sum(predicted.iter().zip(actual).map(|(p, a)| (p - a).abs())) / predicted.len() as f64)
}

fn labeled_pairs<'a, I>(records: I, estimator: &str) -> Result<(Vec<f64>, Vec<f64>)>
where
    I: IntoIterator<Item = &'a EvalRecord>,
{
    let mut x = Vec::new();
    let mut y = Vec::new();
    for r in records {
        if let Some(acc) = r.true_accuracy {
            let s = r.scores.get(estimator).ok_or_else(|| {
                Error::invalid(format!("record '{}' has no '{estimator}' score", r.dataset_id))
            })?;
            x.push(*s);
            y.push(acc);
        }
    }
    Ok((x, y))
}

/// Least-squares `accuracy ≈ slope · score + intercept` over the labeled records.
pub fn fit_regression(records: &[EvalRecord], estimator: &str) -> Result<RegressionModel> {
    let (x, y) = labeled_pairs(records, estimator)?;
    if x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "regression needs at least 2 labeled records, got {}",
            x.len()
        )));
    }
    check_pair(&x, &y, "fit_regression")?;
    let fit = ols(&x, &y)?;
    Ok(RegressionModel {
        estimator_name: estimator.to_string(),
        slope: fit.slope,
        intercept: fit.intercept,
        // A perfectly flat target is fit exactly by the line.
        fit_r2: if fit.r2.is_nan() { 1.0 } else { fit.r2 },
    })
}

pub fn predict_accuracy(model: &RegressionModel, score: f64) -> f64 {
    (model.slope * score + model.intercept).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorMetrics {
    pub r2: Option<f64>,
    pub rho: Option<f64>,
    pub abs_rho: Option<f64>,
    pub mae_cv: Option<f64>,
    /// Declared direction of the score's relation to accuracy.
    pub sign: Option<ScoreSign>,
}

pub const MAX_FOLDS: usize = 10;

/// Per-estimator R², signed and absolute ρ, and the cross-validated MAE of
/// the fit-then-predict protocol. Records are sorted by id and record `i`
/// goes to fold `i mod min(10, n)`; each fold is predicted from a line fit
/// on the others and `mae_cv` is the mean of the per-fold MAEs. Metrics
/// that are undefined on the data (constant scores) are `None`.
pub fn benchmark_report(records: &[EvalRecord]) -> Result<BTreeMap<String, EstimatorMetrics>> {
    let mut labeled: Vec<&EvalRecord> = records.iter().filter(|r| r.true_accuracy.is_some()).collect();
    if labeled.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need ≥ 3 labeled datasets, got {}",
            labeled.len()
        )));
    }
    labeled.sort_by(|a, b| a.dataset_id.cmp(&b.dataset_id));

    let names: Vec<&String> = labeled[0]
        .scores
        .keys()
        .filter(|k| labeled.iter().all(|r| r.scores.contains_key(*k)))
        .collect();

    let mut out = BTreeMap::new();
    for name in names {
        let (x, y) = labeled_pairs(labeled.iter().copied(), name)?;
        let r2 = r_squared(&x, &y).ok();
        let rho = spearman_rho(&x, &y).ok();
        out.insert(
            name.clone(),
            EstimatorMetrics {
                r2,
                rho,
                abs_rho: rho.map(f64::abs),
                mae_cv: cross_validated_mae(&x, &y),
                sign: name.parse::<Estimator>().ok().map(|e| e.sign()),
            },
        );
    }
    Ok(out)
}

fn cross_validated_mae(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len();
    let folds = n.min(MAX_FOLDS);
    let mut fold_mae = Vec::with_capacity(folds);
    for f in 0..folds {
        let (mut tx, mut ty, mut hx, mut hy) = (vec![], vec![], vec![], vec![]);
        for i in 0..n {
            if i % folds == f {
                hx.push(x[i]);
                hy.push(y[i]);
            } else {
                tx.push(x[i]);
                ty.push(y[i]);
            }
        }
        let fit = ols(&tx, &ty).ok()?;
        let model = RegressionModel {
            estimator_name: String::new(),
            slope: fit.slope,
            intercept: fit.intercept,
            fit_r2: 0.0,
        };
        let pred: Vec<f64> = hx.iter().map(|&s| predict_accuracy(&model, s)).collect();
        fold_mae.push(mae(&pred, &hy).ok()?);
    }
    Some(mean(&fold_mae))
}
