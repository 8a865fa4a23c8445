//! Logit-based competitor estimators.
//!
//! Every score here is computed from the softmax of the logits, so all of
//! them are invariant to adding a constant to a row, except MDE which moves
//! by the mean of the added constants.

use crate::error::{Error, Result};
use crate::numerics::{
    compensated_sum, logsumexp_finite, nuclear_norm, shannon_unchecked, sinkhorn_ot,
    softmax_into, LogitsMatrix, ProbVector, SinkhornConfig,
};

/// Side information from the source domain.
#[derive(Debug, Clone, Default)]
pub struct SourceInfo {
    pub val_logits: Option<LogitsMatrix>,
    pub val_labels: Option<Vec<usize>>,
    pub label_marginal: Option<ProbVector>,
}

impl SourceInfo {
    pub fn validate(&self) -> Result<()> {
        match (&self.val_logits, &self.val_labels) {
            (Some(l), Some(y)) if l.n_rows() != y.len() => Err(Error::invalid(format!(
                "validation logits have {} rows but {} labels",
                l.n_rows(),
                y.len()
            ))),
            (Some(l), Some(y)) => match y.iter().position(|&c| c >= l.n_cols()) {
                Some(i) => Err(Error::invalid(format!(
                    "validation label {} at index {i} outside [0, {})",
                    y[i],
                    l.n_cols()
                ))),
                None => Ok(()),
            },
            (None, Some(_)) => Err(Error::invalid("validation labels without validation logits")),
            _ => Ok(()),
        }
    }
}

fn softmax_rows(logits: &LogitsMatrix) -> Vec<f64> {
    let k = logits.n_cols();
    let mut out = vec![0.0; logits.n_rows() * k];
    for (row, o) in logits.rows().zip(out.chunks_exact_mut(k)) {
        softmax_into(row, o);
    }
    out
}

/// Max-softmax confidence of every row.
pub fn confidences(logits: &LogitsMatrix) -> Vec<f64> {
    let mut buf = vec![0.0; logits.n_cols()];
    logits
        .rows()
        .map(|row| {
            softmax_into(row, &mut buf);
            buf.iter().copied().fold(0.0, f64::max)
        })
        .collect()
}

/// Average max-softmax confidence.
pub fn conf_score(logits: &LogitsMatrix) -> f64 {
    compensated_sum(confidences(logits)) / logits.n_rows() as f64
}

/// Negative mean Shannon entropy (natural log, no `1/K`) of the softmax rows.
pub fn entropy_score(logits: &LogitsMatrix) -> f64 {
    let k = logits.n_cols();
    let probs = softmax_rows(logits);
    -compensated_sum(probs.chunks_exact(k).map(shannon_unchecked)) / logits.n_rows() as f64
}

/// ATC threshold from labeled validation data.
pub fn atc_fit(val: &SourceInfo) -> Result<f64> {
    val.validate()?;
    match (&val.val_logits, &val.val_labels) {
        (Some(logits), Some(labels)) => atc_fit_labeled(logits, labels),
        _ => Err(Error::InsufficientData(
            "ATC needs validation logits and labels".into(),
        )),
    }
}

/// Picks `t` so that the number of validation points with confidence
/// below `t` equals the number of misclassified points. With `m` errors
/// among sorted confidences `c_(0) ≤ … ≤ c_(N-1)`:
/// `m = 0` gives `c_(0)`, `m = N` gives the next float above `c_(N-1)`,
/// otherwise the midpoint of `c_(m-1)` and `c_(m)`.
pub fn atc_fit_labeled(logits: &LogitsMatrix, labels: &[usize]) -> Result<f64> {
    if labels.len() != logits.n_rows() {
        return Err(Error::invalid(format!(
            "ATC: {} labels for {} rows",
            labels.len(),
            logits.n_rows()
        )));
    }
    let errors = logits
        .argmax_rows()
        .iter()
        .zip(labels)
        .filter(|(p, y)| p != y)
        .count();
    let mut conf = confidences(logits);
    conf.sort_by(f64::total_cmp);
    let n = conf.len();
    Ok(match errors {
        0 => conf[0],
        m if m == n => next_up(conf[n - 1]),
        m => 0.5 * (conf[m - 1] + conf[m]),
    })
}

fn next_up(x: f64) -> f64 {
    // Confidences are positive and finite.
    f64::from_bits(x.to_bits() + 1)
}

/// Fraction of rows whose max-softmax confidence is at least `t`.
pub fn atc_score(logits: &LogitsMatrix, threshold: f64) -> Result<f64> {
    if !threshold.is_finite() {
        return Err(Error::invalid(format!("ATC threshold must be finite, got {threshold}")));
    }
    let hits = confidences(logits).iter().filter(|&&c| c >= threshold).count();
    Ok(hits as f64 / logits.n_rows() as f64)
}

/// Nuclear norm of the softmax matrix divided by `√(NK)`.
pub fn nuclear_score(logits: &LogitsMatrix) -> Result<f64> {
    let (n, k) = (logits.n_rows(), logits.n_cols());
    let probs = softmax_rows(logits);
    Ok(nuclear_norm(&probs, n, k)? / ((n * k) as f64).sqrt())
}

/// Mean negative free energy `T · logsumexp(q / T)`.
pub fn mde_score(logits: &LogitsMatrix, temperature: f64) -> Result<f64> {
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::invalid(format!("MDE temperature must be > 0, got {temperature}")));
    }
    let mut buf = vec![0.0; logits.n_cols()];
    let per_row = logits.rows().map(|row| {
        for (b, &q) in buf.iter_mut().zip(row) {
            *b = q / temperature;
        }
        temperature * logsumexp_finite(&buf)
    });
    Ok(compensated_sum(per_row) / logits.n_rows() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CotScore {
    /// Estimated error in `[0, 1]`; lower means higher accuracy.
    pub score: f64,
    /// The source marginal was missing and uniform was used instead.
    pub defaulted_marginal: bool,
    pub converged: bool,
}

/// Entropic OT between the empirical softmax rows and the label marginal
/// placed on the simplex vertices, with total-variation ground cost
/// `½‖s − e_k‖₁ = 1 − s_k`.
pub fn cot_score(logits: &LogitsMatrix, source: &SourceInfo, cfg: &SinkhornConfig) -> Result<CotScore> {
    let k = logits.n_cols();
    let (marginal, defaulted_marginal) = match &source.label_marginal {
        Some(m) if m.len() == k => (m.clone(), false),
        Some(m) => {
            return Err(Error::invalid(format!(
                "COT: label marginal has {} classes, logits have {k}",
                m.len()
            )))
        }
        None => {
            log::warn!("COT: no source label marginal, using uniform");
            (ProbVector::uniform(k), true)
        }
    };
    let cost: Vec<f64> = softmax_rows(logits).iter().map(|s| (1.0 - s).max(0.0)).collect();
    let mu = ProbVector::uniform(logits.n_rows());
    let r = sinkhorn_ot(&cost, &mu, &marginal, cfg)?;
    if !r.converged {
        log::warn!(
            "COT: sinkhorn stopped after {} iterations with marginal error {:e}",
            r.iterations,
            r.marginal_error
        );
    }
    Ok(CotScore { score: r.cost.clamp(0.0, 1.0), defaulted_marginal, converged: r.converged })
}

/// Empirical class frequencies of `labels` over `k` classes.
pub fn label_marginal(labels: &[usize], k: usize) -> Result<ProbVector> {
    if labels.is_empty() {
        return Err(Error::InsufficientData("no labels to estimate a marginal".into()));
    }
    let mut counts = vec![0usize; k];
    for &y in labels {
        if y >= k {
            return Err(Error::invalid(format!("label {y} outside [0, {k})")));
        }
        counts[y] += 1;
    }
    let n = labels.len() as f64;
    Ok(ProbVector::from_vec_unchecked(counts.into_iter().map(|c| c as f64 / n).collect()))
}
